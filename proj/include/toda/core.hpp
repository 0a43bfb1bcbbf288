#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "toda/errors.hpp"

namespace toda {

using cplx = std::complex<double>;
using cxld = std::complex<long double>;

using VectorXcld = Eigen::Matrix<cxld, Eigen::Dynamic, 1>;
using MatrixXcld = Eigen::Matrix<cxld, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kPi = 3.14159265358979323846;

enum class Location { RealLine, UnitCircle };

struct SpectralPoint {
    cplx value;
    Location location = Location::RealLine;

    static SpectralPoint on_line(double x);
    static SpectralPoint on_circle(double theta);
};

enum class Branch { InsideDisk, OutsideDisk };

// z + 1/z
cplx joukowski(cplx z);

// Root of z + 1/z = lambda on the requested side of the unit circle. On the
// cut (-2, 2) both roots are unimodular; InsideDisk picks Im z > 0.
cplx inverse_joukowski(cplx lambda, Branch branch);

// Symmetric: theta_j = -pi + (j + 1/2) h, closed under conjugation.
// Staggered: theta_j = -pi + (j + 1/4) h; conjugates fall on midpoints, so no
// circle node has an inverse node.
enum class CircleLayout { Symmetric, Staggered };

inline constexpr int kNoInverse = -1;

// Node indices: circle nodes first, then line nodes in supplied order.
struct Grid {
    std::vector<double> circle_nodes;
    double circle_weight = 0.0;
    std::vector<SpectralPoint> line_nodes;
    std::vector<int> inversion_map;
    CircleLayout layout = CircleLayout::Symmetric;

    int circle_count() const { return static_cast<int>(circle_nodes.size()); }
    int line_count() const { return static_cast<int>(line_nodes.size()); }
    int size() const { return circle_count() + line_count(); }
    SpectralPoint node(int index) const;
};

std::vector<double> circle_angles(int circle_count, CircleLayout layout);

Grid build_grid(int circle_count, const std::vector<double>& line_points,
                CircleLayout layout = CircleLayout::Symmetric);

// Weights w_j with sum_j w_j f(e^{i theta_j}) ~ v.p. int f / (1 - beta^{-1} e^{-i theta}) dtheta.
// Circle beta: split the kernel into 1/2 (trapezoid) and -(i/2) cot((theta + arg beta)/2)
// (alternating-point rule, exact closed form for arbitrary arg beta). Line beta: trapezoid.
Eigen::VectorXcd pv_cauchy_weights(const Grid& grid, const SpectralPoint& beta);

template <class Real>
Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1> cauchy_weights(
    const std::vector<double>& angles, std::complex<Real> beta, Location location);

template <class Scalar>
struct BasicDenseSystem {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> matrix;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rhs;
    double condition_estimate = 0.0;
};

using DenseSystem = BasicDenseSystem<cplx>;
using DenseSystemLd = BasicDenseSystem<cxld>;

// LU with partial pivoting. Fills condition_estimate (1-norm, LAPACK-style
// estimator). Throws SingularMatrixError when pivot u_ii drops below 1e-14 times the 1-norm of column i.
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> solve_dense(BasicDenseSystem<Scalar>& system);

// The factorization behind solve_dense, reusable for several right-hand sides.
template <class Scalar>
Eigen::PartialPivLU<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> factorize_dense(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& matrix, double* condition_estimate = nullptr);

}  // namespace toda

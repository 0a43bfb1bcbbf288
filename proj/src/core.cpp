#include "toda/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace toda {

SpectralPoint SpectralPoint::on_line(double x) {
    if (x == 0.0 || std::abs(std::abs(x) - 1.0) <= 1e-14)
        throw DomainError("real spectral point must satisfy |beta| not in {0, 1}");
    return {cplx(x, 0.0), Location::RealLine};
}

SpectralPoint SpectralPoint::on_circle(double theta) {
    return {std::polar(1.0, theta), Location::UnitCircle};
}

cplx joukowski(cplx z) {
    if (z == cplx(0.0, 0.0)) throw DomainError("joukowski: z = 0");
    return z + 1.0 / z;
}

cplx inverse_joukowski(cplx lambda, Branch branch) {
    const cplx r = std::sqrt(lambda * lambda - 4.0);
    const cplx z1 = 0.5 * (lambda + r);
    const cplx z2 = 0.5 * (lambda - r);
    const double m1 = std::abs(z1), m2 = std::abs(z2);
    const bool inside = branch == Branch::InsideDisk;
    if (std::abs(m1 - m2) <= 1e-12 * std::max(1.0, m1)) {
        const bool first = inside ? z1.imag() >= z2.imag() : z1.imag() < z2.imag();
        return first ? z1 : z2;
    }
    return (m1 < m2) == inside ? z1 : z2;
}

SpectralPoint Grid::node(int index) const {
    if (index < circle_count()) return SpectralPoint::on_circle(circle_nodes[index]);
    return line_nodes[index - circle_count()];
}

std::vector<double> circle_angles(int circle_count, CircleLayout layout) {
    const double h = 2.0 * kPi / circle_count;
    const double offset = layout == CircleLayout::Symmetric ? 0.5 : 0.25;
    std::vector<double> angles(circle_count);
    for (int j = 0; j < circle_count; ++j) angles[j] = -kPi + (j + offset) * h;
    return angles;
}

Grid build_grid(int circle_count, const std::vector<double>& line_points, CircleLayout layout) {
    if (circle_count < 4 || circle_count % 2 != 0)
        throw ValidationError("build_grid: circle_count must be even and >= 4, got " +
                              std::to_string(circle_count));
    Grid grid;
    grid.layout = layout;
    grid.circle_nodes = circle_angles(circle_count, layout);
    grid.circle_weight = 2.0 * kPi / circle_count;
    for (double x : line_points) {
        for (const auto& p : grid.line_nodes)
            if (p.value.real() == x) throw ValidationError("build_grid: duplicate line node");
        grid.line_nodes.push_back(SpectralPoint::on_line(x));
    }

    const int m = circle_count;
    grid.inversion_map.assign(grid.size(), kNoInverse);
    if (layout == CircleLayout::Symmetric)
        for (int j = 0; j < m; ++j) grid.inversion_map[j] = m - 1 - j;
    for (int i = 0; i < grid.line_count(); ++i) {
        const double inv = 1.0 / grid.line_nodes[i].value.real();
        for (int j = 0; j < grid.line_count(); ++j) {
            const double x = grid.line_nodes[j].value.real();
            if (std::abs(x - inv) <= 1e-14 * std::abs(inv)) grid.inversion_map[m + i] = m + j;
        }
    }
    return grid;
}

template <class Real>
Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1> cauchy_weights(
    const std::vector<double>& angles, std::complex<Real> beta, Location location) {
    using C = std::complex<Real>;
    const int m = static_cast<int>(angles.size());
    const Real pi = static_cast<Real>(3.141592653589793238462643383279502884L);
    const Real h = 2 * pi / m;
    Eigen::Matrix<C, Eigen::Dynamic, 1> w(m);
    if (location == Location::RealLine) {
        const C inv = Real(1) / beta;
        for (int j = 0; j < m; ++j)
            w[j] = h / (Real(1) - inv * std::polar(Real(1), -static_cast<Real>(angles[j])));
        return w;
    }
    const Real arg = std::arg(beta);
    for (int j = 0; j < m; ++j) {
        Real psi = std::remainder(static_cast<Real>(angles[j]) + arg, 2 * pi);
        const Real half = std::sin(psi / 2);
        if (std::abs(half) < Real(1e-15)) {
            w[j] = C(pi / m, 0);
            continue;
        }
        const Real s = std::sin(m * psi / 4);
        const Real cot = std::cos(psi / 2) / half;
        w[j] = C(pi / m, -(pi / m) * cot * 2 * s * s);
    }
    return w;
}

template Eigen::Matrix<std::complex<double>, Eigen::Dynamic, 1> cauchy_weights<double>(
    const std::vector<double>&, std::complex<double>, Location);
template Eigen::Matrix<std::complex<long double>, Eigen::Dynamic, 1> cauchy_weights<long double>(
    const std::vector<double>&, std::complex<long double>, Location);

Eigen::VectorXcd pv_cauchy_weights(const Grid& grid, const SpectralPoint& beta) {
    return cauchy_weights<double>(grid.circle_nodes, beta.value, beta.location);
}

template <class Scalar>
Eigen::PartialPivLU<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> factorize_dense(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a, double* condition_estimate) {
    if (a.rows() != a.cols()) throw ValidationError("solve_dense: matrix not square");
    if (!a.allFinite()) throw NumericalError("solve_dense: non-finite entries");
    const auto n = a.rows();
    Eigen::PartialPivLU<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> lu(a);
    // Row pivoting is invariant under column scaling, so each pivot is judged
    // against the 1-norm of its own column.
    const auto& u = lu.matrixLU();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double pivot = static_cast<double>(std::abs(u(i, i)));
        const double col = static_cast<double>(a.col(i).cwiseAbs().sum());
        if (!(pivot >= 1e-14 * col) || pivot == 0.0)
            throw SingularMatrixError("solve_dense: pivot " + std::to_string(i) + " below 1e-14 * ||A e_" +
                                      std::to_string(i) + "||_1");
    }
    if (condition_estimate) {
        const double rc = n == 0 ? 1.0 : static_cast<double>(lu.rcond());
        *condition_estimate = rc > 0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    }
    return lu;
}

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> solve_dense(BasicDenseSystem<Scalar>& system) {
    if (system.matrix.rows() != system.rhs.size()) throw ValidationError("solve_dense: dimension mismatch");
    if (!system.rhs.allFinite()) throw NumericalError("solve_dense: non-finite right-hand side");
    if (system.rhs.size() == 0) {
        system.condition_estimate = 1.0;
        return {};
    }
    const auto lu = factorize_dense<Scalar>(system.matrix, &system.condition_estimate);
    return lu.solve(system.rhs);
}

template Eigen::PartialPivLU<Eigen::MatrixXcd> factorize_dense<cplx>(const Eigen::MatrixXcd&, double*);
template Eigen::PartialPivLU<MatrixXcld> factorize_dense<cxld>(const MatrixXcld&, double*);
template Eigen::VectorXcd solve_dense<cplx>(DenseSystem&);
template VectorXcld solve_dense<cxld>(DenseSystemLd&);

}  // namespace toda

#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "toda/core.hpp"
#include "toda/spectral_direct.hpp"

namespace toda {

// Collocation nodes of the discrete system: active circle nodes (only when
// r^ != 0), then real nodes (grid line nodes, coupling nodes, masses; merged).
struct NodeSet {
    std::vector<cxld> beta;
    std::vector<Location> location;
    std::vector<int> inverse;      // index of 1/beta or kNoInverse
    int circle_size = 0;           // nodes [0, circle_size) are on the circle
    std::vector<int> mass_node;    // node index of each sigma mass
    int size() const { return static_cast<int>(beta.size()); }
};

struct C2Operator {
    NodeSet nodes;
    MatrixXcld matrix;
    VectorXcld p_hat;     // P^ w = sum_j p_hat_j w_j (alpha s w; (h/pi) e^{i theta} r^)
    VectorXcld q_hat;     // P^ N^{-1} w = sum_j q_hat_j w_j
    cxld khat{1.0L, 0.0L};
    // Entries (row, col) left out because 1 - beta^{-1} alpha^{-1} = 0
    // (a sigma mass whose inverse is a coupled node).
    std::vector<std::pair<int, int>> excluded;

    int size() const { return nodes.size(); }
    // k^ P as a matrix: rows all equal to k^ p_hat^T. Degenerate data (no
    // projector support) use the uniform average.
    MatrixXcld projector_matrix() const;
    VectorXcld projector_row() const;
};

C2Operator assemble_c2(const ReducedSpectralData& data, const Grid& grid);

// beta^{-1} C2 - C2 N + (1/k^) P, the discrete projection identity defect.
MatrixXcld projection_identity_defect(const C2Operator& c2);

// matrix = diag(beta^{2(k+1)} e^{beta t}) + diag(e^{beta^{-1} t}) C2, rhs = -1.
// Row i is divided by e^{log_row_scale_i}, the larger of its diagonal and
// off-diagonal exponentials; the solution is unchanged.
struct GammaSystem {
    int k = 0;
    double t = 0.0;
    MatrixXcld matrix;
    VectorXcld rhs;
    Eigen::Matrix<long double, Eigen::Dynamic, 1> log_row_scale;
    std::shared_ptr<const C2Operator> c2;
    double condition_estimate = 0.0;
};

GammaSystem assemble_gamma(std::shared_ptr<const C2Operator> c2, int k, double t);

// Gamma(k, t) applied to the constant function 1, unscaled.
VectorXcld gamma_times_one(const C2Operator& c2, int k, double t);

struct USolution {
    int k = 0;
    double t = 0.0;
    VectorXcld u;
    cxld moment;        // P^ u
    cxld moment_inv;    // P^ N^{-1} u
    double condition_estimate = 0.0;
    double residual = 0.0;  // ||Gamma u + 1||_inf relative to the row scale
};

USolution solve_u(GammaSystem& system);
USolution solve_u(std::shared_ptr<const C2Operator> c2, int k, double t);

cxld projector_apply(const C2Operator& c2, const VectorXcld& w);

struct GValue {
    cxld value;
    bool pole_warning = false;
};

// 1 + sum u s w / (1 - z/alpha) + (h/pi) sum r^ u / (1 - z e^{-i theta}).
GValue g_function(const USolution& u, const C2Operator& c2, cplx z);

// g(k, 0) / g(k - 1, 0) with g(k, 0) = 1 + P^ N^{-1} u_k.
double reconstruct_b2(const USolution& u_k, const USolution& u_km1);

// a_k = P^ u_{k+1} - P^ u_k. This sign reproduces xdot_k(0) of the lattice; the
// opposite sign (and the -1/k^ scaled variant) fails that check.
double reconstruct_a(const USolution& u_k, const USolution& u_kp1);

}  // namespace toda

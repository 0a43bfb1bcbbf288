#pragma once

#include <memory>
#include <vector>

#include "toda/direct_ode.hpp"
#include "toda/inverse_core.hpp"

namespace toda {

// ln P N^{-1} Gamma^{-1}(k,t) N^{-1} Gamma(k+1,t) (1), without calibration.
double x_solution(const C2Operator& c2, int k, double t);
double x_solution(const ReducedSpectralData& data, const Grid& grid, int k, double t);

// d/dt of x_solution, in closed form from Gamma_t(k) = N^{-1} Gamma(k+1).
double x_velocity(const C2Operator& c2, int k, double t);

// Offset c1 = x(0, 0) - v0, so that x(k, t) - c1 has x_0(0) = v0.
double calibrate_c1(const C2Operator& c2, double v0);

// Data along the flow. Every column channel picks up e^{-(nu - 1/nu) t} with nu
// the column node: weights w(alpha) e^{-(alpha - 1/alpha) t}, r^ e^{-2 i t sin theta},
// rho(beta) e^{(beta - 1/beta) t} (its column sits at 1/beta). k^ is kept from t = 0.
// With this sign the t = 0 machinery applied to evolved data reproduces the
// Gamma(k, t) path; the opposite sign runs the flow backwards.
struct EvolvedData {
    ReducedSpectralData base;
    double t = 0.0;
    ReducedSpectralData data;
};

EvolvedData evolve_data(const ReducedSpectralData& data, double t);

// Observables on sites [k_min, k_max] at one time. b2[i] is b_k^2 for the bond
// (k, k+1), k = k_min + i, so b2 has one more entry than x (bond k_max included).
struct Slice {
    int k_min = 0;
    int k_max = 0;
    double t = 0.0;
    std::vector<double> x;
    std::vector<double> a;
    std::vector<double> b2;
};

// x from the four-step formula, a from its closed-form time derivative,
// b_k^2 = exp(x_{k+1} - x_k).
Slice gamma_path_slice(const C2Operator& c2, int k_min, int k_max, double t);

// Standard t = 0 reconstruction (solve_u, reconstruct_a, reconstruct_b2) on
// evolved data; x_k = ln g(k, 0).
Slice evolved_path_slice(const ReducedSpectralData& data, const Grid& grid, int k_min, int k_max, double t);

struct PathDiscrepancy {
    double a = 0.0;
    double b2 = 0.0;
    double x = 0.0;
};
PathDiscrepancy compare_paths(const Slice& gamma, const Slice& evolved);

struct CauchyProblem {
    ReducedSpectralData data;
    Grid grid;
    double v0 = 0.0;          // calibrated x_0(0)
    bool calibrate = true;
    std::vector<double> times;
    int k_min = -20;
    int k_max = 20;
    double path_tolerance = 1e-8;
    unsigned threads = 1;
};

// Positions x_0(t) from the Gamma path and the telescoping sum of ln b^2 from the
// evolved path; velocities a_k(t). Throws ToleranceError when the two paths differ
// by more than path_tolerance on a or b^2.
Trajectory solve_cauchy(const CauchyProblem& problem);

}  // namespace toda

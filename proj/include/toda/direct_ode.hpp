#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "toda/errors.hpp"

namespace toda {

struct Boundary {
    enum class Kind { FreeEnds, FrozenBackground };
    Kind kind = Kind::FreeEnds;
    double left_slope = 0.0;   // x_{kmin} - x_{kmin-1} held fixed
    double right_slope = 0.0;  // x_{kmax+1} - x_{kmax} held fixed

    static Boundary free_ends() { return {}; }
    static Boundary frozen(double left, double right) { return {Kind::FrozenBackground, left, right}; }
};

struct LatticeState {
    int k_min = 0;
    int k_max = 0;
    Eigen::VectorXd x;
    Eigen::VectorXd xdot;
    Boundary boundary;

    int size() const { return k_max - k_min + 1; }
    void validate() const;
};

// a_k on sites, b_k on bonds (k, k+1) for k in [k_min, k_max - 1].
struct JacobiWindow {
    int k_min = 0;
    int k_max = 0;
    Eigen::VectorXd a;
    Eigen::VectorXd b;
    double a_inf = 0.0;
    double b_inf = 1.0;

    double a_at(int k) const;
    double b_at(int k) const;
    bool free_background() const { return a_inf == 0.0 && b_inf == 1.0; }
    void validate() const;
};

JacobiWindow free_window(int k_min, int k_max);

enum class Provenance { DirectODE, InverseSpectral };
const char* provenance_name(Provenance p);

// Rows are time samples, columns are sites k_min..k_max.
struct Trajectory {
    int k_min = 0;
    int k_max = 0;
    std::vector<double> t;
    Eigen::MatrixXd x;
    Eigen::MatrixXd xdot;
    Provenance provenance = Provenance::DirectODE;

    int sites() const { return k_max - k_min + 1; }
    bool has_velocity() const { return xdot.size() > 0; }
    LatticeState state_at(int sample, Boundary boundary = {}) const;
};

Eigen::VectorXd toda_rhs(const LatticeState& state);

// Velocity-Verlet with n = ceil(t_end / dt) equal steps; every `stride` steps
// (and at t_end) a sample is recorded. Negative t_end integrates backwards.
Trajectory integrate(const LatticeState& state, double t_end, double dt, int stride = 1);

// Sum xdot^2/2 + sum (e^r - 1 - r) over bonds, plus the work of the constant
// boundary forces when the background slopes are nonzero.
double energy(const LatticeState& state);

JacobiWindow flaschka(const LatticeState& state);

struct TraceInvariants {
    double momentum;  // sum a_k
    double quadratic;  // sum a_k^2 + 2 sum (b_k^2 - 1)
};
TraceInvariants trace_invariants(const JacobiWindow& j);

JacobiWindow rescale_to_standard(const JacobiWindow& j, double a, double b);

// Initial state of the rescaled problem for original data (v, w).
LatticeState rescale_state(const LatticeState& state, double a, double b);

// x_n(t) = x~_n(s t) + 2 n ln s + c t with s = (b - a)/4, c = (a + b)/2, sampled at
// `times`. Off-grid rescaled times use cubic Hermite interpolation when velocities
// are present, linear otherwise.
Trajectory unrescale_solution(const Trajectory& xt, double a, double b, const std::vector<double>& times);

void write_trajectory_csv(std::ostream& out, const Trajectory& tr, bool with_provenance = false);
void write_trajectory_csv(const std::string& path, const Trajectory& tr, bool with_provenance = false);
Trajectory read_trajectory_csv(const std::string& path);

}  // namespace toda

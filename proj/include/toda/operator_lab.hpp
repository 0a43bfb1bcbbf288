#pragma once

#include <cstdint>
#include <functional>
#include <random>

#include <Eigen/Dense>

namespace toda {

// A (k, t)-dependent matrix.
using MatrixFamily = std::function<Eigen::MatrixXcd(int, double)>;

// alpha(x)(k, t) = x(k + 1, t).
MatrixFamily shift_alpha(MatrixFamily x);
// d_alpha = alpha - I.
MatrixFamily partial_alpha(MatrixFamily x);

// Gamma(k, t) = N^{k+2} e^{N t} + N^{-k} e^{N^{-1} t} C, so d^n/dt^n Gamma(k) = Gamma(k + n).
struct FiniteGammaFamily {
    Eigen::VectorXcd beta;
    Eigen::MatrixXcd C;

    int size() const { return static_cast<int>(beta.size()); }
    Eigen::MatrixXcd gamma(int k, double t) const;
    MatrixFamily as_family() const;
};

// Projector weights for the discrete point-mass construction: P = 1 p^T, p = k^ alpha s w.
struct CauchyInstance {
    FiniteGammaFamily family;
    Eigen::VectorXcd p;
    double khat = 1.0;
};

// ||lhs - rhs|| / max(||lhs||, ||rhs||), or relative to an explicit scale (the
// largest term of an identity whose two sides may both vanish).
double relative_residual(const Eigen::MatrixXcd& lhs, const Eigen::MatrixXcd& rhs);
double relative_residual(const Eigen::MatrixXcd& lhs, const Eigen::MatrixXcd& rhs, double scale);

struct OdeResiduals {
    double first = 0.0;   // ||d Gamma - alpha(Gamma)||, relative
    double second = 0.0;  // ||d^2 Gamma + Gamma - A alpha(Gamma)||, A = N + N^{-1}, relative
};
OdeResiduals check_gamma_odes(const FiniteGammaFamily& fam, int k, double t);

// gamma = Gamma^{-1} d Gamma; relative defect of d(gamma^{-1} d gamma) = gamma^{-1} alpha(gamma)
// - alpha^{-1}(gamma^{-1}) gamma with analytic t-derivatives, relative to the
// largest of the four terms. `left` multiplies gamma
// from the left by a constant matrix (identity, or N^{-1} for the group property).
double check_lemma1(const FiniteGammaFamily& fam, int k, double t);
double check_lemma1_left(const FiniteGammaFamily& fam, const Eigen::MatrixXcd& left, int k, double t);
// d gamma - gamma d_alpha(gamma) = 0.
double check_lemma1_first(const FiniteGammaFamily& fam, int k, double t);

struct ProjectionResiduals {
    double identity = 0.0;     // ||N^{-1} C - C N + (1/k^) P||, relative
    double projection = 0.0;   // ||P N^{-1} gamma - P N^{-1} gamma P||, relative
    double scalar_toda = 0.0;  // (ln z)_tt vs z(k+1)/z(k) - z(k)/z(k-1), relative
};
ProjectionResiduals check_lemma2_projection(const FiniteGammaFamily& fam, const Eigen::VectorXcd& p,
                                            double khat, int k, double t);

// |beta| in [0.3, 0.9] U [1.1, 3], random sign; C with spectral norm <= 1.
FiniteGammaFamily random_family(std::mt19937_64& rng, int n);
// C_ij = s_j w_j / (1 - beta_i^{-1} beta_j^{-1}), scaled so that ||C|| <= 1.
CauchyInstance cauchy_family(std::mt19937_64& rng, int n);

struct LabReport {
    int instances = 0;
    double max_ode = 0.0;
    double max_lemma1_first = 0.0;
    double max_lemma1 = 0.0;
    double max_identity = 0.0;
    double max_projection = 0.0;
    double max_scalar_toda = 0.0;
    double max_group = 0.0;
    double min_negative_control = 0.0;
};

// Seeded sweep: for each seed a random family and a Cauchy family of size
// 2..8, checked at (k, t) in {-1, 0, 1} x {-0.4, 0.3}.
LabReport run_operator_suite(std::uint64_t seed, int instances);

}  // namespace toda

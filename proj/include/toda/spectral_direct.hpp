#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "toda/core.hpp"
#include "toda/direct_ode.hpp"

namespace toda {

struct WeylPair {
    cplx mR;
    cplx mL;
    double b_minus1 = 1.0;
};

// Solutions of b_{k-1} w_{k-1} + (a_k - lambda) w_k + b_k w_{k+1} = 0 with
// P_0 = 1, P_{-1} = 0, Q_0 = 0, Q_{-1} = 1.
std::pair<cplx, cplx> orthopoly(const JacobiWindow& j, cplx lambda, int k);

// m^R = <d_0, (J_{[0,inf)} - lambda)^{-1} d_0> via the continued fraction
// m_k = 1/(a_k - lambda - b_k^2 m_{k+1}) started from the closed-form background tail.
cplx weyl_m_right(const JacobiWindow& j, cplx lambda, int depth = 1);
// m^L = <d_{-1}, (J_{(-inf,-1]} - lambda)^{-1} d_{-1}>.
cplx weyl_m_left(const JacobiWindow& j, cplx lambda, int depth = 1);
WeylPair weyl_pair(const JacobiWindow& j, cplx lambda);

cplx n_function(const JacobiWindow& j, cplx z);

struct SigmaMass {
    double alpha = 0.0;
    double weight = 0.0;
    int sign = 1;  // +1 for |alpha| > 1, -1 for |alpha| < 1
};

int sigma_sign(double alpha);

struct LineCoupling {
    double beta = 0.0;
    cplx rho;  // m(beta) / (2 q(beta^{-1}))
};

// The triple {r^ on the circle, rho on the line, sigma masses}. Circle samples
// live on `circle_angles` (empty when r^ == 0).
struct ReducedSpectralData {
    std::vector<double> circle_angles;
    CircleLayout layout = CircleLayout::Symmetric;
    Eigen::VectorXcd rhat;
    std::vector<LineCoupling> coupling;
    std::vector<SigmaMass> masses;
    cplx khat{1.0, 0.0};

    bool has_circle() const { return rhat.size() > 0 && rhat.cwiseAbs().maxCoeff() > 0.0; }
    bool is_free() const;
    // sum alpha s w + (1/pi) h sum e^{i theta} r^
    cplx projector_moment() const;
    void normalize();
    void validate() const;
};

ReducedSpectralData free_data();

ReducedSpectralData reflectionless_data(const std::vector<std::pair<double, double>>& masses);

// Seeded reflectionless family: n = trial % 4 + 1 masses, |alpha| in [1.25, 3]
// with random sign, pairwise gaps >= 0.3, weights in [0.5, 2].
std::vector<std::pair<double, double>> random_reflectionless_masses(std::uint64_t seed, int trial);

struct SpectralDataFile {
    struct CircleSample {
        double angle, re, im;
        bool operator==(const CircleSample&) const = default;
    };
    struct LineSample {
        double node, weight, rho_re, rho_im;
        bool operator==(const LineSample&) const = default;
    };
    struct MassSample {
        double alpha, weight;
        bool operator==(const MassSample&) const = default;
    };

    std::optional<double> a, b;
    std::string comment;
    std::vector<CircleSample> circle;
    std::vector<LineSample> line;
    std::vector<MassSample> masses;

    bool operator==(const SpectralDataFile&) const = default;
};

SpectralDataFile parse_spectral_file(const std::string& text);
std::string serialize_spectral_file(const SpectralDataFile& file);
SpectralDataFile read_spectral_file(const std::string& path);
SpectralDataFile to_spectral_file(const ReducedSpectralData& data);

// Validated data on the grid's circle angles. Circle samples that are not on
// the grid are resampled by trigonometric interpolation (samples must be equispaced).
ReducedSpectralData load_spectral_data(const SpectralDataFile& file, const Grid& grid);

}  // namespace toda

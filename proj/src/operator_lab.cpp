#include "toda/operator_lab.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "toda/errors.hpp"

namespace toda {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using cd = std::complex<double>;

namespace {

MatrixXcd solve(const MatrixXcd& a, const MatrixXcd& b) { return a.partialPivLu().solve(b); }

double cond1(const MatrixXcd& a) {
    const double rc = a.partialPivLu().rcond();
    return rc > 0 ? 1.0 / rc : INFINITY;
}

struct GammaDerivs {
    MatrixXcd g, dg, ddg;
};

// gamma(k) = Gamma(k)^{-1} Gamma(k+1) and its first two t-derivatives.
GammaDerivs gamma_derivs(const FiniteGammaFamily& fam, int k, double t) {
    const auto lu = fam.gamma(k, t).partialPivLu();
    const MatrixXcd g = lu.solve(fam.gamma(k + 1, t));
    const MatrixXcd x2 = lu.solve(fam.gamma(k + 2, t));
    const MatrixXcd x3 = lu.solve(fam.gamma(k + 3, t));
    const MatrixXcd dg = -g * g + x2;
    const MatrixXcd ddg = -dg * g - g * dg - g * x2 + x3;
    return {g, dg, ddg};
}

double draw_beta(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double lo_len = 0.6, hi_len = 1.9;
    const double r = u(rng) * (lo_len + hi_len);
    const double mag = r < lo_len ? 0.3 + r : 1.1 + (r - lo_len);
    return u(rng) < 0.5 ? -mag : mag;
}

}  // namespace

MatrixFamily shift_alpha(MatrixFamily x) {
    return [x = std::move(x)](int k, double t) { return x(k + 1, t); };
}

MatrixFamily partial_alpha(MatrixFamily x) {
    return [x = std::move(x)](int k, double t) { return MatrixXcd(x(k + 1, t) - x(k, t)); };
}

MatrixXcd FiniteGammaFamily::gamma(int k, double t) const {
    const int n = size();
    MatrixXcd g(n, n);
    for (int i = 0; i < n; ++i) {
        const cd b = beta[i];
        const cd left = std::pow(b, -k) * std::exp(t / b);
        g.row(i) = left * C.row(i);
        g(i, i) += std::pow(b, k + 2) * std::exp(b * t);
    }
    return g;
}

MatrixFamily FiniteGammaFamily::as_family() const {
    return [self = *this](int k, double t) { return self.gamma(k, t); };
}

double relative_residual(const MatrixXcd& lhs, const MatrixXcd& rhs) {
    return relative_residual(lhs, rhs, std::max(lhs.norm(), rhs.norm()));
}

double relative_residual(const MatrixXcd& lhs, const MatrixXcd& rhs, double scale) {
    return (lhs - rhs).norm() / std::max(scale, 1e-300);
}

OdeResiduals check_gamma_odes(const FiniteGammaFamily& fam, int k, double t) {
    const int n = fam.size();
    const MatrixXcd a = MatrixXcd(fam.beta.asDiagonal()) + MatrixXcd(fam.beta.cwiseInverse().asDiagonal());
    const MatrixXcd g0 = fam.gamma(k, t);

    // Closed-form t-derivatives of each term of Gamma(k, t).
    MatrixXcd dg(n, n), ddg(n, n);
    for (int i = 0; i < n; ++i) {
        const cd b = fam.beta[i];
        const cd e1 = std::pow(b, k + 2) * std::exp(b * t);
        const cd e2 = std::pow(b, -k) * std::exp(t / b);
        dg.row(i) = (e2 / b) * fam.C.row(i);
        dg(i, i) += b * e1;
        ddg.row(i) = (e2 / (b * b)) * fam.C.row(i);
        ddg(i, i) += b * b * e1;
    }
    const MatrixXcd alpha_g = shift_alpha(fam.as_family())(k, t);
    OdeResiduals r;
    r.first = relative_residual(dg, alpha_g);
    r.second = relative_residual(ddg + g0, a * alpha_g);
    return r;
}

double check_lemma1_left(const FiniteGammaFamily& fam, const MatrixXcd& left, int k, double t) {
    const GammaDerivs d = gamma_derivs(fam, k, t);
    const MatrixXcd g = left * d.g, dg = left * d.dg, ddg = left * d.ddg;
    const MatrixXcd next = left * solve(fam.gamma(k + 1, t), fam.gamma(k + 2, t));
    // alpha^{-1}(gamma^{-1}) = gamma(k-1)^{-1} left^{-1} = Gamma(k)^{-1} Gamma(k-1) left^{-1}.
    const MatrixXcd prev_inv = solve(fam.gamma(k, t), fam.gamma(k - 1, t)) * left.inverse();
    const auto glu = g.partialPivLu();
    const MatrixXcd ginv_dg = glu.solve(dg);
    const MatrixXcd t1 = ginv_dg * ginv_dg, t2 = glu.solve(ddg), t3 = glu.solve(next), t4 = prev_inv * g;
    const double scale = std::max({t1.norm(), t2.norm(), t3.norm(), t4.norm()});
    return relative_residual(t2 - t1, t3 - t4, scale);
}

double check_lemma1(const FiniteGammaFamily& fam, int k, double t) {
    return check_lemma1_left(fam, MatrixXcd::Identity(fam.size(), fam.size()), k, t);
}

double check_lemma1_first(const FiniteGammaFamily& fam, int k, double t) {
    const GammaDerivs d = gamma_derivs(fam, k, t);
    const MatrixXcd next = solve(fam.gamma(k + 1, t), fam.gamma(k + 2, t));
    const MatrixXcd t1 = d.g * next, t2 = d.g * d.g;
    return relative_residual(d.dg, t1 - t2, std::max({d.dg.norm(), t1.norm(), t2.norm()}));
}

ProjectionResiduals check_lemma2_projection(const FiniteGammaFamily& fam, const VectorXcd& p, double khat, int k,
                                            double t) {
    const int n = fam.size();
    if (std::abs(p.sum() - 1.0) > 1e-12) throw ValidationError("check_lemma2_projection: P(1) != 1");
    const VectorXcd ones = VectorXcd::Ones(n);
    const MatrixXcd proj = ones * p.transpose();
    const MatrixXcd ninv = fam.beta.cwiseInverse().asDiagonal();
    const MatrixXcd nm = fam.beta.asDiagonal();

    ProjectionResiduals r;
    r.identity = relative_residual(ninv * fam.C - fam.C * nm, -(1.0 / khat) * proj);
    const GammaDerivs d = gamma_derivs(fam, k, t);
    const MatrixXcd pg = proj * ninv * d.g;
    r.projection = relative_residual(pg, pg * proj);

    auto z = [&](int kk) { return cd((p.transpose() * ninv * gamma_derivs(fam, kk, t).g * ones)(0)); };
    const cd z0 = (p.transpose() * ninv * d.g * ones)(0);
    const cd z1 = (p.transpose() * ninv * d.dg * ones)(0);
    const cd z2 = (p.transpose() * ninv * d.ddg * ones)(0);
    const cd lhs = z2 / z0 - (z1 / z0) * (z1 / z0);
    const cd up = z(k + 1) / z0, down = z0 / z(k - 1);
    r.scalar_toda = std::abs(lhs - (up - down)) / std::max({std::abs(up), std::abs(down), 1e-300});
    return r;
}

FiniteGammaFamily random_family(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    FiniteGammaFamily f;
    f.beta.resize(n);
    for (int i = 0; i < n; ++i) {
        bool distinct;
        do {
            f.beta[i] = draw_beta(rng);
            distinct = true;
            for (int j = 0; j < i; ++j) distinct = distinct && std::abs(f.beta[i] - f.beta[j]) > 0.05;
        } while (!distinct);
    }
    f.C.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) f.C(i, j) = cd(gauss(rng), gauss(rng));
    const double norm = Eigen::JacobiSVD<MatrixXcd>(f.C).singularValues()(0);
    f.C /= std::max(1.0, norm);
    return f;
}

CauchyInstance cauchy_family(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> weight(0.5, 2.0);
    for (;;) {
        FiniteGammaFamily f = random_family(rng, n);
        bool ok = true;
        for (int i = 0; i < n && ok; ++i)
            for (int j = 0; j < n && ok; ++j) ok = std::abs(1.0 - 1.0 / (f.beta[i] * f.beta[j])) > 0.05;
        if (!ok) continue;
        VectorXcd sw(n);
        for (int j = 0; j < n; ++j) sw[j] = (std::abs(f.beta[j]) > 1.0 ? 1.0 : -1.0) * weight(rng);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) f.C(i, j) = sw[j] / (1.0 - 1.0 / (f.beta[i] * f.beta[j]));
        const double norm = Eigen::JacobiSVD<MatrixXcd>(f.C).singularValues()(0);
        const double c = 1.0 / std::max(1.0, norm);
        f.C *= c;
        const cd moment = c * (f.beta.array() * sw.array()).sum();
        if (std::abs(moment) < 0.2 * c) continue;
        CauchyInstance inst{f, (f.beta.array() * sw.array()).matrix() * (c / moment), 0.0};
        inst.khat = (1.0 / moment).real();
        return inst;
    }
}

LabReport run_operator_suite(std::uint64_t seed, int instances) {
    LabReport rep;
    rep.min_negative_control = INFINITY;
    const int ks[] = {-1, 0, 1};
    const double ts[] = {-0.4, 0.3};
    auto admissible = [&](const FiniteGammaFamily& f) {
        for (int k = -2; k <= 4; ++k)
            for (double t : ts)
                if (cond1(f.gamma(k, t)) > 1e8) return false;
        return true;
    };
    for (int s = 0; s < instances; ++s) {
        std::mt19937_64 rng(seed + 7919ULL * s);
        const int n = 2 + s % 7;
        FiniteGammaFamily rf;
        do rf = random_family(rng, n);
        while (!admissible(rf));
        CauchyInstance ci;
        do ci = cauchy_family(rng, n);
        while (!admissible(ci.family));
        FiniteGammaFamily control = ci.family;
        control.C = random_family(rng, n).C;
        const MatrixXcd ninv = ci.family.beta.cwiseInverse().asDiagonal();

        for (int k : ks) {
            for (double t : ts) {
                for (const FiniteGammaFamily* f : {&rf, &ci.family}) {
                    const OdeResiduals o = check_gamma_odes(*f, k, t);
                    rep.max_ode = std::max({rep.max_ode, o.first, o.second});
                    rep.max_lemma1_first = std::max(rep.max_lemma1_first, check_lemma1_first(*f, k, t));
                    rep.max_lemma1 = std::max(rep.max_lemma1, check_lemma1(*f, k, t));
                }
                const MatrixXcd rinv = rf.beta.cwiseInverse().asDiagonal();
                rep.max_group = std::max(rep.max_group, check_lemma1_left(rf, rinv, k, t));
                const ProjectionResiduals pr = check_lemma2_projection(ci.family, ci.p, ci.khat, k, t);
                rep.max_identity = std::max(rep.max_identity, pr.identity);
                rep.max_projection = std::max(rep.max_projection, pr.projection);
                rep.max_scalar_toda = std::max(rep.max_scalar_toda, pr.scalar_toda);
                if (admissible(control)) {
                    const ProjectionResiduals neg = check_lemma2_projection(control, ci.p, ci.khat, k, t);
                    rep.min_negative_control = std::min(rep.min_negative_control, neg.projection);
                }
            }
        }
        ++rep.instances;
    }
    return rep;
}

}  // namespace toda

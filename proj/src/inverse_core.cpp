#include "toda/inverse_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace toda {

namespace {

constexpr long double kPiL = 3.141592653589793238462643383279502884L;
constexpr long double kExpRange = 11000.0L;

int find_real(const std::vector<cxld>& beta, int from, double x) {
    for (int i = from; i < static_cast<int>(beta.size()); ++i)
        if (beta[i].real() == static_cast<long double>(x)) return i;
    return kNoInverse;
}

NodeSet build_nodes(const ReducedSpectralData& data, const Grid& grid) {
    NodeSet ns;
    if (data.has_circle()) {
        if (data.circle_angles.size() != grid.circle_nodes.size())
            throw ValidationError("circle density sampled on a different grid");
        for (std::size_t j = 0; j < grid.circle_nodes.size(); ++j)
            if (std::abs(data.circle_angles[j] - grid.circle_nodes[j]) > 1e-14)
                throw ValidationError("circle density sampled on a different grid");
        const int m = grid.circle_count();
        for (int j = 0; j < m; ++j) {
            ns.beta.push_back(std::polar(1.0L, static_cast<long double>(grid.circle_nodes[j])));
            ns.location.push_back(Location::UnitCircle);
            ns.inverse.push_back(grid.inversion_map[j]);
        }
        ns.circle_size = m;
    }
    auto add_real = [&](double x) {
        int i = find_real(ns.beta, ns.circle_size, x);
        if (i == kNoInverse) {
            SpectralPoint::on_line(x);  // validates |x| not in {0, 1}
            i = ns.size();
            ns.beta.push_back(cxld(x, 0.0L));
            ns.location.push_back(Location::RealLine);
            ns.inverse.push_back(kNoInverse);
        }
        return i;
    };
    for (const auto& p : grid.line_nodes) add_real(p.value.real());
    for (const auto& c : data.coupling) add_real(c.beta);
    for (const auto& s : data.masses) ns.mass_node.push_back(add_real(s.alpha));
    for (int i = ns.circle_size; i < ns.size(); ++i) {
        const long double inv = 1.0L / ns.beta[i].real();
        for (int j = ns.circle_size; j < ns.size(); ++j)
            if (std::abs(ns.beta[j].real() - inv) <= 1e-14L * std::abs(inv)) ns.inverse[i] = j;
    }
    return ns;
}

struct RowFactors {
    cxld diag;
    cxld off;
    long double log_scale;
};

RowFactors row_factors(cxld beta, Location loc, int k, double t, bool allow_scale) {
    const long double tt = t;
    const int power = 2 * (k + 1);
    long double log_diag, phase;
    if (loc == Location::UnitCircle) {
        const long double th = std::arg(beta);
        log_diag = beta.real() * tt;
        phase = power * th + beta.imag() * tt;
    } else {
        log_diag = power * std::log(std::abs(beta.real())) + beta.real() * tt;
        phase = 0.0L;
    }
    const cxld inv = 1.0L / beta;
    const long double log_off = inv.real() * tt;
    const long double off_phase = inv.imag() * tt;
    if (std::abs(log_diag - log_off) > kExpRange)
        throw OverflowError("assemble_gamma: |beta^{2(k+1)} e^{(beta - 1/beta) t}| out of range; rescale the run");
    const long double top = std::max(log_diag, log_off);
    const long double s = allow_scale ? top : 0.0L;
    if (!allow_scale && std::abs(top) > kExpRange) throw OverflowError("Gamma(k, t) entries overflow");
    return {std::polar(std::exp(log_diag - s), phase), std::polar(std::exp(log_off - s), off_phase), s};
}

}  // namespace

VectorXcld C2Operator::projector_row() const {
    const int n = size();
    if (n == 0) return {};
    if (p_hat.cwiseAbs().maxCoeff() == 0.0L) return VectorXcld::Constant(n, cxld(1.0L / n, 0.0L));
    return khat * p_hat;
}

MatrixXcld C2Operator::projector_matrix() const {
    const VectorXcld row = projector_row();
    return VectorXcld::Ones(size()) * row.transpose();
}

C2Operator assemble_c2(const ReducedSpectralData& data, const Grid& grid) {
    data.validate();
    C2Operator c2;
    c2.nodes = build_nodes(data, grid);
    const NodeSet& ns = c2.nodes;
    const int n = ns.size();
    c2.matrix = MatrixXcld::Zero(n, n);
    c2.p_hat = VectorXcld::Zero(n);
    c2.q_hat = VectorXcld::Zero(n);

    for (const auto& c : data.coupling) {
        if (c.rho == cplx(0.0)) continue;
        const int i = find_real(ns.beta, ns.circle_size, c.beta);
        const int j = ns.inverse[i];
        if (j == kNoInverse)
            throw ValidationError("inversion-closure violation: rho != 0 at beta = " + std::to_string(c.beta) +
                                  " but 1/beta is not a node");
        c2.matrix(i, j) += (c.beta > 0 ? 1.0L : -1.0L) * cxld(c.rho.real(), c.rho.imag());
    }

    for (std::size_t m = 0; m < data.masses.size(); ++m) {
        const auto& s = data.masses[m];
        const int col = ns.mass_node[m];
        const long double sw = s.sign * static_cast<long double>(s.weight);
        const long double alpha = s.alpha;
        for (int i = 0; i < n; ++i) {
            const cxld denom = 1.0L - 1.0L / (ns.beta[i] * alpha);
            if (std::abs(denom) < 1e-14L) {
                c2.excluded.push_back({i, col});
                continue;
            }
            c2.matrix(i, col) += sw / denom;
        }
        c2.p_hat[col] += alpha * sw;
        c2.q_hat[col] += sw;
    }

    if (ns.circle_size > 0) {
        const long double h = 2 * kPiL / ns.circle_size;
        VectorXcld rhat(ns.circle_size);
        for (int j = 0; j < ns.circle_size; ++j) rhat[j] = cxld(data.rhat[j].real(), data.rhat[j].imag());
        for (int i = 0; i < n; ++i) {
            const VectorXcld w = cauchy_weights<long double>(grid.circle_nodes, ns.beta[i], ns.location[i]);
            for (int j = 0; j < ns.circle_size; ++j) c2.matrix(i, j) += rhat[j] * w[j] / kPiL;
        }
        for (int j = 0; j < ns.circle_size; ++j) {
            c2.p_hat[j] += (h / kPiL) * ns.beta[j] * rhat[j];
            c2.q_hat[j] += (h / kPiL) * rhat[j];
        }
    }

    // k^ is taken as carried by the data: evolved data keep the t = 0 value.
    c2.khat = cxld(data.khat.real(), data.khat.imag());
    return c2;
}

MatrixXcld projection_identity_defect(const C2Operator& c2) {
    const int n = c2.size();
    MatrixXcld d(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            d(i, j) = c2.matrix(i, j) / c2.nodes.beta[i] - c2.matrix(i, j) * c2.nodes.beta[j] + c2.p_hat[j];
    return d;
}

GammaSystem assemble_gamma(std::shared_ptr<const C2Operator> c2, int k, double t) {
    if (!c2) throw ValidationError("assemble_gamma: missing C2 operator");
    const int n = c2->size();
    GammaSystem g;
    g.k = k;
    g.t = t;
    g.matrix.resize(n, n);
    g.rhs.resize(n);
    g.log_row_scale.resize(n);
    for (int i = 0; i < n; ++i) {
        const RowFactors f = row_factors(c2->nodes.beta[i], c2->nodes.location[i], k, t, true);
        g.matrix.row(i) = f.off * c2->matrix.row(i);
        g.matrix(i, i) += f.diag;
        g.rhs[i] = -std::exp(-f.log_scale);
        g.log_row_scale[i] = f.log_scale;
    }
    g.c2 = std::move(c2);
    return g;
}

VectorXcld gamma_times_one(const C2Operator& c2, int k, double t) {
    const int n = c2.size();
    const VectorXcld c1 = c2.matrix.rowwise().sum();
    VectorXcld out(n);
    for (int i = 0; i < n; ++i) {
        const RowFactors f = row_factors(c2.nodes.beta[i], c2.nodes.location[i], k, t, false);
        out[i] = f.diag + f.off * c1[i];
    }
    return out;
}

USolution solve_u(GammaSystem& system) {
    DenseSystemLd dense{system.matrix, system.rhs, 0.0};
    USolution s;
    s.k = system.k;
    s.t = system.t;
    try {
        s.u = solve_dense(dense);
    } catch (const SingularMatrixError& e) {
        throw SingularMatrixError(std::string("Gamma^ not invertible for these data (k = ") +
                                  std::to_string(system.k) + ", t = " + std::to_string(system.t) + "): " +
                                  e.what());
    }
    system.condition_estimate = dense.condition_estimate;
    s.condition_estimate = dense.condition_estimate;
    if (s.u.size() > 0) {
        const VectorXcld r = system.matrix * s.u - system.rhs;
        s.residual = static_cast<double>(r.cwiseAbs().maxCoeff() / std::max(1.0L, system.rhs.cwiseAbs().maxCoeff()));
        s.moment = (system.c2->p_hat.array() * s.u.array()).sum();
        s.moment_inv = (system.c2->q_hat.array() * s.u.array()).sum();
    }
    return s;
}

USolution solve_u(std::shared_ptr<const C2Operator> c2, int k, double t) {
    GammaSystem g = assemble_gamma(std::move(c2), k, t);
    return solve_u(g);
}

cxld projector_apply(const C2Operator& c2, const VectorXcld& w) {
    if (w.size() != c2.size()) throw ValidationError("projector_apply: size mismatch");
    if (c2.size() == 0) return 0.0L;
    return (c2.projector_row().array() * w.array()).sum();
}

GValue g_function(const USolution& u, const C2Operator& c2, cplx z) {
    GValue g{1.0L, false};
    const cxld zz(z.real(), z.imag());
    for (int i = 0; i < c2.size(); ++i) {
        if (c2.q_hat[i] == cxld(0.0L)) continue;
        const cxld denom = 1.0L - zz / c2.nodes.beta[i];
        if (std::abs(denom) < 1e-8L) g.pole_warning = true;
        g.value += c2.q_hat[i] * u.u[i] / denom;
    }
    return g;
}

double reconstruct_b2(const USolution& u_k, const USolution& u_km1) {
    if (u_k.t != u_km1.t || u_k.k != u_km1.k + 1)
        throw ValidationError("reconstruct_b2: need solutions at k and k-1 at equal t");
    const cxld r = (1.0L + u_k.moment_inv) / (1.0L + u_km1.moment_inv);
    if (!(std::abs(r.imag()) <= 1e-10L * std::max(1.0L, std::abs(r))) || !(r.real() > 0.0L))
        throw NumericalError("reconstruct_b2: ratio not real positive (invalid data or ill-conditioning)");
    return static_cast<double>(r.real());
}

double reconstruct_a(const USolution& u_k, const USolution& u_kp1) {
    if (u_k.t != u_kp1.t || u_kp1.k != u_k.k + 1)
        throw ValidationError("reconstruct_a: need solutions at k and k+1 at equal t");
    const cxld a = u_kp1.moment - u_k.moment;
    if (!(std::abs(a.imag()) <= 1e-8L)) throw NumericalError("reconstruct_a: large imaginary part");
    return static_cast<double>(a.real());
}

}  // namespace toda

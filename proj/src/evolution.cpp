#include "toda/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace toda {

namespace {

struct GammaPoint {
    double x = 0.0;
    double xdot = 0.0;
};

double real_log(cxld z, const char* where) {
    if (!(z.real() > 0.0L)) throw NumericalError(std::string(where) + ": nonpositive argument of the logarithm");
    const cxld l = std::log(z);
    if (!(std::abs(l.imag()) <= 1e-9L)) throw NumericalError(std::string(where) + ": complex logarithm");
    return static_cast<double>(l.real());
}

// One LU of Gamma(k, t) serves x and its time derivative. With y = beta + d the
// huge diagonal parts cancel analytically:
//   Gamma(k) d  = E (N^{-1} C 1 - C beta) =: r,
//   Gamma(k) dy = E (N^{-2} C 1 - N^{-1} C beta - (N^{-1} - N) C d) - N r,
// where E = diag(e^{t/beta}). All right-hand sides carry the row scaling of
// Gamma(k, t).
GammaPoint gamma_point(const std::shared_ptr<const C2Operator>& c2, int k, double t, bool with_velocity) {
    const int n = c2->size();
    if (n == 0) return {};
    GammaSystem g = assemble_gamma(c2, k, t);
    const auto& beta = c2->nodes.beta;
    const MatrixXcld& c = c2->matrix;
    const VectorXcld beta_v = Eigen::Map<const VectorXcld>(beta.data(), n);
    const VectorXcld c1 = c.rowwise().sum();
    const VectorXcld cb = c * beta_v;

    VectorXcld off(n);
    for (int i = 0; i < n; ++i) {
        const cxld inv = 1.0L / beta[i];
        off[i] = std::exp(cxld(inv.real() * t - g.log_row_scale[i], inv.imag() * t));
    }
    VectorXcld r(n);
    for (int i = 0; i < n; ++i) r[i] = off[i] * (c1[i] / beta[i] - cb[i]);

    const auto lu = factorize_dense<cxld>(g.matrix);
    const VectorXcld d = lu.solve(r);
    const VectorXcld prow = c2->projector_row();
    cxld pz = 0.0L;
    for (int i = 0; i < n; ++i) pz += prow[i] * (1.0L + d[i] / beta[i]);

    GammaPoint out;
    out.x = real_log(pz, "x_solution");
    if (!with_velocity) return out;

    const VectorXcld cd = c * d;
    VectorXcld rhs(n);
    for (int i = 0; i < n; ++i) {
        const cxld b = beta[i];
        rhs[i] = off[i] * (c1[i] / (b * b) - cb[i] / b - (1.0L / b - b) * cd[i]) - b * r[i];
    }
    const VectorXcld dy = lu.solve(rhs);
    cxld dz = 0.0L;
    for (int i = 0; i < n; ++i) dz += prow[i] * dy[i] / beta[i];
    const cxld v = dz / pz;
    if (!(std::abs(v.imag()) <= 1e-8L * std::max(1.0L, std::abs(v))))
        throw NumericalError("x_velocity: complex velocity");
    out.xdot = static_cast<double>(v.real());
    return out;
}

std::shared_ptr<const C2Operator> share(const C2Operator& c2) { return std::make_shared<const C2Operator>(c2); }

void check_exponent(double e, const char* what) {
    if (!(std::abs(e) <= 700.0))
        throw OverflowError(std::string("evolve_data: multiplier exponent out of range for ") + what);
}

}  // namespace

double x_solution(const C2Operator& c2, int k, double t) { return gamma_point(share(c2), k, t, false).x; }

double x_solution(const ReducedSpectralData& data, const Grid& grid, int k, double t) {
    return x_solution(assemble_c2(data, grid), k, t);
}

double x_velocity(const C2Operator& c2, int k, double t) { return gamma_point(share(c2), k, t, true).xdot; }

double calibrate_c1(const C2Operator& c2, double v0) { return x_solution(c2, 0, 0.0) - v0; }

EvolvedData evolve_data(const ReducedSpectralData& data, double t) {
    EvolvedData ev{data, t, data};
    ReducedSpectralData& d = ev.data;
    for (auto& m : d.masses) {
        const double e = -(m.alpha - 1.0 / m.alpha) * t;
        check_exponent(e, "sigma mass");
        m.weight *= std::exp(e);
    }
    for (auto& c : d.coupling) {
        const double e = (c.beta - 1.0 / c.beta) * t;
        check_exponent(e, "line coupling");
        c.rho *= std::exp(e);
    }
    for (Eigen::Index j = 0; j < d.rhat.size(); ++j)
        d.rhat[j] *= std::polar(1.0, -2.0 * t * std::sin(d.circle_angles[j]));
    d.khat = data.khat;
    return ev;
}

Slice gamma_path_slice(const C2Operator& c2_in, int k_min, int k_max, double t) {
    const auto c2 = share(c2_in);
    Slice s{k_min, k_max, t, {}, {}, {}};
    std::vector<double> xs;
    for (int k = k_min; k <= k_max + 1; ++k) {
        const GammaPoint p = gamma_point(c2, k, t, k <= k_max);
        xs.push_back(p.x);
        if (k <= k_max) s.a.push_back(p.xdot);
    }
    for (int i = 0; i + 1 < static_cast<int>(xs.size()); ++i) s.b2.push_back(std::exp(xs[i + 1] - xs[i]));
    xs.pop_back();
    s.x = std::move(xs);
    return s;
}

Slice evolved_path_slice(const ReducedSpectralData& data, const Grid& grid, int k_min, int k_max, double t) {
    const EvolvedData ev = evolve_data(data, t);
    const auto c2 = std::make_shared<const C2Operator>(assemble_c2(ev.data, grid));
    Slice s{k_min, k_max, t, {}, {}, {}};
    std::vector<USolution> u;
    for (int k = k_min; k <= k_max + 1; ++k) u.push_back(solve_u(c2, k, 0.0));
    for (std::size_t i = 0; i + 1 < u.size(); ++i) {
        s.x.push_back(real_log(1.0L + u[i].moment_inv, "evolved x"));
        s.a.push_back(reconstruct_a(u[i], u[i + 1]));
        s.b2.push_back(reconstruct_b2(u[i + 1], u[i]));
    }
    return s;
}

PathDiscrepancy compare_paths(const Slice& g, const Slice& e) {
    PathDiscrepancy d;
    for (std::size_t i = 0; i < g.a.size(); ++i) {
        d.a = std::max(d.a, std::abs(g.a[i] - e.a[i]) / std::max(1.0, std::abs(e.a[i])));
        d.b2 = std::max(d.b2, std::abs(g.b2[i] - e.b2[i]) / std::max(1.0, std::abs(e.b2[i])));
        d.x = std::max(d.x, std::abs(g.x[i] - e.x[i]) / std::max(1.0, std::abs(e.x[i])));
    }
    return d;
}

Trajectory solve_cauchy(const CauchyProblem& pb) {
    if (pb.k_min > pb.k_max) throw ValidationError("solve_cauchy: empty k range");
    for (std::size_t i = 1; i < pb.times.size(); ++i)
        if (!(pb.times[i] > pb.times[i - 1])) throw ValidationError("solve_cauchy: times must increase");
    const C2Operator c2 = assemble_c2(pb.data, pb.grid);
    const double c1 = pb.calibrate ? calibrate_c1(c2, pb.v0) : 0.0;
    const int lo = std::min(pb.k_min, 0), hi = std::max(pb.k_max, 0);

    Trajectory tr;
    tr.k_min = pb.k_min;
    tr.k_max = pb.k_max;
    tr.t = pb.times;
    tr.provenance = Provenance::InverseSpectral;
    const int nk = tr.sites();
    tr.x.resize(pb.times.size(), nk);
    tr.xdot.resize(pb.times.size(), nk);

    auto one = [&](std::size_t q) {
        const double t = pb.times[q];
        const Slice g = gamma_path_slice(c2, lo, hi, t);
        const Slice e = evolved_path_slice(pb.data, pb.grid, lo, hi, t);
        const PathDiscrepancy d = compare_paths(g, e);
        if (d.a > pb.path_tolerance || d.b2 > pb.path_tolerance)
            throw ToleranceError("inconsistent paths at t = " + std::to_string(t) + ": da = " + std::to_string(d.a) +
                                 ", db2 = " + std::to_string(d.b2));
        std::vector<double> x(hi - lo + 1);
        x[-lo] = g.x[-lo] - c1;
        for (int k = 1; k <= hi; ++k) x[k - lo] = x[k - 1 - lo] + std::log(e.b2[k - 1 - lo]);
        for (int k = -1; k >= lo; --k) x[k - lo] = x[k + 1 - lo] - std::log(e.b2[k - lo]);
        for (int i = 0; i < nk; ++i) {
            tr.x(q, i) = x[pb.k_min + i - lo];
            tr.xdot(q, i) = e.a[pb.k_min + i - lo];
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(pb.threads, pb.times.size()));
    std::vector<std::exception_ptr> errors(pb.times.size());
    auto run = [&](unsigned w) {
        for (std::size_t q = w; q < pb.times.size(); q += workers) {
            try {
                one(q);
            } catch (...) {
                errors[q] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return tr;
}

}  // namespace toda

#include "toda/direct_ode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace toda {

namespace {

double guarded_exp(double r) {
    if (r > 700.0) throw OverflowError("toda_rhs: exponent " + std::to_string(r) + " exceeds 700");
    return std::exp(r);
}

// Bond differences r_j = x_{j+1} - x_j including the two ghost bonds.
Eigen::VectorXd bond_differences(const LatticeState& s) {
    const int n = s.size();
    Eigen::VectorXd r(n + 1);
    r[0] = s.boundary.left_slope;
    for (int i = 0; i + 1 < n; ++i) r[i + 1] = s.x[i + 1] - s.x[i];
    r[n] = s.boundary.right_slope;
    return r;
}

}  // namespace

void LatticeState::validate() const {
    if (k_min >= k_max) throw ValidationError("LatticeState: k_min must be < k_max");
    if (x.size() != size() || xdot.size() != size())
        throw ValidationError("LatticeState: array length does not match window");
}

double JacobiWindow::a_at(int k) const {
    return (k < k_min || k > k_max) ? a_inf : a[k - k_min];
}

double JacobiWindow::b_at(int k) const {
    return (k < k_min || k >= k_max) ? b_inf : b[k - k_min];
}

void JacobiWindow::validate() const {
    if (k_min > k_max) throw ValidationError("JacobiWindow: empty window");
    if (a.size() != k_max - k_min + 1 || b.size() != k_max - k_min)
        throw ValidationError("JacobiWindow: array length does not match window");
    if (!(b_inf > 0.0)) throw ValidationError("JacobiWindow: background b must be positive");
    for (Eigen::Index i = 0; i < b.size(); ++i)
        if (!(b[i] > 0.0)) throw ValidationError("JacobiWindow: b_k must be positive");
    if (!a.allFinite() || !b.allFinite()) throw ValidationError("JacobiWindow: non-finite entries");
}

JacobiWindow free_window(int k_min, int k_max) {
    JacobiWindow j;
    j.k_min = k_min;
    j.k_max = k_max;
    j.a = Eigen::VectorXd::Zero(k_max - k_min + 1);
    j.b = Eigen::VectorXd::Ones(k_max - k_min);
    return j;
}

const char* provenance_name(Provenance p) {
    return p == Provenance::DirectODE ? "direct_ode" : "inverse_spectral";
}

LatticeState Trajectory::state_at(int sample, Boundary boundary) const {
    LatticeState s;
    s.k_min = k_min;
    s.k_max = k_max;
    s.x = x.row(sample).transpose();
    s.xdot = has_velocity() ? Eigen::VectorXd(xdot.row(sample).transpose())
                            : Eigen::VectorXd::Zero(sites());
    s.boundary = boundary;
    return s;
}

Eigen::VectorXd toda_rhs(const LatticeState& state) {
    if (state.size() < 3) throw ValidationError("toda_rhs: window length must be >= 3");
    state.validate();
    const Eigen::VectorXd r = bond_differences(state);
    Eigen::VectorXd e(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) e[i] = guarded_exp(r[i]);
    return e.tail(state.size()) - e.head(state.size());
}

Trajectory integrate(const LatticeState& state, double t_end, double dt, int stride) {
    state.validate();
    if (!(dt > 0.0)) throw ValidationError("integrate: dt must be positive");
    if (stride < 1) throw ValidationError("integrate: stride must be >= 1");
    const long steps = std::max(1L, static_cast<long>(std::ceil(std::abs(t_end) / dt - 1e-9)));
    const double h = t_end / steps;

    Trajectory tr;
    tr.k_min = state.k_min;
    tr.k_max = state.k_max;
    tr.provenance = Provenance::DirectODE;
    const long samples = (steps + stride - 1) / stride + 1;
    tr.x.resize(samples, state.size());
    tr.xdot.resize(samples, state.size());

    LatticeState s = state;
    Eigen::VectorXd f = toda_rhs(s);
    long row = 0;
    auto record = [&](long step) {
        tr.t.push_back(step == steps ? t_end : step * h);
        tr.x.row(row) = s.x.transpose();
        tr.xdot.row(row) = s.xdot.transpose();
        ++row;
    };
    record(0);
    for (long n = 1; n <= steps; ++n) {
        s.xdot += 0.5 * h * f;
        s.x += h * s.xdot;
        f = toda_rhs(s);
        s.xdot += 0.5 * h * f;
        if (n % stride == 0 || n == steps) record(n);
    }
    tr.x.conservativeResize(row, Eigen::NoChange);
    tr.xdot.conservativeResize(row, Eigen::NoChange);
    return tr;
}

double energy(const LatticeState& state) {
    state.validate();
    double h = 0.5 * state.xdot.squaredNorm();
    for (int i = 0; i + 1 < state.size(); ++i) {
        const double r = state.x[i + 1] - state.x[i];
        h += std::expm1(r) - r;
    }
    const auto& bd = state.boundary;
    h -= (1.0 - std::exp(bd.left_slope)) * state.x[0];
    h -= std::expm1(bd.right_slope) * state.x[state.size() - 1];
    return h;
}

JacobiWindow flaschka(const LatticeState& state) {
    state.validate();
    JacobiWindow j;
    j.k_min = state.k_min;
    j.k_max = state.k_max;
    j.a = state.xdot;
    j.b.resize(state.size() - 1);
    for (int i = 0; i + 1 < state.size(); ++i) j.b[i] = std::exp(0.5 * (state.x[i + 1] - state.x[i]));
    j.a_inf = 0.0;
    j.b_inf = std::exp(0.5 * state.boundary.right_slope);
    return j;
}

TraceInvariants trace_invariants(const JacobiWindow& j) {
    TraceInvariants inv{j.a.sum(), j.a.squaredNorm()};
    for (Eigen::Index i = 0; i < j.b.size(); ++i) inv.quadratic += 2.0 * (j.b[i] * j.b[i] - 1.0);
    return inv;
}

JacobiWindow rescale_to_standard(const JacobiWindow& j, double a, double b) {
    if (!(b > a)) throw DomainError("rescale_to_standard: degenerate interval, need b > a");
    const double scale = 4.0 / (b - a);
    const double center = 0.5 * (a + b);
    JacobiWindow r = j;
    r.a = scale * (j.a.array() - center).matrix();
    r.b = scale * j.b;
    r.a_inf = scale * (j.a_inf - center);
    r.b_inf = scale * j.b_inf;
    return r;
}

LatticeState rescale_state(const LatticeState& state, double a, double b) {
    if (!(b > a)) throw DomainError("rescale_state: degenerate interval, need b > a");
    state.validate();
    const double s = 0.25 * (b - a);
    const double c = 0.5 * (a + b);
    const double ls = std::log(s);
    LatticeState r = state;
    for (int i = 0; i < state.size(); ++i) {
        const int n = state.k_min + i;
        r.x[i] = state.x[i] - 2.0 * n * ls;
        r.xdot[i] = (state.xdot[i] - c) / s;
    }
    r.boundary.left_slope = state.boundary.left_slope - 2.0 * ls;
    r.boundary.right_slope = state.boundary.right_slope - 2.0 * ls;
    if (r.boundary.left_slope != 0.0 || r.boundary.right_slope != 0.0)
        r.boundary.kind = Boundary::Kind::FrozenBackground;
    return r;
}

Trajectory unrescale_solution(const Trajectory& xt, double a, double b, const std::vector<double>& times) {
    if (!(b > a)) throw DomainError("unrescale_solution: degenerate interval, need b > a");
    if (xt.t.empty()) throw ValidationError("unrescale_solution: empty trajectory");
    const double s = 0.25 * (b - a);
    const double c = 0.5 * (a + b);
    const double ls = std::log(s);
    const double tol = 1e-12 * std::max(1.0, std::abs(xt.t.back()));
    const bool hermite = xt.has_velocity();

    Trajectory out;
    out.k_min = xt.k_min;
    out.k_max = xt.k_max;
    out.provenance = xt.provenance;
    out.t = times;
    const int nk = xt.sites();
    out.x.resize(times.size(), nk);
    if (hermite) out.xdot.resize(times.size(), nk);

    for (std::size_t q = 0; q < times.size(); ++q) {
        const double tau = s * times[q];
        if (tau < xt.t.front() - tol || tau > xt.t.back() + tol)
            throw DomainError("unrescale_solution: rescaled time " + std::to_string(tau) +
                              " outside trajectory range");
        auto it = std::lower_bound(xt.t.begin(), xt.t.end(), tau - tol);
        std::size_t hi = std::min<std::size_t>(it - xt.t.begin(), xt.t.size() - 1);
        Eigen::RowVectorXd xv(nk), vv(nk);
        if (std::abs(xt.t[hi] - tau) <= tol) {
            xv = xt.x.row(hi);
            if (hermite) vv = xt.xdot.row(hi);
        } else {
            const std::size_t lo = hi - 1;
            const double h = xt.t[hi] - xt.t[lo];
            const double u = (tau - xt.t[lo]) / h;
            if (hermite) {
                const double u2 = u * u, u3 = u2 * u;
                const double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u;
                const double h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
                xv = h00 * xt.x.row(lo) + h10 * h * xt.xdot.row(lo) + h01 * xt.x.row(hi) +
                     h11 * h * xt.xdot.row(hi);
                const double d00 = (6 * u2 - 6 * u) / h, d10 = 3 * u2 - 4 * u + 1;
                const double d01 = (-6 * u2 + 6 * u) / h, d11 = 3 * u2 - 2 * u;
                vv = d00 * xt.x.row(lo) + d10 * xt.xdot.row(lo) + d01 * xt.x.row(hi) +
                     d11 * xt.xdot.row(hi);
            } else {
                xv = (1 - u) * xt.x.row(lo) + u * xt.x.row(hi);
            }
        }
        for (int i = 0; i < nk; ++i) {
            const int n = xt.k_min + i;
            out.x(q, i) = xv[i] + 2.0 * n * ls + c * times[q];
            if (hermite) out.xdot(q, i) = s * vv[i] + c;
        }
    }
    return out;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& tr, bool with_provenance) {
    out << (with_provenance ? "t,k,x,xdot,provenance\n" : "t,k,x,xdot\n");
    char buf[160];
    for (std::size_t q = 0; q < tr.t.size(); ++q) {
        for (int i = 0; i < tr.sites(); ++i) {
            const double v = tr.has_velocity() ? tr.xdot(q, i) : 0.0;
            std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g", tr.t[q], tr.k_min + i, tr.x(q, i), v);
            out << buf;
            if (with_provenance) out << ',' << provenance_name(tr.provenance);
            out << '\n';
        }
    }
}

void write_trajectory_csv(const std::string& path, const Trajectory& tr, bool with_provenance) {
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot open " + path + " for writing");
    write_trajectory_csv(f, tr, with_provenance);
}

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("missing trajectory file " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("t,k,x,xdot", 0) != 0)
        throw ParseError(1, "expected header t,k,x,xdot in " + path);
    struct Row { double t; int k; double x, v; };
    std::vector<Row> rows;
    std::string prov;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell[5];
        int n = 0;
        while (n < 5 && std::getline(ss, cell[n], ',')) ++n;
        if (n < 4) throw ParseError(lineno, "expected at least 4 columns");
        try {
            rows.push_back({std::stod(cell[0]), std::stoi(cell[1]), std::stod(cell[2]), std::stod(cell[3])});
        } catch (const std::exception&) {
            throw ParseError(lineno, "malformed number");
        }
        if (n == 5) prov = cell[4];
    }
    if (rows.empty()) throw ParseError(lineno, "no samples in " + path);
    Trajectory tr;
    tr.k_min = rows.front().k;
    tr.k_max = tr.k_min;
    for (const auto& r : rows) {
        tr.k_min = std::min(tr.k_min, r.k);
        tr.k_max = std::max(tr.k_max, r.k);
    }
    for (const auto& r : rows)
        if (tr.t.empty() || r.t != tr.t.back()) tr.t.push_back(r.t);
    const int nk = tr.sites();
    if (rows.size() != tr.t.size() * static_cast<std::size_t>(nk))
        throw ParseError(lineno, "samples do not form a full (t,k) product grid");
    tr.x.resize(tr.t.size(), nk);
    tr.xdot.resize(tr.t.size(), nk);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        tr.x(i / nk, rows[i].k - tr.k_min) = rows[i].x;
        tr.xdot(i / nk, rows[i].k - tr.k_min) = rows[i].v;
    }
    tr.provenance = prov == "inverse_spectral" ? Provenance::InverseSpectral : Provenance::DirectODE;
    return tr;
}

}  // namespace toda

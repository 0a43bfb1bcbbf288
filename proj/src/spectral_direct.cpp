#include "toda/spectral_direct.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

namespace toda {

namespace {

constexpr int kReach = 1 << 20;

// Decaying root of b^2 m^2 + (lambda - a) m + 1 = 0: the m-function of a
// constant half-line.
cplx background_m(double a_inf, double b_inf, cplx lambda) {
    const cplx mu = (lambda - a_inf) / b_inf;
    return -inverse_joukowski(mu, Branch::InsideDisk) / b_inf;
}

cplx right_fraction(const JacobiWindow& j, cplx lambda, int start) {
    cplx m = background_m(j.a_inf, j.b_inf, lambda);
    for (int k = start - 1; k >= 0; --k) {
        const double b = j.b_at(k);
        m = 1.0 / (j.a_at(k) - lambda - b * b * m);
    }
    return m;
}

cplx left_fraction(const JacobiWindow& j, cplx lambda, int start) {
    cplx m = background_m(j.a_inf, j.b_inf, lambda);
    for (int k = start + 1; k <= -1; ++k) {
        const double b = j.b_at(k - 1);
        m = 1.0 / (j.a_at(k) - lambda - b * b * m);
    }
    return m;
}

template <class F>
cplx converge_depth(F&& eval, int depth) {
    if (depth < 1) throw ValidationError("weyl: depth must be >= 1");
    cplx prev = eval(depth);
    for (int d = 2 * depth; d <= kReach; d *= 2) {
        const cplx next = eval(d);
        if (std::abs(next - prev) < 1e-12 * std::max(1.0, std::abs(next))) return next;
        prev = next;
    }
    throw NumericalError("weyl: continued fraction did not converge");
}

double parse_number(const std::string& tok, int line) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || end != tok.c_str() + tok.size() || !std::isfinite(v))
        throw ParseError(line, "malformed number '" + tok + "'");
    return v;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Eigen::VectorXcd trig_resample(std::vector<SpectralDataFile::CircleSample> samples,
                               const std::vector<double>& targets) {
    std::sort(samples.begin(), samples.end(),
              [](const auto& p, const auto& q) { return p.angle < q.angle; });
    const int n = static_cast<int>(samples.size());
    const double h = 2.0 * kPi / n;
    for (int j = 1; j < n; ++j)
        if (std::abs(samples[j].angle - samples[j - 1].angle - h) > 1e-9)
            throw ValidationError("circle samples must be equispaced for resampling");
    const int half = n / 2;
    std::vector<cplx> coef(n);
    for (int q = 0; q < n; ++q) {
        const int f = q - half;
        cplx acc = 0.0;
        for (const auto& s : samples) acc += cplx(s.re, s.im) * std::polar(1.0, -f * s.angle);
        coef[q] = acc / double(n);
    }
    Eigen::VectorXcd out(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        cplx acc = 0.0;
        for (int q = 0; q < n; ++q) {
            const int f = q - half;
            if (n % 2 == 0 && f == -half) {
                acc += coef[q] * std::cos(half * targets[i]);
            } else {
                acc += coef[q] * std::polar(1.0, f * targets[i]);
            }
        }
        out[i] = acc;
    }
    return out;
}

}  // namespace

std::pair<cplx, cplx> orthopoly(const JacobiWindow& j, cplx lambda, int k) {
    if (std::abs(k) > kReach) throw ValidationError("orthopoly: index beyond window reach");
    cplx pm = 0.0, p = 1.0, qm = 1.0, q = 0.0;  // values at -1 and 0
    if (k == 0) return {p, q};
    if (k == -1) return {pm, qm};
    if (k > 0) {
        for (int n = 0; n < k; ++n) {
            const cplx pn = ((lambda - j.a_at(n)) * p - j.b_at(n - 1) * pm) / j.b_at(n);
            const cplx qn = ((lambda - j.a_at(n)) * q - j.b_at(n - 1) * qm) / j.b_at(n);
            pm = p; p = pn;
            qm = q; q = qn;
        }
        return {p, q};
    }
    // Backward: w_{n-1} = ((lambda - a_n) w_n - b_n w_{n+1}) / b_{n-1}, starting at n = -1.
    cplx p_up = p, p_cur = pm, q_up = q, q_cur = qm;
    for (int n = -1; n > k; --n) {
        const cplx pn = ((lambda - j.a_at(n)) * p_cur - j.b_at(n) * p_up) / j.b_at(n - 1);
        const cplx qn = ((lambda - j.a_at(n)) * q_cur - j.b_at(n) * q_up) / j.b_at(n - 1);
        p_up = p_cur; p_cur = pn;
        q_up = q_cur; q_cur = qn;
    }
    return {p_cur, q_cur};
}

cplx weyl_m_right(const JacobiWindow& j, cplx lambda, int depth) {
    j.validate();
    const int start = std::max(0, j.k_max + 1);
    return converge_depth([&](int d) { return right_fraction(j, lambda, start + d); }, depth);
}

cplx weyl_m_left(const JacobiWindow& j, cplx lambda, int depth) {
    j.validate();
    const int start = std::min(-1, j.k_min - 1);
    return converge_depth([&](int d) { return left_fraction(j, lambda, start - d); }, depth);
}

WeylPair weyl_pair(const JacobiWindow& j, cplx lambda) {
    return {weyl_m_right(j, lambda), weyl_m_left(j, lambda), j.b_at(-1)};
}

cplx n_function(const JacobiWindow& j, cplx z) {
    if (z == cplx(0.0)) throw DomainError("n_function: z = 0");
    if (std::abs(std::abs(z) - 1.0) <= 1e-14) throw DomainError("n_function: |z| = 1");
    const double b = j.b_at(-1);
    const cplx lambda = z + 1.0 / z;
    if (std::abs(z) < 1.0) return -b * weyl_m_right(j, lambda);
    return -1.0 / (b * weyl_m_left(j, lambda));
}

int sigma_sign(double alpha) { return std::abs(alpha) > 1.0 ? 1 : -1; }

bool ReducedSpectralData::is_free() const {
    if (!masses.empty() || has_circle()) return false;
    for (const auto& c : coupling)
        if (c.rho != cplx(0.0)) return false;
    return true;
}

cplx ReducedSpectralData::projector_moment() const {
    cplx m = 0.0;
    for (const auto& s : masses) m += s.alpha * s.sign * s.weight;
    if (has_circle()) {
        const double h = 2.0 * kPi / circle_angles.size();
        for (std::size_t j = 0; j < circle_angles.size(); ++j)
            m += (h / kPi) * std::polar(1.0, circle_angles[j]) * rhat[j];
    }
    return m;
}

void ReducedSpectralData::normalize() {
    double scale = 0.0;
    for (const auto& s : masses) scale += std::abs(s.alpha * s.weight);
    if (has_circle()) scale += 2.0 * rhat.cwiseAbs().maxCoeff();
    const cplx m = projector_moment();
    if (scale == 0.0) {
        khat = 1.0;
        return;
    }
    if (std::abs(m) < 1e-12 * scale)
        throw ValidationError("projector normalization: moment vanishes, P(1) = 1 impossible");
    khat = 1.0 / m;
}

void ReducedSpectralData::validate() const {
    for (std::size_t i = 0; i < masses.size(); ++i) {
        const auto& s = masses[i];
        if (!std::isfinite(s.alpha) || !std::isfinite(s.weight)) throw ValidationError("non-finite mass");
        if (s.alpha == 0.0) throw ValidationError("mass at the origin");
        if (std::abs(std::abs(s.alpha) - 1.0) <= 1e-14) throw ValidationError("mass on unit circle");
        if (!(s.weight > 0.0)) throw ValidationError("nonpositive mass weight");
        if (s.sign != sigma_sign(s.alpha)) throw ValidationError("mass sign s(alpha) inconsistent");
        for (std::size_t j = 0; j < i; ++j) {
            if (masses[j].alpha == s.alpha) throw ValidationError("duplicate mass node");
            if (std::abs(masses[j].alpha * s.alpha - 1.0) <= 1e-14)
                throw ValidationError("inverse-pair collision between masses");
        }
    }
    for (const auto& c : coupling) {
        if (c.beta == 0.0 || std::abs(std::abs(c.beta) - 1.0) <= 1e-14)
            throw ValidationError("coupling node on unit circle or at origin");
        if (!std::isfinite(c.rho.real()) || !std::isfinite(c.rho.imag()))
            throw ValidationError("non-finite coupling");
    }
    if (rhat.size() != 0 && rhat.size() != static_cast<Eigen::Index>(circle_angles.size()))
        throw ValidationError("circle density does not match circle angles");
    if (!rhat.allFinite()) throw ValidationError("non-finite circle density");
}

ReducedSpectralData free_data() { return {}; }

ReducedSpectralData reflectionless_data(const std::vector<std::pair<double, double>>& masses) {
    ReducedSpectralData d;
    for (const auto& [alpha, w] : masses) d.masses.push_back({alpha, w, sigma_sign(alpha)});
    d.validate();
    d.normalize();
    return d;
}

std::vector<std::pair<double, double>> random_reflectionless_masses(std::uint64_t seed, int trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> mag(1.25, 3.0), weight(0.5, 2.0), coin(0.0, 1.0);
    const std::size_t n = static_cast<std::size_t>(trial % 4 + 1);
    for (;;) {
        std::vector<std::pair<double, double>> out;
        while (out.size() < n) {
            const double a = (coin(rng) < 0.5 ? -1.0 : 1.0) * mag(rng);
            bool ok = true;
            for (const auto& m : out) ok = ok && std::abs(m.first - a) >= 0.3;
            if (ok) out.push_back({a, weight(rng)});
        }
        double moment = 0.0;
        for (const auto& m : out) moment += m.first * m.second;
        if (std::abs(moment) >= 0.5) return out;
    }
}

SpectralDataFile parse_spectral_file(const std::string& text) {
    SpectralDataFile f;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = trim(raw);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ParseError(line, "unterminated section header");
            section = s.substr(1, s.size() - 2);
            if (section != "meta" && section != "circle" && section != "line" && section != "masses")
                throw ParseError(line, "unknown section [" + section + "]");
            continue;
        }
        if (section.empty()) throw ParseError(line, "data before any section header");
        if (section == "meta") {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ParseError(line, "expected key = value");
            const std::string key = trim(s.substr(0, eq));
            const std::string val = trim(s.substr(eq + 1));
            if (key == "a") f.a = parse_number(val, line);
            else if (key == "b") f.b = parse_number(val, line);
            else if (key == "comment") f.comment = val;
            else throw ParseError(line, "unknown meta key '" + key + "'");
            continue;
        }
        std::istringstream ls(s);
        std::vector<double> v;
        std::string tok;
        while (ls >> tok) v.push_back(parse_number(tok, line));
        const std::size_t want = section == "circle" ? 3 : section == "line" ? 4 : 2;
        if (v.size() != want)
            throw ParseError(line, "[" + section + "] expects " + std::to_string(want) + " numbers, got " +
                                       std::to_string(v.size()));
        if (section == "circle") f.circle.push_back({v[0], v[1], v[2]});
        else if (section == "line") f.line.push_back({v[0], v[1], v[2], v[3]});
        else f.masses.push_back({v[0], v[1]});
    }
    return f;
}

std::string serialize_spectral_file(const SpectralDataFile& f) {
    std::string out = "[meta]\n";
    if (f.a) out += "a = " + fmt(*f.a) + "\n";
    if (f.b) out += "b = " + fmt(*f.b) + "\n";
    if (!f.comment.empty()) out += "comment = " + f.comment + "\n";
    out += "[circle]\n";
    for (const auto& c : f.circle) out += fmt(c.angle) + " " + fmt(c.re) + " " + fmt(c.im) + "\n";
    out += "[line]\n";
    for (const auto& l : f.line)
        out += fmt(l.node) + " " + fmt(l.weight) + " " + fmt(l.rho_re) + " " + fmt(l.rho_im) + "\n";
    out += "[masses]\n";
    for (const auto& m : f.masses) out += fmt(m.alpha) + " " + fmt(m.weight) + "\n";
    return out;
}

SpectralDataFile read_spectral_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open spectral data file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_spectral_file(ss.str());
}

SpectralDataFile to_spectral_file(const ReducedSpectralData& d) {
    SpectralDataFile f;
    if (d.rhat.size() > 0)
        for (std::size_t j = 0; j < d.circle_angles.size(); ++j)
            f.circle.push_back({d.circle_angles[j], d.rhat[j].real(), d.rhat[j].imag()});
    for (const auto& c : d.coupling) f.line.push_back({c.beta, 0.0, c.rho.real(), c.rho.imag()});
    for (const auto& m : d.masses) f.masses.push_back({m.alpha, m.weight});
    return f;
}

ReducedSpectralData load_spectral_data(const SpectralDataFile& file, const Grid& grid) {
    ReducedSpectralData d;
    d.layout = grid.layout;
    auto add_mass = [&](double alpha, double w) {
        if (std::abs(std::abs(alpha) - 1.0) <= 1e-14) throw ValidationError("mass on unit circle");
        if (alpha == 0.0) throw ValidationError("mass at the origin");
        d.masses.push_back({alpha, w, sigma_sign(alpha)});
    };
    for (const auto& m : file.masses) add_mass(m.alpha, m.weight);
    for (const auto& l : file.line) {
        if (std::abs(std::abs(l.node) - 1.0) <= 1e-14) throw ValidationError("line node on unit circle");
        if (l.weight != 0.0) add_mass(l.node, l.weight);
        if (l.rho_re != 0.0 || l.rho_im != 0.0) d.coupling.push_back({l.node, cplx(l.rho_re, l.rho_im)});
    }
    if (!file.circle.empty()) {
        d.circle_angles = grid.circle_nodes;
        bool aligned = file.circle.size() == grid.circle_nodes.size();
        for (std::size_t j = 0; aligned && j < file.circle.size(); ++j)
            aligned = std::abs(file.circle[j].angle - grid.circle_nodes[j]) <= 1e-12;
        if (aligned) {
            d.rhat.resize(file.circle.size());
            for (std::size_t j = 0; j < file.circle.size(); ++j)
                d.rhat[j] = cplx(file.circle[j].re, file.circle[j].im);
        } else {
            d.rhat = trig_resample(file.circle, grid.circle_nodes);
        }
    }
    d.validate();
    d.normalize();
    return d;
}

}  // namespace toda

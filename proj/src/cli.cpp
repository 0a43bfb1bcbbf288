#include "toda/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "toda/errors.hpp"
#include "toda/evolution.hpp"
#include "toda/operator_lab.hpp"
#include "toda/spectral_direct.hpp"

namespace toda {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// A value together with its field path and source line, for error messages.
struct Field {
    std::string path;
    std::string value;
    int line;
};

double to_double(const Field& f, const std::string& tok) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || end != tok.c_str() + tok.size() || !std::isfinite(v))
        throw ParseError(f.line, f.path + ": malformed number '" + tok + "'");
    return v;
}

long long to_int(const Field& f) {
    char* end = nullptr;
    const long long v = std::strtoll(f.value.c_str(), &end, 10);
    if (f.value.empty() || end != f.value.c_str() + f.value.size())
        throw ParseError(f.line, f.path + ": malformed integer '" + f.value + "'");
    return v;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string tok;
    for (char ch : s + ",") {
        if (ch == ',' || ch == ' ' || ch == '\t') {
            if (!tok.empty()) out.push_back(tok);
            tok.clear();
        } else {
            tok += ch;
        }
    }
    return out;
}

std::vector<double> to_list(const Field& f) {
    std::vector<double> out;
    for (const auto& tok : split_list(f.value)) out.push_back(to_double(f, tok));
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    return s;
}

template <class E>
E lookup(const Field& f, const std::map<std::string, E>& names) {
    const auto it = names.find(f.value);
    if (it == names.end()) throw ParseError(f.line, f.path + ": unknown value '" + f.value + "'");
    return it->second;
}

const std::map<std::string, Mode> kModes{
    {"direct", Mode::Direct}, {"ist", Mode::Ist}, {"compare", Mode::Compare}, {"verify", Mode::Verify}};
const std::map<std::string, SourceKind> kSources{{"free", SourceKind::Free},
                                                 {"reflectionless", SourceKind::Reflectionless},
                                                 {"random", SourceKind::Random},
                                                 {"file", SourceKind::File},
                                                 {"inline", SourceKind::Inline}};
const std::map<std::string, CircleLayout> kLayouts{{"symmetric", CircleLayout::Symmetric},
                                                   {"staggered", CircleLayout::Staggered}};

const char* layout_name(CircleLayout l) { return l == CircleLayout::Symmetric ? "symmetric" : "staggered"; }

void apply(RunConfig& c, const Field& f) {
    const std::string& p = f.path;
    if (p == "run.mode") c.mode = lookup(f, kModes);
    else if (p == "run.k_min") c.k_min = static_cast<int>(to_int(f));
    else if (p == "run.k_max") c.k_max = static_cast<int>(to_int(f));
    else if (p == "run.pad") c.pad = static_cast<int>(to_int(f));
    else if (p == "run.t_end") c.t_end = to_double(f, f.value);
    else if (p == "run.dt") c.dt = to_double(f, f.value);
    else if (p == "run.stride") c.stride = static_cast<int>(to_int(f));
    else if (p == "run.seed") {
        if (f.value.empty() || f.value.find_first_not_of("0123456789") != std::string::npos)
            throw ParseError(f.line, p + ": malformed unsigned integer '" + f.value + "'");
        c.seed = std::strtoull(f.value.c_str(), nullptr, 10);
    }
    else if (p == "grid.circle_count") c.circle_count = static_cast<int>(to_int(f));
    else if (p == "grid.layout") c.layout = lookup(f, kLayouts);
    else if (p == "grid.line_nodes") c.line_nodes = to_list(f);
    else if (p == "tolerance.path") c.path_tolerance = to_double(f, f.value);
    else if (p == "tolerance.compare") c.compare_tolerance = to_double(f, f.value);
    else if (p == "tolerance.operator") c.operator_tolerance = to_double(f, f.value);
    else if (p == "tolerance.residual") c.residual_tolerance = to_double(f, f.value);
    else if (p == "tolerance.drift") c.drift_tolerance = to_double(f, f.value);
    else if (p == "verify.instances") c.verify_instances = static_cast<int>(to_int(f));
    else if (p == "verify.sets") c.verify_sets = static_cast<int>(to_int(f));
    else if (p == "source.kind") c.source = lookup(f, kSources);
    else if (p == "source.masses") {
        c.masses.clear();
        for (const auto& item : split_list(f.value)) {
            const auto colon = item.find(':');
            if (colon == std::string::npos)
                throw ParseError(f.line, p + ": expected alpha:weight, got '" + item + "'");
            c.masses.push_back({to_double(f, item.substr(0, colon)), to_double(f, item.substr(colon + 1))});
        }
    }
    else if (p == "source.file") c.file = f.value;
    else if (p == "source.v0") c.v0 = to_double(f, f.value);
    else if (p == "source.v") c.v = to_list(f);
    else if (p == "source.w") c.w = to_list(f);
    else if (p == "output.dir") c.out_dir = f.value;
    else throw ParseError(f.line, "unknown field " + p);
}

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ValidationError(field + ": " + what);
}

struct Source {
    ReducedSpectralData data;
    Grid grid;
    std::optional<std::pair<double, double>> rescale;  // (a, b) of the original problem
};

Source spectral_source(const RunConfig& c) {
    Source s;
    s.grid = build_grid(c.circle_count, c.line_nodes, c.layout);
    switch (c.source) {
        case SourceKind::Free: s.data = free_data(); break;
        case SourceKind::Reflectionless: s.data = reflectionless_data(c.masses); break;
        case SourceKind::Random: s.data = reflectionless_data(random_reflectionless_masses(c.seed, 0)); break;
        case SourceKind::File: {
            const SpectralDataFile f = read_spectral_file(c.file);
            s.data = load_spectral_data(f, s.grid);
            if (f.a.has_value() != f.b.has_value()) throw ValidationError("source.file: meta needs both a and b");
            if (f.a) s.rescale = std::make_pair(*f.a, *f.b);
            break;
        }
        default: throw ValidationError(std::string("source.kind: ") + source_name(c.source) +
                                       " carries no spectral data");
    }
    return s;
}

Trajectory ist_trajectory(const RunConfig& c, const Source& src, int k_min, int k_max,
                          const std::vector<double>& times) {
    CauchyProblem pb;
    pb.data = src.data;
    pb.grid = src.grid;
    pb.v0 = c.v0;
    pb.k_min = k_min;
    pb.k_max = k_max;
    pb.path_tolerance = c.path_tolerance;
    pb.threads = thread_cap();
    if (!src.rescale) {
        pb.times = times;
        return solve_cauchy(pb);
    }
    const auto [a, b] = *src.rescale;
    const double s = 0.25 * (b - a);
    for (double t : times) pb.times.push_back(s * t);
    return unrescale_solution(solve_cauchy(pb), a, b, times);
}

Trajectory crop(const Trajectory& tr, int k_min, int k_max) {
    Trajectory out = tr;
    out.k_min = k_min;
    out.k_max = k_max;
    const int off = k_min - tr.k_min, nk = k_max - k_min + 1;
    out.x = tr.x.middleCols(off, nk);
    if (tr.has_velocity()) out.xdot = tr.xdot.middleCols(off, nk);
    return out;
}

Trajectory direct_trajectory(const RunConfig& c) {
    LatticeState s;
    s.k_min = c.k_min - c.pad;
    s.k_max = c.k_max + c.pad;
    const int n = s.size();
    if (c.source == SourceKind::Inline) {
        s.x.resize(n);
        s.xdot = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) {
            const int j = std::clamp(i - c.pad, 0, static_cast<int>(c.v.size()) - 1);
            s.x[i] = c.v[j];
            if (i - c.pad == j) s.xdot[i] = c.w[j];
        }
    } else {
        const Source src = spectral_source(c);
        s = ist_trajectory(c, src, s.k_min, s.k_max, {0.0}).state_at(0);
        if (src.rescale) {
            const double slope = 2.0 * std::log(0.25 * (src.rescale->second - src.rescale->first));
            s.boundary = Boundary::frozen(slope, slope);
        }
    }
    return crop(integrate(s, c.t_end, c.dt, c.stride), c.k_min, c.k_max);
}

std::string report_line(const std::string& name, double value, double tol, bool pass) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-22s %-24s %-10.3g %s\n", name.c_str(), fmt(value).c_str(), tol,
                  pass ? "PASS" : "FAIL");
    return buf;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << text;
}

double fd_second(const C2Operator& c2, int k, double t, double h) {
    double x[5];
    for (int j = 0; j < 5; ++j) x[j] = x_solution(c2, k, t + (j - 2) * h);
    return (-x[0] + 16 * x[1] - 30 * x[2] + 16 * x[3] - x[4]) / (12 * h * h);
}

double fd_first(const C2Operator& c2, int k, double t, double h) {
    return (x_solution(c2, k, t - 2 * h) - 8 * x_solution(c2, k, t - h) + 8 * x_solution(c2, k, t + h) -
            x_solution(c2, k, t + 2 * h)) /
           (12 * h);
}

InvariantReport one_set(std::uint64_t seed, int trial) {
    const ReducedSpectralData data = reflectionless_data(random_reflectionless_masses(seed, trial));
    const Grid grid = build_grid(4, {});
    const C2Operator c2 = assemble_c2(data, grid);
    InvariantReport r;
    r.sets = 1;
    const double h = 1e-3;
    for (double t : {0.0, 0.5, 1.0, 2.0}) {
        const Slice g = gamma_path_slice(c2, -11, 11, t);
        const Slice e = evolved_path_slice(data, grid, -11, 11, t);
        const PathDiscrepancy d = compare_paths(g, e);
        r.max_path_defect = std::max({r.max_path_defect, d.a, d.b2});
        for (int k = -10; k <= 10; ++k) {
            const int i = k + 11;
            const double force = std::exp(g.x[i + 1] - g.x[i]) - std::exp(g.x[i] - g.x[i - 1]);
            r.max_toda_residual = std::max(r.max_toda_residual, std::abs(fd_second(c2, k, t, h) - force));
            r.max_velocity_defect = std::max(r.max_velocity_defect, std::abs(fd_first(c2, k, t, h) - e.a[i]));
            if (t == 0.0) {
                const double b2 = e.b2[i - 1];
                r.max_initial_b2 =
                    std::max(r.max_initial_b2, std::abs(std::exp(g.x[i] - g.x[i - 1]) - b2) / b2);
                r.max_initial_a = std::max(r.max_initial_a, std::abs(g.a[i] - e.a[i]));
            }
        }
    }
    CauchyProblem pb;
    pb.data = data;
    pb.grid = grid;
    pb.k_min = -60;
    pb.k_max = 60;
    pb.times = sample_times(5.0, 0.05, 1);
    const Trajectory tr = solve_cauchy(pb);
    const TraceInvariants i0 = trace_invariants(flaschka(tr.state_at(0)));
    for (std::size_t q = 1; q < tr.t.size(); ++q) {
        const TraceInvariants iq = trace_invariants(flaschka(tr.state_at(static_cast<int>(q))));
        r.max_trace_drift = std::max(
            {r.max_trace_drift, std::abs(iq.momentum - i0.momentum), std::abs(iq.quadratic - i0.quadratic)});
    }
    return r;
}

std::string py_list(const std::vector<std::string>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::string("r\"") + v[i] + "\"";
    return s + "]";
}

}  // namespace

const char* mode_name(Mode m) {
    for (const auto& [name, mode] : kModes)
        if (mode == m) return name.c_str();
    return "?";
}

Mode parse_mode(const std::string& name) {
    const auto it = kModes.find(name);
    if (it == kModes.end()) throw ValidationError("mode: unknown value '" + name + "'");
    return it->second;
}

const char* source_name(SourceKind s) {
    for (const auto& [name, kind] : kSources)
        if (kind == s) return name.c_str();
    return "none";
}

void RunConfig::validate() const {
    const std::string m = mode_name(mode);
    require(k_min <= k_max, "run.k_min", "must not exceed run.k_max");
    require(pad >= 0, "run.pad", "must be >= 0");
    require(t_end > 0.0, "run.t_end", "must be positive");
    require(dt > 0.0, "run.dt", "must be positive");
    require(stride >= 1, "run.stride", "must be >= 1");
    require(circle_count >= 4 && circle_count % 2 == 0, "grid.circle_count", "must be even and >= 4");
    require(path_tolerance > 0.0, "tolerance.path", "must be positive");
    require(compare_tolerance > 0.0, "tolerance.compare", "must be positive");
    require(operator_tolerance > 0.0, "tolerance.operator", "must be positive");
    require(residual_tolerance > 0.0, "tolerance.residual", "must be positive");
    require(drift_tolerance > 0.0, "tolerance.drift", "must be positive");
    require(verify_instances >= 1, "verify.instances", "must be >= 1");
    require(verify_sets >= 1, "verify.sets", "must be >= 1");
    require(!out_dir.empty(), "output.dir", "must not be empty");
    if (mode == Mode::Verify) return;

    require(source != SourceKind::None, "source.kind", "required for " + m + " mode");
    if (mode != Mode::Direct)
        require(source != SourceKind::Inline, "source.kind",
                "inline initial data carry no spectral source; " + m +
                    " mode needs free, reflectionless, random or file");
    if (source == SourceKind::Reflectionless)
        require(!masses.empty(), "source.masses", "required for source.kind = reflectionless");
    if (source == SourceKind::File) require(!file.empty(), "source.file", "required for source.kind = file");
    if (source == SourceKind::Inline) {
        const std::size_t n = static_cast<std::size_t>(k_max - k_min + 1);
        require(v.size() == n, "source.v", "expected " + std::to_string(n) + " values, got " + std::to_string(v.size()));
        require(w.size() == n, "source.w", "expected " + std::to_string(n) + " values, got " + std::to_string(w.size()));
    }
    if (mode != Mode::Ist) require(k_max - k_min + 1 + 2 * pad >= 3, "run.pad", "direct window needs >= 3 sites");
}

RunConfig parse_config(const std::string& text, std::optional<Mode> mode) {
    static const std::set<std::string> sections{"run", "grid", "tolerance", "verify", "source", "output"};
    RunConfig c;
    std::istringstream in(text);
    std::string raw, section;
    std::set<std::string> seen;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = trim(raw);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ParseError(line, "unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (!sections.count(section)) throw ParseError(line, "unknown section [" + section + "]");
            continue;
        }
        if (section.empty()) throw ParseError(line, "field before any section header");
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ParseError(line, "expected key = value");
        const Field f{section + "." + trim(s.substr(0, eq)), trim(s.substr(eq + 1)), line};
        if (!seen.insert(f.path).second) throw ParseError(line, "duplicate field " + f.path);
        apply(c, f);
    }
    if (mode) c.mode = *mode;
    c.validate();
    return c;
}

RunConfig read_config(const std::string& path, std::optional<Mode> mode) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), mode);
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream o;
    o << "[run]\nmode = " << mode_name(c.mode) << "\nk_min = " << c.k_min << "\nk_max = " << c.k_max
      << "\npad = " << c.pad << "\nt_end = " << fmt(c.t_end) << "\ndt = " << fmt(c.dt) << "\nstride = " << c.stride
      << "\nseed = " << c.seed << "\n";
    o << "[grid]\ncircle_count = " << c.circle_count << "\nlayout = " << layout_name(c.layout)
      << "\nline_nodes = " << join(c.line_nodes) << "\n";
    o << "[tolerance]\npath = " << fmt(c.path_tolerance) << "\ncompare = " << fmt(c.compare_tolerance)
      << "\noperator = " << fmt(c.operator_tolerance) << "\nresidual = " << fmt(c.residual_tolerance)
      << "\ndrift = " << fmt(c.drift_tolerance) << "\n";
    o << "[verify]\ninstances = " << c.verify_instances << "\nsets = " << c.verify_sets << "\n";
    o << "[source]\n";
    if (c.source != SourceKind::None) o << "kind = " << source_name(c.source) << "\n";
    o << "masses = ";
    for (std::size_t i = 0; i < c.masses.size(); ++i)
        o << (i ? ", " : "") << fmt(c.masses[i].first) << ":" << fmt(c.masses[i].second);
    o << "\nfile = " << c.file << "\nv0 = " << fmt(c.v0) << "\nv = " << join(c.v) << "\nw = " << join(c.w) << "\n";
    o << "[output]\ndir = " << c.out_dir << "\n";
    return o.str();
}

std::vector<double> sample_times(double t_end, double dt, int stride) {
    if (!(dt > 0.0) || stride < 1) throw ValidationError("sample_times: need dt > 0 and stride >= 1");
    const long steps = std::max(1L, static_cast<long>(std::ceil(std::abs(t_end) / dt - 1e-9)));
    const double h = t_end / steps;
    std::vector<double> t;
    for (long n = 0; n <= steps; ++n)
        if (n % stride == 0 || n == steps) t.push_back(n == steps ? t_end : n * h);
    return t;
}

std::vector<DeviationRow> deviation_report(const Trajectory& a, const Trajectory& b) {
    const int lo = std::max(a.k_min, b.k_min), hi = std::min(a.k_max, b.k_max);
    if (lo > hi) throw ValidationError("deviation_report: trajectories share no sites");
    std::vector<DeviationRow> rows;
    std::size_t j = 0;
    for (std::size_t i = 0; i < a.t.size(); ++i) {
        const double tol = 1e-12 * std::max(1.0, std::abs(a.t[i]));
        while (j < b.t.size() && b.t[j] < a.t[i] - tol) ++j;
        if (j == b.t.size()) break;
        if (std::abs(b.t[j] - a.t[i]) > tol) continue;
        DeviationRow r{a.t[i], 0.0, 0.0};
        for (int k = lo; k <= hi; ++k) {
            const double d = std::abs(a.x(i, k - a.k_min) - b.x(j, k - b.k_min));
            r.sup_dx = std::max(r.sup_dx, d);
            r.l2_dx += d * d;
        }
        r.l2_dx = std::sqrt(r.l2_dx);
        rows.push_back(r);
    }
    if (rows.empty()) throw ValidationError("deviation_report: trajectories share no sample times");
    return rows;
}

void write_deviation_csv(const std::string& path, const std::vector<DeviationRow>& rows) {
    std::string s = "t,sup_dx,l2_dx\n";
    for (const auto& r : rows) s += fmt(r.t) + "," + fmt(r.sup_dx) + "," + fmt(r.l2_dx) + "\n";
    write_file(path, s);
}

InvariantReport run_invariant_suite(std::uint64_t seed, int sets, unsigned threads) {
    std::vector<InvariantReport> parts(sets);
    std::vector<std::exception_ptr> errors(sets);
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, sets));
    auto work = [&](unsigned w) {
        for (int s = static_cast<int>(w); s < sets; s += workers) {
            try {
                parts[s] = one_set(seed, s);
            } catch (...) {
                errors[s] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work, w);
    work(0);
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    InvariantReport r;
    for (const auto& p : parts) {
        r.sets += p.sets;
        r.max_toda_residual = std::max(r.max_toda_residual, p.max_toda_residual);
        r.max_velocity_defect = std::max(r.max_velocity_defect, p.max_velocity_defect);
        r.max_path_defect = std::max(r.max_path_defect, p.max_path_defect);
        r.max_initial_b2 = std::max(r.max_initial_b2, p.max_initial_b2);
        r.max_initial_a = std::max(r.max_initial_a, p.max_initial_a);
        r.max_trace_drift = std::max(r.max_trace_drift, p.max_trace_drift);
    }
    return r;
}

void emit_plot_script(const std::vector<std::string>& trajectories, const std::string& deviation,
                      const std::string& script_path) {
    if (trajectories.empty()) throw ValidationError("plot: no trajectory files");
    const fs::path dir = fs::absolute(script_path).parent_path();
    auto rel = [&](const std::string& p) {
        if (!fs::exists(p)) throw ValidationError("plot: missing file " + p);
        return fs::relative(fs::absolute(p), dir).generic_string();
    };
    std::vector<std::string> names;
    for (const auto& p : trajectories) {
        std::ifstream in(p);
        std::string header, first;
        if (in && std::getline(in, header) && !std::getline(in, first))
            throw ValidationError("plot: empty k range in " + p);
        const Trajectory tr = read_trajectory_csv(p);
        if (tr.sites() < 1) throw ValidationError("plot: empty k range in " + p);
        names.push_back(rel(p));
    }
    const std::string dev = deviation.empty() ? "None" : "r\"" + rel(deviation) + "\"";

    std::ostringstream py;
    py << "#!/usr/bin/env python3\n"
          "import csv\nimport os\nfrom collections import defaultdict\n\n"
          "import matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n"
          "HERE = os.path.dirname(os.path.abspath(__file__))\n"
       << "TRAJECTORIES = " << py_list(names) << "\n"
       << "DEVIATION = " << dev << "\n"
       << "SPACING = 0.5\n\n\n"
          "def rows(name):\n"
          "    with open(os.path.join(HERE, name), newline=\"\") as fh:\n"
          "        return list(csv.DictReader(fh))\n\n\n"
          "def curves(name):\n"
          "    out = defaultdict(lambda: ([], []))\n"
          "    for r in rows(name):\n"
          "        t, x = out[int(r[\"k\"])]\n"
          "        t.append(float(r[\"t\"]))\n"
          "        x.append(float(r[\"x\"]))\n"
          "    return out\n\n\n"
          "panels = 2 if DEVIATION else 1\n"
          "fig, axes = plt.subplots(panels, 1, figsize=(8, 5 * panels), squeeze=False)\n"
          "ax = axes[0][0]\n"
          "styles = [\"-\", \"--\", \":\"]\n"
          "for n, name in enumerate(TRAJECTORIES):\n"
          "    data = curves(name)\n"
          "    k0 = min(data)\n"
          "    for k in sorted(data):\n"
          "        t, x = data[k]\n"
          "        ax.plot(t, [v + SPACING * (k - k0) for v in x], styles[n % len(styles)], lw=0.8,\n"
          "                color=\"C%d\" % n, label=name if k == k0 else None)\n"
          "ax.set_xlabel(\"t\")\n"
          "ax.set_ylabel(\"x_k(t) + %g (k - k_min)\" % SPACING)\n"
          "ax.legend()\n"
          "if DEVIATION:\n"
          "    d = rows(DEVIATION)\n"
          "    t = [float(r[\"t\"]) for r in d]\n"
          "    ax = axes[1][0]\n"
          "    for key in (\"sup_dx\", \"l2_dx\"):\n"
          "        ax.semilogy(t, [max(float(r[key]), 1e-18) for r in d], label=key)\n"
          "    ax.set_xlabel(\"t\")\n"
          "    ax.set_ylabel(\"deviation\")\n"
          "    ax.legend()\n"
          "fig.tight_layout()\n"
          "fig.savefig(os.path.join(HERE, \"plot.png\"), dpi=120)\n";
    write_file(script_path, py.str());
}

unsigned thread_cap() {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const char* env = std::getenv("TODA_THREADS");
    if (!env || !*env) return hw;
    const std::string s = env;
    if (s.find_first_not_of("0123456789") != std::string::npos || std::stoul(s) == 0)
        throw ValidationError("TODA_THREADS: expected a positive integer, got '" + s + "'");
    return static_cast<unsigned>(std::min<unsigned long>(std::stoul(s), 1024));
}

int exit_code(const std::exception& e) {
    if (dynamic_cast<const ToleranceError*>(&e)) return 4;
    if (dynamic_cast<const ValidationError*>(&e)) return 2;
    return 3;
}

int run(const RunConfig& c, std::ostream& log) {
    c.validate();
    const fs::path out = c.out_dir;
    fs::create_directories(out);
    write_file(out / "run.cfg", serialize_config(c));
    const std::string direct_csv = (out / "trajectory_direct.csv").string();
    const std::string ist_csv = (out / "trajectory_ist.csv").string();
    const std::string dev_csv = (out / "deviation.csv").string();
    const std::string plot = (out / "plot.py").string();

    if (c.mode == Mode::Verify) {
        const LabReport lab = run_operator_suite(c.seed, c.verify_instances);
        const InvariantReport inv = run_invariant_suite(c.seed, c.verify_sets, thread_cap());
        const double ot = c.operator_tolerance;
        struct Item { std::string name; double value, tol; bool pass; };
        const std::vector<Item> items{
            {"gamma_ode", lab.max_ode, ot, lab.max_ode <= ot},
            {"lemma1_first", lab.max_lemma1_first, ot, lab.max_lemma1_first <= ot},
            {"lemma1", lab.max_lemma1, ot, lab.max_lemma1 <= ot},
            {"group_property", lab.max_group, ot, lab.max_group <= ot},
            {"projection_identity", lab.max_identity, ot, lab.max_identity <= ot},
            {"projection", lab.max_projection, ot, lab.max_projection <= ot},
            {"scalar_toda", lab.max_scalar_toda, ot, lab.max_scalar_toda <= ot},
            {"negative_control_min", lab.min_negative_control, 1e-3, lab.min_negative_control >= 1e-3},
            {"toda_residual", inv.max_toda_residual, c.residual_tolerance,
             inv.max_toda_residual <= c.residual_tolerance},
            {"velocity_identity", inv.max_velocity_defect, c.residual_tolerance,
             inv.max_velocity_defect <= c.residual_tolerance},
            {"path_equivalence", inv.max_path_defect, c.path_tolerance, inv.max_path_defect <= c.path_tolerance},
            {"initial_b2", inv.max_initial_b2, 1e-10, inv.max_initial_b2 <= 1e-10},
            {"initial_velocity", inv.max_initial_a, 1e-8, inv.max_initial_a <= 1e-8},
            {"trace_drift", inv.max_trace_drift, c.drift_tolerance, inv.max_trace_drift <= c.drift_tolerance},
        };
        std::string report = "# operator instances " + std::to_string(lab.instances) + ", data sets " +
                             std::to_string(inv.sets) + ", seed " + std::to_string(c.seed) + "\n";
        bool ok = true;
        for (const auto& it : items) {
            report += report_line(it.name, it.value, it.tol, it.pass);
            ok = ok && it.pass;
        }
        write_file(out / "verify_report.txt", report);
        log << report;
        return ok ? 0 : 4;
    }

    const std::vector<double> times = sample_times(c.t_end, c.dt, c.stride);
    std::optional<Trajectory> direct, ist;
    if (c.mode == Mode::Direct || c.mode == Mode::Compare) {
        direct = direct_trajectory(c);
        write_trajectory_csv(direct_csv, *direct);
        log << "wrote " << direct_csv << " (" << direct->t.size() << " samples)\n";
    }
    if (c.mode == Mode::Ist || c.mode == Mode::Compare) {
        ist = ist_trajectory(c, spectral_source(c), c.k_min, c.k_max, times);
        write_trajectory_csv(ist_csv, *ist, true);
        log << "wrote " << ist_csv << " (" << ist->t.size() << " samples)\n";
    }
    if (c.mode != Mode::Compare) {
        emit_plot_script({direct ? direct_csv : ist_csv}, "", plot);
        return 0;
    }
    const std::vector<DeviationRow> dev = deviation_report(*direct, *ist);
    write_deviation_csv(dev_csv, dev);
    emit_plot_script({direct_csv, ist_csv}, dev_csv, plot);
    double sup = 0.0;
    for (const auto& r : dev) sup = std::max(sup, r.sup_dx);
    log << "max sup deviation " << fmt(sup) << " (tolerance " << fmt(c.compare_tolerance) << ")\n";
    return sup <= c.compare_tolerance ? 0 : 4;
}

}  // namespace toda

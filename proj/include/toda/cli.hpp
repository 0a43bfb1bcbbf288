#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "toda/core.hpp"
#include "toda/direct_ode.hpp"

namespace toda {

enum class Mode { Direct, Ist, Compare, Verify };
enum class SourceKind { None, Free, Reflectionless, Random, File, Inline };

const char* mode_name(Mode m);
const char* source_name(SourceKind s);
Mode parse_mode(const std::string& name);

struct RunConfig {
    Mode mode = Mode::Direct;
    int k_min = -20;
    int k_max = 20;
    int pad = 40;  // extra sites on each side of the direct integrator window
    double t_end = 5.0;
    double dt = 1e-3;
    int stride = 100;
    std::uint64_t seed = 0;

    int circle_count = 128;
    CircleLayout layout = CircleLayout::Staggered;
    std::vector<double> line_nodes;

    double path_tolerance = 1e-8;
    double compare_tolerance = 1e-5;
    double operator_tolerance = 1e-10;
    double residual_tolerance = 1e-7;
    double drift_tolerance = 1e-7;
    int verify_instances = 100;
    int verify_sets = 20;

    SourceKind source = SourceKind::None;
    std::vector<std::pair<double, double>> masses;  // (alpha, weight)
    std::string file;
    double v0 = 0.0;
    std::vector<double> v;  // inline positions on [k_min, k_max]
    std::vector<double> w;  // inline velocities on [k_min, k_max]

    std::string out_dir = ".";

    bool operator==(const RunConfig&) const = default;
    void validate() const;
};

// Sections [run], [grid], [tolerance], [verify], [source], [output] of
// `key = value` lines; `#` starts a comment line. Errors name the field path,
// e.g. "source.kind". A given `mode` replaces run.mode before validation.
RunConfig parse_config(const std::string& text, std::optional<Mode> mode = {});
RunConfig read_config(const std::string& path, std::optional<Mode> mode = {});
std::string serialize_config(const RunConfig& config);

// Sample times shared by the integrator and the inverse-spectral solver.
std::vector<double> sample_times(double t_end, double dt, int stride);

struct DeviationRow {
    double t = 0.0;
    double sup_dx = 0.0;
    double l2_dx = 0.0;
};

// Per common sample time, over the common sites of the two trajectories.
std::vector<DeviationRow> deviation_report(const Trajectory& a, const Trajectory& b);
void write_deviation_csv(const std::string& path, const std::vector<DeviationRow>& rows);

struct InvariantReport {
    int sets = 0;
    double max_toda_residual = 0.0;
    double max_velocity_defect = 0.0;
    double max_path_defect = 0.0;
    double max_initial_b2 = 0.0;
    double max_initial_a = 0.0;
    double max_trace_drift = 0.0;
};

// Seeded reflectionless data sets (1-4 masses) checked on k in [-10, 10],
// t in {0, 0.5, 1, 2}; trace drift on [-60, 60] over t in [0, 5].
InvariantReport run_invariant_suite(std::uint64_t seed, int sets, unsigned threads = 1);

// Writes a matplotlib script rendering x_k(t) for each trajectory and, when
// `deviation` is non-empty, a second panel with sup/L2 deviation against t.
void emit_plot_script(const std::vector<std::string>& trajectories, const std::string& deviation,
                      const std::string& script_path);

// Parallelism cap from TODA_THREADS (unset: hardware concurrency).
unsigned thread_cap();

// Exit status: 0 ok, 2 validation, 3 numerical failure, 4 tolerance breach.
int exit_code(const std::exception& e);

// Executes the configured mode, writing artifacts to out_dir and a summary to
// `log`. Module errors propagate; tolerance breaches detected by the run itself
// return 4 after the artifacts are written.
int run(const RunConfig& config, std::ostream& log);

}  // namespace toda

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "toda/cli.hpp"
#include "toda/errors.hpp"

using namespace toda;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string error_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("toda_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("minimal direct config takes defaults") {
    const RunConfig c = parse_config("[run]\nmode = direct\n[source]\nkind = free\n");
    CHECK(c.mode == Mode::Direct);
    CHECK(c.circle_count == 128);
    CHECK(c.dt == 1e-3);
    CHECK(c.path_tolerance == 1e-8);
    CHECK(c.k_min == -20);
    CHECK(c.k_max == 20);
    CHECK(c.out_dir == ".");
}

TEST_CASE("ist config without a spectral source names the field") {
    CHECK(error_of("[run]\nmode = ist\n").find("source.kind") == 0);
    CHECK(error_of("[run]\nmode = ist\n[source]\nkind = inline\n").find("source.kind") == 0);
    CHECK(error_of("[run]\nmode = ist\n[source]\nkind = reflectionless\n").find("source.masses") == 0);
    CHECK(error_of("[run]\nmode = compare\n[source]\nkind = file\n").find("source.file") == 0);
}

TEST_CASE("field errors") {
    CHECK(error_of("[run]\nmode = sideways\n").find("run.mode") != std::string::npos);
    CHECK(error_of("[run]\nk_min = 3\nk_max = 1\n[source]\nkind = free\n").find("run.k_min") == 0);
    CHECK(error_of("[tolerance]\npath = -1\n[source]\nkind = free\n").find("tolerance.path") == 0);
    CHECK(error_of("[grid]\ncircle_count = 7\n[source]\nkind = free\n").find("grid.circle_count") == 0);
    CHECK(error_of("[run]\ndt = fast\n").find("line 2: run.dt") == 0);
    CHECK(error_of("[run]\nspeed = 1\n").find("line 2: unknown field run.speed") == 0);
    CHECK(error_of("[run]\nstride = 2\nstride = 3\n").find("duplicate field run.stride") != std::string::npos);
    CHECK(error_of("mode = direct\n").find("line 1") == 0);
    CHECK(error_of("[run]\nmode = direct\n[source]\nkind = inline\nv = 1, 2\nw = 0, 0\n").find("source.v") == 0);
    CHECK(error_of("[source]\nkind = reflectionless\nmasses = 2\n").find("source.masses") != std::string::npos);
}

TEST_CASE("verify mode needs no source") { CHECK_NOTHROW(parse_config("[run]\nmode = verify\n")); }

TEST_CASE("command-line mode replaces the declared mode") {
    const RunConfig c = parse_config("[run]\nmode = ist\n", Mode::Verify);
    CHECK(c.mode == Mode::Verify);
    CHECK_THROWS_AS(parse_config("[run]\nmode = verify\n", Mode::Ist), ValidationError);
    CHECK(parse_mode("compare") == Mode::Compare);
    CHECK_THROWS_AS(parse_mode("nope"), ValidationError);
}

TEST_CASE("serialize then parse round trip") {
    const std::string doc =
        "# comment\n"
        "[run]\nmode = compare\nk_min = -7\nk_max = 9\nt_end = 2.5\ndt = 0.002\nstride = 7\nseed = 18446744073709551615\n"
        "[grid]\ncircle_count = 64\nlayout = symmetric\nline_nodes = 2, 0.5, -3\n"
        "[tolerance]\ncompare = 3e-6\n"
        "[source]\nkind = reflectionless\nmasses = -3:0.5, 2.5:1\nv0 = 0.1\n"
        "[output]\ndir = out/run one\n";
    const RunConfig c = parse_config(doc);
    CHECK(c.seed == 18446744073709551615ULL);
    CHECK(c.masses.size() == 2);
    CHECK(c.out_dir == "out/run one");
    const std::string s = serialize_config(c);
    CHECK(parse_config(s) == c);
    CHECK(serialize_config(parse_config(s)) == s);

    RunConfig inl = parse_config("[run]\nk_min = 0\nk_max = 2\n[source]\nkind = inline\nv = 0.1, 0.2, 0.3\nw = 1e-3, 0, -0.1\n");
    CHECK(parse_config(serialize_config(inl)) == inl);
}

TEST_CASE("sample times") {
    const auto t = sample_times(1.0, 0.1, 3);
    CHECK(t.size() == 5);
    CHECK(t.front() == 0.0);
    CHECK(t.back() == 1.0);
    CHECK(t[1] == doctest::Approx(0.3));
    CHECK_THROWS_AS(sample_times(1.0, 0.0, 1), ValidationError);
}

TEST_CASE("exit codes") {
    CHECK(exit_code(ValidationError("x")) == 2);
    CHECK(exit_code(ParseError(3, "x")) == 2);
    CHECK(exit_code(DomainError("x")) == 2);
    CHECK(exit_code(NumericalError("x")) == 3);
    CHECK(exit_code(SingularMatrixError("x")) == 3);
    CHECK(exit_code(ToleranceError("x")) == 4);
}

TEST_CASE("thread cap from the environment") {
    setenv("TODA_THREADS", "3", 1);
    CHECK(thread_cap() == 3);
    setenv("TODA_THREADS", "zero", 1);
    CHECK_THROWS_AS(thread_cap(), ValidationError);
    unsetenv("TODA_THREADS");
    CHECK(thread_cap() >= 1);
}

TEST_CASE("free-lattice compare run") {
    const fs::path dir = scratch("free");
    RunConfig c = parse_config("[run]\nmode = compare\nt_end = 2\n[source]\nkind = free\nv0 = 1.5\n");
    c.out_dir = dir.string();
    std::ostringstream log;
    CHECK(run(c, log) == 0);
    const Trajectory d = read_trajectory_csv((dir / "trajectory_direct.csv").string());
    CHECK((d.x.array() - 1.5).abs().maxCoeff() < 1e-12);
    std::ifstream dev(dir / "deviation.csv");
    std::string line;
    std::getline(dev, line);
    CHECK(line == "t,sup_dx,l2_dx");
    while (std::getline(dev, line)) {
        const double sup = std::stod(line.substr(line.find(',') + 1));
        CHECK(sup <= 1e-12);
    }
    CHECK(fs::exists(dir / "plot.py"));
    CHECK(fs::exists(dir / "run.cfg"));
    fs::remove_all(dir);
}

TEST_CASE("one-soliton compare run and independent deviation") {
    const fs::path dir = scratch("one");
    RunConfig c = parse_config("[run]\nmode = compare\n[source]\nkind = reflectionless\nmasses = 2:1\n");
    c.out_dir = dir.string();
    std::ostringstream log;
    CHECK(run(c, log) == 0);

    const Trajectory d = read_trajectory_csv((dir / "trajectory_direct.csv").string());
    const Trajectory i = read_trajectory_csv((dir / "trajectory_ist.csv").string());
    CHECK(i.provenance == Provenance::InverseSpectral);
    CHECK(d.provenance == Provenance::DirectODE);
    REQUIRE(d.t.size() == 51);
    std::ifstream dev(dir / "deviation.csv");
    std::string line;
    std::getline(dev, line);
    for (std::size_t q = 0; q < d.t.size(); ++q) {
        REQUIRE(std::getline(dev, line));
        double sup = 0.0, l2 = 0.0;
        for (int k = 0; k < d.sites(); ++k) {
            const double dx = std::abs(d.x(q, k) - i.x(q, k));
            sup = std::max(sup, dx);
            l2 += dx * dx;
        }
        std::stringstream ss(line);
        std::string t, s, l;
        std::getline(ss, t, ',');
        std::getline(ss, s, ',');
        std::getline(ss, l, ',');
        CHECK(std::stod(s) == sup);
        CHECK(std::stod(l) == doctest::Approx(std::sqrt(l2)).epsilon(1e-14));
        CHECK(sup <= 1e-5);
    }
    fs::remove_all(dir);
}

TEST_CASE("identical config gives byte-identical outputs") {
    const std::string doc = "[run]\nmode = compare\nt_end = 1\nstride = 50\n[source]\nkind = random\n";
    std::string first[3];
    for (int rep = 0; rep < 2; ++rep) {
        const fs::path dir = scratch("det" + std::to_string(rep));
        RunConfig c = parse_config(doc);
        c.seed = 99;
        c.out_dir = dir.string();
        setenv("TODA_THREADS", rep == 0 ? "1" : "4", 1);
        std::ostringstream log;
        CHECK(run(c, log) == 0);
        const std::string files[3] = {slurp(dir / "trajectory_direct.csv"), slurp(dir / "trajectory_ist.csv"),
                                      slurp(dir / "deviation.csv")};
        for (int f = 0; f < 3; ++f) {
            if (rep == 0) first[f] = files[f];
            else CHECK(files[f] == first[f]);
        }
        fs::remove_all(dir);
    }
    unsetenv("TODA_THREADS");
}

TEST_CASE("tolerance breach returns 4 after writing artifacts") {
    const fs::path dir = scratch("breach");
    RunConfig c = parse_config("[run]\nmode = compare\nt_end = 1\n[tolerance]\ncompare = 1e-15\n"
                               "[source]\nkind = reflectionless\nmasses = 2:1\n");
    c.out_dir = dir.string();
    std::ostringstream log;
    CHECK(run(c, log) == 4);
    CHECK(fs::exists(dir / "deviation.csv"));
    fs::remove_all(dir);
}

TEST_CASE("inline direct run") {
    const fs::path dir = scratch("inline");
    RunConfig c = parse_config("[run]\nmode = direct\nk_min = -2\nk_max = 2\nt_end = 1\nstride = 1000\n"
                               "[source]\nkind = inline\nv = 0, 0, 0, 0, 0\nw = 0.5, 0.5, 0.5, 0.5, 0.5\n");
    c.pad = 0;
    c.out_dir = dir.string();
    std::ostringstream log;
    CHECK(run(c, log) == 0);
    const Trajectory d = read_trajectory_csv((dir / "trajectory_direct.csv").string());
    CHECK((d.x.row(1).array() - 0.5).abs().maxCoeff() < 1e-13);
    fs::remove_all(dir);
}

TEST_CASE("rescaled spectral file") {
    const fs::path dir = scratch("rescaled");
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "data.spec");
        f << "[meta]\na = -1\nb = 3\n[masses]\n2 1\n";
    }
    RunConfig c = parse_config("[run]\nmode = compare\nt_end = 2\n[source]\nkind = file\nfile = " +
                               (dir / "data.spec").string() + "\n");
    c.out_dir = dir.string();
    std::ostringstream log;
    CHECK(run(c, log) == 0);
    const Trajectory i = read_trajectory_csv((dir / "trajectory_ist.csv").string());
    // background velocity (a + b)/2 = 1 far from the soliton
    CHECK(i.xdot(i.t.size() - 1, 0) == doctest::Approx(1.0).epsilon(1e-6));
    fs::remove_all(dir);
}

TEST_CASE("verify with default seeds passes") {
    const fs::path dir = scratch("verify");
    RunConfig c = parse_config("[run]\nmode = verify\n");
    c.out_dir = dir.string();
    std::ostringstream log;
    CHECK(run(c, log) == 0);
    const std::string report = slurp(dir / "verify_report.txt");
    CHECK(report.find("FAIL") == std::string::npos);
    CHECK(report.find("trace_drift") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("plot script panels and errors") {
    const fs::path dir = scratch("plot");
    RunConfig c = parse_config("[run]\nmode = ist\nt_end = 0.5\nstride = 100\nk_min = -2\nk_max = 2\n"
                               "[source]\nkind = reflectionless\nmasses = 2:1\n");
    c.out_dir = dir.string();
    std::ostringstream log;
    REQUIRE(run(c, log) == 0);
    const std::string one = slurp(dir / "plot.py");
    CHECK(one.find("DEVIATION = None") != std::string::npos);
    CHECK(one.find("trajectory_ist.csv") != std::string::npos);

    const std::string traj = (dir / "trajectory_ist.csv").string();
    {
        std::ofstream dev(dir / "deviation.csv");
        dev << "t,sup_dx,l2_dx\n0,0,0\n";
    }
    emit_plot_script({traj, traj}, (dir / "deviation.csv").string(), (dir / "two.py").string());
    const std::string two = slurp(dir / "two.py");
    CHECK(two.find("DEVIATION = r\"deviation.csv\"") != std::string::npos);
    CHECK(two.find("panels = 2 if DEVIATION else 1") != std::string::npos);

    {
        std::ofstream empty(dir / "empty.csv");
        empty << "t,k,x,xdot\n";
    }
    CHECK_THROWS_AS(emit_plot_script({(dir / "empty.csv").string()}, "", (dir / "e.py").string()), ValidationError);
    CHECK_THROWS_AS(emit_plot_script({(dir / "missing.csv").string()}, "", (dir / "m.py").string()), ValidationError);
    CHECK_THROWS_AS(emit_plot_script({}, "", (dir / "n.py").string()), ValidationError);
    fs::remove_all(dir);
}

}

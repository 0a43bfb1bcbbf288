#include <cmath>
#include <cstdio>
#include <sstream>

#include "doctest.h"
#include "toda/direct_ode.hpp"

using namespace toda;

namespace {

LatticeState make_state(int k_min, int k_max, double (*x)(int), double (*v)(int)) {
    LatticeState s;
    s.k_min = k_min;
    s.k_max = k_max;
    s.x.resize(s.size());
    s.xdot.resize(s.size());
    for (int i = 0; i < s.size(); ++i) {
        s.x[i] = x(k_min + i);
        s.xdot[i] = v(k_min + i);
    }
    return s;
}

// Compact bump on a free background.
LatticeState bump(int k_min, int k_max) {
    return make_state(
        k_min, k_max, [](int k) { return std::abs(k) <= 3 ? 0.3 * std::cos(0.5 * k) : 0.0; },
        [](int k) { return std::abs(k) <= 2 ? 0.2 * k : 0.0; });
}

}  // namespace

TEST_SUITE("direct_ode") {

TEST_CASE("force vanishes on constant and linear profiles") {
    LatticeState c = make_state(-4, 4, [](int) { return 2.5; }, [](int) { return 0.0; });
    CHECK(toda_rhs(c).cwiseAbs().maxCoeff() == 0.0);
    LatticeState lin = make_state(-4, 4, [](int k) { return 0.7 * k; }, [](int) { return 0.0; });
    const Eigen::VectorXd f = toda_rhs(lin);
    for (int i = 1; i + 1 < lin.size(); ++i) CHECK(std::abs(f[i]) < 1e-15);
}

TEST_CASE("force at a single displaced site") {
    LatticeState s = make_state(-1, 1, [](int k) { return k == 0 ? 1.0 : 0.0; }, [](int) { return 0.0; });
    CHECK(toda_rhs(s)[1] == doctest::Approx(std::exp(-1.0) - std::exp(1.0)).epsilon(1e-15));
}

TEST_CASE("force rejects tiny windows and overflow") {
    LatticeState s = make_state(0, 1, [](int) { return 0.0; }, [](int) { return 0.0; });
    CHECK_THROWS_AS(toda_rhs(s), ValidationError);
    LatticeState big = make_state(-1, 1, [](int k) { return k == 1 ? 800.0 : 0.0; }, [](int) { return 0.0; });
    CHECK_THROWS_AS(toda_rhs(big), OverflowError);
}

TEST_CASE("constant state stays constant") {
    LatticeState c = make_state(-5, 5, [](int) { return -1.25; }, [](int) { return 0.0; });
    const Trajectory tr = integrate(c, 2.0, 0.01, 10);
    CHECK(tr.t.size() == 21);
    CHECK((tr.x.array() + 1.25).abs().maxCoeff() == 0.0);
}

TEST_CASE("uniform translation") {
    LatticeState c = make_state(-5, 5, [](int) { return 0.5; }, [](int) { return 0.3; });
    const Trajectory tr = integrate(c, 3.0, 1e-3, 500);
    for (std::size_t q = 0; q < tr.t.size(); ++q)
        for (int i = 0; i < tr.sites(); ++i) CHECK(std::abs(tr.x(q, i) - (0.5 + 0.3 * tr.t[q])) < 1e-12);
    CHECK(tr.t.back() == 3.0);
}

TEST_CASE("integration is time-reversible") {
    const LatticeState s = bump(-30, 30);
    const Trajectory fwd = integrate(s, 2.0, 1e-3, 2000);
    const Trajectory back = integrate(fwd.state_at(1), -2.0, 1e-3, 2000);
    CHECK((back.x.row(1).transpose() - s.x).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("verlet is second order") {
    const LatticeState s = bump(-30, 30);
    const Trajectory ref = integrate(s, 1.0, 1e-4, 10000);
    const double e1 = (integrate(s, 1.0, 2e-2, 1000).x.row(1) - ref.x.row(1)).cwiseAbs().maxCoeff();
    const double e2 = (integrate(s, 1.0, 1e-2, 1000).x.row(1) - ref.x.row(1)).cwiseAbs().maxCoeff();
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("energy and trace invariants are conserved on a free window") {
    const LatticeState s = bump(-60, 60);
    const Trajectory tr = integrate(s, 5.0, 1e-3, 500);
    const double e0 = energy(s);
    const TraceInvariants i0 = trace_invariants(flaschka(s));
    for (std::size_t q = 0; q < tr.t.size(); ++q) {
        const LatticeState sq = tr.state_at(static_cast<int>(q));
        CHECK(std::abs(energy(sq) - e0) < 1e-6 * std::abs(e0));
        const TraceInvariants iq = trace_invariants(flaschka(sq));
        CHECK(std::abs(iq.momentum - i0.momentum) < 1e-12);
        CHECK(std::abs(iq.quadratic - i0.quadratic) < 1e-5);
    }
}

TEST_CASE("frozen background keeps a sloped equilibrium at rest") {
    LatticeState s = make_state(-5, 5, [](int k) { return 2.0 * std::log(2.0) * k; }, [](int) { return 0.0; });
    s.boundary = Boundary::frozen(2.0 * std::log(2.0), 2.0 * std::log(2.0));
    CHECK(toda_rhs(s).cwiseAbs().maxCoeff() < 1e-14);
    const Trajectory tr = integrate(s, 1.0, 1e-2, 100);
    CHECK((tr.x.row(1).transpose() - s.x).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("flaschka examples") {
    LatticeState z = make_state(-3, 3, [](int) { return 0.0; }, [](int) { return 0.0; });
    const JacobiWindow j0 = flaschka(z);
    CHECK(j0.a.cwiseAbs().maxCoeff() == 0.0);
    CHECK((j0.b.array() - 1.0).abs().maxCoeff() == 0.0);

    LatticeState lin = make_state(-3, 3, [](int k) { return 2.0 * k; }, [](int) { return 0.0; });
    CHECK((flaschka(lin).b.array() - std::exp(1.0)).abs().maxCoeff() < 1e-15);

    LatticeState two;
    two.k_min = 0;
    two.k_max = 1;
    two.x = Eigen::Vector2d(0, 0);
    two.xdot = Eigen::Vector2d(3, -1);
    const JacobiWindow j2 = flaschka(two);
    CHECK(j2.a[0] == 3.0);
    CHECK(j2.a[1] == -1.0);
    CHECK(j2.b.size() == 1);
}

TEST_CASE("rescale to the standard interval") {
    JacobiWindow j = free_window(-3, 3);
    CHECK(rescale_to_standard(j, -2, 2).a == j.a);
    CHECK(rescale_to_standard(j, -2, 2).b == j.b);

    j.a.setConstant(1.0);
    j.a_inf = 1.0;
    const JacobiWindow r = rescale_to_standard(j, -1, 3);
    CHECK(r.a.cwiseAbs().maxCoeff() < 1e-15);
    CHECK((r.b.array() - 1.0).abs().maxCoeff() < 1e-15);
    CHECK(r.free_background());

    JacobiWindow w = free_window(-2, 2);
    w.b.setConstant(2.0);
    w.b_inf = 2.0;
    CHECK((rescale_to_standard(w, -4, 4).b.array() - 1.0).abs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(rescale_to_standard(w, 1, 1), DomainError);
}

TEST_CASE("unrescale examples") {
    Trajectory z;
    z.k_min = -2;
    z.k_max = 2;
    z.t = {0.0, 0.5, 1.0, 1.5, 2.0};
    z.x = Eigen::MatrixXd::Zero(5, 5);
    z.provenance = Provenance::InverseSpectral;

    const Trajectory id = unrescale_solution(z, -2, 2, z.t);
    CHECK(id.x == z.x);

    const Trajectory shift = unrescale_solution(z, 0, 4, z.t);
    for (int q = 0; q < 5; ++q)
        for (int i = 0; i < 5; ++i) CHECK(shift.x(q, i) == doctest::Approx(2.0 * z.t[q]));

    // s = 4 maps t to 4t, so the samples must cover [0, 4 t_max].
    const Trajectory tilt = unrescale_solution(z, -8, 8, {0.0, 0.25, 0.5});
    for (int q = 0; q < 3; ++q)
        for (int i = 0; i < 5; ++i) CHECK(tilt.x(q, i) == doctest::Approx(2.0 * (i - 2) * std::log(4.0)));
    CHECK(tilt.provenance == Provenance::InverseSpectral);
    CHECK_THROWS_AS(unrescale_solution(z, -8, 8, {1.0}), DomainError);
}

TEST_CASE("rescaled integration reproduces the original problem") {
    // Background a = 1, b = 1 sits on [-1, 3]; a second case with b = 2 on [-3, 5].
    for (auto [a, b] : {std::pair{-1.0, 3.0}, std::pair{-3.0, 5.0}}) {
        const double s = 0.25 * (b - a), c = 0.5 * (a + b);
        LatticeState orig = bump(-50, 50);
        for (int i = 0; i < orig.size(); ++i) {
            orig.x[i] += 2.0 * (orig.k_min + i) * std::log(s);
            orig.xdot[i] += c;
        }
        orig.boundary = Boundary::frozen(2.0 * std::log(s), 2.0 * std::log(s));
        const Trajectory direct = integrate(orig, 3.0, 1e-3, 100);
        const LatticeState r = rescale_state(orig, a, b);
        CHECK(r.boundary.left_slope == doctest::Approx(0.0));
        const Trajectory tilde = integrate(r, 3.0 * s, 1e-3 * s, 100);
        const Trajectory back = unrescale_solution(tilde, a, b, direct.t);
        CHECK((back.x - direct.x).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("trajectory csv round trip") {
    const Trajectory tr = integrate(bump(-4, 4), 0.5, 0.1, 2);
    std::ostringstream os;
    write_trajectory_csv(os, tr, true);
    const std::string text = os.str();
    CHECK(text.rfind("t,k,x,xdot,provenance\n", 0) == 0);
    const std::string path = "direct_ode_roundtrip.csv";
    write_trajectory_csv(path, tr, false);
    const Trajectory back = read_trajectory_csv(path);
    CHECK(back.t == tr.t);
    CHECK(back.x == tr.x);
    CHECK(back.xdot == tr.xdot);
    CHECK(back.k_min == -4);
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_trajectory_csv("no_such_trajectory.csv"), ValidationError);
}

TEST_CASE("state validation") {
    LatticeState s;
    s.k_min = 2;
    s.k_max = 1;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s.k_max = 4;
    s.x = Eigen::VectorXd::Zero(2);
    s.xdot = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(s.validate(), ValidationError);
    CHECK_THROWS_AS(integrate(bump(-3, 3), 1.0, 0.0), ValidationError);
}

}

#include <doctest.h>

#include <cmath>

#include "cdyn/errors.hpp"
#include "cdyn/pde.hpp"
#include "cdyn/scenario.hpp"
#include "oracles.hpp"

using namespace cdyn;
using namespace cdyn::pde;

namespace {

const GridGeometry kToy{16, 14, 0.5, 0.5};

double max_abs(const ScalarField& f) { return std::max(std::abs(f.min()), std::abs(f.max())); }

double max_abs_diff(const ScalarField& a, const ScalarField& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

ScalarField point_reflect(const ScalarField& f) {
    ScalarField r(f.geometry());
    for (int j = 0; j < f.ny(); ++j)
        for (int i = 0; i < f.nx(); ++i) r.at(f.nx() - 1 - i, f.ny() - 1 - j) = f.at(i, j);
    return r;
}

PdeForceParams transport_params() {
    PdeForceParams p;
    p.diffusion = 5.0;
    p.goal_velocity = {20.0, 20.0};
    p.attraction = 10.0;
    p.repulsion = 5.0;
    p.attraction_radius = 2.0;
    p.repulsion_radius = 1.0;
    p.sensor_radius = 1.5;
    return p;
}

}  // namespace

TEST_SUITE("pde") {

TEST_CASE("parameter validation") {
    PdeForceParams p = transport_params();
    CHECK_NOTHROW(p.validate());
    p.attack = 0;
    CHECK_THROWS_AS(p.validate(), ParameterError);
    p = transport_params();
    p.repulsion_radius = p.attraction_radius;
    CHECK_THROWS_AS(p.validate(), ParameterError);
    p = transport_params();
    p.diffusion = -1.0;
    CHECK_THROWS_AS(p.validate(), ParameterError);
    p = transport_params();
    p.fire_rate = 1.0;
    p.fire_decay = 0.0;
    CHECK_THROWS_AS(p.validate(), ParameterError);
    CHECK(parse_switch_mode(to_string(SwitchMode::pursuit)) == SwitchMode::pursuit);
    CHECK_FALSE(parse_switch_mode("sideways").has_value());
}

TEST_CASE("diffusion") {
    const auto p = transport_params();
    CHECK(max_abs(f_diff(ScalarField(kToy, 3.0), p)) == 0.0);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CHECK(std::abs(total_mass(f_diff(oracle::random_field(kToy, seed), p))) < 1e-10);
    }
    // Interior spike against a hand-assembled 5-point Laplacian times D.
    ScalarField spike(kToy);
    spike.at(7, 6) = 2.0;
    const auto out = f_diff(spike, p);
    const double h2 = 0.25;
    for (int j = 0; j < kToy.ny; ++j) {
        for (int i = 0; i < kToy.nx; ++i) {
            double lap = -4.0 * spike.at(i, j);
            if (i > 0) lap += spike.at(i - 1, j);
            if (i + 1 < kToy.nx) lap += spike.at(i + 1, j);
            if (j > 0) lap += spike.at(i, j - 1);
            if (j + 1 < kToy.ny) lap += spike.at(i, j + 1);
            CHECK(out.at(i, j) == doctest::Approx(5.0 * lap / h2));
        }
    }
}

TEST_CASE("reaction") {
    PdeForceParams p;
    p.aimed_fire = 2e-6;
    const auto none = build_firing_kernel(0.0, 0.2, 0.0, kToy);
    const auto w = oracle::random_field(kToy, 3);
    CHECK(max_abs(f_react(w, ScalarField(kToy), p, build_firing_kernel(1.0, 0.2, 0.0, kToy))) == 0.0);

    const double e = 7.0;
    const auto aimed = f_react(w, ScalarField(kToy, e), p, none);
    for (double x : aimed.values()) CHECK(x == doctest::Approx(-2e-6 * e));

    p.fire_rate = 0.3;
    p.fire_decay = 0.5;
    const auto k = build_firing_kernel(p.fire_rate, p.fire_decay, 0.0, kToy);
    for (std::uint64_t seed = 10; seed < 13; ++seed) {
        const auto ws = oracle::random_field(kToy, seed);
        const auto es = oracle::random_field(kToy, seed + 100);
        const auto got = f_react(ws, es, p, k);
        const auto conv = oracle::convolve(es, k);
        for (std::size_t i = 0; i < got.size(); ++i) {
            const double expect = -(ws.values()[i] * conv.values()[i] + p.aimed_fire * es.values()[i]);
            CHECK(got.values()[i] == doctest::Approx(expect).epsilon(1e-12));
            CHECK(got.values()[i] <= 0.0);
        }
    }
}

TEST_CASE("front switch") {
    PdeForceParams p;
    p.combat_threshold = 100.0;
    p.goal_velocity = {20.0, -20.0};
    const GridGeometry g{3, 3, 1.0, 1.0};
    ScalarField own(g, 200.0), enemy(g, 50.0);
    own.at(1, 1) = 100.0;  // advantage 50
    own.at(2, 2) = 150.0;  // advantage exactly 100
    const auto c = combat_switch_front(own, enemy, p);
    CHECK(c.x.at(0, 0) == 20.0);  // advantage 150
    CHECK(c.y.at(0, 0) == -20.0);
    CHECK(c.x.at(1, 1) == -20.0);
    CHECK(c.y.at(1, 1) == 20.0);
    CHECK(c.x.at(2, 2) == -20.0);
    for (std::size_t i = 0; i < c.x.size(); ++i) {
        CHECK(std::hypot(c.x.values()[i], c.y.values()[i]) == doctest::Approx(std::hypot(20.0, 20.0)));
    }
    // No enemy: any cell whose own mass exceeds the threshold advances.
    const auto alone = combat_switch_front(ScalarField(g, 101.0), ScalarField(g), p);
    CHECK(alone.x.min() == 20.0);
}

TEST_CASE("pursuit switch") {
    PdeForceParams p;
    p.goal_velocity = {-60.0, -60.0};
    p.combat_threshold = 4.0;
    p.attack = -1;
    const GridGeometry g{5, 5, 1.0, 1.0};
    // No enemy: pure goal seeking.
    const auto free = combat_switch_pursuit(ScalarField(g, 3.0), ScalarField(g), p);
    CHECK(free.x.min() == -60.0);
    CHECK(free.y.max() == -60.0);

    // Hand-built toy: central differences give grad = (2, 1.5), unit (0.8, 0.6),
    // local enemy mass 5.
    ScalarField em(g, 0.0);
    em.at(2, 2) = 5.0;
    em.at(3, 2) = 6.0;
    em.at(1, 2) = 2.0;
    em.at(2, 3) = 4.0;
    em.at(2, 1) = 1.0;
    ScalarField own(g, 0.0);
    own.at(2, 2) = 9.0;  // advantage exactly 4: pursue
    auto v = combat_switch_pursuit(own, em, p);
    CHECK(v.x.at(2, 2) == doctest::Approx(-60.0 + 4.0));
    CHECK(v.y.at(2, 2) == doctest::Approx(-60.0 + 3.0));
    own.at(2, 2) = 8.9;  // short of the threshold: retreat down the gradient
    v = combat_switch_pursuit(own, em, p);
    CHECK(v.x.at(2, 2) == doctest::Approx(-60.0 - 4.0));
    CHECK(v.y.at(2, 2) == doctest::Approx(-60.0 - 3.0));
    p.attack = 1;
    v = combat_switch_pursuit(own, em, p);
    CHECK(v.x.at(2, 2) == doctest::Approx(-60.0 + 4.0));
}

TEST_CASE("pursuit components are antisymmetric in the sign") {
    const GridGeometry g{12, 12, 0.5, 0.5};
    PdeForceParams p;
    p.goal_velocity = {1.0, 2.0};
    const auto em = disc_mass(pde::initial_profile(g, 3.0, 1.5, {4.0, 2.0}), 1.0);
    p.combat_threshold = -1e9;  // always advantaged
    const auto up = combat_switch_pursuit(ScalarField(g), em, p);
    p.combat_threshold = 1e9;  // never advantaged, attack = -1
    const auto down = combat_switch_pursuit(ScalarField(g), em, p);
    for (std::size_t i = 0; i < up.x.size(); ++i) {
        CHECK(up.x.values()[i] - 1.0 == doctest::Approx(-(down.x.values()[i] - 1.0)));
        CHECK(up.y.values()[i] - 2.0 == doctest::Approx(-(down.y.values()[i] - 2.0)));
    }
    // Up-gradient pursuit points from a cell east of the blob back toward it.
    CHECK(up.x.at(11, 4) - 1.0 <= 0.0);
}

TEST_CASE("koren limiter") {
    CHECK(koren_psi(-1.0) == 0.0);
    CHECK(koren_psi(0.0) == 0.0);
    CHECK(koren_psi(0.25) == 0.25);
    CHECK(koren_psi(1.0) == doctest::Approx(0.5));
    CHECK(koren_psi(10.0) == 1.0);
}

TEST_CASE("velocity term") {
    const auto p = transport_params();
    const auto ka = make_disc_kernel(p.attraction_radius, kToy, KernelKind::attraction);
    const auto kr = make_disc_kernel(p.repulsion_radius, kToy, KernelKind::repulsion);
    CHECK(max_abs(f_vel(ScalarField(kToy), uniform_goal(kToy, p), p, ka, kr)) == 0.0);
    for (std::uint64_t seed = 30; seed < 35; ++seed) {
        const auto w = oracle::random_field(kToy, seed);
        const auto goal = combat_switch_pursuit(w, oracle::random_field(kToy, seed + 1), p);
        CHECK(std::abs(total_mass(f_vel(w, goal, p, ka, kr))) < 1e-10);
    }
}

TEST_CASE("upwind spike moves downwind") {
    // Face flux = a * w_face / h with a = (G_l w_l + G_r w_r) / 2; behind a
    // lone spike the limiter picks the first-order upwind value.
    PdeForceParams p;
    const double c = 3.0, w0 = 2.0, h = kToy.dx, tau = 1e-3;
    p.goal_velocity = {c, 0.0};
    ScalarField w(kToy);
    w.at(6, 5) = w0;
    const auto zero = ScalarField(kToy);
    const auto out = f_vel(w, uniform_goal(kToy, p), p, zero, zero);
    const double flux = 0.5 * c * w0 * w0 / h;
    for (int j = 0; j < kToy.ny; ++j) {
        for (int i = 0; i < kToy.nx; ++i) {
            double expect = 0.0;
            if (i == 6 && j == 5) expect = -flux;
            if (i == 7 && j == 5) expect = flux;
            CHECK(out.at(i, j) == doctest::Approx(expect));
        }
    }
    // One explicit step.
    ScalarField next = w;
    ScalarField inc = out;
    inc *= tau;
    next += inc;
    CHECK(next.at(7, 5) == doctest::Approx(tau * flux));
    CHECK(next.at(5, 5) == 0.0);
    CHECK(total_mass(next) == doctest::Approx(total_mass(w)));

    p.goal_velocity = {0.0, -c};
    const auto down = f_vel(w, uniform_goal(kToy, p), p, zero, zero);
    CHECK(down.at(6, 4) == doctest::Approx(flux));
    CHECK(down.at(6, 6) == 0.0);
}

TEST_CASE("rhs") {
    const auto sc = scenario::builtin("classic-fronts-pde");
    const auto& s = *sc.pde;
    auto pu = s.u, pv = s.v;
    const auto zero = PdeState{ScalarField(s.grid), ScalarField(s.grid), 0.0};
    auto [du0, dv0] = rhs(zero, pu, pv);
    CHECK(max_abs(du0) == 0.0);
    CHECK(max_abs(dv0) == 0.0);

    const auto state = initial_state(s.grid, pu, pv);
    {
        auto qu = pu, qv = pv;
        qu.aimed_fire = qv.aimed_fire = 0.0;
        qu.fire_rate = qv.fire_rate = 0.0;
        auto [du, dv] = rhs(state, qu, qv);
        CHECK(std::abs(total_mass(du)) < 1e-10);
        CHECK(std::abs(total_mass(dv)) < 1e-10);
    }
    // The model with cached kernels is the pure function.
    PdeModel model(s.grid, pu, pv);
    auto [mu, mv] = model.rhs(state);
    auto [ru, rv] = rhs(state, pu, pv);
    CHECK(max_abs_diff(mu, ru) == 0.0);
    CHECK(max_abs_diff(mv, rv) == 0.0);
}

TEST_CASE("rhs respects point reflection") {
    const auto sc = scenario::builtin("classic-fronts-pde");
    const auto& s = *sc.pde;
    const auto& pu = s.u;
    auto pv = pu;
    pv.goal_velocity = {-pu.goal_velocity.x, -pu.goal_velocity.y};
    pv.initial_centre = {s.grid.width() - pu.initial_centre.x, s.grid.height() - pu.initial_centre.y};
    pv.goal = {s.grid.width() - pu.goal.x, s.grid.height() - pu.goal.y};
    CHECK(pv == s.v);

    // Break the blob's own symmetry so the check is not vacuous.
    PdeState st = initial_state(s.grid, pu, pv);
    auto noise = oracle::random_field(s.grid, 77, 0.0, 0.5);
    st.u += noise;
    st.v = point_reflect(st.u);
    auto [du, dv] = rhs(st, pu, pv);
    const double scale = max_abs(du);
    CHECK(scale > 0.0);
    CHECK(max_abs_diff(dv, point_reflect(du)) <= 1e-12 * scale);
}

TEST_CASE("initial profile") {
    const GridGeometry g{};
    const auto f = initial_profile(g, 8.0, 5.0, {15.0, 15.0});
    CHECK(f.max() == 8.0);
    CHECK(f.min() == 0.0);
    CHECK(f.at(29, 29) == 8.0);          // centre cell (14.75, 14.75)
    CHECK(f.at(29 + 12, 29) == 0.0);     // 6 units away
    double cx = 0, cy = 0;
    mass_centroid(f, cx, cy);
    CHECK(cx == doctest::Approx(15.0).epsilon(0.02));
    CHECK(cy == doctest::Approx(15.0).epsilon(0.02));
}

}  // TEST_SUITE

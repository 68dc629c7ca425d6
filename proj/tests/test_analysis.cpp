#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "cdyn/analysis.hpp"
#include "cdyn/errors.hpp"
#include "cdyn/scenario.hpp"

using namespace cdyn;
using namespace cdyn::analysis;

namespace {

constexpr double kPi = std::numbers::pi;

Distribution points(std::initializer_list<Point> pts) {
    Distribution d;
    for (const auto& p : pts) {
        d.x.push_back(p.x);
        d.y.push_back(p.y);
        d.w.push_back(1.0);
    }
    return d;
}

// Two forces on opposite ends of a diameter of length 2r about (50, 50); the
// red-to-blue vector sits at theta(k).
template <class F>
MetricSeries rotating(int n, double r, F theta) {
    MetricSeries s;
    s.scenario = "synthetic-ca";
    s.contact_radius = 5.0;
    for (int k = 0; k < n; ++k) {
        const double a = theta(k);
        MetricRecord rec;
        rec.t = k;
        rec.amount = {100.0, 100.0};
        rec.centroid = {Point{50 - r * std::cos(a), 50 - r * std::sin(a)}, Point{50 + r * std::cos(a), 50 + r * std::sin(a)}};
        rec.gap = 2 * r;
        s.records.push_back(rec);
    }
    unwrap_angles(s);
    return s;
}

bool same_values(const MetricRecord& a, const MetricRecord& b) {
    if (a.t != b.t) return false;
    const auto va = metric_values(a), vb = metric_values(b);
    for (std::size_t i = 0; i < va.size(); ++i) {
        if (!(va[i] == vb[i] || (std::isnan(va[i]) && std::isnan(vb[i])))) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("centroid") {
    CHECK_FALSE(centroid(Distribution{}).has_value());
    const auto c = centroid(points({{0, 0}, {2, 0}, {2, 2}, {0, 2}}));
    REQUIRE(c);
    CHECK(c->x == 1.0);
    CHECK(c->y == 1.0);

    Distribution weighted{{0.0, 10.0}, {0.0, 0.0}, {3.0, 1.0}};
    CHECK(centroid(weighted)->x == doctest::Approx(2.5));

    // Agent centroid against a direct mean over living red agents.
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> pos(0, 99), kind(0, 5);
    std::vector<ca::Agent> agents;
    double sx = 0, sy = 0;
    int n = 0;
    for (int i = 0; i < 300; ++i) {
        ca::Agent a;
        a.side = kind(rng) < 3 ? ca::Side::red : ca::Side::blue;
        a.pos = {pos(rng), pos(rng)};
        a.health = kind(rng) == 0 ? ca::Health::killed : kind(rng) == 1 ? ca::Health::injured : ca::Health::alive;
        if (a.side == ca::Side::red && a.living()) {
            sx += a.pos.x;
            sy += a.pos.y;
            ++n;
        }
        agents.push_back(a);
    }
    const auto ac = centroid(from_agents(agents, ca::Side::red));
    REQUIRE(ac);
    CHECK(ac->x == doctest::Approx(sx / n).epsilon(1e-12));
    CHECK(ac->y == doctest::Approx(sy / n).epsilon(1e-12));
}

TEST_CASE("front aspect") {
    Distribution disc;
    for (int x = -10; x <= 10; ++x) {
        for (int y = -10; y <= 10; ++y) {
            if (x * x + y * y <= 100) {
                disc.x.push_back(x);
                disc.y.push_back(y);
                disc.w.push_back(1.0);
            }
        }
    }
    CHECK(front_aspect(disc) == doctest::Approx(1.0).epsilon(1e-9));

    Distribution line;
    for (int x = 0; x < 20; ++x) {
        line.x.push_back(x);
        line.y.push_back(0);
        line.w.push_back(1.0);
    }
    CHECK(front_aspect(line) >= 5.0);
    for (int x = 0; x < 20; ++x) {
        line.x.push_back(x);
        line.y.push_back(1);
        line.w.push_back(1.0);
    }
    // var x = (20^2 - 1) / 12, var y = 1 / 4.
    CHECK(front_aspect(line) == doctest::Approx(std::sqrt(133.0)));
    CHECK(std::isinf(front_aspect(points({{3, 3}}))));
    CHECK(std::isinf(front_aspect(Distribution{})));

    // Invariant under rotation and translation.
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nx(0.0, 4.0), ny(0.0, 1.5);
    std::uniform_real_distribution<double> w(0.1, 2.0), ang(0.0, 2 * kPi), shift(-30.0, 30.0);
    for (int trial = 0; trial < 50; ++trial) {
        Distribution d;
        for (int i = 0; i < 60; ++i) {
            d.x.push_back(nx(rng));
            d.y.push_back(ny(rng));
            d.w.push_back(w(rng));
        }
        const double a = ang(rng), tx = shift(rng), ty = shift(rng);
        Distribution m = d;
        for (std::size_t i = 0; i < d.x.size(); ++i) {
            m.x[i] = std::cos(a) * d.x[i] - std::sin(a) * d.y[i] + tx;
            m.y[i] = std::sin(a) * d.x[i] + std::cos(a) * d.y[i] + ty;
        }
        CHECK(front_aspect(m) == doctest::Approx(front_aspect(d)).epsilon(1e-6));
    }
}

TEST_CASE("encirclement") {
    const auto centre = points({{50, 50}});
    Distribution ring;
    for (int k = 0; k < 64; ++k) {
        const double a = 2 * kPi * (k + 0.5) / 64;
        ring.x.push_back(50 + 5 * std::cos(a));
        ring.y.push_back(50 + 5 * std::sin(a));
        ring.w.push_back(1.0);
    }
    CHECK(encirclement(centre, ring, 10.0) == 1.0);
    // Out of range.
    CHECK(encirclement(centre, ring, 4.0) == 0.0);

    Distribution east;
    for (int k = -3; k <= 3; ++k) {
        const double a = k * 0.05;
        east.x.push_back(50 + 6 * std::cos(a));
        east.y.push_back(50 + 6 * std::sin(a));
        east.w.push_back(1.0);
    }
    CHECK(encirclement(centre, east, 10.0) <= 3.0 / 16.0);
    CHECK(encirclement(centre, east, 10.0) > 0.0);
    CHECK(encirclement(Distribution{}, ring, 10.0) == 0.0);
}

TEST_CASE("gap between forces") {
    CHECK(gap(points({{0, 0}, {1, 0}}), points({{4, 4}, {10, 0}})) == doctest::Approx(5.0));
    CHECK(std::isinf(gap(points({{0, 0}}), Distribution{})));
    // Faint cells (below 1% of the peak) are ignored.
    Distribution faint{{0.0, 9.0}, {0.0, 0.0}, {1.0, 0.001}};
    CHECK(gap(faint, points({{10, 0}})) == doctest::Approx(10.0));
}

TEST_CASE("unwrap keeps consecutive angles within pi") {
    const auto s = rotating(400, 2.0, [](int k) { return 4 * kPi * k / 399.0; });
    for (std::size_t k = 1; k < s.records.size(); ++k) {
        CHECK(std::abs(s.records[k].angle - s.records[k - 1].angle) < kPi);
    }
    CHECK(s.records.back().angle == doctest::Approx(4 * kPi));
    const auto m = mirror_diagonal(s);
    CHECK(m.records.back().angle == doctest::Approx(kPi / 2 - 4 * kPi));
}

TEST_CASE("precession classification") {
    const auto still = rotating(50, 2.0, [](int) { return kPi / 4; });
    auto p = precession(still);
    CHECK(p.contact);
    CHECK(p.direction == Precession::none);
    CHECK(p.rotation == 0.0);

    const auto turning = rotating(50, 2.0, [](int k) { return kPi / 4 + kPi * k / 49.0; });
    p = precession(turning);
    CHECK(p.direction == Precession::anticlockwise);
    CHECK(p.rotation == doctest::Approx(kPi));

    const auto q = precession(mirror_diagonal(turning));
    CHECK(q.direction == Precession::clockwise);
    CHECK(q.rotation == -p.rotation);

    // Threshold is strict and adjustable.
    CHECK(precession(turning, 4.0).direction == Precession::none);

    const auto apart = rotating(50, 20.0, [](int k) { return kPi * k / 49.0; });
    p = precession(apart);
    CHECK_FALSE(p.contact);
    CHECK(p.direction == Precession::none);
    CHECK(to_string(Precession::anticlockwise) == "anticlockwise");
}

TEST_CASE("stationary window, loss rate and breakaway") {
    MetricSeries s;
    s.contact_radius = 5.0;
    for (int k = 0; k <= 30; ++k) {
        MetricRecord r;
        r.t = k;
        const double x = std::min(k, 10);
        r.centroid = {Point{10 + x, 50}, Point{90 - x, 50}};
        r.amount = {100.0 - 2.0 * k, 80.0};
        r.gap = k >= 10 ? 2.0 : 60.0 - 6.0 * k;
        r.coverage = {k >= 12 && k < 20 ? 1.0 : k >= 20 ? 0.5 : 0.25, 0.0};
        s.records.push_back(r);
    }
    const auto w = stationary_window(s, 0);
    CHECK(w.approach_speed == doctest::Approx(1.0));
    CHECK(w.longest == doctest::Approx(20.0));
    CHECK(w.start == 10.0);
    CHECK(w.run_fraction == doctest::Approx(20.0 / 30.0));
    CHECK_FALSE(forces_pass(s));

    const auto rate = windowed_loss_rate(s, 0, 2.5);
    REQUIRE(rate.size() == 28);
    for (const auto& r : rate) CHECK(r.rate == doctest::Approx(2.0));
    for (const auto& r : windowed_loss_rate(s, 1, 2.5)) CHECK(r.rate == 0.0);
    CHECK(windowed_loss_rate(s, 0, 0.0).empty());

    const auto b = breakaway_time(s, 0);
    REQUIRE(b);
    CHECK(*b == 20.0);
    CHECK_FALSE(breakaway_time(s, 1));

    s.goal = {Point{20, 50}, Point{0, 0}};
    CHECK(reached_goal(s, 0, 1.0));
    CHECK_FALSE(reached_goal(s, 1, 15.0));
}

TEST_CASE("pde metrics are point symmetric at the start") {
    auto sc = scenario::builtin("classic-fronts-pde");
    const auto& p = *sc.pde;
    integrator::RunTrajectory traj;
    const auto init = pde::initial_state(p.grid, p.u, p.v);
    traj.snapshots.push_back({0.0, init.u, init.v});
    const auto m = metrics_from_pde(sc, traj);
    REQUIRE(m.records.size() == 1);
    const auto& r = m.records[0];
    CHECK(r.centroid[0].x + r.centroid[1].x == doctest::Approx(50.0));
    CHECK(r.centroid[0].y + r.centroid[1].y == doctest::Approx(50.0));
    CHECK(r.amount[0] == doctest::Approx(total_mass(init.u)));
    CHECK(m.contact_radius == contact_radius(sc, true));
    CHECK(r.angle == doctest::Approx(kPi / 4));
}

TEST_CASE("single-run ensemble equals the run") {
    auto sc = scenario::builtin("precess-ca");
    const long steps = 40;
    const auto rep = ensemble(sc, {9}, steps);
    const auto traj = ca::ca_run(sc.ca->config, 9, steps, {}, 1);
    const auto series = metrics_from_ca(sc, traj);
    REQUIRE(rep.mean_series.records.size() == series.records.size());
    for (std::size_t k = 0; k < series.records.size(); ++k) {
        CHECK(same_values(rep.mean_series.records[k], series.records[k]));
        for (double sd : rep.stats.sd[k]) {
            if (!std::isnan(sd)) CHECK(sd == 0.0);
        }
    }
    CHECK(rep.n_runs() == 1);
    CHECK(rep.failed() == 0);
    const auto direct = summarise_run(series, traj, 9);
    CHECK(rep.runs[0].final_living == direct.final_living);
    CHECK(rep.runs[0].precession.rotation == direct.precession.rotation);
}

TEST_CASE("ensemble results do not depend on the worker count") {
    auto sc = scenario::builtin("precess-ca");
    const auto a = ensemble(sc, {1, 2, 3}, 30, 1, 5);
    const auto b = ensemble(sc, {1, 2, 3}, 30, 3, 5);
    REQUIRE(a.mean_series.records.size() == b.mean_series.records.size());
    for (std::size_t k = 0; k < a.mean_series.records.size(); ++k) {
        CHECK(same_values(a.mean_series.records[k], b.mean_series.records[k]));
    }
    CHECK(a.precession_counts == b.precession_counts);
    CHECK_THROWS_AS(ensemble(sc, {1}, 10, 1, 0), ParameterError);
    CHECK_THROWS_AS(ensemble(scenario::builtin("precess-pde"), {1}, 10), ParameterError);
}

TEST_CASE("aggregating mirrored runs") {
    const auto s = rotating(30, 2.0, [](int k) { return kPi / 4 + kPi * k / 29.0; });
    const auto m = mirror_diagonal(s);
    RunSummary a, b, bad;
    a.seed = 1;
    a.precession = precession(s);
    b.seed = 2;
    b.precession = precession(m);
    bad.seed = 3;
    bad.ok = false;
    const auto rep = aggregate("synthetic-ca", 29, {a, b, bad}, {s, m, MetricSeries{}});
    CHECK(rep.precession_counts[0] + rep.precession_counts[1] + rep.precession_counts[2] == rep.n_runs());
    CHECK(rep.precession_counts == std::array<int, 3>{1, 1, 1});
    CHECK(rep.failed() == 1);
    for (const auto& t : rep.threshold_sensitivity) CHECK(t[0] + t[1] + t[2] == 3);
    // Angles of a run and its mirror average to pi/4 (the diagonal).
    for (const auto& r : rep.mean_series.records) CHECK(r.angle == doctest::Approx(kPi / 4));
    // Both runs are symmetric about the diagonal, so the mean centroids are too.
    for (const auto& r : rep.mean_series.records) {
        CHECK(r.centroid[0].x == doctest::Approx(r.centroid[0].y));
    }
}

TEST_CASE("comparison") {
    auto a = rotating(40, 3.0, [](int k) { return 0.02 * k; });
    a.scenario = "precess-pde";
    auto b = a;
    b.scenario = "precess-ca";
    auto rep = compare(a, b);
    CHECK(rep.centroid_rmse == 0.0);
    CHECK(rep.samples == 101);
    CHECK(rep.pde_survivors == rep.ca_survivors);

    for (auto& r : b.records) {
        for (auto& c : r.centroid) {
            c.x += 3.0;
            c.y -= 4.0;
        }
    }
    rep = compare(a, b, 17);
    CHECK(rep.centroid_rmse == doctest::Approx(5.0));
    CHECK(rep.progress.size() == 17);

    b.scenario = "circle-ca";
    CHECK_THROWS_AS(compare(a, b), ParameterError);
    CHECK(scenario_family("classic-fronts-pde-offset") == "classic-fronts");
    CHECK(scenario_family("precess-ca-flag-offset") == "precess");
}

TEST_CASE("metrics csv round trip") {
    auto sc = scenario::builtin("circle-ca");
    const auto traj = ca::ca_run(sc.ca->config, 4, 30, {}, 1);
    auto series = metrics_from_ca(sc, traj);
    series.records.back().aspect[0] = std::numeric_limits<double>::infinity();
    series.records.back().centroid[1] = {std::nan(""), std::nan("")};
    std::stringstream buf;
    write_metrics_csv(buf, series);
    const auto back = read_metrics_csv(buf);
    CHECK(back.scenario == series.scenario);
    CHECK(back.domain == series.domain);
    CHECK(back.contact_radius == series.contact_radius);
    CHECK(back.goal[0].x == series.goal[0].x);
    CHECK(back.goal[1].y == series.goal[1].y);
    REQUIRE(back.records.size() == series.records.size());
    for (std::size_t k = 0; k < series.records.size(); ++k) CHECK(same_values(back.records[k], series.records[k]));

    std::istringstream junk("t,amount_red\n1,2,3\n");
    CHECK_THROWS_AS(read_metrics_csv(junk), ConfigError);
}

}  // TEST_SUITE

#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "cdyn/analysis.hpp"
#include "cdyn/ca.hpp"
#include "cdyn/errors.hpp"
#include "cdyn/scenario.hpp"
#include "oracles.hpp"

using namespace cdyn;
using namespace cdyn::ca;

namespace {

CaForceParams quiet_force() {
    CaForceParams p;
    p.squad_size = 0;
    p.sensor_range = 5;
    p.fire_range = 3;
    p.threshold_range = 2;
    p.move_range = 1;
    p.start_centre = {5, 5};
    p.start_size = {3, 3};
    p.flag = {0, 0};
    return p;
}

CaConfig quiet_config(int lattice = 30) {
    CaConfig c;
    c.lattice = lattice;
    c.force = {quiet_force(), quiet_force()};
    c.force[1].flag = {lattice - 1, lattice - 1};
    return c;
}

CaState place(int lattice, const std::vector<Agent>& agents, std::uint64_t seed = 1) {
    CaState s;
    s.lattice = lattice;
    s.agents = agents;
    s.occupancy.assign(static_cast<std::size_t>(lattice * lattice), -1);
    s.rng = Rng(seed);
    for (std::size_t i = 0; i < agents.size(); ++i) {
        if (agents[i].living()) s.occupancy[static_cast<std::size_t>(agents[i].pos.y * lattice + agents[i].pos.x)] = int(i);
    }
    s.check_consistency();
    return s;
}

Agent red_at(int x, int y, Health h = Health::alive) { return Agent{Side::red, {x, y}, h, 1}; }
Agent blue_at(int x, int y, Health h = Health::alive) { return Agent{Side::blue, {x, y}, h, 1}; }

}  // namespace

TEST_SUITE("ca") {

TEST_CASE("rng draws") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        CHECK(x == b.next());
        if (i == 0) CHECK(x != c.next());
    }
    std::array<int, 6> hist{};
    const int n = 60000;
    for (int i = 0; i < n; ++i) {
        const auto k = a.below(6);
        REQUIRE(k < 6);
        ++hist[k];
    }
    double chi2 = 0.0;
    for (int h : hist) chi2 += (h - n / 6.0) * (h - n / 6.0) / (n / 6.0);
    CHECK(chi2 < 20.5);  // 5 degrees of freedom, p = 0.001
    double lo = 1.0, hi = 0.0, sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = a.unit();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    CHECK(lo >= 0.0);
    CHECK(hi < 1.0);
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK_THROWS(a.below(0));
}

TEST_CASE("parameter validation") {
    auto cfg = quiet_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.force[0].prob_hit = 1.5;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("prob_hit"), ParameterError);
    cfg = quiet_config();
    cfg.force[1].flag = {30, 0};
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("flag"), ParameterError);
    cfg = quiet_config();
    cfg.force[0].move_range = -1;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("penalty matches the brute-force evaluator on random states") {
    std::mt19937_64 eng(2024);
    auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng); };
    const int lattice = 24;
    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        auto cfg = quiet_config(lattice);
        for (auto& f : cfg.force) {
            f.sensor_range = uni(1, 8);
            f.move_range = uni(0, 2);
            for (auto& w : f.w) w = uni(0, 3) == 0 ? 0.0 : std::uniform_real_distribution<double>(-100, 100)(eng);
            f.flag = {uni(0, lattice - 1), uni(0, lattice - 1)};
        }
        std::vector<Agent> agents;
        std::vector<int> used(lattice * lattice, 0);
        const int n = uni(1, 40);
        for (int k = 0; k < n; ++k) {
            Cell c{uni(0, lattice - 1), uni(0, lattice - 1)};
            if (used[c.y * lattice + c.x]) continue;
            used[c.y * lattice + c.x] = 1;
            const int h = uni(0, 5);
            agents.push_back(Agent{uni(0, 1) ? Side::blue : Side::red, c,
                                   h == 0 ? Health::killed : (h == 1 ? Health::injured : Health::alive), 1});
        }
        if (agents.empty() || !agents[0].living()) continue;
        const auto s = place(lattice, agents);
        const int who = 0;
        const auto& me = s.agents[0];
        const int rm = cfg.params(me.side).move_range;
        const Cell cand{std::clamp(me.pos.x + uni(-rm, rm), 0, lattice - 1),
                        std::clamp(me.pos.y + uni(-rm, rm), 0, lattice - 1)};
        const auto& w = cfg.params(me.side).w;
        const double expect = oracle::penalty(s, cfg, who, cand, w);
        CHECK(penalty(s, cfg, who, cand, w) == expect);
        CHECK(penalty(sense(s, cfg, who), s, cfg, who, cand, w) == expect);
        ++checked;
    }
    CHECK(checked > 700);
}

TEST_CASE("penalty examples") {
    auto cfg = quiet_config();
    const auto s = place(30, {red_at(10, 10), blue_at(25, 25)});
    CHECK(penalty(s, cfg, 0, {11, 11}, {0, 0, 0, 0, 0, 0}) == 0.0);
    CHECK(penalty(s, cfg, 0, {9, 10}, {3, 3, 3, 3, 0, 0}) == 0.0);  // nobody sensed

    // w6 = 5 alone: flag ratio against the enemy's flag at (29, 29).
    const std::array<double, 6> w6{0, 0, 0, 0, 0, 5};
    CHECK(penalty(s, cfg, 0, {10, 10}, w6) == 5.0);
    CHECK(penalty(s, cfg, 0, {11, 11}, w6) < 5.0);
    CHECK(penalty(s, cfg, 0, {9, 9}, w6) > 5.0);
    CHECK(penalty(s, cfg, 0, {11, 11}, w6) == doctest::Approx(5.0 * std::sqrt(2 * 18.0 * 18.0) / std::sqrt(2 * 19.0 * 19.0)));
    CHECK_THROWS_AS(penalty(s, cfg, 0, {12, 10}, w6), ParameterError);

    // Standing on the target flag: the ratio's denominator is taken as one.
    cfg.force[1].flag = {10, 10};
    CHECK(penalty(s, cfg, 0, {11, 10}, w6) == 5.0);
}

TEST_CASE("sensing and counts") {
    const auto cfg = quiet_config();
    const auto s = place(30, {red_at(10, 10), red_at(12, 12), red_at(16, 10), blue_at(11, 9, Health::injured),
                              blue_at(15, 15), red_at(10, 11, Health::killed)});
    const auto seen = sense(s, cfg, 0);
    CHECK(seen.alive_friend == std::vector<Cell>{{12, 12}});
    CHECK(seen.injured_enemy == std::vector<Cell>{{11, 9}});
    CHECK(seen.alive_enemy == std::vector<Cell>{{15, 15}});
    CHECK(seen.injured_friend.empty());
    CHECK(count_friends(s, 0, 2) == 1);
    CHECK(count_friends(s, 0, 6) == 2);
    CHECK(count_enemies(s, 0, 1) == 1);
    CHECK(count_enemies(s, 0, 5) == 2);
}

TEST_CASE("meta-personality rules") {
    auto cfg = quiet_config();
    cfg.force[0].w = {10, 40, 10, 40, 0, 10};
    cfg.force[0].threshold_range = 2;
    cfg.force[0].sensor_range = 5;

    // Three friends within r_T, ten enemies within r_S.
    std::vector<Agent> agents{red_at(10, 10), red_at(11, 10), red_at(9, 11), red_at(10, 12)};
    for (int k = 0; k < 10; ++k) agents.push_back(blue_at(6 + k, 15));
    const auto s = place(30, agents);

    auto ew = effective_weights(s, cfg, 0);
    CHECK(ew.w == cfg.force[0].w);  // every rule disabled
    CHECK_FALSE(ew.forced);

    cfg.force[0].combat_threshold = 4;  // 3 - 10 = -7 < 4: retreat
    ew = effective_weights(s, cfg, 0);
    CHECK(ew.w == std::array<double, 6>{10, -40, 10, -40, 0, 10});

    // Outnumbered by five against a threshold of -7: keeps pursuing.
    std::vector<Agent> few{red_at(10, 10)};
    for (int k = 0; k < 5; ++k) few.push_back(blue_at(8 + k, 13));
    const auto s2 = place(30, few);
    cfg.force[0].combat_threshold = -7;
    CHECK(effective_weights(s2, cfg, 0).w == cfg.force[0].w);
    cfg.force[0].combat_threshold = -4;
    CHECK(effective_weights(s2, cfg, 0).w[1] == -40);

    // Advance: too few friends nearby turns the enemy-flag weight around.
    cfg.force[0].combat_threshold = 0;
    cfg.force[0].advance_threshold = 4;
    CHECK(effective_weights(s, cfg, 0).w[5] == -10);
    cfg.force[0].advance_threshold = 3;
    CHECK(effective_weights(s, cfg, 0).w[5] == 10);

    // Cluster: enough friends drops the friendly-attraction terms, otherwise
    // the agent is pulled toward the sensed friends' centre.
    cfg.force[0].advance_threshold = 0;
    cfg.force[0].cluster_threshold = 3;
    ew = effective_weights(s, cfg, 0);
    CHECK(ew.w[0] == 0.0);
    CHECK(ew.w[2] == 0.0);
    CHECK_FALSE(ew.forced);
    cfg.force[0].cluster_threshold = 4;
    ew = effective_weights(s, cfg, 0);
    CHECK(ew.forced);
    CHECK(ew.target_x == doctest::Approx(10.0));
    CHECK(ew.target_y == doctest::Approx(11.0));
    CHECK(ew.w[0] == 10.0);
}

TEST_CASE("ties are broken uniformly") {
    const auto cfg = quiet_config(11);
    auto s = place(11, {red_at(5, 5)});
    std::map<std::pair<int, int>, int> hits;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        s.occupancy.assign(121, -1);
        s.agents[0].pos = {5, 5};
        s.occupancy[5 * 11 + 5] = 0;
        move_phase(s, cfg);
        ++hits[{s.agents[0].pos.x - 5, s.agents[0].pos.y - 5}];
    }
    CHECK(hits.size() == 9);
    const double p = 1.0 / 9.0, sigma = std::sqrt(n * p * (1 - p));
    for (const auto& [cell, count] : hits) CHECK(std::abs(count - n * p) < 3 * sigma);
}

TEST_CASE("a weightless agent performs an unbiased random walk") {
    const auto cfg = quiet_config(41);
    auto s = place(41, {red_at(20, 20)});
    const int n = 10000;
    double sx = 0, sy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
        const Cell before = s.agents[0].pos;
        move_phase(s, cfg);
        const double dx = s.agents[0].pos.x - before.x, dy = s.agents[0].pos.y - before.y;
        sx += dx;
        sy += dy;
        sxx += dx * dx;
        syy += dy * dy;
        // Keep the walk away from the walls.
        s.occupancy.assign(41 * 41, -1);
        s.agents[0].pos = {20, 20};
        s.occupancy[20 * 41 + 20] = 0;
    }
    const double mx = sx / n, my = sy / n;
    const double se_x = std::sqrt((sxx / n - mx * mx) / n), se_y = std::sqrt((syy / n - my * my) / n);
    CHECK(std::abs(mx) < 3 * se_x);
    CHECK(std::abs(my) < 3 * se_y);
}

TEST_CASE("movement follows the flag and respects occupancy") {
    auto cfg = quiet_config();
    cfg.force[0].w = {0, 0, 0, 0, 0, 1};
    cfg.force[1].flag = {20, 15};
    auto s = place(30, {red_at(10, 10)});
    move_phase(s, cfg);
    CHECK(s.agents[0].pos == Cell{11, 11});

    // Boxed in on all sides: the only candidate is its own cell.
    std::vector<Agent> boxed{red_at(10, 10)};
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
            if (dx || dy) boxed.push_back(blue_at(10 + dx, 10 + dy));
    cfg.force[1].move_range = 0;
    auto b = place(30, boxed);
    move_phase(b, cfg);
    CHECK(b.agents[0].pos == Cell{10, 10});
    b.check_consistency();
}

TEST_CASE("fire phase basics") {
    auto cfg = quiet_config();
    cfg.force[0].prob_hit = cfg.force[1].prob_hit = 0.0;
    const auto base = place(30, {red_at(10, 10), blue_at(11, 10), blue_at(12, 11)});
    auto s = base;
    const auto st = fire_phase(s, cfg);
    CHECK(s.agents == base.agents);
    CHECK(st.hits[0] == 0);
    CHECK(st.shots[0] == 2);

    // Out of range: nothing happens even with certain hits.
    cfg.force[0].prob_hit = cfg.force[1].prob_hit = 1.0;
    auto far = place(30, {red_at(2, 2), blue_at(20, 20)});
    fire_phase(far, cfg);
    CHECK(far.agents[0].health == Health::alive);
    CHECK(far.agents[1].health == Health::alive);

    // Certain hits, simultaneous: the pair injure each other, then kill each
    // other, and killed agents leave the lattice.
    auto pair = place(30, {red_at(5, 5), blue_at(6, 6)});
    fire_phase(pair, cfg);
    CHECK(pair.agents[0].health == Health::injured);
    CHECK(pair.agents[1].health == Health::injured);
    fire_phase(pair, cfg);
    CHECK(pair.agents[0].health == Health::killed);
    CHECK(pair.agents[1].health == Health::killed);
    CHECK(pair.occupant({5, 5}) == -1);
    CHECK(pair.occupant({6, 6}) == -1);
    pair.check_consistency();

    // Defence two: two hits per degradation.
    cfg.force[1].defence = 2;
    auto armoured = place(30, {red_at(5, 5), Agent{Side::blue, {6, 6}, Health::alive, 2}});
    cfg.force[1].prob_hit = 0.0;
    fire_phase(armoured, cfg);
    CHECK(armoured.agents[1].health == Health::alive);
    CHECK(armoured.agents[1].defence_left == 1);
    fire_phase(armoured, cfg);
    CHECK(armoured.agents[1].health == Health::injured);
    CHECK(armoured.agents[1].defence_left == 2);

    // Target cap.
    cfg = quiet_config();
    cfg.force[0].max_targets = 2;
    cfg.force[0].prob_hit = 0.0;
    auto crowd = place(30, {red_at(10, 10), blue_at(11, 10), blue_at(9, 10), blue_at(10, 11), blue_at(10, 9)});
    CHECK(fire_phase(crowd, cfg).shots[0] == 2);
}

TEST_CASE("point-blank hits follow the binomial expectation") {
    auto cfg = quiet_config();
    for (auto& f : cfg.force) {
        f.prob_hit = 2e-3;
        f.max_targets = 5;
        f.fire_range = 5;
    }
    std::vector<Agent> agents;
    for (int k = 0; k < 10; ++k) agents.push_back(red_at(10 + k % 5, 10 + k / 5));
    for (int k = 0; k < 10; ++k) agents.push_back(blue_at(10 + k % 5, 12 + k / 5));
    const auto base = place(30, agents);
    Rng rng(99);
    const long steps = 100000;
    std::array<long, 2> hits{}, shots{};
    for (long t = 0; t < steps; ++t) {
        CaState s = base;
        s.rng = rng;
        const auto st = fire_phase(s, cfg);
        rng = s.rng;
        for (int k = 0; k < 2; ++k) {
            hits[k] += st.hits[k];
            shots[k] += st.shots[k];
        }
    }
    const double n = steps * 50.0, p = 2e-3;
    for (int k = 0; k < 2; ++k) {
        CHECK(shots[k] == steps * 50);
        CHECK(std::abs(hits[k] - n * p) < 3 * std::sqrt(n * p * (1 - p)));
    }
}

TEST_CASE("initial placement") {
    auto cfg = scenario::builtin("classic-fronts-ca").ca->config;
    const auto s = initial_state(cfg, 5);
    s.check_consistency();
    const auto c = count(s);
    CHECK(c.alive[0] == cfg.force[0].squad_size);
    CHECK(c.alive[1] == cfg.force[1].squad_size);
    for (const auto& a : s.agents) {
        const auto& p = cfg.params(a.side);
        const int x0 = p.start_centre.x - p.start_size.x / 2, y0 = p.start_centre.y - p.start_size.y / 2;
        CHECK(a.pos.x >= std::max(0, x0));
        CHECK(a.pos.x < x0 + p.start_size.x);
        CHECK(a.pos.y >= std::max(0, y0));
        CHECK(a.pos.y < y0 + p.start_size.y);
    }
    cfg.force[0].start_size = {5, 5};
    CHECK_THROWS_AS(initial_state(cfg, 5), ParameterError);
}

TEST_CASE("step invariants over a classic fronts run") {
    const auto cfg = scenario::builtin("classic-fronts-ca").ca->config;
    auto s = initial_state(cfg, 17);
    const auto total = s.agents.size();
    auto prev = count(s);
    auto prev_agents = s.agents;
    for (int step = 0; step < 120; ++step) {
        move_phase(s, cfg);
        s.check_consistency();
        fire_phase(s, cfg);
        s.check_consistency();
        CHECK(s.agents.size() == total);
        const auto c = count(s);
        for (Side side : {Side::red, Side::blue}) CHECK(c.living(side) <= prev.living(side));
        for (std::size_t i = 0; i < total; ++i) {
            CHECK(static_cast<int>(s.agents[i].health) >= static_cast<int>(prev_agents[i].health));
            CHECK(s.agents[i].side == prev_agents[i].side);
        }
        prev = c;
        prev_agents = s.agents;
    }
}

TEST_CASE("runs are deterministic per seed") {
    const auto cfg = scenario::builtin("precess-ca").ca->config;
    const auto zero = ca_run(cfg, 8, 0, {0});
    REQUIRE(zero.snapshots.size() == 1);
    CHECK(zero.snapshots[0] == snapshot(initial_state(cfg, 8)));
    CHECK(zero.counts.size() == 1);

    const auto a = ca_run(cfg, 3, 60, {}, 10);
    const auto b = ca_run(cfg, 3, 60, {}, 10);
    const auto c = ca_run(cfg, 4, 60, {}, 10);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(a.counts.size() == 61);
    CHECK(a.snapshots.size() == 7);
    CHECK(a.snapshots.back().step == 60);
}

TEST_CASE("classic fronts: both forces lose agents after contact") {
    auto sc = scenario::builtin("classic-fronts-ca");
    REQUIRE(sc.ca->config.force[0].squad_size == 225);
    const auto traj = ca_run(sc.ca->config, 1, 300, {}, 10);
    const auto m = analysis::metrics_from_ca(sc, traj);
    const auto engage = analysis::first_engagement(m);
    REQUIRE(engage.has_value());
    const auto at = static_cast<std::size_t>(m.records[*engage].t);
    for (Side side : {Side::red, Side::blue}) {
        CHECK(traj.counts.back().alive[side_index(side)] < traj.counts[at].alive[side_index(side)]);
    }
}

}  // TEST_SUITE

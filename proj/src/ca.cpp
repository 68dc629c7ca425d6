#include "cdyn/ca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cdyn/errors.hpp"

namespace cdyn::ca {

std::uint64_t Rng::next() { return eng_(); }

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw ParameterError("Rng::below needs n > 0");
    // Reject the incomplete top bucket so every residue is equally likely.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = eng_();
    while (x >= limit) x = eng_();
    return x % n;
}

double Rng::unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

std::string_view to_string(Side s) { return s == Side::red ? "red" : "blue"; }

namespace {

int chebyshev(Cell a, Cell b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }

// Plain sqrt of the squared offsets: exact-integer squares, and far cheaper than hypot.
double euclid(Cell a, Cell b) {
    const double dx = a.x - b.x, dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

double euclid(Cell a, double x, double y) {
    const double dx = a.x - x, dy = a.y - y;
    return std::sqrt(dx * dx + dy * dy);
}

std::size_t cell_index(const CaState& s, Cell c) { return static_cast<std::size_t>(c.y * s.lattice + c.x); }

// Indices of living agents (other than `self`) whose cell lies within `range`
// of `centre`, in roster order.
void agents_near(const CaState& s, Cell centre, int range, int self, std::vector<int>& out) {
    out.clear();
    const int x0 = std::max(0, centre.x - range), x1 = std::min(s.lattice - 1, centre.x + range);
    const int y0 = std::max(0, centre.y - range), y1 = std::min(s.lattice - 1, centre.y + range);
    for (int y = y0; y <= y1; ++y) {
        const int* row = s.occupancy.data() + static_cast<std::ptrdiff_t>(y) * s.lattice;
        for (int x = x0; x <= x1; ++x) {
            const int a = row[x];
            if (a >= 0 && a != self) out.push_back(a);
        }
    }
    std::sort(out.begin(), out.end());
}

// Living agents (other than `self`) within `range` of `centre`, counted by
// whether they share `side`.
std::pair<int, int> count_near(const CaState& s, Cell centre, int range, int self, Side side) {
    int same = 0, other = 0;
    const int x0 = std::max(0, centre.x - range), x1 = std::min(s.lattice - 1, centre.x + range);
    const int y0 = std::max(0, centre.y - range), y1 = std::min(s.lattice - 1, centre.y + range);
    for (int y = y0; y <= y1; ++y) {
        const int* row = s.occupancy.data() + static_cast<std::ptrdiff_t>(y) * s.lattice;
        for (int x = x0; x <= x1; ++x) {
            const int a = row[x];
            if (a < 0 || a == self) continue;
            (s.agents[static_cast<std::size_t>(a)].side == side ? same : other) += 1;
        }
    }
    return {same, other};
}

std::string force_prefix(int i) { return i == 0 ? "red." : "blue."; }

}  // namespace

void CaForceParams::validate(int lattice) const {
    auto fail = [](const std::string& field, const std::string& why) { throw ParameterError(field + ": " + why); };
    if (squad_size < 0) fail("squad_size", "must be >= 0");
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!std::isfinite(w[i])) fail("w" + std::to_string(i + 1), "must be finite");
    }
    if (sensor_range < 0) fail("r_S", "must be >= 0");
    if (fire_range < 0) fail("r_F", "must be >= 0");
    if (threshold_range < 0) fail("r_T", "must be >= 0");
    if (move_range < 0) fail("r_M", "must be >= 0");
    if (!(prob_hit >= 0.0 && prob_hit <= 1.0)) fail("prob_hit", "must be in [0, 1]");
    if (max_targets < 0 && max_targets != kAllTargets) fail("max_targets", "must be >= 0 or all");
    if (defence < 1) fail("defence", "must be >= 1");
    if (start_size.x < 1 || start_size.y < 1) fail("start_size", "must be positive");
    auto inside = [lattice](Cell c) { return c.x >= 0 && c.y >= 0 && c.x < lattice && c.y < lattice; };
    if (!inside(start_centre)) fail("start_centre", "outside the lattice");
    if (!inside(flag)) fail("flag", "outside the lattice");
}

void CaConfig::validate() const {
    if (lattice < 1) throw ParameterError("lattice: must be positive");
    for (int i = 0; i < 2; ++i) {
        try {
            force[static_cast<std::size_t>(i)].validate(lattice);
        } catch (const ParameterError& e) {
            throw ParameterError(force_prefix(i) + e.what());
        }
    }
}

void CaState::check_consistency() const {
    if (occupancy.size() != static_cast<std::size_t>(lattice) * static_cast<std::size_t>(lattice)) {
        throw Error("occupancy size does not match lattice");
    }
    std::size_t marked = 0;
    for (std::size_t c = 0; c < occupancy.size(); ++c) {
        const int a = occupancy[c];
        if (a < 0) continue;
        ++marked;
        if (static_cast<std::size_t>(a) >= agents.size()) throw Error("occupancy refers to unknown agent");
        const Agent& ag = agents[static_cast<std::size_t>(a)];
        if (!ag.living()) throw Error("killed agent still occupies a cell");
        if (cell_index(*this, ag.pos) != c) throw Error("occupancy disagrees with agent position");
    }
    std::size_t living = 0;
    for (const Agent& a : agents) {
        if (!a.living()) continue;
        ++living;
        if (!inside(a.pos)) throw Error("living agent outside the lattice");
    }
    // Every marked cell maps back to its agent, so equal counts rule out sharing.
    if (living != marked) throw Error("living agents share a cell or are missing from occupancy");
}

Sensed sense(const CaState& state, const CaConfig& cfg, int agent) {
    const Agent& me = state.agents[static_cast<std::size_t>(agent)];
    thread_local std::vector<int> near;
    agents_near(state, me.pos, cfg.params(me.side).sensor_range, agent, near);
    Sensed out;
    for (int i : near) {
        const Agent& o = state.agents[static_cast<std::size_t>(i)];
        const bool ally = o.side == me.side;
        const bool hurt = o.health == Health::injured;
        auto& bucket = ally ? (hurt ? out.injured_friend : out.alive_friend) : (hurt ? out.injured_enemy : out.alive_enemy);
        bucket.push_back(o.pos);
    }
    return out;
}

int count_friends(const CaState& state, int agent, int range) {
    const Agent& me = state.agents[static_cast<std::size_t>(agent)];
    return count_near(state, me.pos, range, agent, me.side).first;
}

int count_enemies(const CaState& state, int agent, int range) {
    const Agent& me = state.agents[static_cast<std::size_t>(agent)];
    return count_near(state, me.pos, range, agent, me.side).second;
}

EffectiveWeights effective_weights(const CaState& state, const CaConfig& cfg, int agent) {
    const Agent& me = state.agents[static_cast<std::size_t>(agent)];
    const CaForceParams& p = cfg.params(me.side);
    EffectiveWeights ew;
    ew.w = p.w;
    if (p.advance_threshold == 0 && p.cluster_threshold == 0 && p.combat_threshold == 0) return ew;

    // One sweep gathers friends within r_T, enemies within r_S and the
    // friendly centroid within r_S. Integer sums, so order does not matter.
    int near_friends = 0, near_enemies = 0, sensed_friends = 0;
    double sx = 0.0, sy = 0.0;
    const int reach = std::max(p.threshold_range, p.sensor_range);
    const int x0 = std::max(0, me.pos.x - reach), x1 = std::min(state.lattice - 1, me.pos.x + reach);
    const int y0 = std::max(0, me.pos.y - reach), y1 = std::min(state.lattice - 1, me.pos.y + reach);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const int i = state.occupancy[static_cast<std::size_t>(y * state.lattice + x)];
            if (i < 0 || i == agent) continue;
            const int dist = std::max(std::abs(x - me.pos.x), std::abs(y - me.pos.y));
            if (state.agents[static_cast<std::size_t>(i)].side == me.side) {
                if (dist <= p.threshold_range) ++near_friends;
                if (dist <= p.sensor_range) {
                    ++sensed_friends;
                    sx += x;
                    sy += y;
                }
            } else if (dist <= p.sensor_range) {
                ++near_enemies;
            }
        }
    }

    if (p.advance_threshold != 0 && near_friends < p.advance_threshold) ew.w[5] = -ew.w[5];
    if (p.cluster_threshold != 0) {
        if (near_friends >= p.cluster_threshold) {
            ew.w[0] = 0.0;
            ew.w[2] = 0.0;
        } else if (sensed_friends > 0) {
            ew.forced = true;
            ew.target_x = sx / sensed_friends;
            ew.target_y = sy / sensed_friends;
        }
    }
    if (p.combat_threshold != 0 && near_friends - near_enemies < p.combat_threshold) {
        ew.w[1] = -ew.w[1];
        ew.w[3] = -ew.w[3];
    }
    return ew;
}

double penalty(const Sensed& seen, const CaState& state, const CaConfig& cfg, int agent, Cell candidate,
               const std::array<double, 6>& w) {
    const Agent& me = state.agents[static_cast<std::size_t>(agent)];
    if (chebyshev(me.pos, candidate) > cfg.params(me.side).move_range) {
        throw ParameterError("candidate cell outside the movement range");
    }
    const double rf = std::sqrt(2.0) * cfg.params(me.side).sensor_range;
    const double re = std::sqrt(2.0) * cfg.params(enemy_of(me.side)).sensor_range;
    auto term = [&](double wi, double scale, const std::vector<Cell>& cells) {
        if (cells.empty() || wi == 0.0 || scale == 0.0) return 0.0;
        double sum = 0.0;
        for (Cell c : cells) sum += euclid(c, candidate);
        return wi * sum / (scale * static_cast<double>(cells.size()));
    };
    auto flag_ratio = [&](double wi, Cell flag) {
        if (wi == 0.0) return 0.0;
        double d_old = euclid(me.pos, flag);
        if (d_old == 0.0) d_old = 1.0;
        return wi * euclid(candidate, flag) / d_old;
    };
    return term(w[0], rf, seen.alive_friend) + term(w[1], re, seen.alive_enemy) + term(w[2], rf, seen.injured_friend) +
           term(w[3], re, seen.injured_enemy) + flag_ratio(w[4], cfg.params(me.side).flag) +
           flag_ratio(w[5], cfg.params(enemy_of(me.side)).flag);
}

double penalty(const CaState& state, const CaConfig& cfg, int agent, Cell candidate, const std::array<double, 6>& w) {
    return penalty(sense(state, cfg, agent), state, cfg, agent, candidate, w);
}

CaState initial_state(const CaConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    CaState s;
    s.lattice = cfg.lattice;
    s.occupancy.assign(static_cast<std::size_t>(cfg.lattice) * static_cast<std::size_t>(cfg.lattice), -1);
    s.rng = Rng(seed);
    for (int f = 0; f < 2; ++f) {
        const CaForceParams& p = cfg.force[static_cast<std::size_t>(f)];
        const int x0 = std::max(0, p.start_centre.x - p.start_size.x / 2);
        const int y0 = std::max(0, p.start_centre.y - p.start_size.y / 2);
        const int x1 = std::min(cfg.lattice - 1, p.start_centre.x - p.start_size.x / 2 + p.start_size.x - 1);
        const int y1 = std::min(cfg.lattice - 1, p.start_centre.y - p.start_size.y / 2 + p.start_size.y - 1);
        int free_cells = 0;
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) free_cells += s.occupant({x, y}) < 0;
        }
        if (p.squad_size > free_cells) {
            throw ParameterError(force_prefix(f) + "squad_size: start box has only " + std::to_string(free_cells) +
                                 " free cells");
        }
        const auto w = static_cast<std::uint64_t>(x1 - x0 + 1);
        const auto h = static_cast<std::uint64_t>(y1 - y0 + 1);
        for (int k = 0; k < p.squad_size; ++k) {
            Cell c;
            do {
                c = {x0 + static_cast<int>(s.rng.below(w)), y0 + static_cast<int>(s.rng.below(h))};
            } while (s.occupant(c) >= 0);
            s.occupancy[cell_index(s, c)] = static_cast<int>(s.agents.size());
            s.agents.push_back(Agent{static_cast<Side>(f), c, Health::alive, p.defence});
        }
    }
    return s;
}

void move_phase(CaState& state, const CaConfig& cfg) {
    std::vector<int> order;
    for (std::size_t i = 0; i < state.agents.size(); ++i) {
        if (state.agents[i].living()) order.push_back(static_cast<int>(i));
    }
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[state.rng.below(i)]);
    }

    std::vector<Cell> ties, candidates, closer;
    for (int a : order) {
        Agent& me = state.agents[static_cast<std::size_t>(a)];
        const int rm = cfg.params(me.side).move_range;
        const EffectiveWeights ew = effective_weights(state, cfg, a);
        const Sensed seen = sense(state, cfg, a);

        candidates.clear();
        for (int dy = -rm; dy <= rm; ++dy) {
            for (int dx = -rm; dx <= rm; ++dx) {
                const Cell c{me.pos.x + dx, me.pos.y + dy};
                if (!state.inside(c)) continue;
                if ((dx != 0 || dy != 0) && state.occupant(c) >= 0) continue;
                candidates.push_back(c);
            }
        }
        // A forced cluster move only admits cells that close on the friendly
        // centroid; the penalty chooses among them. With no such cell the
        // agent falls back to the unrestricted choice.
        if (ew.forced) {
            const double here = euclid(me.pos, ew.target_x, ew.target_y);
            closer.clear();
            for (const Cell& c : candidates) {
                if (euclid(c, ew.target_x, ew.target_y) < here - 1e-12) closer.push_back(c);
            }
            if (!closer.empty()) candidates.swap(closer);
        }

        double best = 0.0;
        ties.clear();
        for (const Cell& c : candidates) {
            const double z = penalty(seen, state, cfg, a, c, ew.w);
            const double tol = 1e-12 * std::max(1.0, std::abs(best));
            if (ties.empty() || z < best - tol) {
                best = z;
                ties.assign(1, c);
            } else if (z <= best + tol) {
                ties.push_back(c);
            }
        }
        const Cell dest = ties.size() == 1 ? ties.front() : ties[state.rng.below(ties.size())];
        if (dest != me.pos) {
            state.occupancy[cell_index(state, me.pos)] = -1;
            state.occupancy[cell_index(state, dest)] = a;
            me.pos = dest;
        }
    }
}

FireStats fire_phase(CaState& state, const CaConfig& cfg) {
    FireStats stats;
    const std::vector<Agent> before = state.agents;
    std::vector<int> targets;
    for (std::size_t i = 0; i < before.size(); ++i) {
        const Agent& shooter = before[i];
        if (!shooter.living()) continue;
        const CaForceParams& p = cfg.params(shooter.side);
        if (p.max_targets == 0) continue;
        targets.clear();
        const int r = p.fire_range;
        const int x0 = std::max(0, shooter.pos.x - r), x1 = std::min(state.lattice - 1, shooter.pos.x + r);
        const int y0 = std::max(0, shooter.pos.y - r), y1 = std::min(state.lattice - 1, shooter.pos.y + r);
        // Occupancy still reflects the pre-phase snapshot: casualties leave
        // the lattice only once every shot is resolved.
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const int j = state.occupancy[static_cast<std::size_t>(y * state.lattice + x)];
                if (j < 0 || before[static_cast<std::size_t>(j)].side == shooter.side) continue;
                targets.push_back(j);
            }
        }
        std::size_t n = targets.size();
        if (p.max_targets != kAllTargets && static_cast<std::size_t>(p.max_targets) < n) {
            // Partial Fisher-Yates: the first max_targets entries form a uniform sample.
            const auto k = static_cast<std::size_t>(p.max_targets);
            for (std::size_t m = 0; m < k; ++m) {
                std::swap(targets[m], targets[m + state.rng.below(n - m)]);
            }
            n = k;
        }
        const auto side = static_cast<std::size_t>(side_index(shooter.side));
        for (std::size_t m = 0; m < n; ++m) {
            ++stats.shots[side];
            if (!state.rng.bernoulli(p.prob_hit)) continue;
            ++stats.hits[side];
            Agent& t = state.agents[static_cast<std::size_t>(targets[m])];
            if (!t.living()) continue;
            if (--t.defence_left > 0) continue;
            t.defence_left = cfg.params(t.side).defence;
            t.health = t.health == Health::alive ? Health::injured : Health::killed;
        }
    }
    for (std::size_t i = 0; i < state.agents.size(); ++i) {
        const Agent& a = state.agents[i];
        if (!a.living() && before[i].living()) state.occupancy[cell_index(state, a.pos)] = -1;
    }
    return stats;
}

FireStats ca_step(CaState& state, const CaConfig& cfg) {
    move_phase(state, cfg);
    FireStats s = fire_phase(state, cfg);
    ++state.t;
    return s;
}

CountRecord count(const CaState& state) {
    CountRecord r;
    r.step = state.t;
    for (const Agent& a : state.agents) {
        const auto i = static_cast<std::size_t>(side_index(a.side));
        if (a.health == Health::alive) ++r.alive[i];
        if (a.health == Health::injured) ++r.injured[i];
    }
    return r;
}

CaSnapshot snapshot(const CaState& state) {
    CaSnapshot s;
    s.step = state.t;
    for (const Agent& a : state.agents) {
        if (a.living()) s.agents.push_back(a);
    }
    return s;
}

CaTrajectory ca_run(const CaConfig& cfg, std::uint64_t seed, long n_steps, const std::vector<long>& snapshot_steps,
                    long every) {
    if (n_steps < 0) throw ParameterError("n_steps must be >= 0");
    CaState state = initial_state(cfg, seed);
    CaTrajectory traj;
    traj.seed = seed;
    auto wanted = [&](long t) {
        if (!snapshot_steps.empty()) {
            return std::find(snapshot_steps.begin(), snapshot_steps.end(), t) != snapshot_steps.end();
        }
        return every > 0 && (t % every == 0 || t == n_steps);
    };
    traj.counts.push_back(count(state));
    if (wanted(0)) traj.snapshots.push_back(snapshot(state));
    for (long t = 1; t <= n_steps; ++t) {
        ca_step(state, cfg);
        traj.counts.push_back(count(state));
        if (wanted(t)) traj.snapshots.push_back(snapshot(state));
    }
    return traj;
}

}  // namespace cdyn::ca

#pragma once

// Stochastic agent lattice in the ISAAC style. Each step every living agent
// moves to the cell minimising a six-term penalty (possibly modified by its
// meta-personality), then all agents fire simultaneously.
//
// Ranges are Chebyshev squares: a range r covers every cell with
// max(|dx|, |dy|) <= r. Lattice coordinates run 0 .. size - 1.

#include <array>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace cdyn::ca {

// Seeded 64-bit Mersenne Twister with portable integer and real draws, so
// trajectories do not depend on the standard library's distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

    std::uint64_t next();
    // Uniform on [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);
    // Uniform on [0, 1) with 53 random bits.
    double unit();
    bool bernoulli(double p) { return unit() < p; }

    bool operator==(const Rng&) const = default;

private:
    std::mt19937_64 eng_;
};

enum class Side : std::uint8_t { red = 0, blue = 1 };
enum class Health : std::uint8_t { alive, injured, killed };

constexpr int side_index(Side s) { return static_cast<int>(s); }
constexpr Side enemy_of(Side s) { return s == Side::red ? Side::blue : Side::red; }
std::string_view to_string(Side s);

struct Cell {
    int x = 0;
    int y = 0;
    bool operator==(const Cell&) const = default;
};

struct Agent {
    Side side = Side::red;
    Cell pos;
    Health health = Health::alive;
    int defence_left = 1;

    bool living() const { return health != Health::killed; }
    bool operator==(const Agent&) const = default;
};

constexpr int kAllTargets = -1;

struct CaForceParams {
    int squad_size = 0;
    std::array<double, 6> w{};  // w1 .. w6
    int sensor_range = 5;       // r_S
    int fire_range = 3;         // r_F
    int threshold_range = 2;    // r_T, also the constraint range
    int move_range = 1;         // r_M
    double prob_hit = 0.0;
    int max_targets = kAllTargets;  // count, or kAllTargets
    int defence = 1;                // hits absorbed per health degradation
    int cluster_threshold = 0;      // 0 disables
    int advance_threshold = 0;      // 0 disables
    int combat_threshold = 0;       // delta_c; 0 disables
    Cell start_centre;
    Cell start_size;
    Cell flag;  // this force's own flag; the enemy heads for it through w6

    // Throws ParameterError naming the first violated constraint.
    void validate(int lattice) const;

    bool operator==(const CaForceParams&) const = default;
};

struct CaConfig {
    int lattice = 100;  // square lattice side
    std::array<CaForceParams, 2> force;  // indexed by side_index

    const CaForceParams& params(Side s) const { return force[static_cast<std::size_t>(side_index(s))]; }
    void validate() const;
    bool operator==(const CaConfig&) const = default;
};

struct CaState {
    int lattice = 100;
    std::vector<Agent> agents;
    std::vector<int> occupancy;  // agent index per cell, -1 if empty; killed agents are absent
    Rng rng;
    long t = 0;

    int occupant(Cell c) const { return occupancy[static_cast<std::size_t>(c.y * lattice + c.x)]; }
    bool inside(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < lattice && c.y < lattice; }
    // Throws if occupancy and roster disagree or two living agents share a cell.
    void check_consistency() const;

    bool operator==(const CaState&) const = default;
};

// Effective weights after the meta-personality rules, plus the cluster rule's
// forced move (toward `target`) when it fires.
struct EffectiveWeights {
    std::array<double, 6> w{};
    bool forced = false;
    double target_x = 0.0;
    double target_y = 0.0;
};

// Agents seen by a mover: living agents (other than itself) within its sensor
// square, split by side and health.
struct Sensed {
    std::vector<Cell> alive_friend;
    std::vector<Cell> alive_enemy;
    std::vector<Cell> injured_friend;
    std::vector<Cell> injured_enemy;
};

Sensed sense(const CaState& state, const CaConfig& cfg, int agent);

// Living friends (excluding the agent) within `range` of its cell, and
// living enemies within `range`.
int count_friends(const CaState& state, int agent, int range);
int count_enemies(const CaState& state, int agent, int range);

EffectiveWeights effective_weights(const CaState& state, const CaConfig& cfg, int agent);

// Six-term penalty of moving `agent` to `candidate`.
double penalty(const CaState& state, const CaConfig& cfg, int agent, Cell candidate,
               const std::array<double, 6>& w);
// Same, reusing a precomputed sensor sweep.
double penalty(const Sensed& seen, const CaState& state, const CaConfig& cfg, int agent, Cell candidate,
               const std::array<double, 6>& w);

// Places both squads by rejection sampling inside their start boxes.
CaState initial_state(const CaConfig& cfg, std::uint64_t seed);

void move_phase(CaState& state, const CaConfig& cfg);

struct FireStats {
    std::array<long, 2> shots{};  // shots fired by each side
    std::array<long, 2> hits{};   // hits scored by each side
};
FireStats fire_phase(CaState& state, const CaConfig& cfg);

// move_phase then fire_phase; advances t.
FireStats ca_step(CaState& state, const CaConfig& cfg);

struct CountRecord {
    long step = 0;
    std::array<int, 2> alive{};
    std::array<int, 2> injured{};
    int living(Side s) const {
        const auto i = static_cast<std::size_t>(side_index(s));
        return alive[i] + injured[i];
    }
    bool operator==(const CountRecord&) const = default;
};

struct CaSnapshot {
    long step = 0;
    std::vector<Agent> agents;  // living agents only
    bool operator==(const CaSnapshot&) const = default;
};

struct CaTrajectory {
    std::uint64_t seed = 0;
    std::vector<CountRecord> counts;  // one per step, including step 0
    std::vector<CaSnapshot> snapshots;
    bool operator==(const CaTrajectory&) const = default;
};

CountRecord count(const CaState& state);
CaSnapshot snapshot(const CaState& state);

// Runs n_steps steps. Snapshots are taken at the listed steps (0 allowed);
// an empty list records every `every`-th step and the final step instead
// (every <= 0: none).
CaTrajectory ca_run(const CaConfig& cfg, std::uint64_t seed, long n_steps,
                    const std::vector<long>& snapshot_steps = {}, long every = 0);

}  // namespace cdyn::ca

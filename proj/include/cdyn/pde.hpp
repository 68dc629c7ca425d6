#pragma once

// Right-hand side of the coupled two-force advection-diffusion-attrition
// system. Each force w with enemy e evolves as
//
//   dw/dt = div(D grad w) - [w (k_fire * e) + d e] - div(w V)
//   V     = G w + A_a grad(K_a * w) - A_r w grad(K_r * w)
//
// where G is the goal velocity after the force's combat switch. Transport
// terms are assembled in conservative flux form on cell faces with zero flux
// through the domain walls, so they never change total mass.

#include <memory>
#include <optional>
#include <string_view>
#include <utility>

#include "cdyn/grid.hpp"

namespace cdyn::pde {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Vec2&) const = default;
};

enum class SwitchMode { none, front, pursuit };

std::string_view to_string(SwitchMode mode);
std::optional<SwitchMode> parse_switch_mode(std::string_view text);

struct PdeForceParams {
    double diffusion = 0.0;                // D
    Vec2 goal_velocity{};                  // C
    double attraction = 0.0;               // A_a
    double repulsion = 0.0;                // A_r
    double attraction_radius = 5.0;        // r_a
    double repulsion_radius = 2.5;         // r_r
    double sensor_radius = 3.0;            // r_S
    double combat_threshold = 0.0;         // delta c
    int attack = -1;
    double aimed_fire = 0.0;               // d (Lanchester aimed fire)
    double fire_rate = 0.0;                // beta
    double fire_decay = 0.2;               // nu
    double fire_range = 0.0;               // r_op
    double initial_density = 0.0;          // ID
    double initial_radius = 5.0;           // rho
    Vec2 initial_centre{};                 // mu
    double inner_threshold = 0.0;          // IT, carried but unused
    SwitchMode switch_mode = SwitchMode::none;
    Vec2 goal{};                           // point the force is heading for

    // Throws ParameterError naming the first violated constraint.
    void validate() const;

    bool operator==(const PdeForceParams&) const = default;
};

struct PdeState {
    ScalarField u;
    ScalarField v;
    double t = 0.0;

    // Throws if geometries differ or any density is negative / non-finite.
    void validate() const;
};

// Circular plateau of height `density` and radius `radius` around `centre`,
// with a one-cell cosine ramp at the rim.
ScalarField initial_profile(const GridGeometry& grid, double density, double radius, Vec2 centre);

PdeState initial_state(const GridGeometry& grid, const PdeForceParams& u, const PdeForceParams& v);

// Conservative 5-point diffusion with zero-flux walls.
ScalarField f_diff(const ScalarField& w, const PdeForceParams& p);

// -(w (k_fire * enemy) + d enemy). k_fire may be the all-zero kernel.
ScalarField f_react(const ScalarField& w, const ScalarField& enemy, const PdeForceParams& p,
                    const Kernel& k_fire);

// +C where own_mass - enemy_mass > delta c, otherwise -C.
VectorField combat_switch_front(const ScalarField& own_mass, const ScalarField& enemy_mass,
                                const PdeForceParams& p);

// C + s * enemy_mass * unit(grad enemy_mass), s = +1 where own_mass - enemy_mass >= delta c and
// s = attack elsewhere. `enemy_mass` is the enemy's sensor-disc mass; the
// unit gradient is zero where |grad| < 1e-12.
VectorField combat_switch_pursuit(const ScalarField& own_mass, const ScalarField& enemy_mass,
                                  const PdeForceParams& p);

// Constant C everywhere.
VectorField uniform_goal(const GridGeometry& grid, const PdeForceParams& p);

// Koren limiter in the form used for w_{i+1/2} = w_i + psi(theta) (w_i - w_{i-1}).
double koren_psi(double theta);

// -div(w V) with V as in the header comment; K_a, K_r precomputed convolutions.
ScalarField f_vel(const ScalarField& w, const VectorField& goal, const PdeForceParams& p,
                  const ScalarField& attraction_mass, const ScalarField& repulsion_mass);

// Convenience overload building the aggregation convolutions from kernels.
ScalarField f_vel(const ScalarField& w, const VectorField& goal, const PdeForceParams& p,
                  const Kernel& k_attraction, const Kernel& k_repulsion);

// Instrumentation for one rhs evaluation.
struct RhsDiagnostics {
    double max_speed = 0.0;  // largest face velocity magnitude seen, either force
};

// Holds every kernel and convolution plan for a parameter pair so that
// repeated rhs evaluations only pay for the arithmetic.
class PdeModel {
public:
    PdeModel(const GridGeometry& grid, PdeForceParams u, PdeForceParams v);

    const GridGeometry& grid() const { return grid_; }
    const PdeForceParams& params_u() const { return pu_; }
    const PdeForceParams& params_v() const { return pv_; }

    // (du/dt, dv/dt) at the given densities.
    std::pair<ScalarField, ScalarField> rhs(const ScalarField& u, const ScalarField& v,
                                            RhsDiagnostics* diag = nullptr) const;
    std::pair<ScalarField, ScalarField> rhs(const PdeState& s) const { return rhs(s.u, s.v); }

    // The goal-velocity field each force would use at this state.
    VectorField goal_field(const ScalarField& w, const ScalarField& enemy, bool for_u) const;

private:
    VectorField switch_field(const KernelBank::Spectrum& own, const KernelBank::Spectrum& enemy,
                             bool for_u) const;
    ScalarField rhs_one(const ScalarField& w, const ScalarField& enemy, const KernelBank::Spectrum& sw,
                        const KernelBank::Spectrum& se, const ScalarField* fire, bool for_u,
                        RhsDiagnostics* diag) const;

    GridGeometry grid_;
    PdeForceParams pu_;
    PdeForceParams pv_;
    KernelBank bank_;  // aggregation and sensor kernels of both forces
    std::unique_ptr<KernelBank> fire_bank_;
    bool fire_u_ = false;
    bool fire_v_ = false;
};

// Full rhs as a pure function of state and parameters.
std::pair<ScalarField, ScalarField> rhs(const PdeState& state, const PdeForceParams& pu,
                                        const PdeForceParams& pv);

}  // namespace cdyn::pde

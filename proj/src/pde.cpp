#include "cdyn/pde.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cdyn/errors.hpp"

namespace cdyn::pde {

std::string_view to_string(SwitchMode mode) {
    switch (mode) {
        case SwitchMode::none: return "none";
        case SwitchMode::front: return "front";
        case SwitchMode::pursuit: return "pursuit";
    }
    return "none";
}

std::optional<SwitchMode> parse_switch_mode(std::string_view text) {
    if (text == "none") return SwitchMode::none;
    if (text == "front") return SwitchMode::front;
    if (text == "pursuit") return SwitchMode::pursuit;
    return std::nullopt;
}

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw ParameterError(what);
}

bool finite(double x) { return std::isfinite(x); }

}  // namespace

void PdeForceParams::validate() const {
    require(finite(diffusion) && diffusion >= 0.0, "D must be finite and >= 0");
    require(finite(goal_velocity.x) && finite(goal_velocity.y), "C must be finite");
    require(finite(attraction) && attraction >= 0.0, "A_a must be >= 0");
    require(finite(repulsion) && repulsion >= 0.0, "A_r must be >= 0");
    if (attraction != 0.0 || repulsion != 0.0) {
        require(repulsion_radius > 0.0 && attraction_radius > repulsion_radius,
                "r_a > r_r > 0 required when A_a or A_r is nonzero");
    }
    require(attraction_radius > 0.0 && repulsion_radius > 0.0, "kernel radii must be positive");
    require(sensor_radius > 0.0 && finite(sensor_radius), "r_S must be positive");
    require(finite(combat_threshold), "delta_c must be finite");
    require(attack == 1 || attack == -1, "attack must be +1 or -1");
    require(finite(aimed_fire) && aimed_fire >= 0.0, "d must be >= 0");
    require(finite(fire_rate) && fire_rate >= 0.0, "beta must be >= 0");
    require(finite(fire_decay) && fire_decay > 0.0, "nu must be > 0");
    require(finite(fire_range) && fire_range >= 0.0, "r_op must be >= 0");
    require(finite(initial_density) && initial_density >= 0.0, "ID must be >= 0");
    require(finite(initial_radius) && initial_radius >= 0.0, "rho must be >= 0");
    require(finite(initial_centre.x) && finite(initial_centre.y), "mu must be finite");
    require(finite(inner_threshold), "IT must be finite");
}

void PdeState::validate() const {
    if (!(u.geometry() == v.geometry())) throw GeometryError("u and v on different grids");
    if (!u.all_finite() || !v.all_finite()) throw ParameterError("non-finite density");
    if (u.min() < 0.0 || v.min() < 0.0) throw ParameterError("negative density");
}

ScalarField initial_profile(const GridGeometry& grid, double density, double radius, Vec2 centre) {
    ScalarField f(grid);
    const double h = std::max(grid.dx, grid.dy);
    const double inner = radius - 0.5 * h;
    for (int iy = 0; iy < grid.ny; ++iy) {
        for (int ix = 0; ix < grid.nx; ++ix) {
            const double r = std::hypot(grid.x(ix) - centre.x, grid.y(iy) - centre.y);
            const double s = std::clamp((r - inner) / h, 0.0, 1.0);
            f.at(ix, iy) = density * 0.5 * (1.0 + std::cos(M_PI * s));
        }
    }
    return f;
}

PdeState initial_state(const GridGeometry& grid, const PdeForceParams& u, const PdeForceParams& v) {
    return PdeState{initial_profile(grid, u.initial_density, u.initial_radius, u.initial_centre),
                    initial_profile(grid, v.initial_density, v.initial_radius, v.initial_centre), 0.0};
}

ScalarField f_diff(const ScalarField& w, const PdeForceParams& p) {
    const auto& g = w.geometry();
    ScalarField out(g);
    if (p.diffusion == 0.0) return out;
    const double cx = p.diffusion / (g.dx * g.dx);
    const double cy = p.diffusion / (g.dy * g.dy);
    // Face fluxes accumulated into both neighbours keep the sum exactly zero.
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 0; ix + 1 < g.nx; ++ix) {
            const double f = cx * (w.at(ix + 1, iy) - w.at(ix, iy));
            out.at(ix, iy) += f;
            out.at(ix + 1, iy) -= f;
        }
    }
    for (int iy = 0; iy + 1 < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
            const double f = cy * (w.at(ix, iy + 1) - w.at(ix, iy));
            out.at(ix, iy) += f;
            out.at(ix, iy + 1) -= f;
        }
    }
    return out;
}

ScalarField f_react(const ScalarField& w, const ScalarField& enemy, const PdeForceParams& p,
                    const Kernel& k_fire) {
    if (!(w.geometry() == enemy.geometry())) throw GeometryError("f_react: grid mismatch");
    ScalarField out(w.geometry());
    auto o = out.values();
    const auto wv = w.values();
    const auto ev = enemy.values();
    if (!k_fire.is_zero()) {
        const ScalarField fire = convolve(enemy, k_fire);
        const auto fv = fire.values();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = -wv[i] * fv[i];
    }
    if (p.aimed_fire != 0.0) {
        for (std::size_t i = 0; i < o.size(); ++i) o[i] -= p.aimed_fire * ev[i];
    }
    return out;
}

VectorField combat_switch_front(const ScalarField& own_mass, const ScalarField& enemy_mass,
                                const PdeForceParams& p) {
    if (!(own_mass.geometry() == enemy_mass.geometry())) throw GeometryError("switch: grid mismatch");
    VectorField out(own_mass.geometry());
    const auto om = own_mass.values();
    const auto em = enemy_mass.values();
    auto gx = out.x.values();
    auto gy = out.y.values();
    for (std::size_t i = 0; i < om.size(); ++i) {
        const double s = (om[i] - em[i] > p.combat_threshold) ? 1.0 : -1.0;
        gx[i] = s * p.goal_velocity.x;
        gy[i] = s * p.goal_velocity.y;
    }
    return out;
}

VectorField combat_switch_pursuit(const ScalarField& own_mass, const ScalarField& enemy_mass,
                                  const PdeForceParams& p) {
    if (!(own_mass.geometry() == enemy_mass.geometry())) throw GeometryError("switch: grid mismatch");
    const VectorField grad = gradient(enemy_mass);
    VectorField out(own_mass.geometry());
    const auto om = own_mass.values();
    const auto em = enemy_mass.values();
    const auto ex = grad.x.values();
    const auto ey = grad.y.values();
    auto gx = out.x.values();
    auto gy = out.y.values();
    for (std::size_t i = 0; i < om.size(); ++i) {
        const double s = (om[i] - em[i] >= p.combat_threshold) ? 1.0 : static_cast<double>(p.attack);
        const double norm = std::hypot(ex[i], ey[i]);
        double ux = 0.0;
        double uy = 0.0;
        if (norm >= 1e-12) {
            ux = ex[i] / norm;
            uy = ey[i] / norm;
        }
        gx[i] = p.goal_velocity.x + s * em[i] * ux;
        gy[i] = p.goal_velocity.y + s * em[i] * uy;
    }
    return out;
}

VectorField uniform_goal(const GridGeometry& grid, const PdeForceParams& p) {
    return VectorField(ScalarField(grid, p.goal_velocity.x), ScalarField(grid, p.goal_velocity.y));
}

double koren_psi(double theta) {
    return std::max(0.0, std::min({1.0, 1.0 / 3.0 + theta / 6.0, theta}));
}

namespace {

// Limited upwind face value from the three cells upstream-to-downstream:
// `far` behind `up`, `down` ahead of it.
inline double limited_face(double far, double up, double down) {
    const double back = up - far;
    if (back == 0.0) return up;
    return up + koren_psi((down - up) / back) * back;
}

// Flux through the face between cells l and r along one axis. `ll` is the cell
// behind l and `rr` the cell beyond r (mirrored at walls by the caller).
inline double face_flux(const PdeForceParams& p, double h, double ll, double wl, double wr, double rr,
                        double gl, double gr, double dma, double dmr, double& max_speed) {
    double a = 0.5 * (gl * wl + gr * wr);
    a += p.attraction * dma / h;
    a -= p.repulsion * 0.5 * (wl + wr) * dmr / h;
    max_speed = std::max(max_speed, std::abs(a));
    const double face = a >= 0.0 ? limited_face(ll, wl, wr) : limited_face(rr, wr, wl);
    return a * face / h;
}

ScalarField f_vel_impl(const ScalarField& w, const VectorField& goal, const PdeForceParams& p,
                       const ScalarField& ma, const ScalarField& mr, double& max_speed) {
    const auto& g = w.geometry();
    if (!(goal.geometry() == g) || !(ma.geometry() == g) || !(mr.geometry() == g)) {
        throw GeometryError("f_vel: grid mismatch");
    }
    ScalarField out(g);
    const int nx = g.nx;
    const int ny = g.ny;
    // Faces normal to x, row by row.
    for (int iy = 0; iy < ny; ++iy) {
        const double* wv = w.row(iy);
        const double* gv = goal.x.row(iy);
        const double* av = ma.row(iy);
        const double* rv = mr.row(iy);
        double* o = out.row(iy);
        for (int i = 0; i + 1 < nx; ++i) {
            const double ll = i > 0 ? wv[i - 1] : wv[i];
            const double rr = i + 2 < nx ? wv[i + 2] : wv[i + 1];
            const double f = face_flux(p, g.dx, ll, wv[i], wv[i + 1], rr, gv[i], gv[i + 1],
                                       av[i + 1] - av[i], rv[i + 1] - rv[i], max_speed);
            o[i] -= f;
            o[i + 1] += f;
        }
    }
    // Faces normal to y, between rows iy and iy + 1.
    for (int iy = 0; iy + 1 < ny; ++iy) {
        const double* w0 = w.row(iy);
        const double* w1 = w.row(iy + 1);
        const double* wb = iy > 0 ? w.row(iy - 1) : w0;
        const double* wa = iy + 2 < ny ? w.row(iy + 2) : w1;
        const double* g0 = goal.y.row(iy);
        const double* g1 = goal.y.row(iy + 1);
        const double* a0 = ma.row(iy);
        const double* a1 = ma.row(iy + 1);
        const double* r0 = mr.row(iy);
        const double* r1 = mr.row(iy + 1);
        double* o0 = out.row(iy);
        double* o1 = out.row(iy + 1);
        for (int i = 0; i < nx; ++i) {
            const double f = face_flux(p, g.dy, wb[i], w0[i], w1[i], wa[i], g0[i], g1[i], a1[i] - a0[i],
                                       r1[i] - r0[i], max_speed);
            o0[i] -= f;
            o1[i] += f;
        }
    }
    return out;
}

}  // namespace

ScalarField f_vel(const ScalarField& w, const VectorField& goal, const PdeForceParams& p,
                  const ScalarField& attraction_mass, const ScalarField& repulsion_mass) {
    double unused = 0.0;
    return f_vel_impl(w, goal, p, attraction_mass, repulsion_mass, unused);
}

ScalarField f_vel(const ScalarField& w, const VectorField& goal, const PdeForceParams& p,
                  const Kernel& k_attraction, const Kernel& k_repulsion) {
    const ScalarField ma = p.attraction != 0.0 ? convolve(w, k_attraction) : ScalarField(w.geometry());
    const ScalarField mr = p.repulsion != 0.0 ? convolve(w, k_repulsion) : ScalarField(w.geometry());
    return f_vel(w, goal, p, ma, mr);
}

namespace {

enum BankSlot : std::size_t { att_u, rep_u, sens_u, att_v, rep_v, sens_v };

}  // namespace

PdeModel::PdeModel(const GridGeometry& grid, PdeForceParams u, PdeForceParams v)
    : grid_(grid),
      pu_(std::move(u)),
      pv_(std::move(v)),
      bank_(grid, {make_disc_kernel(pu_.attraction_radius, grid, KernelKind::attraction),
                   make_disc_kernel(pu_.repulsion_radius, grid, KernelKind::repulsion),
                   make_disc_kernel(pu_.sensor_radius, grid),
                   make_disc_kernel(pv_.attraction_radius, grid, KernelKind::attraction),
                   make_disc_kernel(pv_.repulsion_radius, grid, KernelKind::repulsion),
                   make_disc_kernel(pv_.sensor_radius, grid)}) {
    grid_.validate();
    pu_.validate();
    pv_.validate();
    // Each force is fired upon with the enemy's kernel: slot 0 hits u, slot 1 hits v.
    fire_u_ = pv_.fire_rate > 0.0;
    fire_v_ = pu_.fire_rate > 0.0;
    if (fire_u_ || fire_v_) {
        fire_bank_ = std::make_unique<KernelBank>(
            grid, std::vector<Kernel>{build_firing_kernel(pv_.fire_rate, pv_.fire_decay, pv_.fire_range, grid),
                                      build_firing_kernel(pu_.fire_rate, pu_.fire_decay, pu_.fire_range, grid)});
    }
}

VectorField PdeModel::switch_field(const KernelBank::Spectrum& own, const KernelBank::Spectrum& enemy,
                                   bool for_u) const {
    const PdeForceParams& p = for_u ? pu_ : pv_;
    if (p.switch_mode == SwitchMode::none) return uniform_goal(grid_, p);
    const std::size_t slot = for_u ? sens_u : sens_v;
    ScalarField own_mass(grid_);
    ScalarField enemy_mass(grid_);
    bank_.apply(slot, own, own_mass);
    bank_.apply(slot, enemy, enemy_mass);
    return p.switch_mode == SwitchMode::front ? combat_switch_front(own_mass, enemy_mass, p)
                                              : combat_switch_pursuit(own_mass, enemy_mass, p);
}

VectorField PdeModel::goal_field(const ScalarField& w, const ScalarField& enemy, bool for_u) const {
    KernelBank::Spectrum sw;
    KernelBank::Spectrum se;
    bank_.transform(w, sw);
    bank_.transform(enemy, se);
    return switch_field(sw, se, for_u);
}

ScalarField PdeModel::rhs_one(const ScalarField& w, const ScalarField& enemy, const KernelBank::Spectrum& sw,
                              const KernelBank::Spectrum& se, const ScalarField* fire, bool for_u,
                              RhsDiagnostics* diag) const {
    const PdeForceParams& p = for_u ? pu_ : pv_;
    ScalarField out = f_diff(w, p);

    const VectorField goal = switch_field(sw, se, for_u);
    ScalarField ma(grid_);
    ScalarField mr(grid_);
    if (p.attraction != 0.0) bank_.apply(for_u ? att_u : att_v, sw, ma);
    if (p.repulsion != 0.0) bank_.apply(for_u ? rep_u : rep_v, sw, mr);
    double speed = 0.0;
    out += f_vel_impl(w, goal, p, ma, mr, speed);
    if (diag != nullptr) diag->max_speed = std::max(diag->max_speed, speed);

    auto o = out.values();
    const auto wv = w.values();
    const auto ev = enemy.values();
    if (fire != nullptr) {
        const auto fv = fire->values();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] -= wv[i] * fv[i];
    }
    if (p.aimed_fire != 0.0) {
        for (std::size_t i = 0; i < o.size(); ++i) o[i] -= p.aimed_fire * ev[i];
    }
    return out;
}

std::pair<ScalarField, ScalarField> PdeModel::rhs(const ScalarField& u, const ScalarField& v,
                                                  RhsDiagnostics* diag) const {
    if (!(u.geometry() == grid_) || !(v.geometry() == grid_)) throw GeometryError("rhs: grid mismatch");
    KernelBank::Spectrum su;
    KernelBank::Spectrum sv;
    bank_.transform(u, su);
    bank_.transform(v, sv);
    ScalarField fire_on_u;
    ScalarField fire_on_v;
    if (fire_bank_) {
        KernelBank::Spectrum f;
        if (fire_u_) {
            fire_bank_->transform(v, f);
            fire_bank_->apply(0, f, fire_on_u);
        }
        if (fire_v_) {
            fire_bank_->transform(u, f);
            fire_bank_->apply(1, f, fire_on_v);
        }
    }
    return {rhs_one(u, v, su, sv, fire_u_ ? &fire_on_u : nullptr, true, diag),
            rhs_one(v, u, sv, su, fire_v_ ? &fire_on_v : nullptr, false, diag)};
}

std::pair<ScalarField, ScalarField> rhs(const PdeState& state, const PdeForceParams& pu,
                                        const PdeForceParams& pv) {
    return PdeModel(state.u.geometry(), pu, pv).rhs(state.u, state.v);
}

}  // namespace cdyn::pde

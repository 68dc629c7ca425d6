#include "cdyn/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cdyn/errors.hpp"
#include "cdyn/simd.hpp"

namespace cdyn::integrator {

void IntegratorConfig::validate() const {
    if (!(atol > 0.0) || !(rtol > 0.0)) throw ParameterError("atol/rtol: must be positive");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ParameterError("t_end: must be finite and >= 0");
    if (t_end > 0.0 && !(tau0 > 0.0 && tau0 < t_end)) throw ParameterError("tau0: need 0 < tau0 < t_end");
    if (!(safety > 0.0 && safety <= 1.0)) throw ParameterError("safety: must be in (0, 1]");
    if (!std::is_sorted(snapshot_times.begin(), snapshot_times.end())) {
        throw ParameterError("snapshots: must be sorted");
    }
    for (double t : snapshot_times) {
        if (t < 0.0 || t > t_end) throw ParameterError("snapshots: time outside [0, t_end]");
    }
}

namespace {

using Pair = std::pair<ScalarField, ScalarField>;

constexpr double kTauFloor = 1e-15;

// out = y + tau * sum_k c_k * k_k, stage by stage through the SIMD table.
ScalarField combine(const ScalarField& y, double tau, std::initializer_list<std::pair<double, const ScalarField*>> terms) {
    ScalarField out = y;
    const auto& simd = simd::kernels();
    for (const auto& [c, k] : terms) {
        if (c == 0.0) continue;
        simd.axpy(tau * c, k->values().data(), out.values().data(), out.size());
    }
    return out;
}

double scaled_error(const ScalarField& err, const ScalarField& y0, const ScalarField& y1, double atol,
                    double rtol) {
    return simd::kernels().max_scaled_error(err.values().data(), y0.values().data(), y1.values().data(),
                                            err.size(), atol, rtol);
}

void clamp_nonnegative(ScalarField& f) {
    for (double& x : f.values()) x = std::max(x, 0.0);
}

}  // namespace

StepResult step(const pde::PdeState& state, const pde::PdeModel& model, double tau,
                const IntegratorConfig& cfg, const Pair& k1, Pair* k_end) {
    if (!(tau > 0.0)) throw ParameterError("step size must be positive");
    if (tau < kTauFloor) {
        throw StiffnessError("step size " + std::to_string(tau) + " below floor at t=" +
                             std::to_string(state.t) + " (min u " + std::to_string(state.u.min()) +
                             ", min v " + std::to_string(state.v.min()) + ")");
    }
    const auto& [k1u, k1v] = k1;
    const Pair k2 = model.rhs(combine(state.u, tau, {{0.5, &k1u}}), combine(state.v, tau, {{0.5, &k1v}}));
    const Pair k3 = model.rhs(combine(state.u, tau, {{0.75, &k2.first}}),
                              combine(state.v, tau, {{0.75, &k2.second}}));
    ScalarField un = combine(state.u, tau, {{2.0 / 9.0, &k1u}, {1.0 / 3.0, &k2.first}, {4.0 / 9.0, &k3.first}});
    ScalarField vn = combine(state.v, tau, {{2.0 / 9.0, &k1v}, {1.0 / 3.0, &k2.second}, {4.0 / 9.0, &k3.second}});
    Pair k4 = model.rhs(un, vn);

    const ScalarField zero_u(state.u.geometry());
    const ScalarField eu = combine(zero_u, tau, {{-5.0 / 72.0, &k1u}, {1.0 / 12.0, &k2.first},
                                                 {1.0 / 9.0, &k3.first}, {-1.0 / 8.0, &k4.first}});
    const ScalarField ev = combine(zero_u, tau, {{-5.0 / 72.0, &k1v}, {1.0 / 12.0, &k2.second},
                                                 {1.0 / 9.0, &k3.second}, {-1.0 / 8.0, &k4.second}});
    const double err_u = scaled_error(eu, state.u, un, cfg.atol, cfg.rtol);
    const double err_v = scaled_error(ev, state.v, vn, cfg.atol, cfg.rtol);
    // A NaN in either force must reach the rejection test below.
    const double err = std::isnan(err_u) ? err_u : std::max(err_u, err_v);
    const double lowest = std::min(un.min(), vn.min());

    StepResult r;
    r.error_norm = err;
    r.preclamp_min = lowest;
    if (!(err <= 1.0) || lowest < -cfg.atol) {
        r.state = state;
        r.tau_next = 0.5 * tau;
        r.accepted = false;
        return r;
    }
    const bool clamped = lowest < 0.0;
    if (clamped) {
        clamp_nonnegative(un);
        clamp_nonnegative(vn);
    }
    r.accepted = true;
    r.state = pde::PdeState{std::move(un), std::move(vn), state.t + tau};
    const double growth = err > 0.0 ? cfg.safety * std::cbrt(1.0 / err) : 2.0;
    r.tau_next = tau * std::min(2.0, growth);
    if (k_end != nullptr) *k_end = clamped ? model.rhs(r.state.u, r.state.v) : std::move(k4);
    return r;
}

StepResult step(const pde::PdeState& state, const pde::PdeModel& model, double tau,
                const IntegratorConfig& cfg) {
    return step(state, model, tau, cfg, model.rhs(state.u, state.v), nullptr);
}

namespace {

Snapshot interpolate(const pde::PdeState& a, const pde::PdeState& b, double t) {
    if (t <= a.t || b.t <= a.t) return Snapshot{t, a.u, a.v};
    if (t >= b.t) return Snapshot{t, b.u, b.v};
    const double s = (t - a.t) / (b.t - a.t);
    const auto& simd = simd::kernels();
    Snapshot out{t, ScalarField(a.u.geometry()), ScalarField(a.v.geometry())};
    simd.axpby(1.0 - s, a.u.values().data(), s, b.u.values().data(), out.u.values().data(), a.u.size());
    simd.axpby(1.0 - s, a.v.values().data(), s, b.v.values().data(), out.v.values().data(), a.v.size());
    return out;
}

}  // namespace

RunTrajectory run(const pde::PdeState& initial, const pde::PdeModel& model, const IntegratorConfig& cfg,
                  const StepObserver& observer) {
    cfg.validate();
    initial.validate();
    RunTrajectory traj;

    std::vector<double> times = cfg.snapshot_times;
    times.push_back(0.0);
    times.push_back(cfg.t_end);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());

    pde::PdeState state = initial;
    state.t = 0.0;
    traj.series.push_back({0.0, total_mass(state.u), total_mass(state.v), 0.0});
    std::size_t next = 0;
    while (next < times.size() && times[next] <= 0.0) {
        traj.snapshots.push_back(Snapshot{times[next], state.u, state.v});
        ++next;
    }
    if (cfg.t_end <= 0.0) return traj;

    double tau = cfg.tau0;
    auto k1 = model.rhs(state.u, state.v);
    long steps = 0;
    try {
        while (state.t < cfg.t_end) {
            if (++steps > cfg.max_steps) {
                throw StiffnessError("step budget exhausted at t=" + std::to_string(state.t));
            }
            const double remaining = cfg.t_end - state.t;
            const bool last = tau >= remaining;
            const double trial = last ? remaining : tau;
            std::pair<ScalarField, ScalarField> k_end;
            StepResult r = step(state, model, trial, cfg, k1, &k_end);
            if (!r.accepted) {
                ++traj.rejected;
                tau = r.tau_next;
                continue;
            }
            if (last) r.state.t = cfg.t_end;
            traj.min_preclamp = std::min(traj.min_preclamp, r.preclamp_min);
            traj.series.push_back({r.state.t, total_mass(r.state.u), total_mass(r.state.v), trial});
            while (next < times.size() && times[next] <= r.state.t) {
                traj.snapshots.push_back(interpolate(state, r.state, times[next]));
                ++next;
            }
            state = std::move(r.state);
            k1 = std::move(k_end);
            if (observer && !observer(state, traj.series.back())) {
                traj.error = "aborted by observer at t=" + std::to_string(state.t);
                break;
            }
            // A step shortened to hit t_end does not shrink the controller's step.
            tau = last ? std::max(tau, r.tau_next) : r.tau_next;
        }
    } catch (const Error& e) {
        traj.error = e.what();
    }
    return traj;
}

RunTrajectory run(const pde::PdeState& initial, const pde::PdeForceParams& pu,
                  const pde::PdeForceParams& pv, const IntegratorConfig& cfg) {
    return run(initial, pde::PdeModel(initial.u.geometry(), pu, pv), cfg);
}

}  // namespace cdyn::integrator

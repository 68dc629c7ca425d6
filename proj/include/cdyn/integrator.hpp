#pragma once

// Method-of-lines time integration: Bogacki-Shampine 3(2) with error control,
// rejection-based positivity and linear snapshot interpolation.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cdyn/pde.hpp"

namespace cdyn::integrator {

struct IntegratorConfig {
    double tau0 = 1e-7;
    double atol = 1e-3;
    double rtol = 1e-3;
    double t_end = 1e-2;
    std::vector<double> snapshot_times;
    double safety = 0.9;
    long max_steps = 10'000'000;

    // t_end == 0 is allowed and yields the initial snapshot only.
    void validate() const;
    bool operator==(const IntegratorConfig&) const = default;
};

struct Snapshot {
    double t = 0.0;
    ScalarField u;
    ScalarField v;
};

struct SeriesRecord {
    double t = 0.0;
    double mass_u = 0.0;
    double mass_v = 0.0;
    double tau = 0.0;
};

struct RunTrajectory {
    std::vector<Snapshot> snapshots;
    std::vector<SeriesRecord> series;
    double min_preclamp = 0.0;  // lowest density of any accepted step before clamping
    long rejected = 0;
    std::optional<std::string> error;  // set when integration stopped early

    bool ok() const { return !error.has_value(); }
};

struct StepResult {
    pde::PdeState state;
    double tau_next = 0.0;
    bool accepted = false;
    double error_norm = 0.0;
    double preclamp_min = 0.0;
};

// One attempted step. A rejected step returns the input state and tau / 2.
// Throws StiffnessError when tau is below 1e-15.
StepResult step(const pde::PdeState& state, const pde::PdeModel& model, double tau,
                const IntegratorConfig& cfg);

// Same step, reusing a known f(state) (first-same-as-last).
StepResult step(const pde::PdeState& state, const pde::PdeModel& model, double tau,
                const IntegratorConfig& cfg, const std::pair<ScalarField, ScalarField>& k1,
                std::pair<ScalarField, ScalarField>* k_end);

// Called after every accepted step; returning false stops the run with an
// "aborted" error marker.
using StepObserver = std::function<bool(const pde::PdeState&, const SeriesRecord&)>;

// Integrates to cfg.t_end. Snapshots are taken at cfg.snapshot_times (t = 0
// and t_end are always included). Failures leave a partial trajectory with
// `error` set rather than throwing.
RunTrajectory run(const pde::PdeState& initial, const pde::PdeModel& model, const IntegratorConfig& cfg,
                  const StepObserver& observer = {});

RunTrajectory run(const pde::PdeState& initial, const pde::PdeForceParams& pu,
                  const pde::PdeForceParams& pv, const IntegratorConfig& cfg);

}  // namespace cdyn::integrator

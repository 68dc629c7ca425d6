#pragma once

// Metrics over snapshots of either engine, ensemble aggregation and the
// continuous-versus-agent comparison.
//
// Both engines are reduced to weighted point sets (cell centres weighted by
// density, or agent cells weighted by one), so every metric is written once.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cdyn/ca.hpp"
#include "cdyn/integrator.hpp"
#include "cdyn/scenario.hpp"

namespace cdyn::analysis {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct Distribution {
    std::vector<double> x, y, w;

    double total() const;
    bool empty() const { return total() <= 0.0; }
};

Distribution from_field(const ScalarField& f);
// Living agents of one side, at lattice coordinates.
Distribution from_agents(const std::vector<ca::Agent>& agents, ca::Side side);

// Weighted mean position; nullopt for an empty distribution.
std::optional<Point> centroid(const Distribution& d);

// sqrt(lambda_max / lambda_min) of the weighted spatial covariance; +inf when
// the distribution is degenerate (a point or a line).
double front_aspect(const Distribution& d);

constexpr int kSectors = 16;

// Fraction of the 16 sectors around the surrounded centroid holding more than
// 1% of the surrounding force's per-sector mean mass within `radius`.
double encirclement(const Distribution& surrounded, const Distribution& surrounding, double radius);

// One time record. Index 0 is red / u, index 1 blue / v. Centroids of an
// extinct force are NaN.
struct MetricRecord {
    double t = 0.0;
    std::array<double, 2> amount{};
    std::array<Point, 2> centroid{};
    double angle = 0.0;  // unwrapped angle of the red-to-blue centroid vector
    std::array<double, 2> aspect{};
    std::array<double, 2> coverage{};  // [0]: red around blue, [1]: blue around red
    double gap = 0.0;  // shortest distance between the forces' occupied cells
};

struct MetricSeries {
    std::string scenario;
    double domain = 100.0;  // side length, for comparisons across engines
    double contact_radius = 5.0;
    std::array<Point, 2> goal{};  // point each force heads for
    std::vector<MetricRecord> records;
};

// Fills angle by accumulating signed increments between consecutive records,
// so |angle[k+1] - angle[k]| < pi and mirroring negates it exactly.
void unwrap_angles(MetricSeries& s);

MetricSeries metrics_from_pde(const scenario::Scenario& sc, const integrator::RunTrajectory& traj);
MetricSeries metrics_from_ca(const scenario::Scenario& sc, const ca::CaTrajectory& traj);

// Reflects every position through the main diagonal.
MetricSeries mirror_diagonal(const MetricSeries& s);

// Contact radius: the larger sensor range of the two forces.
double contact_radius(const scenario::Scenario& sc, bool pde);

// First record whose centroid separation is below the contact radius.
std::optional<std::size_t> first_contact(const MetricSeries& s);
// First record whose gap is below the contact radius (the forces' sensor
// ranges overlap). Fronts engage without their centroids ever meeting.
std::optional<std::size_t> first_engagement(const MetricSeries& s);

// Shortest distance between cells holding more than 1% of each
// distribution's largest weight.
double gap(const Distribution& a, const Distribution& b);

enum class Precession { none, clockwise, anticlockwise };
std::string to_string(Precession p);

struct PrecessionResult {
    Precession direction = Precession::none;
    double rotation = 0.0;  // radians, from first contact to the end
    bool contact = false;
};

PrecessionResult precession(const MetricSeries& s, double threshold = 1.5707963267948966);

// Longest contiguous stretch after engagement over which a force's centroid
// x-speed stays below `fraction` of its mean approach speed.
struct StationaryWindow {
    double approach_speed = 0.0;
    double longest = 0.0;       // duration
    double run_fraction = 0.0;  // longest / run duration
    double start = 0.0;
};
StationaryWindow stationary_window(const MetricSeries& s, int force, double fraction = 0.1);

// Whether red's centroid x ever exceeds blue's.
bool forces_pass(const MetricSeries& s);
// Whether a force's final centroid lies within `radius` of its goal.
bool reached_goal(const MetricSeries& s, int force, double radius);

// Windowed loss rate (amount(t - w) - amount(t)) / w for a force, evaluated at
// each record with t >= t0 + w; times without a full window are skipped.
struct RateSample {
    double t = 0.0;
    double rate = 0.0;
};
std::vector<RateSample> windowed_loss_rate(const MetricSeries& s, int force, double window);

// First time after the coverage peak (>= peak_level) that coverage drops below
// `drop_level`.
std::optional<double> breakaway_time(const MetricSeries& s, int coverage_index, double peak_level = 14.0 / 16.0,
                                     double drop_level = 10.0 / 16.0);

// ---- ensembles ---------------------------------------------------------------------

struct RunSummary {
    std::uint64_t seed = 0;
    bool ok = true;
    std::string error;
    PrecessionResult precession;
    bool passed = false;
    std::array<bool, 2> reached_goal{};
    std::array<int, 2> final_living{};
    std::array<int, 2> initial_living{};
    std::array<double, 2> peak_coverage{};
    bool counts_monotone = true;
    // Share of all losses suffered between first contact and the crossing
    // point (or the run end when the forces never pass).
    double front_phase_loss_share = 0.0;
};

struct SeriesStats {
    std::vector<std::string> columns;
    std::vector<double> t;
    std::vector<std::vector<double>> mean;  // [record][column]
    std::vector<std::vector<double>> sd;
};

struct EnsembleReport {
    std::string scenario;
    long n_steps = 0;
    std::vector<RunSummary> runs;  // in seed order
    SeriesStats stats;
    MetricSeries mean_series;  // pointwise mean, for comparisons
    std::array<int, 3> precession_counts{};  // none, clockwise, anticlockwise
    // Classification counts at alternative thresholds pi/4, pi/2, 3pi/4.
    std::array<std::array<int, 3>, 3> threshold_sensitivity{};
    std::array<double, 2> goal_reach_frequency{};
    int n_runs() const { return static_cast<int>(runs.size()); }
    int failed() const;
};

// Column names and values of one record, shared by CSV output and ensembles.
std::vector<std::string> metric_columns();
std::vector<double> metric_values(const MetricRecord& r);

RunSummary summarise_run(const MetricSeries& s, const ca::CaTrajectory& traj, std::uint64_t seed);

// Runs every seed (up to `jobs` concurrently) and folds results in seed order.
// Metrics are sampled every `every` steps.
EnsembleReport ensemble(const scenario::Scenario& sc, const std::vector<std::uint64_t>& seeds, long n_steps,
                        int jobs = 1, long every = 1);

// Aggregates precomputed runs; exposed for deterministic stubs.
EnsembleReport aggregate(const std::string& scenario, long n_steps, const std::vector<RunSummary>& runs,
                         const std::vector<MetricSeries>& series);

// ---- comparison --------------------------------------------------------------------

struct ComparisonReport {
    std::string pde_scenario;
    std::string ca_scenario;
    double centroid_rmse = 0.0;  // in the first series' length units
    std::size_t samples = 0;
    std::vector<double> progress;                        // normalised time grid
    std::vector<std::array<double, 2>> pde_loss, ca_loss;  // fraction of initial amount
    std::array<double, 2> pde_survivors{}, ca_survivors{};
    // Longest stationary-front window as a share of each run (red / u force).
    double pde_stationary_fraction = 0.0, ca_stationary_fraction = 0.0;
};

// Normalised time: t / t_engage, with t_engage the first engagement time (or
// the final time when the forces never meet).
std::vector<double> normalised_time(const MetricSeries& s);

// Throws ParameterError when the scenarios are not of the same family (name
// up to the "-pde" / "-ca" marker).
ComparisonReport compare(const MetricSeries& pde, const MetricSeries& ca, std::size_t samples = 101);

std::string scenario_family(const std::string& name);

// ---- output ------------------------------------------------------------------------

void write_metrics_csv(std::ostream& out, const MetricSeries& s);
// Inverse of write_metrics_csv (17 significant digits round-trip exactly).
MetricSeries read_metrics_csv(std::istream& in);
void write_ensemble_csv(std::ostream& out, const EnsembleReport& r);
void write_ensemble_summary(std::ostream& out, const EnsembleReport& r);
void write_comparison(std::ostream& out, const ComparisonReport& r);

}  // namespace cdyn::analysis

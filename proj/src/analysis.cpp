#include "cdyn/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "cdyn/errors.hpp"

namespace cdyn::analysis {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

bool valid(Point p) { return std::isfinite(p.x) && std::isfinite(p.y); }

Point centroid_or_nan(const Distribution& d) {
    const auto c = centroid(d);
    return c ? *c : Point{kNaN, kNaN};
}

double coverage_radius(const MetricSeries& s) { return 2.0 * s.contact_radius; }

}  // namespace

double Distribution::total() const {
    double t = 0.0;
    for (double v : w) t += v;
    return t;
}

Distribution from_field(const ScalarField& f) {
    const GridGeometry& g = f.geometry();
    Distribution d;
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
            const double v = f.at(ix, iy);
            if (v <= 0.0) continue;
            d.x.push_back(g.x(ix));
            d.y.push_back(g.y(iy));
            d.w.push_back(v * g.cell_area());
        }
    }
    return d;
}

Distribution from_agents(const std::vector<ca::Agent>& agents, ca::Side side) {
    Distribution d;
    for (const ca::Agent& a : agents) {
        if (!a.living() || a.side != side) continue;
        d.x.push_back(a.pos.x);
        d.y.push_back(a.pos.y);
        d.w.push_back(1.0);
    }
    return d;
}

std::optional<Point> centroid(const Distribution& d) {
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < d.w.size(); ++i) {
        sw += d.w[i];
        sx += d.w[i] * d.x[i];
        sy += d.w[i] * d.y[i];
    }
    if (!(sw > 0.0)) return std::nullopt;
    return Point{sx / sw, sy / sw};
}

double front_aspect(const Distribution& d) {
    const auto c = centroid(d);
    if (!c) return kInf;
    double sw = 0.0, cxx = 0.0, cyy = 0.0, cxy = 0.0;
    for (std::size_t i = 0; i < d.w.size(); ++i) {
        const double dx = d.x[i] - c->x, dy = d.y[i] - c->y;
        sw += d.w[i];
        cxx += d.w[i] * dx * dx;
        cyy += d.w[i] * dy * dy;
        cxy += d.w[i] * dx * dy;
    }
    cxx /= sw;
    cyy /= sw;
    cxy /= sw;
    const double mean = 0.5 * (cxx + cyy);
    const double disc = std::hypot(0.5 * (cxx - cyy), cxy);
    const double hi = mean + disc, lo = mean - disc;
    if (!(hi > 0.0) || lo <= 1e-12 * hi) return kInf;
    return std::sqrt(hi / lo);
}

double encirclement(const Distribution& surrounded, const Distribution& surrounding, double radius) {
    const auto c = centroid(surrounded);
    if (!c || surrounding.empty()) return 0.0;
    std::array<double, kSectors> mass{};
    double total = 0.0;
    for (std::size_t i = 0; i < surrounding.w.size(); ++i) {
        const double dx = surrounding.x[i] - c->x, dy = surrounding.y[i] - c->y;
        if (std::hypot(dx, dy) > radius || surrounding.w[i] <= 0.0) continue;
        double a = std::atan2(dy, dx);
        if (a < 0.0) a += 2.0 * std::numbers::pi;
        auto k = static_cast<std::size_t>(a / (2.0 * std::numbers::pi) * kSectors);
        k = std::min<std::size_t>(k, kSectors - 1);
        mass[k] += surrounding.w[i];
        total += surrounding.w[i];
    }
    if (!(total > 0.0)) return 0.0;
    const double floor = 0.01 * total / kSectors;
    int covered = 0;
    for (double m : mass) covered += m > floor;
    return static_cast<double>(covered) / kSectors;
}

double gap(const Distribution& a, const Distribution& b) {
    auto significant = [](const Distribution& d) {
        std::vector<Point> pts;
        const double top = d.w.empty() ? 0.0 : *std::max_element(d.w.begin(), d.w.end());
        for (std::size_t i = 0; i < d.w.size(); ++i) {
            if (d.w[i] > 0.01 * top) pts.push_back({d.x[i], d.y[i]});
        }
        return pts;
    };
    const auto pa = significant(a), pb = significant(b);
    if (pa.empty() || pb.empty()) return kInf;

    // Bucket b's points, then search rings of buckets around each point of a,
    // stopping once no unvisited ring can beat the best distance found.
    double x0 = kInf, y0 = kInf, x1 = -kInf, y1 = -kInf;
    for (const Point& q : pb) {
        x0 = std::min(x0, q.x);
        y0 = std::min(y0, q.y);
        x1 = std::max(x1, q.x);
        y1 = std::max(y1, q.y);
    }
    const double h = std::max({1e-9, (x1 - x0) / 64.0, (y1 - y0) / 64.0});
    const int nbx = static_cast<int>((x1 - x0) / h) + 1, nby = static_cast<int>((y1 - y0) / h) + 1;
    std::vector<std::vector<Point>> buckets(static_cast<std::size_t>(nbx) * static_cast<std::size_t>(nby));
    auto bx_of = [&](double x) { return std::clamp(static_cast<int>((x - x0) / h), 0, nbx - 1); };
    auto by_of = [&](double y) { return std::clamp(static_cast<int>((y - y0) / h), 0, nby - 1); };
    for (const Point& q : pb) buckets[static_cast<std::size_t>(by_of(q.y) * nbx + bx_of(q.x))].push_back(q);

    double best = kInf;
    for (const Point& p : pa) {
        // Distance from p to b's bounding box bounds every candidate from below.
        const double ox = std::max({0.0, x0 - p.x, p.x - x1}), oy = std::max({0.0, y0 - p.y, p.y - y1});
        if (ox * ox + oy * oy >= best) continue;
        const int cx = bx_of(p.x), cy = by_of(p.y);
        const int max_ring = std::max({cx, nbx - 1 - cx, cy, nby - 1 - cy});
        for (int r = 0; r <= max_ring; ++r) {
            const double reach = std::max(0.0, (r - 1) * h);
            if (reach * reach >= best) break;
            for (int by = cy - r; by <= cy + r; ++by) {
                if (by < 0 || by >= nby) continue;
                const bool edge_row = by == cy - r || by == cy + r;
                for (int bx = cx - r; bx <= cx + r; bx += edge_row ? 1 : 2 * r) {
                    if (bx >= 0 && bx < nbx) {
                        for (const Point& q : buckets[static_cast<std::size_t>(by * nbx + bx)]) {
                            const double dx = p.x - q.x, dy = p.y - q.y;
                            best = std::min(best, dx * dx + dy * dy);
                        }
                    }
                    if (r == 0) break;
                }
            }
        }
    }
    return std::sqrt(best);
}

void unwrap_angles(MetricSeries& s) {
    bool have = false;
    double angle = 0.0, px = 0.0, py = 0.0;
    for (MetricRecord& r : s.records) {
        const Point a = r.centroid[0], b = r.centroid[1];
        if (valid(a) && valid(b)) {
            const double vx = b.x - a.x, vy = b.y - a.y;
            if (!have) {
                angle = std::atan2(vy, vx);
                have = true;
            } else {
                angle += std::atan2(px * vy - py * vx, px * vx + py * vy);
            }
            px = vx;
            py = vy;
        }
        r.angle = angle;
    }
}

namespace {

MetricRecord record_from(double t, const Distribution& red, const Distribution& blue, std::array<double, 2> amount,
                         double cover_radius) {
    MetricRecord r;
    r.t = t;
    r.amount = amount;
    r.centroid = {centroid_or_nan(red), centroid_or_nan(blue)};
    r.aspect = {front_aspect(red), front_aspect(blue)};
    r.coverage = {encirclement(blue, red, cover_radius), encirclement(red, blue, cover_radius)};
    r.gap = gap(red, blue);
    return r;
}

}  // namespace

double contact_radius(const scenario::Scenario& sc, bool pde) {
    if (pde) return std::max(sc.pde->u.sensor_radius, sc.pde->v.sensor_radius);
    return std::max(sc.ca->config.force[0].sensor_range, sc.ca->config.force[1].sensor_range);
}

MetricSeries metrics_from_pde(const scenario::Scenario& sc, const integrator::RunTrajectory& traj) {
    if (!sc.pde) throw ParameterError("scenario has no pde setup");
    MetricSeries s;
    s.scenario = sc.name;
    s.domain = sc.pde->grid.width();
    s.contact_radius = contact_radius(sc, true);
    s.goal = {Point{sc.pde->u.goal.x, sc.pde->u.goal.y}, Point{sc.pde->v.goal.x, sc.pde->v.goal.y}};
    for (const auto& snap : traj.snapshots) {
        s.records.push_back(record_from(snap.t, from_field(snap.u), from_field(snap.v),
                                        {total_mass(snap.u), total_mass(snap.v)}, coverage_radius(s)));
    }
    unwrap_angles(s);
    return s;
}

MetricSeries metrics_from_ca(const scenario::Scenario& sc, const ca::CaTrajectory& traj) {
    if (!sc.ca) throw ParameterError("scenario has no ca setup");
    MetricSeries s;
    s.scenario = sc.name;
    s.domain = sc.ca->config.lattice;
    s.contact_radius = contact_radius(sc, false);
    const auto& f = sc.ca->config.force;
    // Each force heads for the enemy's flag.
    s.goal = {Point{double(f[1].flag.x), double(f[1].flag.y)}, Point{double(f[0].flag.x), double(f[0].flag.y)}};
    for (const auto& snap : traj.snapshots) {
        std::array<double, 2> amount{};
        const auto it = std::lower_bound(traj.counts.begin(), traj.counts.end(), snap.step,
                                         [](const ca::CountRecord& c, long step) { return c.step < step; });
        if (it != traj.counts.end() && it->step == snap.step) {
            amount = {double(it->living(ca::Side::red)), double(it->living(ca::Side::blue))};
        }
        s.records.push_back(record_from(double(snap.step), from_agents(snap.agents, ca::Side::red),
                                        from_agents(snap.agents, ca::Side::blue), amount, coverage_radius(s)));
    }
    unwrap_angles(s);
    return s;
}

MetricSeries mirror_diagonal(const MetricSeries& s) {
    MetricSeries m = s;
    for (auto& g : m.goal) std::swap(g.x, g.y);
    for (auto& r : m.records) {
        for (auto& c : r.centroid) std::swap(c.x, c.y);
    }
    unwrap_angles(m);
    return m;
}

std::optional<std::size_t> first_contact(const MetricSeries& s) {
    for (std::size_t k = 0; k < s.records.size(); ++k) {
        const auto& r = s.records[k];
        if (!valid(r.centroid[0]) || !valid(r.centroid[1])) continue;
        if (std::hypot(r.centroid[1].x - r.centroid[0].x, r.centroid[1].y - r.centroid[0].y) < s.contact_radius) {
            return k;
        }
    }
    return std::nullopt;
}

std::optional<std::size_t> first_engagement(const MetricSeries& s) {
    for (std::size_t k = 0; k < s.records.size(); ++k) {
        if (s.records[k].gap < s.contact_radius) return k;
    }
    return std::nullopt;
}

std::string to_string(Precession p) {
    switch (p) {
        case Precession::none: return "none";
        case Precession::clockwise: return "clockwise";
        case Precession::anticlockwise: return "anticlockwise";
    }
    return "none";
}

PrecessionResult precession(const MetricSeries& s, double threshold) {
    PrecessionResult r;
    const auto c = first_contact(s);
    if (!c) return r;
    r.contact = true;
    // Summed increments rather than a difference of unwrapped angles, so a
    // mirrored series yields exactly the negated rotation.
    double px = 0.0, py = 0.0;
    bool have = false;
    for (std::size_t k = *c; k < s.records.size(); ++k) {
        const Point a = s.records[k].centroid[0], b = s.records[k].centroid[1];
        if (!valid(a) || !valid(b)) continue;
        const double vx = b.x - a.x, vy = b.y - a.y;
        if (have) r.rotation += std::atan2(px * vy - py * vx, px * vx + py * vy);
        px = vx;
        py = vy;
        have = true;
    }
    if (r.rotation > threshold) r.direction = Precession::anticlockwise;
    else if (r.rotation < -threshold) r.direction = Precession::clockwise;
    return r;
}

StationaryWindow stationary_window(const MetricSeries& s, int force, double fraction) {
    StationaryWindow w;
    const auto e = first_engagement(s);
    if (!e || *e == 0 || s.records.size() < 2) return w;
    const auto fi = static_cast<std::size_t>(force);
    auto speed = [&](std::size_t k) {
        const auto& a = s.records[k];
        const auto& b = s.records[k + 1];
        return std::abs(b.centroid[fi].x - a.centroid[fi].x) / (b.t - a.t);
    };
    double sum = 0.0;
    for (std::size_t k = 0; k < *e; ++k) sum += speed(k);
    w.approach_speed = sum / static_cast<double>(*e);
    const double limit = fraction * w.approach_speed;
    double run = 0.0, start = 0.0;
    for (std::size_t k = *e; k + 1 < s.records.size(); ++k) {
        const double v = speed(k);
        if (std::isfinite(v) && v < limit) {
            if (run == 0.0) start = s.records[k].t;
            run += s.records[k + 1].t - s.records[k].t;
            if (run > w.longest) {
                w.longest = run;
                w.start = start;
            }
        } else {
            run = 0.0;
        }
    }
    const double span = s.records.back().t - s.records.front().t;
    w.run_fraction = span > 0.0 ? w.longest / span : 0.0;
    return w;
}

bool forces_pass(const MetricSeries& s) {
    return std::any_of(s.records.begin(), s.records.end(),
                       [](const MetricRecord& r) { return r.centroid[0].x > r.centroid[1].x; });
}

bool reached_goal(const MetricSeries& s, int force, double radius) {
    if (s.records.empty()) return false;
    const auto fi = static_cast<std::size_t>(force);
    const Point c = s.records.back().centroid[fi];
    if (!valid(c)) return false;
    return std::hypot(c.x - s.goal[fi].x, c.y - s.goal[fi].y) <= radius;
}

std::vector<RateSample> windowed_loss_rate(const MetricSeries& s, int force, double window) {
    std::vector<RateSample> out;
    if (s.records.empty() || !(window > 0.0)) return out;
    const auto fi = static_cast<std::size_t>(force);
    const double t0 = s.records.front().t;
    auto amount_at = [&](double t) {
        // Linear interpolation between records.
        const auto it = std::lower_bound(s.records.begin(), s.records.end(), t,
                                         [](const MetricRecord& r, double v) { return r.t < v; });
        if (it == s.records.begin()) return it->amount[fi];
        if (it == s.records.end()) return s.records.back().amount[fi];
        const auto& b = *it;
        const auto& a = *(it - 1);
        const double f = (t - a.t) / (b.t - a.t);
        return a.amount[fi] + f * (b.amount[fi] - a.amount[fi]);
    };
    for (const auto& r : s.records) {
        if (r.t < t0 + window - 1e-12 * std::max(1.0, std::abs(r.t))) continue;
        out.push_back({r.t, (amount_at(r.t - window) - r.amount[fi]) / window});
    }
    return out;
}

std::optional<double> breakaway_time(const MetricSeries& s, int coverage_index, double peak_level,
                                     double drop_level) {
    const auto ci = static_cast<std::size_t>(coverage_index);
    bool peaked = false;
    for (const auto& r : s.records) {
        if (r.coverage[ci] >= peak_level) peaked = true;
        else if (peaked && r.coverage[ci] < drop_level) return r.t;
    }
    return std::nullopt;
}

// ---- ensembles ---------------------------------------------------------------------

int EnsembleReport::failed() const {
    return static_cast<int>(std::count_if(runs.begin(), runs.end(), [](const RunSummary& r) { return !r.ok; }));
}

std::vector<std::string> metric_columns() {
    return {"amount_red", "amount_blue", "centroid_red_x", "centroid_red_y", "centroid_blue_x", "centroid_blue_y",
            "angle", "aspect_red", "aspect_blue", "coverage_red_around_blue", "coverage_blue_around_red", "gap"};
}

std::vector<double> metric_values(const MetricRecord& r) {
    return {r.amount[0],      r.amount[1], r.centroid[0].x, r.centroid[0].y, r.centroid[1].x, r.centroid[1].y,
            r.angle,          r.aspect[0], r.aspect[1],     r.coverage[0],   r.coverage[1],   r.gap};
}

namespace {

MetricRecord record_from_values(double t, const std::vector<double>& v) {
    MetricRecord r;
    r.t = t;
    r.amount = {v[0], v[1]};
    r.centroid = {Point{v[2], v[3]}, Point{v[4], v[5]}};
    r.angle = v[6];
    r.aspect = {v[7], v[8]};
    r.coverage = {v[9], v[10]};
    r.gap = v[11];
    return r;
}

}  // namespace

RunSummary summarise_run(const MetricSeries& s, const ca::CaTrajectory& traj, std::uint64_t seed) {
    RunSummary r;
    r.seed = seed;
    r.precession = precession(s);
    r.passed = forces_pass(s);
    constexpr double kGoalRadius = 15.0;
    r.reached_goal = {reached_goal(s, 0, kGoalRadius), reached_goal(s, 1, kGoalRadius)};
    if (!traj.counts.empty()) {
        const auto& first = traj.counts.front();
        const auto& last = traj.counts.back();
        r.initial_living = {first.living(ca::Side::red), first.living(ca::Side::blue)};
        r.final_living = {last.living(ca::Side::red), last.living(ca::Side::blue)};
        for (std::size_t k = 1; k < traj.counts.size(); ++k) {
            for (auto side : {ca::Side::red, ca::Side::blue}) {
                if (traj.counts[k].living(side) > traj.counts[k - 1].living(side)) r.counts_monotone = false;
            }
        }
    }
    for (const auto& rec : s.records) {
        r.peak_coverage[0] = std::max(r.peak_coverage[0], rec.coverage[0]);
        r.peak_coverage[1] = std::max(r.peak_coverage[1], rec.coverage[1]);
    }
    // Front phase: engagement until the centroids cross.
    const auto e = first_engagement(s);
    if (e && !traj.counts.empty()) {
        const double t_start = s.records[*e].t;
        double t_end = s.records.back().t;
        for (std::size_t k = *e; k < s.records.size(); ++k) {
            if (s.records[k].centroid[0].x > s.records[k].centroid[1].x) {
                t_end = s.records[k].t;
                break;
            }
        }
        const auto living_at = [&](double t) {
            const auto step = static_cast<long>(t);
            for (const auto& c : traj.counts) {
                if (c.step == step) return c.living(ca::Side::red) + c.living(ca::Side::blue);
            }
            return 0;
        };
        const int total = r.initial_living[0] + r.initial_living[1] - r.final_living[0] - r.final_living[1];
        if (total > 0) r.front_phase_loss_share = double(living_at(t_start) - living_at(t_end)) / total;
    }
    return r;
}

EnsembleReport aggregate(const std::string& scenario, long n_steps, const std::vector<RunSummary>& runs,
                         const std::vector<MetricSeries>& series) {
    EnsembleReport rep;
    rep.scenario = scenario;
    rep.n_steps = n_steps;
    rep.runs = runs;
    rep.stats.columns = metric_columns();

    std::size_t length = std::numeric_limits<std::size_t>::max();
    const MetricSeries* any = nullptr;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (!runs[i].ok) continue;
        length = std::min(length, series[i].records.size());
        any = &series[i];
    }
    if (any == nullptr) length = 0;
    const std::size_t nc = rep.stats.columns.size();
    for (std::size_t k = 0; k < length; ++k) {
        std::vector<double> sum(nc, 0.0), sum2(nc, 0.0);
        std::vector<int> n(nc, 0);
        for (std::size_t i = 0; i < runs.size(); ++i) {
            if (!runs[i].ok) continue;
            const auto v = metric_values(series[i].records[k]);
            for (std::size_t c = 0; c < nc; ++c) {
                if (!std::isfinite(v[c])) continue;
                sum[c] += v[c];
                ++n[c];
            }
        }
        std::vector<double> mean(nc, kNaN), sd(nc, kNaN);
        for (std::size_t c = 0; c < nc; ++c) {
            if (n[c] > 0) mean[c] = sum[c] / n[c];
        }
        // Second pass for the spread, to avoid cancellation.
        for (std::size_t i = 0; i < runs.size(); ++i) {
            if (!runs[i].ok) continue;
            const auto v = metric_values(series[i].records[k]);
            for (std::size_t c = 0; c < nc; ++c) {
                if (std::isfinite(v[c])) sum2[c] += (v[c] - mean[c]) * (v[c] - mean[c]);
            }
        }
        for (std::size_t c = 0; c < nc; ++c) {
            if (n[c] > 1) sd[c] = std::sqrt(sum2[c] / (n[c] - 1));
            else if (n[c] == 1) sd[c] = 0.0;
        }
        rep.stats.t.push_back(any->records[k].t);
        rep.stats.mean.push_back(mean);
        rep.stats.sd.push_back(sd);
    }

    if (any != nullptr) {
        rep.mean_series.scenario = scenario;
        rep.mean_series.domain = any->domain;
        rep.mean_series.contact_radius = any->contact_radius;
        rep.mean_series.goal = any->goal;
        for (std::size_t k = 0; k < length; ++k) {
            rep.mean_series.records.push_back(record_from_values(rep.stats.t[k], rep.stats.mean[k]));
        }
    }

    const std::array<double, 3> thresholds = {std::numbers::pi / 4, std::numbers::pi / 2, 3 * std::numbers::pi / 4};
    int ok_runs = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& r = runs[i];
        if (!r.ok) continue;
        ++ok_runs;
        ++rep.precession_counts[static_cast<std::size_t>(r.precession.direction)];
        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            const double rot = r.precession.rotation;
            const std::size_t cls = !r.precession.contact ? 0 : rot > thresholds[t] ? 2 : rot < -thresholds[t] ? 1 : 0;
            ++rep.threshold_sensitivity[t][cls];
        }
        for (std::size_t f = 0; f < 2; ++f) rep.goal_reach_frequency[f] += r.reached_goal[f];
    }
    // Failed runs count as unclassified so the counts always sum to n_runs.
    rep.precession_counts[0] += rep.failed();
    for (auto& t : rep.threshold_sensitivity) t[0] += rep.failed();
    for (auto& g : rep.goal_reach_frequency) g = ok_runs > 0 ? g / ok_runs : 0.0;
    return rep;
}

EnsembleReport ensemble(const scenario::Scenario& sc, const std::vector<std::uint64_t>& seeds, long n_steps,
                        int jobs, long every) {
    if (every < 1) throw ParameterError("metric stride must be >= 1");
    if (!sc.ca) throw ParameterError("ensemble needs an automaton scenario");
    sc.validate();
    std::vector<RunSummary> runs(seeds.size());
    std::vector<MetricSeries> series(seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) {
            try {
                const auto traj = ca::ca_run(sc.ca->config, seeds[i], n_steps, {}, every);
                series[i] = metrics_from_ca(sc, traj);
                runs[i] = summarise_run(series[i], traj, seeds[i]);
            } catch (const std::exception& e) {
                runs[i] = RunSummary{};
                runs[i].seed = seeds[i];
                runs[i].ok = false;
                runs[i].error = e.what();
            }
        }
    };
    const int n_threads = std::clamp(jobs, 1, std::max<int>(1, static_cast<int>(seeds.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    }
    return aggregate(sc.name, n_steps, runs, series);
}

// ---- comparison --------------------------------------------------------------------

std::string scenario_family(const std::string& name) {
    for (const char* marker : {"-pde", "-ca"}) {
        const auto pos = name.find(marker);
        if (pos != std::string::npos) return name.substr(0, pos);
    }
    return name;
}

std::vector<double> normalised_time(const MetricSeries& s) {
    std::vector<double> out;
    if (s.records.empty()) return out;
    const auto e = first_engagement(s);
    const double t0 = s.records.front().t;
    const double tc = (e && *e > 0 ? s.records[*e].t : s.records.back().t) - t0;
    for (const auto& r : s.records) out.push_back(tc > 0.0 ? (r.t - t0) / tc : 0.0);
    return out;
}

namespace {

// Linear interpolation of a record field at normalised time p.
template <class F>
double sample(const std::vector<double>& tau, const MetricSeries& s, double p, F field) {
    const auto it = std::lower_bound(tau.begin(), tau.end(), p);
    if (it == tau.begin()) return field(s.records.front());
    if (it == tau.end()) return field(s.records.back());
    const auto k = static_cast<std::size_t>(it - tau.begin());
    const double a = tau[k - 1], b = tau[k];
    const double f = b > a ? (p - a) / (b - a) : 1.0;
    return field(s.records[k - 1]) + f * (field(s.records[k]) - field(s.records[k - 1]));
}

}  // namespace

ComparisonReport compare(const MetricSeries& pde, const MetricSeries& ca, std::size_t samples) {
    if (scenario_family(pde.scenario) != scenario_family(ca.scenario)) {
        throw ParameterError("cannot compare scenarios '" + pde.scenario + "' and '" + ca.scenario + "'");
    }
    if (pde.records.empty() || ca.records.empty()) throw ParameterError("comparison needs non-empty series");
    ComparisonReport rep;
    rep.pde_scenario = pde.scenario;
    rep.ca_scenario = ca.scenario;
    const auto tp = normalised_time(pde);
    const auto tc = normalised_time(ca);
    const double hi = std::min(tp.back(), tc.back());
    const double scale = pde.domain / ca.domain;
    samples = std::max<std::size_t>(samples, 2);
    double sq = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double p = hi * static_cast<double>(i) / static_cast<double>(samples - 1);
        rep.progress.push_back(p);
        std::array<double, 2> lp{}, lc{};
        for (std::size_t f = 0; f < 2; ++f) {
            const double px = sample(tp, pde, p, [f](const MetricRecord& r) { return r.centroid[f].x; });
            const double py = sample(tp, pde, p, [f](const MetricRecord& r) { return r.centroid[f].y; });
            const double cx = scale * sample(tc, ca, p, [f](const MetricRecord& r) { return r.centroid[f].x; });
            const double cy = scale * sample(tc, ca, p, [f](const MetricRecord& r) { return r.centroid[f].y; });
            if (std::isfinite(px + py + cx + cy)) {
                sq += (px - cx) * (px - cx) + (py - cy) * (py - cy);
                ++n;
            }
            const double p0 = pde.records.front().amount[f], c0 = ca.records.front().amount[f];
            lp[f] = p0 > 0 ? sample(tp, pde, p, [f](const MetricRecord& r) { return r.amount[f]; }) / p0 : 0.0;
            lc[f] = c0 > 0 ? sample(tc, ca, p, [f](const MetricRecord& r) { return r.amount[f]; }) / c0 : 0.0;
        }
        rep.pde_loss.push_back(lp);
        rep.ca_loss.push_back(lc);
    }
    rep.samples = samples;
    rep.centroid_rmse = n > 0 ? std::sqrt(sq / static_cast<double>(n)) : kNaN;
    for (std::size_t f = 0; f < 2; ++f) {
        const double p0 = pde.records.front().amount[f], c0 = ca.records.front().amount[f];
        rep.pde_survivors[f] = p0 > 0 ? pde.records.back().amount[f] / p0 : 0.0;
        rep.ca_survivors[f] = c0 > 0 ? ca.records.back().amount[f] / c0 : 0.0;
    }
    rep.pde_stationary_fraction = stationary_window(pde, 0).run_fraction;
    rep.ca_stationary_fraction = stationary_window(ca, 0).run_fraction;
    return rep;
}

// ---- output ------------------------------------------------------------------------

namespace {

void write_number(std::ostream& out, double v) {
    if (std::isnan(v)) out << "nan";
    else if (std::isinf(v)) out << (v > 0 ? "inf" : "-inf");
    else out << v;
}

}  // namespace

void write_metrics_csv(std::ostream& out, const MetricSeries& s) {
    out << std::setprecision(17);
    out << "# scenario: " << s.scenario << "\n";
    out << "# domain: " << s.domain << "\n";
    out << "# contact_radius: " << s.contact_radius << "\n";
    out << "# goal: " << s.goal[0].x << ", " << s.goal[0].y << ", " << s.goal[1].x << ", " << s.goal[1].y << "\n";
    out << "# t: time (pde) or step (ca); amount: total mass or living agents; angle: unwrapped radians of the\n"
           "# red-to-blue centroid vector; aspect: covariance axis ratio; coverage: encircled sector fraction;\n"
           "# gap: distance between the forces' occupied cells\n";
    out << "t";
    for (const auto& c : metric_columns()) out << ',' << c;
    out << '\n';
    out << std::setprecision(17);
    for (const auto& r : s.records) {
        write_number(out, r.t);
        for (double v : metric_values(r)) {
            out << ',';
            write_number(out, v);
        }
        out << '\n';
    }
}

MetricSeries read_metrics_csv(std::istream& in) {
    MetricSeries s;
    std::string line;
    int line_no = 0;
    bool header = false;
    const std::size_t nc = metric_columns().size();
    auto number = [&line_no](const std::string& text) {
        if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (text == "inf") return std::numeric_limits<double>::infinity();
        if (text == "-inf") return -std::numeric_limits<double>::infinity();
        try {
            return std::stod(text);
        } catch (const std::exception&) {
            throw ConfigError("bad number '" + text + "' in metrics file", line_no);
        }
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto colon = line.find(':');
            if (colon == std::string::npos) continue;
            const std::string key = line.substr(2, colon - 2);
            const std::string value = line.substr(std::min(line.size(), colon + 2));
            if (key == "scenario") s.scenario = value;
            else if (key == "domain") s.domain = number(value);
            else if (key == "contact_radius") s.contact_radius = number(value);
            else if (key == "goal") {
                std::stringstream ss(value);
                std::string part;
                std::vector<double> g;
                while (std::getline(ss, part, ',')) g.push_back(number(part.substr(part.find_first_not_of(' '))));
                if (g.size() != 4) throw ConfigError("goal needs four numbers", line_no);
                s.goal = {Point{g[0], g[1]}, Point{g[2], g[3]}};
            }
            continue;
        }
        if (!header) {
            header = true;
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ',')) v.push_back(number(cell));
        if (v.size() != nc + 1) throw ConfigError("metrics row has the wrong number of columns", line_no);
        s.records.push_back(record_from_values(v[0], std::vector<double>(v.begin() + 1, v.end())));
    }
    if (!header) throw ConfigError("metrics file has no header");
    return s;
}

void write_ensemble_csv(std::ostream& out, const EnsembleReport& r) {
    out << "# scenario: " << r.scenario << ", runs: " << r.n_runs() << "\n";
    out << "# pointwise mean and sample standard deviation over successful runs\n";
    out << "step";
    for (const auto& c : r.stats.columns) out << ',' << c << "_mean," << c << "_sd";
    out << '\n';
    out << std::setprecision(17);
    for (std::size_t k = 0; k < r.stats.t.size(); ++k) {
        write_number(out, r.stats.t[k]);
        for (std::size_t c = 0; c < r.stats.columns.size(); ++c) {
            out << ',';
            write_number(out, r.stats.mean[k][c]);
            out << ',';
            write_number(out, r.stats.sd[k][c]);
        }
        out << '\n';
    }
}

void write_ensemble_summary(std::ostream& out, const EnsembleReport& r) {
    const int n = std::max(1, r.n_runs());
    out << "scenario: " << r.scenario << "\n";
    out << "runs: " << r.n_runs() << " (failed: " << r.failed() << ")\n";
    out << "steps: " << r.n_steps << "\n";
    out << "seeds:";
    for (const auto& run : r.runs) out << ' ' << run.seed;
    out << "\n";
    out << "precession none: " << r.precession_counts[0] << "\n";
    out << "precession clockwise: " << r.precession_counts[1] << "\n";
    out << "precession anticlockwise: " << r.precession_counts[2] << "\n";
    out << "precession frequency: " << double(r.precession_counts[1] + r.precession_counts[2]) / n << "\n";
    const char* labels[3] = {"pi/4", "pi/2", "3pi/4"};
    for (std::size_t t = 0; t < 3; ++t) {
        const auto& c = r.threshold_sensitivity[t];
        out << "threshold " << labels[t] << ": none " << c[0] << ", clockwise " << c[1] << ", anticlockwise " << c[2]
            << "\n";
    }
    out << "goal reached red: " << r.goal_reach_frequency[0] << "\n";
    out << "goal reached blue: " << r.goal_reach_frequency[1] << "\n";
    const auto passed = std::count_if(r.runs.begin(), r.runs.end(), [](const RunSummary& s) { return s.ok && s.passed; });
    out << "forces passed: " << passed << "\n";
    if (!r.stats.mean.empty()) {
        const auto& last = r.stats.mean.back();
        out << "final living red: " << last[0] << " +- " << r.stats.sd.back()[0] << "\n";
        out << "final living blue: " << last[1] << " +- " << r.stats.sd.back()[1] << "\n";
    }
    for (const auto& run : r.runs) {
        if (!run.ok) out << "seed " << run.seed << " failed: " << run.error << "\n";
    }
}

void write_comparison(std::ostream& out, const ComparisonReport& r) {
    out << std::setprecision(10);
    out << "pde scenario: " << r.pde_scenario << "\n";
    out << "ca scenario: " << r.ca_scenario << "\n";
    out << "centroid rmse: " << r.centroid_rmse << "\n";
    out << "survivors pde: " << r.pde_survivors[0] << ", " << r.pde_survivors[1] << "\n";
    out << "survivors ca: " << r.ca_survivors[0] << ", " << r.ca_survivors[1] << "\n";
    out << "stationary window pde: " << r.pde_stationary_fraction << "\n";
    out << "stationary window ca: " << r.ca_stationary_fraction << "\n";
    out << "\nprogress,pde_loss_red,pde_loss_blue,ca_loss_red,ca_loss_blue\n";
    for (std::size_t i = 0; i < r.progress.size(); ++i) {
        out << r.progress[i] << ',' << r.pde_loss[i][0] << ',' << r.pde_loss[i][1] << ',' << r.ca_loss[i][0] << ','
            << r.ca_loss[i][1] << '\n';
    }
}

}  // namespace cdyn::analysis

#include "cdyn/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "cdyn/errors.hpp"

namespace cdyn::scenario {

using pde::PdeForceParams;
using pde::SwitchMode;
using pde::Vec2;

std::string_view to_string(Engine e) {
    switch (e) {
        case Engine::pde: return "pde";
        case Engine::ca: return "ca";
        case Engine::both: return "both";
    }
    return "pde";
}

namespace {

// ---- value formatting and parsing -------------------------------------------------

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

double parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double x = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
        throw ConfigError("expected a number, got '" + std::string(s) + "'");
    }
    return x;
}

long parse_long(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    long x = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
        throw ConfigError("expected an integer, got '" + std::string(s) + "'");
    }
    return x;
}

int parse_int(std::string_view s) {
    const long x = parse_long(s);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        throw ConfigError("integer out of range: " + std::string(trim(s)));
    }
    return static_cast<int>(x);
}

std::vector<std::string_view> split_commas(std::string_view s) {
    std::vector<std::string_view> out;
    s = trim(s);
    if (s.empty()) return out;
    std::size_t pos = 0;
    while (true) {
        const auto c = s.find(',', pos);
        out.push_back(trim(s.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos)));
        if (c == std::string_view::npos) break;
        pos = c + 1;
    }
    return out;
}

std::pair<double, double> parse_pair(std::string_view s) {
    const auto parts = split_commas(s);
    if (parts.size() != 2) throw ConfigError("expected two comma-separated numbers, got '" + std::string(trim(s)) + "'");
    return {parse_double(parts[0]), parse_double(parts[1])};
}

// ---- field schemas ----------------------------------------------------------------

template <class T>
struct Field {
    std::string_view key;
    std::function<std::string(const T&)> get;
    std::function<void(T&, std::string_view)> set;
};

template <class T, class M>
Field<T> real(std::string_view key, M T::*m) {
    return {key, [m](const T& t) { return fmt(t.*m); }, [m](T& t, std::string_view v) { t.*m = parse_double(v); }};
}

template <class T, class M>
Field<T> integer(std::string_view key, M T::*m) {
    return {key, [m](const T& t) { return std::to_string(t.*m); },
            [m](T& t, std::string_view v) { t.*m = static_cast<M>(parse_long(v)); }};
}

template <class T>
Field<T> vec(std::string_view key, Vec2 T::*m) {
    return {key, [m](const T& t) { return fmt((t.*m).x) + ", " + fmt((t.*m).y); },
            [m](T& t, std::string_view v) {
                const auto [x, y] = parse_pair(v);
                t.*m = Vec2{x, y};
            }};
}

template <class T>
Field<T> cell(std::string_view key, ca::Cell T::*m) {
    return {key, [m](const T& t) { return std::to_string((t.*m).x) + ", " + std::to_string((t.*m).y); },
            [m](T& t, std::string_view v) {
                const auto parts = split_commas(v);
                if (parts.size() != 2) throw ConfigError("expected two comma-separated integers");
                t.*m = ca::Cell{parse_int(parts[0]), parse_int(parts[1])};
            }};
}

const std::vector<Field<PdeForceParams>>& pde_fields() {
    using P = PdeForceParams;
    static const std::vector<Field<P>> f = {
        real("ID", &P::initial_density),
        real("rho", &P::initial_radius),
        vec("mu", &P::initial_centre),
        real("IT", &P::inner_threshold),
        real("r_a", &P::attraction_radius),
        real("r_r", &P::repulsion_radius),
        real("D", &P::diffusion),
        vec("C", &P::goal_velocity),
        real("A_a", &P::attraction),
        real("A_r", &P::repulsion),
        real("r_S", &P::sensor_radius),
        real("delta_c", &P::combat_threshold),
        integer("attack", &P::attack),
        real("d", &P::aimed_fire),
        real("beta", &P::fire_rate),
        real("nu", &P::fire_decay),
        real("r_op", &P::fire_range),
        {"switch", [](const P& p) { return std::string(pde::to_string(p.switch_mode)); },
         [](P& p, std::string_view v) {
             const auto m = pde::parse_switch_mode(trim(v));
             if (!m) throw ConfigError("switch must be none, front or pursuit");
             p.switch_mode = *m;
         }},
        vec("goal", &P::goal),
    };
    return f;
}

const std::vector<Field<ca::CaForceParams>>& ca_fields() {
    using P = ca::CaForceParams;
    static const std::vector<Field<P>> f = [] {
        std::vector<Field<P>> v;
        v.push_back(integer("squad_size", &P::squad_size));
        static constexpr std::string_view names[6] = {"w1", "w2", "w3", "w4", "w5", "w6"};
        for (std::size_t i = 0; i < 6; ++i) {
            v.push_back({names[i], [i](const P& p) { return fmt(p.w[i]); },
                         [i](P& p, std::string_view s) { p.w[i] = parse_double(s); }});
        }
        v.push_back(integer("r_S", &P::sensor_range));
        v.push_back(integer("r_F", &P::fire_range));
        v.push_back(integer("r_T", &P::threshold_range));
        v.push_back(integer("r_M", &P::move_range));
        v.push_back(real("prob_hit", &P::prob_hit));
        v.push_back({"max_targets",
                     [](const P& p) {
                         return p.max_targets == ca::kAllTargets ? std::string("all") : std::to_string(p.max_targets);
                     },
                     [](P& p, std::string_view s) {
                         p.max_targets = trim(s) == "all" ? ca::kAllTargets : parse_int(s);
                     }});
        v.push_back(integer("defence", &P::defence));
        v.push_back(integer("cluster", &P::cluster_threshold));
        v.push_back(integer("advance", &P::advance_threshold));
        v.push_back(integer("combat", &P::combat_threshold));
        v.push_back(cell("centre", &P::start_centre));
        v.push_back(cell("size", &P::start_size));
        v.push_back(cell("flag", &P::flag));
        return v;
    }();
    return f;
}

const std::vector<Field<GridGeometry>>& grid_fields() {
    using G = GridGeometry;
    static const std::vector<Field<G>> f = {integer("nx", &G::nx), integer("ny", &G::ny), real("dx", &G::dx),
                                            real("dy", &G::dy)};
    return f;
}

const std::vector<Field<integrator::IntegratorConfig>>& integrator_fields() {
    using I = integrator::IntegratorConfig;
    static const std::vector<Field<I>> f = {
        real("tau0", &I::tau0),
        real("atol", &I::atol),
        real("rtol", &I::rtol),
        real("t_end", &I::t_end),
        real("safety", &I::safety),
        integer("max_steps", &I::max_steps),
        {"snapshots",
         [](const I& c) {
             std::string s;
             for (std::size_t i = 0; i < c.snapshot_times.size(); ++i) s += (i ? ", " : "") + fmt(c.snapshot_times[i]);
             return s;
         },
         [](I& c, std::string_view v) {
             c.snapshot_times.clear();
             for (auto part : split_commas(v)) c.snapshot_times.push_back(parse_double(part));
         }},
    };
    return f;
}

const std::vector<Field<CaSetup>>& ca_setup_fields() {
    static const std::vector<Field<CaSetup>> f = {
        {"lattice", [](const CaSetup& c) { return std::to_string(c.config.lattice); },
         [](CaSetup& c, std::string_view v) { c.config.lattice = parse_int(v); }},
        integer("steps", &CaSetup::steps),
        integer("snapshot_every", &CaSetup::snapshot_every),
        {"seed", [](const CaSetup& c) { return std::to_string(c.seed); },
         [](CaSetup& c, std::string_view v) {
             v = trim(v);
             std::uint64_t x = 0;
             const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
             if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) {
                 throw ConfigError("expected an unsigned integer, got '" + std::string(v) + "'");
             }
             c.seed = x;
         }},
    };
    return f;
}

const std::vector<Field<Scenario>>& header_fields() {
    static const std::vector<Field<Scenario>> f = {
        {"name", [](const Scenario& s) { return s.name; },
         [](Scenario& s, std::string_view v) {
             s.name = std::string(trim(v));
             if (s.name.empty()) throw ConfigError("name must not be empty");
         }},
        {"engine", [](const Scenario& s) { return std::string(to_string(s.engine)); },
         [](Scenario& s, std::string_view v) {
             v = trim(v);
             if (v == "pde") s.engine = Engine::pde;
             else if (v == "ca") s.engine = Engine::ca;
             else if (v == "both") s.engine = Engine::both;
             else throw ConfigError("engine must be pde, ca or both");
         }},
    };
    return f;
}

bool uses_pde(Engine e) { return e != Engine::ca; }
bool uses_ca(Engine e) { return e != Engine::pde; }

// One section of a scenario, bound to the struct it reads and writes.
struct SectionRef {
    std::string name;
    std::function<std::vector<std::pair<std::string, std::string>>()> dump;
    std::function<bool(std::string_view key, std::string_view value)> assign;  // false if unknown key
    std::function<std::vector<std::string_view>()> keys;
};

template <class T>
SectionRef make_section(std::string name, T& target, const std::vector<Field<T>>& fields) {
    SectionRef r;
    r.name = std::move(name);
    r.dump = [&target, &fields] {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& f : fields) out.emplace_back(std::string(f.key), f.get(target));
        return out;
    };
    r.assign = [&target, &fields](std::string_view key, std::string_view value) {
        for (const auto& f : fields) {
            if (f.key == key) {
                f.set(target, value);
                return true;
            }
        }
        return false;
    };
    r.keys = [&fields] {
        std::vector<std::string_view> k;
        for (const auto& f : fields) k.push_back(f.key);
        return k;
    };
    return r;
}

std::vector<SectionRef> sections(Scenario& s) {
    std::vector<SectionRef> out;
    out.push_back(make_section("scenario", s, header_fields()));
    if (uses_pde(s.engine)) {
        if (!s.pde) s.pde.emplace();
        out.push_back(make_section("grid", s.pde->grid, grid_fields()));
        out.push_back(make_section("integrator", s.pde->integrator, integrator_fields()));
        out.push_back(make_section("force.u", s.pde->u, pde_fields()));
        out.push_back(make_section("force.v", s.pde->v, pde_fields()));
    }
    if (uses_ca(s.engine)) {
        if (!s.ca) s.ca.emplace();
        out.push_back(make_section("ca", *s.ca, ca_setup_fields()));
        out.push_back(make_section("force.red", s.ca->config.force[0], ca_fields()));
        out.push_back(make_section("force.blue", s.ca->config.force[1], ca_fields()));
    }
    return out;
}

// ---- builtins ---------------------------------------------------------------------

constexpr double kSide = 50.0;

PdeForceParams pde_force(double id, Vec2 mu, Vec2 c, double a_r, double r_s, double delta_c, SwitchMode mode,
                         double d, double beta, double it) {
    PdeForceParams p;
    p.initial_density = id;
    p.initial_radius = 5.0;
    p.initial_centre = mu;
    p.inner_threshold = it;
    p.attraction_radius = 5.0;
    p.repulsion_radius = 2.5;
    p.diffusion = 5.0;
    p.goal_velocity = c;
    p.attraction = 5.0;
    p.repulsion = a_r;
    p.sensor_radius = r_s;
    p.combat_threshold = delta_c;
    p.attack = -1;
    p.aimed_fire = d;
    p.fire_rate = beta;
    p.fire_decay = 0.2;
    p.fire_range = 0.0;
    p.switch_mode = mode;
    // The corner the goal velocity points at.
    p.goal = Vec2{c.x > 0 ? kSide : 0.0, c.y > 0 ? kSide : 0.0};
    return p;
}

Scenario pde_scenario(std::string name, PdeForceParams u, PdeForceParams v, double t_end) {
    Scenario s;
    s.name = std::move(name);
    s.engine = Engine::pde;
    PdeSetup p;
    p.grid = GridGeometry{100, 100, kSide / 100, kSide / 100};
    p.u = std::move(u);
    p.v = std::move(v);
    p.integrator.tau0 = 1e-7;
    p.integrator.atol = 1e-3;
    p.integrator.rtol = 1e-3;
    p.integrator.t_end = t_end;
    for (int k = 1; k <= 50; ++k) p.integrator.snapshot_times.push_back(std::min(t_end, t_end * k / 50));
    s.pde = std::move(p);
    return s;
}

Scenario classic_fronts_pde(bool offset) {
    const Vec2 mu_u = offset ? Vec2{19, 15} : Vec2{15, 15};
    const Vec2 mu_v = offset ? Vec2{31, 35} : Vec2{35, 35};
    return pde_scenario(offset ? "classic-fronts-pde-offset" : "classic-fronts-pde",
                        pde_force(8, mu_u, {20, 20}, 0.5, 3, 100, SwitchMode::front, 2e-6, 8e-8, 0.5),
                        pde_force(8, mu_v, {-20, -20}, 0.5, 3, 100, SwitchMode::front, 2e-6, 8e-8, 0.5),
                        offset ? 2e-2 : 1e-2);
}

Scenario precess_pde(bool offset) {
    const Vec2 mu_u = offset ? Vec2{15, 18} : Vec2{15, 15};
    const Vec2 mu_v = offset ? Vec2{35, 32} : Vec2{35, 35};
    return pde_scenario(offset ? "precess-pde-offset-anticlockwise" : "precess-pde",
                        pde_force(8, mu_u, {60, 60}, 0.5, 3, 1e6, SwitchMode::pursuit, 2e-6, 8e-8, 1),
                        pde_force(12, mu_v, {-60, -60}, 1.0, 7, 4, SwitchMode::pursuit, 2e-6, 8e-8, 1),
                        offset ? 3.5e-3 : 4e-3);
}

Scenario circle_pde(bool high_d) {
    const double d = high_d ? 1e-4 : 1e-5;
    const double delta_c = high_d ? 20 : 18;
    return pde_scenario(high_d ? "circle-pde-high-d" : "circle-pde",
                        pde_force(8, {15, 15}, {20, 20}, 0.5, 3, delta_c, SwitchMode::pursuit, d, 0, 1),
                        pde_force(12, {35, 35}, {-20, -20}, 1.0, high_d ? 5 : 4, delta_c, SwitchMode::pursuit, d, 0, 1),
                        high_d ? 1e-2 : 8e-3);
}

ca::CaForceParams ca_force(int squad, std::array<double, 6> w, int r_t, double prob_hit, int max_targets,
                           int cluster, int combat, ca::Cell centre, int size, ca::Cell flag) {
    ca::CaForceParams p;
    p.squad_size = squad;
    p.w = w;
    p.sensor_range = 5;
    p.fire_range = 3;
    p.threshold_range = r_t;
    p.move_range = 1;
    p.prob_hit = prob_hit;
    p.max_targets = max_targets;
    p.defence = 1;
    p.cluster_threshold = cluster;
    p.advance_threshold = 0;
    p.combat_threshold = combat;
    p.start_centre = centre;
    p.start_size = {size, size};
    p.flag = flag;
    return p;
}

Scenario ca_scenario(std::string name, ca::CaForceParams red, ca::CaForceParams blue, long steps) {
    Scenario s;
    s.name = std::move(name);
    s.engine = Engine::ca;
    CaSetup c;
    c.config.lattice = 100;
    c.config.force = {std::move(red), std::move(blue)};
    c.steps = steps;
    c.snapshot_every = 10;
    s.ca = std::move(c);
    return s;
}

Scenario classic_fronts_ca() {
    return ca_scenario("classic-fronts-ca",
                       ca_force(225, {0, 50, 0, 50, 0, 5}, 2, 2e-3, 5, 0, 3, {15, 50}, 25, {1, 50}),
                       ca_force(225, {0, 50, 0, 50, 0, 5}, 2, 2e-3, 5, 0, 3, {85, 50}, 25, {99, 50}), 2000);
}

Scenario precess_ca(bool flag_offset) {
    return ca_scenario(flag_offset ? "precess-ca-flag-offset" : "precess-ca",
                       ca_force(90, {25, 10, 75, 25, 0, 50}, 2, 2e-3, ca::kAllTargets, 10, 4, {10, 10}, 20, {1, 1}),
                       ca_force(90, {10, 35, 10, 80, 0, 50}, 3, 2e-3, ca::kAllTargets, 3, -5, {90, 90}, 20,
                                {flag_offset ? 90 : 99, 99}),
                       400);
}

Scenario circle_ca() {
    return ca_scenario("circle-ca",
                       ca_force(200, {10, 50, 0, 100, 0, 25}, 3, 1e-3, 999, 3, -7, {10, 10}, 20, {1, 1}),
                       ca_force(200, {25, 25, 75, 25, 0, 75}, 3, 1e-3, 999, 15, 5, {90, 90}, 20, {99, 99}), 600);
}

const std::map<std::string, std::function<Scenario()>, std::less<>>& registry() {
    static const std::map<std::string, std::function<Scenario()>, std::less<>> r = {
        {"classic-fronts-ca", classic_fronts_ca},
        {"classic-fronts-pde", [] { return classic_fronts_pde(false); }},
        {"classic-fronts-pde-offset", [] { return classic_fronts_pde(true); }},
        {"precess-ca", [] { return precess_ca(false); }},
        {"precess-ca-flag-offset", [] { return precess_ca(true); }},
        {"precess-pde", [] { return precess_pde(false); }},
        {"precess-pde-offset-anticlockwise", [] { return precess_pde(true); }},
        {"precess-pde-offset-clockwise", [] { return mirror_diagonal(precess_pde(true)); }},
        {"circle-ca", circle_ca},
        {"circle-pde", [] { return circle_pde(false); }},
        {"circle-pde-high-d", [] { return circle_pde(true); }},
    };
    return r;
}

}  // namespace

void Scenario::validate() const {
    if (name.empty()) throw ParameterError("scenario.name: must not be empty");
    if (uses_pde(engine)) {
        if (!pde) throw ParameterError("scenario: pde engine without a pde setup");
        pde->grid.validate();
        auto check = [&](const PdeForceParams& p, const char* which) {
            try {
                p.validate();
            } catch (const ParameterError& e) {
                throw ParameterError(std::string(which) + "." + e.what());
            }
            auto inside = [&](Vec2 c) {
                return c.x >= 0 && c.y >= 0 && c.x <= pde->grid.width() && c.y <= pde->grid.height();
            };
            if (!inside(p.initial_centre)) throw ParameterError(std::string(which) + ".mu: outside the domain");
            if (!inside(p.goal)) throw ParameterError(std::string(which) + ".goal: outside the domain");
        };
        check(pde->u, "u");
        check(pde->v, "v");
        try {
            pde->integrator.validate();
        } catch (const ParameterError& e) {
            throw ParameterError(std::string("integrator.") + e.what());
        }
    }
    if (uses_ca(engine)) {
        if (!ca) throw ParameterError("scenario: ca engine without a ca setup");
        ca->config.validate();
        if (ca->steps < 0) throw ParameterError("ca.steps: must be >= 0");
    }
}

std::vector<std::string> builtin_names() {
    std::vector<std::string> out;
    for (const auto& [k, _] : registry()) out.push_back(k);
    return out;
}

Scenario builtin(std::string_view name) {
    const auto it = registry().find(name);
    if (it == registry().end()) {
        std::string msg = "unknown scenario '" + std::string(name) + "'; valid names:";
        for (const auto& n : builtin_names()) msg += " " + n;
        throw LookupError(msg);
    }
    return it->second();
}

Scenario mirror_diagonal(const Scenario& s) {
    Scenario m = s;
    const std::string from = "anticlockwise";
    if (const auto pos = m.name.find(from); pos != std::string::npos) {
        m.name.replace(pos, from.size(), "clockwise");
    } else if (const auto pos2 = m.name.find("clockwise"); pos2 != std::string::npos) {
        m.name.replace(pos2, 9, "anticlockwise");
    } else {
        m.name += "-mirrored";
    }
    auto swap_vec = [](Vec2& v) { std::swap(v.x, v.y); };
    auto swap_cell = [](ca::Cell& c) { std::swap(c.x, c.y); };
    if (m.pde) {
        std::swap(m.pde->grid.nx, m.pde->grid.ny);
        std::swap(m.pde->grid.dx, m.pde->grid.dy);
        for (PdeForceParams* p : {&m.pde->u, &m.pde->v}) {
            swap_vec(p->initial_centre);
            swap_vec(p->goal_velocity);
            swap_vec(p->goal);
        }
    }
    if (m.ca) {
        for (auto& f : m.ca->config.force) {
            swap_cell(f.start_centre);
            swap_cell(f.start_size);
            swap_cell(f.flag);
        }
    }
    return m;
}

std::string serialize(const Scenario& s) {
    Scenario copy = s;
    std::ostringstream out;
    bool first = true;
    for (const auto& sec : sections(copy)) {
        if (!first) out << '\n';
        first = false;
        out << '[' << sec.name << "]\n";
        for (const auto& [k, v] : sec.dump()) out << k << " = " << v << '\n';
    }
    return out.str();
}

Scenario parse(std::istream& in) {
    struct Entry {
        std::string value;
        int line;
    };
    struct RawSection {
        int line = 0;
        std::map<std::string, Entry, std::less<>> entries;
    };
    std::map<std::string, RawSection, std::less<>> raw;
    std::string current;
    std::string text;
    int line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        std::string_view line = text;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
            current = std::string(trim(line.substr(1, line.size() - 2)));
            if (raw.count(current)) throw ConfigError("duplicate section [" + current + "]", line_no);
            raw[current].line = line_no;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError("expected key = value", line_no);
        if (current.empty()) throw ConfigError("key outside of any section", line_no);
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty()) throw ConfigError("empty key", line_no);
        auto& sec = raw[current];
        if (sec.entries.count(key)) throw ConfigError("duplicate key '" + key + "'", line_no);
        sec.entries[key] = Entry{std::string(trim(line.substr(eq + 1))), line_no};
    }

    Scenario s;
    const auto head = raw.find("scenario");
    if (head == raw.end()) throw ConfigError("missing [scenario] section");
    // The engine decides which sections are expected, so read the header first.
    for (const auto& f : header_fields()) {
        const auto e = head->second.entries.find(f.key);
        if (e == head->second.entries.end()) {
            throw ConfigError("missing required field '" + std::string(f.key) + "' in [scenario]", head->second.line);
        }
        try {
            f.set(s, e->second.value);
        } catch (const ConfigError& err) {
            throw ConfigError(std::string(f.key) + ": " + err.what(), e->second.line);
        }
    }

    auto secs = sections(s);
    for (const auto& [name, sec] : raw) {
        const bool known = std::any_of(secs.begin(), secs.end(), [&](const SectionRef& r) { return r.name == name; });
        if (!known) {
            throw ConfigError("section [" + name + "] is not used by engine " + std::string(to_string(s.engine)),
                              sec.line);
        }
    }
    for (auto& ref : secs) {
        const auto it = raw.find(ref.name);
        if (it == raw.end()) throw ConfigError("missing section [" + ref.name + "]");
        const RawSection& sec = it->second;
        for (const auto& [key, entry] : sec.entries) {
            try {
                if (!ref.assign(key, entry.value)) {
                    throw ConfigError("unknown key '" + key + "' in [" + ref.name + "]", entry.line);
                }
            } catch (const ConfigError& err) {
                if (err.line() > 0) throw;
                throw ConfigError(key + ": " + err.what(), entry.line);
            }
        }
        for (auto key : ref.keys()) {
            if (!sec.entries.count(key)) {
                throw ConfigError("missing required field '" + std::string(key) + "' in [" + ref.name + "]", sec.line);
            }
        }
    }
    try {
        s.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return s;
}

Scenario parse(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
}

Scenario load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file " + path);
    return parse(in);
}

void save(const Scenario& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write scenario file " + path);
    out << serialize(s);
    if (!out) throw ConfigError("failed writing scenario file " + path);
}

void apply_override(Scenario& s, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("override must look like path=value: " + std::string(assignment));
    const std::string_view path = trim(assignment.substr(0, eq));
    const std::string_view value = trim(assignment.substr(eq + 1));
    const auto dot = path.rfind('.');
    if (dot == std::string_view::npos) throw ConfigError("override path needs section.key: " + std::string(path));
    std::string section(path.substr(0, dot));
    const std::string key(path.substr(dot + 1));
    if (section == "u" || section == "v" || section == "red" || section == "blue") section = "force." + section;

    const bool new_end = section == "integrator" && key == "t_end" && s.pde;
    const double old_end = new_end ? s.pde->integrator.t_end : 0.0;
    for (auto& ref : sections(s)) {
        if (ref.name != section) continue;
        try {
            if (!ref.assign(key, value)) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
        } catch (const ConfigError& err) {
            throw ConfigError(std::string(path) + ": " + err.what());
        }
        // Snapshot times follow the end time so the sampling keeps its shape.
        if (new_end && old_end > 0.0) {
            auto& c = s.pde->integrator;
            for (double& t : c.snapshot_times) t = std::min(c.t_end, t * (c.t_end / old_end));
        }
        return;
    }
    throw ConfigError("override section [" + section + "] not used by scenario " + s.name);
}

Scenario resolve(const std::string& name_or_path) {
    std::error_code ec;
    if (std::filesystem::is_regular_file(name_or_path, ec)) return load(name_or_path);
    return builtin(name_or_path);
}

}  // namespace cdyn::scenario

#pragma once

// Scenario registry and the flat text format used to store scenarios.
//
//   # comment
//   [scenario]
//   name = classic-fronts-pde
//   engine = pde
//   [grid]
//   nx = 100
//   ...
//   [force.u]
//   D = 5
//   C = 20, 20
//
// PDE forces live in [force.u] / [force.v], automaton forces in
// [force.red] / [force.blue]. Every key of a present section is required and
// unknown keys are rejected. Overrides use "section.key" paths, where a
// force section may be abbreviated to its name ("red.w6", "u.d").

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdyn/ca.hpp"
#include "cdyn/integrator.hpp"
#include "cdyn/pde.hpp"

namespace cdyn::scenario {

enum class Engine { pde, ca, both };

std::string_view to_string(Engine e);

struct PdeSetup {
    GridGeometry grid;
    pde::PdeForceParams u;
    pde::PdeForceParams v;
    integrator::IntegratorConfig integrator;

    bool operator==(const PdeSetup&) const = default;
};

struct CaSetup {
    ca::CaConfig config;
    long steps = 0;
    long snapshot_every = 0;
    std::uint64_t seed = 0;

    bool operator==(const CaSetup&) const = default;
};

struct Scenario {
    std::string name;
    Engine engine = Engine::pde;
    std::optional<PdeSetup> pde;
    std::optional<CaSetup> ca;

    // Throws ParameterError (field named) if any embedded invariant fails.
    void validate() const;
    bool operator==(const Scenario&) const = default;
};

// Registered builtin names, sorted.
std::vector<std::string> builtin_names();

// Throws LookupError listing the valid names.
Scenario builtin(std::string_view name);

// The same scenario reflected through the main diagonal (x <-> y).
Scenario mirror_diagonal(const Scenario& s);

Scenario parse(std::istream& in);
Scenario parse(const std::string& text);
std::string serialize(const Scenario& s);

// Throws ConfigError with a line number on malformed input.
Scenario load(const std::string& path);
void save(const Scenario& s, const std::string& path);

// Applies one "path = value" override (whitespace around '=' optional).
void apply_override(Scenario& s, std::string_view assignment);

// Builtin name, or a path to a scenario file when `name_or_path` names an
// existing file.
Scenario resolve(const std::string& name_or_path);

}  // namespace cdyn::scenario

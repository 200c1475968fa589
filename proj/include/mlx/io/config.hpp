#pragma once

// Run configuration: JSON with system, truncation, propagation, relaxation,
// analysis and seed entries. Unknown keys are rejected. Every module
// precondition is checked at load time by building the Model.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlx/propagate.hpp"
#include "mlx/system.hpp"

namespace mlx::io {

using json = nlohmann::json;

inline constexpr const char* kEnvPrefix = "MLMCTDHX_";

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SpeciesConfig {
    Statistics statistics = Statistics::boson;
    int particles = 1;
    double mass = 1.0;
    double omega = 1.0;
    double x0 = 0.0;
    double g = 0.0;
};

struct AnalysisConfig {
    bool densities = true;
    bool populations = true;
    int schmidt_layers = 0;  // number of NSF-resolved layers written per species
};

struct RunConfig {
    std::array<SpeciesConfig, kSpecies> species;
    double g_AB = 0.0;
    Truncation truncation;
    std::size_t grid_points = 256;
    double half_width = 8.0;
    PropagationConfig propagation;
    double checkpoint_stride = 0.0;  // 0: only at the end
    RelaxConfig relaxation;
    AnalysisConfig analysis;
    std::uint64_t seed = 0;

    System system() const {
        System s;
        s.grid = build_grid(half_width, grid_points);
        for (std::size_t i = 0; i < kSpecies; ++i) {
            auto& p = s.species[i];
            const auto& c = species[i];
            p.statistics = c.statistics;
            p.particles = c.particles;
            p.mass = c.mass;
            p.frequency = c.omega;
            p.offset = c.x0;
            p.intra = InteractionKernel::contact(c.g);
        }
        s.inter = InteractionKernel::contact(g_AB);
        return s;
    }

    Model model() const { return Model(system(), truncation); }
    std::string label() const { return truncation.label(); }
};

namespace detail {

class Reader {
public:
    Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    template <class T>
    void get(const char* key, T& out, bool required = false) {
        seen_.push_back(key);
        if (!j_.contains(key)) {
            if (required) throw ConfigError(where_ + "." + key + " is required");
            return;
        }
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.push_back(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
                throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }

private:
    const json& j_;
    std::string where_;
    std::vector<std::string> seen_;
};

inline Statistics parse_statistics(const std::string& s, const std::string& where) {
    try {
        return statistics_from_string(s);
    } catch (const std::exception&) {
        throw ConfigError(where + ": statistics must be \"boson\" or \"fermion\", got \"" + s + "\"");
    }
}

}  // namespace detail

/// Throws ConfigError unless every precondition holds.
inline void validate(const RunConfig& c) {
    for (int s = 0; s < kSpecies; ++s) {
        const auto& p = c.species[static_cast<std::size_t>(s)];
        const std::string n = species_name(s);
        if (p.particles < 1) throw ConfigError("system.N_" + n + " must be >= 1");
        if (!(p.mass > 0.0)) throw ConfigError("system.mass_" + n + " must be positive");
        if (!(p.omega > 0.0)) throw ConfigError("system.omega_" + n + " must be positive");
    }
    if (c.grid_points < 8) throw ConfigError("truncation.G must be >= 8");
    if (!(c.half_width > 0.0)) throw ConfigError("truncation.L must be positive");
    if (!(c.checkpoint_stride >= 0.0)) throw ConfigError("propagation.checkpoint_stride must be >= 0");
    if (c.checkpoint_stride > 0.0) {
        const double r = c.checkpoint_stride / c.propagation.output_stride;
        if (std::abs(r - std::round(r)) > 1e-9 || r < 0.5)
            throw ConfigError("propagation.checkpoint_stride must be a multiple of output_stride");
    }
    if (c.analysis.schmidt_layers < 0 || c.analysis.schmidt_layers > c.truncation.sbs)
        throw ConfigError("analysis.schmidt_layers must lie in 0..M");
    if (!(c.relaxation.state_rate_tol >= 0.0))
        throw ConfigError("relaxation.state_rate_tol must be >= 0");
    if (!(c.relaxation.energy_rate_tol > 0.0) || !(c.relaxation.chunk > 0.0) ||
        !(c.relaxation.tau_max > c.relaxation.chunk))
        throw ConfigError("relaxation: tolerances and times must be positive with tau_max > chunk");
    try {
        c.propagation.validate(0.0);
        (void)c.model();
    } catch (const std::logic_error& e) {
        throw ConfigError(e.what());
    }
}

inline RunConfig parse_config(const json& j) {
    RunConfig c;
    detail::Reader top(j, "config");
    const json* sys = top.child("system");
    if (!sys) throw ConfigError("config.system is required");
    {
        detail::Reader r(*sys, "system");
        for (int s = 0; s < kSpecies; ++s) {
            auto& p = c.species[static_cast<std::size_t>(s)];
            const std::string n = species_name(s);
            std::string stats = "boson";
            r.get(("statistics_" + n).c_str(), stats, true);
            p.statistics = detail::parse_statistics(stats, "system.statistics_" + n);
            r.get(("N_" + n).c_str(), p.particles, true);
            r.get(("mass_" + n).c_str(), p.mass);
            r.get(("omega_" + n).c_str(), p.omega);
            r.get(("x0_" + n).c_str(), p.x0);
            r.get(("g_" + n).c_str(), p.g);
        }
        r.get("g_AB", c.g_AB);
        r.finish();
    }
    const json* tr = top.child("truncation");
    if (!tr) throw ConfigError("config.truncation is required");
    {
        detail::Reader r(*tr, "truncation");
        r.get("M", c.truncation.sbs, true);
        r.get("m_A", c.truncation.orbitals[0], true);
        r.get("m_B", c.truncation.orbitals[1], true);
        r.get("G", c.grid_points);
        r.get("L", c.half_width);
        r.finish();
    }
    if (const json* pr = top.child("propagation")) {
        detail::Reader r(*pr, "propagation");
        auto& p = c.propagation;
        r.get("atol", p.atol);
        r.get("rtol", p.rtol);
        r.get("initial_step", p.initial_step);
        r.get("max_step", p.max_step);
        r.get("t_final", p.t_final);
        r.get("output_stride", p.output_stride);
        r.get("orthonormality_tol", p.orthonormality_tol);
        r.get("energy_tol", p.energy_tol);
        r.get("regularization_epsilon", p.regularization.epsilon);
        r.get("checkpoint_stride", c.checkpoint_stride);
        r.finish();
    }
    c.relaxation.regularization = c.propagation.regularization;
    if (const json* rl = top.child("relaxation")) {
        detail::Reader r(*rl, "relaxation");
        auto& p = c.relaxation;
        r.get("atol", p.atol);
        r.get("rtol", p.rtol);
        r.get("chunk", p.chunk);
        r.get("tau_max", p.tau_max);
        r.get("energy_rate_tol", p.energy_rate_tol);
        r.get("state_rate_tol", p.state_rate_tol);
        r.get("perturbation", p.perturbation);
        r.finish();
    }
    if (const json* an = top.child("analysis")) {
        detail::Reader r(*an, "analysis");
        r.get("densities", c.analysis.densities);
        r.get("populations", c.analysis.populations);
        r.get("schmidt_layers", c.analysis.schmidt_layers);
        r.finish();
    }
    top.get("seed", c.seed);
    top.finish();
    c.relaxation.seed = c.seed;
    validate(c);
    return c;
}

/// Environment overrides MLMCTDHX_ATOL, _RTOL, _ORTHO_TOL, _ENERGY_TOL,
/// _REG_EPSILON and _RELAX_TOL. Returns the names that were applied.
inline std::vector<std::string> apply_env_overrides(RunConfig& c, const char* (*getenv_fn)(const char*) = nullptr) {
    auto fetch = [&](const std::string& name) -> std::optional<double> {
        const char* v = getenv_fn ? getenv_fn(name.c_str()) : std::getenv(name.c_str());
        if (!v || !*v) return std::nullopt;
        char* end = nullptr;
        const double d = std::strtod(v, &end);
        if (end == v || *end != '\0') throw ConfigError(name + ": not a number: '" + v + "'");
        return d;
    };
    std::vector<std::string> applied;
    auto apply = [&](const char* suffix, double& target) {
        const std::string name = std::string(kEnvPrefix) + suffix;
        if (auto v = fetch(name)) {
            target = *v;
            applied.push_back(name);
        }
    };
    apply("ATOL", c.propagation.atol);
    apply("RTOL", c.propagation.rtol);
    apply("ORTHO_TOL", c.propagation.orthonormality_tol);
    apply("ENERGY_TOL", c.propagation.energy_tol);
    apply("REG_EPSILON", c.propagation.regularization.epsilon);
    apply("RELAX_TOL", c.relaxation.energy_rate_tol);
    c.relaxation.regularization = c.propagation.regularization;
    validate(c);
    return applied;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config " + path);
    json j;
    try {
        j = json::parse(f, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j);
}

/// Fully resolved configuration, every default spelled out.
inline json to_json(const RunConfig& c) {
    json sys;
    for (int s = 0; s < kSpecies; ++s) {
        const auto& p = c.species[static_cast<std::size_t>(s)];
        const std::string n = species_name(s);
        sys["statistics_" + n] = to_string(p.statistics);
        sys["N_" + n] = p.particles;
        sys["mass_" + n] = p.mass;
        sys["omega_" + n] = p.omega;
        sys["x0_" + n] = p.x0;
        sys["g_" + n] = p.g;
    }
    sys["g_AB"] = c.g_AB;
    const auto& p = c.propagation;
    const auto& r = c.relaxation;
    return json{{"system", sys},
                {"truncation",
                 {{"M", c.truncation.sbs},
                  {"m_A", c.truncation.orbitals[0]},
                  {"m_B", c.truncation.orbitals[1]},
                  {"G", c.grid_points},
                  {"L", c.half_width}}},
                {"propagation",
                 {{"atol", p.atol},
                  {"rtol", p.rtol},
                  {"initial_step", p.initial_step},
                  {"max_step", p.max_step},
                  {"t_final", p.t_final},
                  {"output_stride", p.output_stride},
                  {"orthonormality_tol", p.orthonormality_tol},
                  {"energy_tol", p.energy_tol},
                  {"regularization_epsilon", p.regularization.epsilon},
                  {"checkpoint_stride", c.checkpoint_stride}}},
                {"relaxation",
                 {{"atol", r.atol},
                  {"rtol", r.rtol},
                  {"chunk", r.chunk},
                  {"tau_max", r.tau_max},
                  {"energy_rate_tol", r.energy_rate_tol},
                  {"state_rate_tol", r.state_rate_tol},
                  {"perturbation", r.perturbation}}},
                {"analysis",
                 {{"densities", c.analysis.densities},
                  {"populations", c.analysis.populations},
                  {"schmidt_layers", c.analysis.schmidt_layers}}},
                {"seed", c.seed}};
}

}  // namespace mlx::io

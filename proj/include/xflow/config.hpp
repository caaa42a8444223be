#ifndef XFLOW_CONFIG_HPP
#define XFLOW_CONFIG_HPP

// Run configuration: INI-style sections with key = value lines.
//
//   [grid]     dim (1), cells*, length*
//   [energy]   family* (power | entropy | tabulated | incompressible), m, table
//   [physics]  gamma (0), alpha (0), c1 (0), c2 (0),
//              velocity (zero | constant | rotating | tabulated),
//              velocity_x (0), velocity_y (0), omega (0),
//              velocity_file_x, velocity_file_y
//   [sources]  model (none | homeostatic), growth (1), p_home (1),
//              death1 (0), death2 (0), p_min (-10)
//   [time]     t_end*, cfl_safety (0.9), dt (0 = adaptive)
//   [initial]  rho1 (zero), rho2 (zero), nutrient (uniform value=1)
//   [output]   snapshot_every (0 = initial and final only), write_snapshots (true)
//
// Starred keys are required. Unknown sections or keys are errors.

#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <system_error>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "xflow/energy.hpp"
#include "xflow/errors.hpp"
#include "xflow/grid.hpp"
#include "xflow/initial_data.hpp"
#include "xflow/sources.hpp"
#include "xflow/state.hpp"
#include "xflow/velocity.hpp"

namespace xflow {

struct EnergySpec {
    std::string family = "power";
    double m = 2.0;
    std::string table;
    bool operator==(const EnergySpec&) const = default;
};

struct SourceSpec {
    std::string model = "none";
    HomeostaticParams homeostatic;
    double p_min = -10.0;

    bool operator==(const SourceSpec& o) const {
        return model == o.model && homeostatic.growth == o.homeostatic.growth &&
               homeostatic.p_home == o.homeostatic.p_home &&
               homeostatic.death1 == o.homeostatic.death1 &&
               homeostatic.death2 == o.homeostatic.death2 && p_min == o.p_min;
    }
};

// Raw configuration values, exactly as written (plus defaults).
struct ConfigSpec {
    Grid grid{1, 0, 0.0};
    EnergySpec energy;
    double gamma = 0.0;
    double alpha = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    VelocitySpec velocity;
    SourceSpec sources;
    double t_end = 0.0;
    double cfl_safety = 0.9;
    double fixed_dt = 0.0;
    InitialSpec rho1;
    InitialSpec rho2;
    InitialSpec nutrient{"uniform", {{"value", "1"}}};
    double snapshot_every = 0.0;
    bool write_snapshots = true;

    bool operator==(const ConfigSpec&) const = default;
};

// Validated configuration with the energy, vector field, source model and
// initial state built.
struct SimConfig {
    ConfigSpec spec;
    std::string base_dir;
    Grid grid;
    EnergyPair energy = EnergyPair::entropy();
    VelocityField velocity;
    SourceModel sources;
    SimState initial;

    double gamma() const noexcept { return spec.gamma; }
    double alpha() const noexcept { return spec.alpha; }
    double c1() const noexcept { return spec.c1; }
    double c2() const noexcept { return spec.c2; }
    double t_end() const noexcept { return spec.t_end; }
    double cfl_safety() const noexcept { return spec.cfl_safety; }
    double p_min() const noexcept { return spec.sources.p_min; }
};

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline EnergyPair make_energy(const EnergySpec& s, const std::string& base_dir = "") {
    if (s.family == "power") return EnergyPair::power_law(s.m);
    if (s.family == "entropy") return EnergyPair::entropy();
    if (s.family == "incompressible") return EnergyPair::incompressible();
    if (s.family == "tabulated") {
        if (s.table.empty()) throw ConfigError("tabulated energy needs [energy] table");
        std::string path = s.table;
        if (!base_dir.empty() && path.front() != '/') path = base_dir + "/" + path;
        return load_tabulated_energy(path);
    }
    throw ConfigError("unknown energy family '" + s.family + "'");
}

// Validates the spec and builds every derived object; no time stepping
// starts with an invalid configuration.
inline SimConfig build_config(const ConfigSpec& spec, const std::string& base_dir = "") {
    SimConfig cfg;
    cfg.spec = spec;
    cfg.base_dir = base_dir;
    spec.grid.validate();
    cfg.grid = spec.grid;

    cfg.energy = make_energy(spec.energy, base_dir);
    if (!cfg.energy.single_valued_eprime()) {
        throw ConfigError("energy '" + cfg.energy.name() +
                          "' has a multivalued e'; the solver needs a single-valued q = e'(rho) "
                          "(approach it through a power-law sweep instead)");
    }
    auto nonneg = [](double v, const char* what) {
        if (!std::isfinite(v) || v < 0.0) {
            throw ConfigError(std::string(what) + " must be finite and >= 0");
        }
    };
    nonneg(spec.gamma, "gamma");
    nonneg(spec.alpha, "alpha");
    nonneg(spec.c1, "c1");
    nonneg(spec.c2, "c2");
    nonneg(spec.t_end, "t_end");
    nonneg(spec.snapshot_every, "snapshot_every");
    nonneg(spec.fixed_dt, "dt");
    if (!(spec.cfl_safety > 0.0 && spec.cfl_safety <= 1.0)) {
        throw ConfigError("cfl_safety must lie in (0, 1]");
    }

    VelocitySpec vspec = spec.velocity;
    for (auto& f : vspec.files) {
        if (!f.empty() && !base_dir.empty() && f.front() != '/') f = base_dir + "/" + f;
    }
    cfg.velocity = VelocityField(cfg.grid, vspec);

    cfg.initial.t = 0.0;
    cfg.initial.rho1 = generate_initial(spec.rho1, cfg.grid, base_dir);
    cfg.initial.rho2 = generate_initial(spec.rho2, cfg.grid, base_dir);
    cfg.initial.nutrient = generate_initial(spec.nutrient, cfg.grid, base_dir);
    if (cfg.initial.rho1.min() < 0.0 || cfg.initial.rho2.min() < 0.0) {
        throw ConfigError("initial densities must be nonnegative");
    }
    if (cfg.initial.nutrient.min() < 0.0) throw ConfigError("initial nutrient must be nonnegative");
    double rho_max = 0.0;
    for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
        rho_max = std::max(rho_max, cfg.initial.rho1[i] + cfg.initial.rho2[i]);
    }
    if (std::isfinite(cfg.energy.a_max()) && !(rho_max < cfg.energy.a_max())) {
        throw ConfigError("initial density " + format_double(rho_max) +
                          " reaches the energy's domain bound " + format_double(cfg.energy.a_max()));
    }

    if (spec.sources.model == "none") {
        cfg.sources = SourceModel::none();
    } else if (spec.sources.model == "homeostatic") {
        if (!std::isfinite(spec.sources.p_min)) throw ConfigError("p_min must be finite");
        cfg.sources = SourceModel::homeostatic(spec.sources.homeostatic, cfg.initial.nutrient.max(),
                                               spec.sources.p_min);
    } else {
        throw ConfigError("unknown source model '" + spec.sources.model + "'");
    }
    return cfg;
}

namespace detail {

inline const std::map<std::string, std::set<std::string>>& config_schema() {
    static const std::map<std::string, std::set<std::string>> schema{
        {"grid", {"dim", "cells", "length"}},
        {"energy", {"family", "m", "table"}},
        {"physics",
         {"gamma", "alpha", "c1", "c2", "velocity", "velocity_x", "velocity_y", "omega",
          "velocity_file_x", "velocity_file_y"}},
        {"sources", {"model", "growth", "p_home", "death1", "death2", "p_min"}},
        {"time", {"t_end", "cfl_safety", "dt"}},
        {"initial", {"rho1", "rho2", "nutrient"}},
        {"output", {"snapshot_every", "write_snapshots"}},
    };
    return schema;
}

class SectionReader {
public:
    SectionReader(const boost::property_tree::ptree& root, const std::string& section)
        : section_(section) {
        if (const auto child = root.get_child_optional(section)) node_ = &*child;
    }

    bool present() const noexcept { return node_ != nullptr; }

    std::optional<std::string> raw(const std::string& key) const {
        if (!node_) return std::nullopt;
        const auto v = node_->get_optional<std::string>(key);
        if (!v) return std::nullopt;
        std::string s = *v;
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }

    double number(const std::string& key, std::optional<double> fallback) const {
        const auto r = raw(key);
        if (!r) {
            if (!fallback) throw ConfigError("missing required key [" + section_ + "] " + key);
            return *fallback;
        }
        double v = 0.0;
        const auto res = std::from_chars(r->data(), r->data() + r->size(), v);
        if (res.ec != std::errc() || res.ptr != r->data() + r->size()) {
            throw ConfigError("[" + section_ + "] " + key + ": not a number: '" + *r + "'");
        }
        return v;
    }

    int integer(const std::string& key, std::optional<int> fallback) const {
        const double v = number(key, fallback ? std::optional<double>(*fallback) : std::nullopt);
        if (v != std::floor(v) || std::abs(v) > 1e9) {
            throw ConfigError("[" + section_ + "] " + key + ": not an integer");
        }
        return static_cast<int>(v);
    }

    std::string text(const std::string& key, std::optional<std::string> fallback) const {
        const auto r = raw(key);
        if (!r) {
            if (!fallback) throw ConfigError("missing required key [" + section_ + "] " + key);
            return *fallback;
        }
        return *r;
    }

    bool boolean(const std::string& key, bool fallback) const {
        const auto r = raw(key);
        if (!r) return fallback;
        if (*r == "true" || *r == "1" || *r == "yes") return true;
        if (*r == "false" || *r == "0" || *r == "no") return false;
        throw ConfigError("[" + section_ + "] " + key + ": expected true/false");
    }

private:
    std::string section_;
    const boost::property_tree::ptree* node_ = nullptr;
};

} // namespace detail

inline ConfigSpec parse_config_spec(const std::string& text) {
    boost::property_tree::ptree root;
    try {
        std::istringstream is(text);
        boost::property_tree::ini_parser::read_ini(is, root);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax: ") + e.what());
    }
    const auto& schema = detail::config_schema();
    for (const auto& [section, node] : root) {
        const auto it = schema.find(section);
        if (it == schema.end()) {
            if (node.empty()) throw ConfigError("key '" + section + "' outside any section");
            throw ConfigError("unknown section [" + section + "]");
        }
        for (const auto& [key, value] : node) {
            if (!it->second.contains(key)) {
                throw ConfigError("unknown key [" + section + "] " + key);
            }
        }
    }

    ConfigSpec s;
    const detail::SectionReader grid(root, "grid");
    s.grid.dim = grid.integer("dim", 1);
    s.grid.cells = grid.integer("cells", std::nullopt);
    s.grid.length = grid.number("length", std::nullopt);

    const detail::SectionReader energy(root, "energy");
    s.energy.family = energy.text("family", std::nullopt);
    if (s.energy.family == "power") {
        s.energy.m = energy.number("m", std::nullopt);
    } else {
        s.energy.m = energy.number("m", 2.0);
    }
    s.energy.table = energy.text("table", std::string());

    const detail::SectionReader phys(root, "physics");
    s.gamma = phys.number("gamma", 0.0);
    s.alpha = phys.number("alpha", 0.0);
    s.c1 = phys.number("c1", 0.0);
    s.c2 = phys.number("c2", 0.0);
    const std::string vk = phys.text("velocity", std::string("zero"));
    if (vk == "zero") {
        s.velocity.kind = VelocityKind::Zero;
    } else if (vk == "constant") {
        s.velocity.kind = VelocityKind::Constant;
    } else if (vk == "rotating") {
        s.velocity.kind = VelocityKind::Rotating;
    } else if (vk == "tabulated") {
        s.velocity.kind = VelocityKind::Tabulated;
    } else {
        throw ConfigError("unknown velocity preset '" + vk + "'");
    }
    s.velocity.constant = {phys.number("velocity_x", 0.0), phys.number("velocity_y", 0.0)};
    s.velocity.omega = phys.number("omega", 0.0);
    s.velocity.files = {phys.text("velocity_file_x", std::string()),
                        phys.text("velocity_file_y", std::string())};

    const detail::SectionReader src(root, "sources");
    s.sources.model = src.text("model", std::string("none"));
    s.sources.homeostatic.growth = src.number("growth", 1.0);
    s.sources.homeostatic.p_home = src.number("p_home", 1.0);
    s.sources.homeostatic.death1 = src.number("death1", 0.0);
    s.sources.homeostatic.death2 = src.number("death2", 0.0);
    s.sources.p_min = src.number("p_min", -10.0);

    const detail::SectionReader time(root, "time");
    s.t_end = time.number("t_end", std::nullopt);
    s.cfl_safety = time.number("cfl_safety", 0.9);
    s.fixed_dt = time.number("dt", 0.0);

    const detail::SectionReader init(root, "initial");
    s.rho1 = parse_initial_spec(init.text("rho1", std::string("zero")));
    s.rho2 = parse_initial_spec(init.text("rho2", std::string("zero")));
    s.nutrient = parse_initial_spec(init.text("nutrient", std::string("uniform value=1")));

    const detail::SectionReader out(root, "output");
    s.snapshot_every = out.number("snapshot_every", 0.0);
    s.write_snapshots = out.boolean("write_snapshots", true);
    return s;
}

inline SimConfig parse_config(const std::string& text, const std::string& base_dir = "") {
    return build_config(parse_config_spec(text), base_dir);
}

// Every key, defaults included; parse_config_spec(emit_config(s)) == s.
inline std::string emit_config(const ConfigSpec& s) {
    std::ostringstream os;
    const auto d = format_double;
    os << "[grid]\n"
       << "dim = " << s.grid.dim << "\n"
       << "cells = " << s.grid.cells << "\n"
       << "length = " << d(s.grid.length) << "\n\n";
    os << "[energy]\n"
       << "family = " << s.energy.family << "\n"
       << "m = " << d(s.energy.m) << "\n";
    if (!s.energy.table.empty()) os << "table = " << s.energy.table << "\n";
    os << "\n[physics]\n"
       << "gamma = " << d(s.gamma) << "\n"
       << "alpha = " << d(s.alpha) << "\n"
       << "c1 = " << d(s.c1) << "\n"
       << "c2 = " << d(s.c2) << "\n"
       << "velocity = " << to_string(s.velocity.kind) << "\n"
       << "velocity_x = " << d(s.velocity.constant[0]) << "\n"
       << "velocity_y = " << d(s.velocity.constant[1]) << "\n"
       << "omega = " << d(s.velocity.omega) << "\n";
    if (!s.velocity.files[0].empty()) os << "velocity_file_x = " << s.velocity.files[0] << "\n";
    if (!s.velocity.files[1].empty()) os << "velocity_file_y = " << s.velocity.files[1] << "\n";
    os << "\n[sources]\n"
       << "model = " << s.sources.model << "\n"
       << "growth = " << d(s.sources.homeostatic.growth) << "\n"
       << "p_home = " << d(s.sources.homeostatic.p_home) << "\n"
       << "death1 = " << d(s.sources.homeostatic.death1) << "\n"
       << "death2 = " << d(s.sources.homeostatic.death2) << "\n"
       << "p_min = " << d(s.sources.p_min) << "\n\n";
    os << "[time]\n"
       << "t_end = " << d(s.t_end) << "\n"
       << "cfl_safety = " << d(s.cfl_safety) << "\n"
       << "dt = " << d(s.fixed_dt) << "\n\n";
    os << "[initial]\n"
       << "rho1 = " << s.rho1.to_string() << "\n"
       << "rho2 = " << s.rho2.to_string() << "\n"
       << "nutrient = " << s.nutrient.to_string() << "\n\n";
    os << "[output]\n"
       << "snapshot_every = " << d(s.snapshot_every) << "\n"
       << "write_snapshots = " << (s.write_snapshots ? "true" : "false") << "\n";
    return os.str();
}

} // namespace xflow

#endif

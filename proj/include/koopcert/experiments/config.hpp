#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "koopcert/dynamics.hpp"
#include "koopcert/error.hpp"

namespace koopcert::experiments {

enum class ExperimentId {
    ou_bound,
    ou_analytic,
    duffing_train,
    duffing_validate,
    duffing_longhorizon,
    semigroup_counterexample
};

inline const std::vector<std::pair<ExperimentId, std::string>>& experiment_names() {
    static const std::vector<std::pair<ExperimentId, std::string>> names{
        {ExperimentId::ou_bound, "ou-bound"},
        {ExperimentId::ou_analytic, "ou-analytic"},
        {ExperimentId::duffing_train, "duffing-train"},
        {ExperimentId::duffing_validate, "duffing-validate"},
        {ExperimentId::duffing_longhorizon, "duffing-longhorizon"},
        {ExperimentId::semigroup_counterexample, "semigroup-counterexample"}};
    return names;
}

inline std::string to_string(ExperimentId id) {
    for (const auto& [k, name] : experiment_names())
        if (k == id) return name;
    throw InputError("unknown experiment id");
}

inline ExperimentId parse_experiment(const std::string& name) {
    for (const auto& [k, n] : experiment_names())
        if (n == name) return k;
    throw InputError("unknown experiment '" + name + "'");
}

struct OUBoundConfig {
    double alpha = 1.0;
    double beta = 2.0;
    double lag = 0.05;
    double dt = 0.01;
    std::string propagation = "euler-maruyama";  ///< or "exact"
    double domain_half_width = 1.5;
    std::vector<double> bandwidths{0.05, 0.1, 0.5};
    double delta = 0.1;
    std::int64_t trials = 50;
    std::int64_t mercer_order = 30;
    std::int64_t m_min = 20;
    std::int64_t m_max = 50000;
    std::int64_t m_points = 12;
    std::int64_t m_ref = 1000000;
    std::int64_t ref_collections = 10;
};

struct OUAnalyticConfig {
    double lag = 0.05;
    std::vector<double> bandwidths{0.5};
    std::vector<double> sizes{250, 500, 1000, 2000, 5000};
    std::int64_t seeds = 5;
    std::vector<double> centers{-1.0, -0.5, 0.0, 0.5, 1.0};
    double grid_half_width = 1.0;
    std::int64_t grid_points = 41;
    double cutoff = 1e-10;
    std::int64_t full_rank_max = 1000;
};

struct DuffingConfig {
    double alpha = -1.0;
    double beta = 1.0;
    std::int64_t samples = 10000;
    double lag = 0.025;
    double dt = 0.005;
    double domain_half_width = 1.5;
    std::vector<double> bandwidths{0.5, 1.0, 1.5};
    std::vector<double> features{100, 200, 500};
    std::vector<double> gammas{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
    std::vector<double> controls{0.0, 1.0};
    std::string spectral_convention = "inverse-bandwidth";  ///< or "match-kernel"
    std::int64_t validation_trajectories = 100;
    std::int64_t validation_steps = 20;
    std::int64_t long_trajectories = 50;
    std::int64_t long_steps = 500;
    std::int64_t project_every = 25;
    std::int64_t sample_trajectories = 3;
    double chosen_bandwidth = 1.0;
    std::int64_t chosen_features = 500;
    double chosen_gamma = 1e-5;
    std::string model_path;  ///< empty: train the chosen cell in-process
};

struct CounterexampleConfig {
    std::vector<double> times{0, 0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5};
    double tolerance = 1e-12;
    std::int64_t max_depth = 30;
};

struct ExperimentConfig {
    ExperimentId id = ExperimentId::ou_bound;
    std::uint64_t seed = 20240101;
    std::string output_dir = "out";
    std::string format = "csv";
    std::int64_t threads = 1;
    OUBoundConfig ou;
    OUAnalyticConfig ou_analytic;
    DuffingConfig duffing;
    CounterexampleConfig counterexample;
};

/// Value settings that differ from the published experiment, keyed by canonical name.
inline const std::map<std::string, std::string>& published_settings() {
    static const std::map<std::string, std::string> values{{"ou.m_ref", "10000000"}};
    return values;
}

namespace detail {

using FieldRef = std::variant<double*, std::int64_t*, std::uint64_t*, std::string*, std::vector<double>*>;

/// Calls f(section, key, ref) for every tunable field in canonical order.
/// Run-level keys (id, output directory, format, threads) are not part of the
/// canonical record so that they do not perturb the hash.
template <typename F>
void visit_fields(ExperimentConfig& c, F&& f) {
    f("run", "seed", FieldRef{&c.seed});

    auto& o = c.ou;
    f("ou", "alpha", FieldRef{&o.alpha});
    f("ou", "beta", FieldRef{&o.beta});
    f("ou", "lag", FieldRef{&o.lag});
    f("ou", "dt", FieldRef{&o.dt});
    f("ou", "propagation", FieldRef{&o.propagation});
    f("ou", "domain_half_width", FieldRef{&o.domain_half_width});
    f("ou", "bandwidths", FieldRef{&o.bandwidths});
    f("ou", "delta", FieldRef{&o.delta});
    f("ou", "trials", FieldRef{&o.trials});
    f("ou", "mercer_order", FieldRef{&o.mercer_order});
    f("ou", "m_min", FieldRef{&o.m_min});
    f("ou", "m_max", FieldRef{&o.m_max});
    f("ou", "m_points", FieldRef{&o.m_points});
    f("ou", "m_ref", FieldRef{&o.m_ref});
    f("ou", "ref_collections", FieldRef{&o.ref_collections});

    auto& a = c.ou_analytic;
    f("ou_analytic", "lag", FieldRef{&a.lag});
    f("ou_analytic", "bandwidths", FieldRef{&a.bandwidths});
    f("ou_analytic", "sizes", FieldRef{&a.sizes});
    f("ou_analytic", "seeds", FieldRef{&a.seeds});
    f("ou_analytic", "centers", FieldRef{&a.centers});
    f("ou_analytic", "grid_half_width", FieldRef{&a.grid_half_width});
    f("ou_analytic", "grid_points", FieldRef{&a.grid_points});
    f("ou_analytic", "cutoff", FieldRef{&a.cutoff});
    f("ou_analytic", "full_rank_max", FieldRef{&a.full_rank_max});

    auto& d = c.duffing;
    f("duffing", "alpha", FieldRef{&d.alpha});
    f("duffing", "beta", FieldRef{&d.beta});
    f("duffing", "samples", FieldRef{&d.samples});
    f("duffing", "lag", FieldRef{&d.lag});
    f("duffing", "dt", FieldRef{&d.dt});
    f("duffing", "domain_half_width", FieldRef{&d.domain_half_width});
    f("duffing", "bandwidths", FieldRef{&d.bandwidths});
    f("duffing", "features", FieldRef{&d.features});
    f("duffing", "gammas", FieldRef{&d.gammas});
    f("duffing", "controls", FieldRef{&d.controls});
    f("duffing", "spectral_convention", FieldRef{&d.spectral_convention});
    f("duffing", "validation_trajectories", FieldRef{&d.validation_trajectories});
    f("duffing", "validation_steps", FieldRef{&d.validation_steps});
    f("duffing", "long_trajectories", FieldRef{&d.long_trajectories});
    f("duffing", "long_steps", FieldRef{&d.long_steps});
    f("duffing", "project_every", FieldRef{&d.project_every});
    f("duffing", "sample_trajectories", FieldRef{&d.sample_trajectories});
    f("duffing", "chosen_bandwidth", FieldRef{&d.chosen_bandwidth});
    f("duffing", "chosen_features", FieldRef{&d.chosen_features});
    f("duffing", "chosen_gamma", FieldRef{&d.chosen_gamma});
    f("duffing", "model_path", FieldRef{&d.model_path});

    auto& q = c.counterexample;
    f("counterexample", "times", FieldRef{&q.times});
    f("counterexample", "tolerance", FieldRef{&q.tolerance});
    f("counterexample", "max_depth", FieldRef{&q.max_depth});
}

inline std::string format_value(const FieldRef& ref) {
    return std::visit(
        [](auto* p) -> std::string {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, double>) {
                return koopcert::detail::format_double(*p);
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
                std::string out;
                for (std::size_t i = 0; i < p->size(); ++i) {
                    if (i) out += ",";
                    out += koopcert::detail::format_double((*p)[i]);
                }
                return out;
            } else if constexpr (std::is_same_v<T, std::string>) {
                return *p;
            } else {
                return std::to_string(*p);
            }
        },
        ref);
}

inline double parse_double(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw InputError("config key '" + key + "': not a number: '" + text + "'");
    }
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline void assign_value(const std::string& key, const FieldRef& ref, const std::string& raw) {
    const std::string text = trim(raw);
    std::visit(
        [&](auto* p) {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, double>) {
                *p = parse_double(key, text);
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
                p->clear();
                std::stringstream ss(text);
                std::string item;
                while (std::getline(ss, item, ',')) p->push_back(parse_double(key, trim(item)));
                if (p->empty()) throw InputError("config key '" + key + "': empty list");
            } else if constexpr (std::is_same_v<T, std::string>) {
                *p = text;
            } else {
                const double v = parse_double(key, text);
                if (v < 0.0 && std::is_unsigned_v<T>) throw InputError("config key '" + key + "': must be >= 0");
                if (v != std::floor(v) || std::abs(v) > 9.007199254740992e15)
                    throw InputError("config key '" + key + "': not an integer: '" + text + "'");
                *p = static_cast<T>(v);
            }
        },
        ref);
}

}  // namespace detail

/// Canonical `section.key = value` listing in fixed order.
[[nodiscard]] inline std::string canonical_dump(ExperimentConfig config) {
    std::string out;
    detail::visit_fields(config, [&](const char* section, const char* key, const detail::FieldRef& ref) {
        out += std::string(section) + "." + key + " = " + detail::format_value(ref) + "\n";
    });
    return out;
}

/// 64-bit FNV-1a of the canonical dump, as 16 hex digits.
[[nodiscard]] inline std::string config_hash(const ExperimentConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : canonical_dump(config)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Keys whose value differs from the published experiment, as "key=value (published p)".
[[nodiscard]] inline std::vector<std::string> config_deviations(ExperimentConfig config) {
    std::vector<std::string> out;
    const auto& published = published_settings();
    const ExperimentConfig defaults;
    ExperimentConfig base = defaults;
    std::map<std::string, std::string> default_values;
    detail::visit_fields(base, [&](const char* s, const char* k, const detail::FieldRef& ref) {
        default_values[std::string(s) + "." + k] = detail::format_value(ref);
    });
    detail::visit_fields(config, [&](const char* s, const char* k, const detail::FieldRef& ref) {
        const std::string name = std::string(s) + "." + k;
        if (name == "run.seed") return;
        const std::string value = detail::format_value(ref);
        const auto it = published.find(name);
        const std::string reference = it != published.end() ? it->second : default_values[name];
        if (value != reference) out.push_back(name + "=" + value + " (published " + reference + ")");
    });
    return out;
}

/// Applies `section.key = value` overrides from an INI file. Unknown keys are rejected.
inline void apply_ini(ExperimentConfig& config, std::istream& in, const std::string& origin = "<stream>") {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw InputError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    std::map<std::string, detail::FieldRef> fields;
    detail::visit_fields(config, [&](const char* s, const char* k, const detail::FieldRef& ref) {
        fields.emplace(std::string(s) + "." + k, ref);
    });
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw InputError(origin + ": key '" + section + "' outside a section");
        for (const auto& [key, value] : body) {
            const std::string name = section + "." + key;
            if (section == "run" && key == "threads") {
                detail::assign_value(name, detail::FieldRef{&config.threads}, value.data());
                continue;
            }
            if (section == "run" && key == "output") {
                config.output_dir = detail::trim(value.data());
                continue;
            }
            if (section == "run" && key == "format") {
                config.format = detail::trim(value.data());
                continue;
            }
            const auto it = fields.find(name);
            if (it == fields.end()) throw InputError(origin + ": unknown config key '" + name + "'");
            detail::assign_value(name, it->second, value.data());
        }
    }
}

inline void load_config_file(ExperimentConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    apply_ini(config, in, path);
}

/// Range checks shared by all experiments.
inline void validate(const ExperimentConfig& c) {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw InputError("invalid config: " + what);
    };
    require(c.threads >= 1, "run.threads must be >= 1");
    require(c.format == "csv" || c.format == "json", "run.format must be csv or json");
    const auto& o = c.ou;
    require(o.alpha > 0 && o.beta > 0, "ou.alpha and ou.beta must be positive");
    require(o.lag >= 0, "ou.lag must be non-negative");
    require(o.dt > 0, "ou.dt must be positive");
    require(o.propagation == "euler-maruyama" || o.propagation == "exact",
            "ou.propagation must be euler-maruyama or exact");
    require(o.delta > 0 && o.delta < 1, "ou.delta must lie in (0, 1)");
    require(o.trials >= 1 && o.mercer_order >= 1, "ou.trials and ou.mercer_order must be >= 1");
    require(o.m_min >= 1 && o.m_max >= o.m_min && o.m_points >= 1, "ou m-grid is empty");
    require(o.m_ref >= 1 && o.ref_collections >= 1, "ou reference sizes must be >= 1");
    for (double s : o.bandwidths) require(s > 0, "ou.bandwidths must be positive");
    const auto& a = c.ou_analytic;
    require(a.lag >= 0, "ou_analytic.lag must be non-negative");
    require(a.seeds >= 1 && a.grid_points >= 2, "ou_analytic.seeds >= 1 and grid_points >= 2");
    for (double m : a.sizes) require(m >= 1 && m == std::floor(m), "ou_analytic.sizes must be positive integers");
    const auto& d = c.duffing;
    require(d.samples >= 1 && d.lag > 0 && d.dt > 0, "duffing samples, lag and dt must be positive");
    require(d.spectral_convention == "inverse-bandwidth" || d.spectral_convention == "match-kernel",
            "duffing.spectral_convention must be inverse-bandwidth or match-kernel");
    for (double p : d.features) require(p >= 1 && p == std::floor(p), "duffing.features must be positive integers");
    for (double g : d.gammas) require(g > 0, "duffing.gammas must be positive");
    require(d.controls.size() == 2 && d.controls[0] == 0.0 && d.controls[1] != 0.0,
            "duffing.controls must be {0, gamma_1} with gamma_1 != 0");
    require(d.project_every >= 0, "duffing.project_every must be >= 0");
    require(!c.counterexample.times.empty() && c.counterexample.tolerance > 0, "counterexample grid/tolerance");
}

}  // namespace koopcert::experiments

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "koopcert/experiments/config.hpp"
#include "koopcert/experiments/table.hpp"

namespace koopcert::experiments {

/// Stream id for (experiment tag, outer index, inner index).
inline std::uint64_t stream_id(std::uint64_t tag, std::uint64_t a, std::uint64_t b = 0) {
    return (tag << 48) ^ (a << 24) ^ b;
}

inline ResultTable start_table(const std::string& name, const ExperimentConfig& config,
                               std::vector<std::string> columns) {
    ResultTable t;
    t.name = name;
    t.columns = std::move(columns);
    t.provenance["config_hash"] = config_hash(config);
    t.provenance["seed"] = std::to_string(config.seed);
    t.provenance["version"] = kVersion;
    t.provenance["experiment"] = to_string(config.id);
    std::string dev;
    for (const auto& d : config_deviations(config)) dev += (dev.empty() ? "" : "; ") + d;
    t.provenance["deviations"] = dev.empty() ? "none" : dev;
    return t;
}

/// `points` log-spaced integers from lo to hi inclusive (rounded, deduplicated).
inline std::vector<std::int64_t> log_grid(std::int64_t lo, std::int64_t hi, std::int64_t points) {
    std::vector<std::int64_t> out;
    if (points == 1) return {lo};
    const double a = std::log(static_cast<double>(lo));
    const double b = std::log(static_cast<double>(hi));
    for (std::int64_t i = 0; i < points; ++i) {
        const double v = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
        const auto m = static_cast<std::int64_t>(std::llround(v));
        if (out.empty() || m != out.back()) out.push_back(m);
    }
    out.back() = hi;
    out.front() = lo;
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace koopcert::experiments

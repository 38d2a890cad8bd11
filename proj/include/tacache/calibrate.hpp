#pragma once

// Offline calibration: aggregate per-sample (k_n, d_n) over a calibration set
// into MI/DI indicator tables, and persist them together with the skip
// schedule as a bundle file.

#include "tacache/core.hpp"
#include "tacache/csv.hpp"
#include "tacache/field.hpp"
#include "tacache/indicators.hpp"
#include "tacache/povd.hpp"
#include "tacache/solver.hpp"
#include "tacache/ssc.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace tacache {

inline constexpr const char* bundle_format_version = "tacache-bundle/1";
inline constexpr const char* tool_name = "tacache";
inline constexpr const char* tool_version = "0.1.0";

/// Malformed bundle file. `field()` names the offending entry.
class BundleParseError : public std::runtime_error {
public:
    BundleParseError(std::string field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Arithmetic mean of k_n and d_n across full-step runs, one run per condition.
///
/// The last step has no look-ahead velocity; its entries repeat step N-2.
/// A one-step grid has no consecutive velocity pair at all and yields zeros.
inline IndicatorTable calibrate(const VelocityField& field, const TimeGrid& grid,
                                const std::vector<Condition>& conditions) {
    if (conditions.empty()) throw InvalidArgument("calibrate: empty condition list");
    const int N = grid.steps();
    const auto n_pairs = static_cast<std::size_t>(N - 1);

    std::vector<std::vector<double>> k_samples(n_pairs), d_samples(n_pairs);
    for (const auto& c : conditions) {
        const auto rec = sample_full(field, grid, initial_noise(c, field.dimension()), c);
        const auto steps = decompose_trajectory(rec);
        for (std::size_t n = 0; n < n_pairs; ++n) {
            k_samples[n].push_back(steps[n].k);
            d_samples[n].push_back(steps[n].d);
        }
    }

    const double count = static_cast<double>(conditions.size());
    auto mean_std = [&](const std::vector<double>& xs) {
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= count;
        double ss = 0.0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        const double sd = xs.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
        return std::pair{mean, sd};
    };

    IndicatorTable t;
    t.sample_count = conditions.size();
    const auto total = static_cast<std::size_t>(N);
    t.k_tilde.assign(total, 0.0);
    t.d_tilde.assign(total, 0.0);
    t.k_std.assign(total, 0.0);
    t.d_std.assign(total, 0.0);
    for (std::size_t n = 0; n < n_pairs; ++n) {
        std::tie(t.k_tilde[n], t.k_std[n]) = mean_std(k_samples[n]);
        std::tie(t.d_tilde[n], t.d_std[n]) = mean_std(d_samples[n]);
    }
    if (N >= 2) {
        t.k_tilde[total - 1] = t.k_tilde[total - 2];
        t.d_tilde[total - 1] = t.d_tilde[total - 2];
        t.k_std[total - 1] = t.k_std[total - 2];
        t.d_std[total - 1] = t.d_std[total - 2];
    }
    return t;
}

/// The offline artifact: indicators, schedule, thresholds, provenance.
struct ScheduleBundle {
    TimeGrid grid;
    IndicatorTable indicators;
    std::vector<int> schedule;
    double tau_k = 0.0;
    double tau_d = 0.0;
    int h_max = default_h_max;
    std::string field_digest;
    std::vector<std::uint64_t> seeds;
    std::string created_by;

    int steps() const noexcept { return grid.steps(); }

    friend bool operator==(const ScheduleBundle&, const ScheduleBundle&) = default;
};

/// Calibrates, schedules, and packages the result.
inline ScheduleBundle make_bundle(const VelocityField& field, const TimeGrid& grid,
                                  const std::vector<Condition>& conditions, double tau_k, double tau_d, int h_max) {
    ScheduleBundle b;
    b.grid = grid;
    b.indicators = calibrate(field, grid, conditions);
    b.schedule = build_schedule(b.indicators, grid, tau_k, tau_d, h_max);
    b.tau_k = tau_k;
    b.tau_d = tau_d;
    b.h_max = h_max;
    b.field_digest = field_digest(field.spec());
    for (const auto& c : conditions) b.seeds.push_back(c.seed);
    b.created_by = std::string(tool_name) + " " + tool_version;
    return b;
}

/// True when re-running the step calculator on the stored indicators and
/// thresholds reproduces the stored schedule.
inline bool schedule_matches_indicators(const ScheduleBundle& b) {
    return build_schedule(b.indicators, b.grid, b.tau_k, b.tau_d, b.h_max) == b.schedule;
}

namespace detail {

inline void validate_bundle(const ScheduleBundle& b) {
    const auto N = static_cast<std::size_t>(b.grid.steps());
    auto len = [&](const std::vector<double>& v, const char* name) {
        if (v.size() != N) {
            throw BundleParseError(name, "length mismatch (expected " + std::to_string(N) + ", got " +
                                             std::to_string(v.size()) + ")");
        }
    };
    len(b.indicators.k_tilde, "k_tilde");
    len(b.indicators.d_tilde, "d_tilde");
    len(b.indicators.k_std, "k_std");
    len(b.indicators.d_std, "d_std");
    if (b.schedule.size() != N) throw BundleParseError("h", "length mismatch");
    if (b.h_max < 1) throw BundleParseError("h_max", "must be >= 1");
    if (!(b.tau_k >= 0.0)) throw BundleParseError("tau_k", "must be non-negative");
    if (!(b.tau_d >= 0.0)) throw BundleParseError("tau_d", "must be non-negative");
    for (std::size_t n = 0; n < N; ++n) {
        const int cap = std::min(b.h_max, static_cast<int>(N - n));
        if (b.schedule[n] < 1 || b.schedule[n] > cap) {
            throw BundleParseError("h", "schedule entry out of range at n=" + std::to_string(n));
        }
        if (!(b.indicators.d_tilde[n] >= 0.0)) throw BundleParseError("d_tilde", "negative entry");
    }
}

} // namespace detail

inline nlohmann::ordered_json bundle_to_json(const ScheduleBundle& b) {
    detail::validate_bundle(b);
    nlohmann::ordered_json j;
    j["format_version"] = bundle_format_version;
    j["n_steps"] = b.grid.steps();
    j["times"] = b.grid.times();
    j["k_tilde"] = b.indicators.k_tilde;
    j["d_tilde"] = b.indicators.d_tilde;
    j["k_std"] = b.indicators.k_std;
    j["d_std"] = b.indicators.d_std;
    j["h"] = b.schedule;
    j["tau_k"] = b.tau_k;
    j["tau_d"] = b.tau_d;
    j["h_max"] = b.h_max;
    j["field_digest"] = b.field_digest;
    j["seeds"] = b.seeds;
    j["created_by"] = b.created_by;
    return j;
}

inline ScheduleBundle bundle_from_json(const nlohmann::ordered_json& j) {
    auto get = [&](const char* key) -> const nlohmann::ordered_json& {
        if (!j.is_object() || !j.contains(key)) throw BundleParseError(key, "missing field");
        return j.at(key);
    };
    try {
        const auto version = get("format_version").get<std::string>();
        if (version != bundle_format_version) {
            throw BundleParseError("format_version", "unsupported schema version '" + version + "'");
        }
        ScheduleBundle b;
        const int n_steps = get("n_steps").get<int>();
        if (n_steps < 1) throw BundleParseError("n_steps", "must be >= 1");
        auto times = get("times").get<std::vector<double>>();
        if (times.size() != static_cast<std::size_t>(n_steps) + 1) {
            throw BundleParseError("times", "length mismatch (expected n_steps + 1)");
        }
        try {
            b.grid = TimeGrid(std::move(times));
        } catch (const InvalidArgument& e) {
            throw BundleParseError("times", e.what());
        }
        b.indicators.k_tilde = get("k_tilde").get<std::vector<double>>();
        b.indicators.d_tilde = get("d_tilde").get<std::vector<double>>();
        b.indicators.k_std = get("k_std").get<std::vector<double>>();
        b.indicators.d_std = get("d_std").get<std::vector<double>>();
        b.schedule = get("h").get<std::vector<int>>();
        b.tau_k = get("tau_k").get<double>();
        b.tau_d = get("tau_d").get<double>();
        b.h_max = get("h_max").get<int>();
        b.field_digest = get("field_digest").get<std::string>();
        b.seeds = get("seeds").get<std::vector<std::uint64_t>>();
        b.created_by = get("created_by").get<std::string>();
        b.indicators.sample_count = b.seeds.size();
        detail::validate_bundle(b);
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw BundleParseError("bundle", std::string("malformed value: ") + e.what());
    }
}

inline void write_bundle(const ScheduleBundle& b, const std::string& path) {
    const auto text = bundle_to_json(b).dump(2);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_bundle: cannot open '" + path + "' for writing");
    os << text << '\n';
    if (!os) throw std::runtime_error("write_bundle: write to '" + path + "' failed");
}

inline ScheduleBundle read_bundle(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_bundle: cannot open '" + path + "'");
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw BundleParseError("bundle", std::string("not valid JSON: ") + e.what());
    }
    return bundle_from_json(j);
}

/// MI/DI curve rows: n, t_n, k_tilde, d_tilde, k_std, d_std.
inline void write_indicator_csv(std::ostream& os, const ScheduleBundle& b) {
    CsvWriter w(os);
    w << "n" << "t" << "k_tilde" << "d_tilde" << "k_std" << "d_std";
    w.end_row();
    const auto& ind = b.indicators;
    for (int n = 0; n < b.steps(); ++n) {
        const auto i = static_cast<std::size_t>(n);
        w << n << b.grid.time(n) << ind.k_tilde[i] << ind.d_tilde[i] << ind.k_std[i] << ind.d_std[i];
        w.end_row();
    }
}

} // namespace tacache

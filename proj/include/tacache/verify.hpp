#pragma once

// Randomized property suites backing `tacache verify`.

#include "tacache/bound.hpp"
#include "tacache/calibrate.hpp"
#include "tacache/field.hpp"
#include "tacache/povd.hpp"
#include "tacache/solver.hpp"
#include "tacache/ssc.hpp"
#include "tacache/tasu.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace tacache {

struct VerifyReport {
    std::string suite;
    bool passed = true;
    std::uint64_t checks = 0;
    std::uint64_t failures = 0;
    std::uint64_t first_failing_draw = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, double>> metrics;

    void fail(std::uint64_t draw) {
        if (passed) first_failing_draw = draw;
        passed = false;
        ++failures;
    }

    std::string describe() const {
        std::ostringstream os;
        os << suite << ": " << (passed ? "PASS" : "FAIL") << " (" << checks << " checks";
        if (!passed) os << ", " << failures << " failures, first failing draw " << first_failing_draw << " of seed " << seed;
        os << ")";
        for (const auto& [k, v] : metrics) os << "\n  " << k << " = " << format_real(v);
        return os.str();
    }
};

/// Orthogonality and reconstruction of the decomposition on random inputs,
/// plus the all-zero case on a constant field.
inline VerifyReport verify_povd(std::uint64_t draws, std::uint64_t seed) {
    VerifyReport r;
    r.suite = "povd";
    r.seed = seed;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dim_dist(2, 64);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst_orth = 0.0, worst_recon = 0.0;
    for (std::uint64_t i = 0; i < draws; ++i) {
        const int dim = dim_dist(rng);
        Vector v(dim), a(dim);
        for (int j = 0; j < dim; ++j) {
            v[j] = normal(rng);
            a[j] = normal(rng);
        }
        v *= std::exp(2.0 * normal(rng));
        a *= std::exp(2.0 * normal(rng));
        const double dt = 1.0 - unit(rng);
        const auto s = decompose(v, a, dt);
        const double denom_o = s.r_perp.norm() * v.norm();
        const double orth = denom_o > 0.0 ? std::abs(s.r_perp.dot(v)) / denom_o : 0.0;
        const double recon = (s.k * v + s.r_perp - a).norm() / a.norm();
        worst_orth = std::max(worst_orth, orth);
        worst_recon = std::max(worst_recon, recon);
        ++r.checks;
        if (!(orth <= 1e-10 && recon <= 1e-10 && s.d >= 0.0)) r.fail(i);
    }

    FieldSpec spec;
    spec.kind = FieldKind::constant;
    spec.dimension = 3;
    spec.target = Vector::Constant(3, 0.7);
    const VelocityField field(spec);
    const Condition c{seed, {}};
    const auto rec = sample_full(field, make_uniform_grid(50), initial_noise(c, 3), c);
    double worst_const = 0.0;
    for (const auto& s : decompose_trajectory(rec)) worst_const = std::max({worst_const, std::abs(s.k), s.d});
    ++r.checks;
    if (worst_const != 0.0) r.fail(draws);

    r.metrics = {{"max_orthogonality_ratio", worst_orth},
                 {"max_reconstruction_rel_err", worst_recon},
                 {"constant_field_max_abs_k_or_d", worst_const}};
    return r;
}

/// Exhaustive scan used as the reference for the step calculator: every
/// candidate h is tested with its own freshly summed prefix.
inline int ssc_reference_scan(const std::vector<double>& z, int n, double tau, int h_max) {
    const int N = static_cast<int>(z.size());
    const int cap = std::min(h_max, N - n);
    int best = 1;
    for (int h = 1; h <= cap; ++h) {
        double sum = 0.0;
        for (int j = 0; j < h; ++j) sum += z[static_cast<std::size_t>(n + j)];
        if (h == 1 || sum <= tau) best = std::max(best, h);
    }
    return best;
}

inline VerifyReport verify_ssc(std::uint64_t draws, std::uint64_t seed) {
    VerifyReport r;
    r.suite = "ssc";
    r.seed = seed;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> len_dist(1, 64), hmax_dist(1, 16);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uint64_t fallbacks = 0, end_caps = 0;
    for (std::uint64_t i = 0; i < draws; ++i) {
        const int N = len_dist(rng);
        std::vector<double> z(static_cast<std::size_t>(N));
        const double zero_prob = unit(rng) * 0.3;
        for (auto& x : z) x = unit(rng) < zero_prob ? 0.0 : unit(rng) * unit(rng);
        const int n = std::uniform_int_distribution<int>(0, N - 1)(rng);
        const double tau = unit(rng) * 1.5;
        const int h_max = hmax_dist(rng);
        const int got = ssc_single(z, n, tau, h_max);
        const int want = ssc_reference_scan(z, n, tau, h_max);
        if (z[static_cast<std::size_t>(n)] > tau) ++fallbacks;
        if (want == N - n && N - n < h_max) ++end_caps;
        ++r.checks;
        if (got != want || n + got > N) r.fail(i);
    }
    r.metrics = {{"fallback_cases", static_cast<double>(fallbacks)}, {"end_cap_cases", static_cast<double>(end_caps)}};
    return r;
}

inline VerifyReport verify_bound(std::uint64_t draws, std::uint64_t seed,
                                 const std::function<void(std::uint64_t, const BoundTerms&)>& on_draw = {}) {
    VerifyReport r;
    r.suite = "bound";
    r.seed = seed;
    const auto res = bound_sweep(draws, seed, on_draw);
    r.checks = res.draws;
    if (!res.passed()) {
        r.passed = false;
        r.failures = res.violations;
        r.first_failing_draw = res.worst_draw;
    }
    if (res.max_split_rel_err > 1e-10 || res.max_q_identity_rel_err > 1e-12) r.passed = false;
    r.metrics = {{"min_slack", res.min_slack},
                 {"worst_draw", static_cast<double>(res.worst_draw)},
                 {"max_parallel_orthogonal_split_rel_err", res.max_split_rel_err},
                 {"max_q_identity_rel_err", res.max_q_identity_rel_err}};
    return r;
}

/// Cached sampling reproduces the full-step run on the constant field and
/// tracks the slow magnitude-decay field (rate 0.02) to 1e-6.
inline VerifyReport verify_exactness(std::uint64_t seed) {
    VerifyReport r;
    r.suite = "exactness";
    r.seed = seed;
    auto run = [&](const FieldSpec& spec, int steps, double tau_k, double tau_d) {
        const VelocityField field(spec);
        const auto grid = make_uniform_grid(steps);
        std::vector<Condition> cal;
        for (std::uint64_t s = 0; s < 5; ++s) cal.push_back({seed + s, {}});
        const auto bundle = make_bundle(field, grid, cal, tau_k, tau_d, default_h_max);
        const Condition c{seed + 1000, {}};
        const Vector x0 = initial_noise(c, spec.dimension);
        const auto full = sample_full(field, grid, x0, c);
        const auto cached = sample_cached(field, bundle, x0, c);
        const double drift = (cached.states.back() - full.states.back()).norm() / full.states.back().norm();
        return std::pair{drift, static_cast<double>(full.nfe) / static_cast<double>(cached.nfe)};
    };

    FieldSpec constant;
    constant.kind = FieldKind::constant;
    constant.dimension = 4;
    constant.target = (Vector(4) << 1.0, -1.0, 0.5, 2.0).finished();
    const auto [c_drift, c_speed] = run(constant, 50, preset_aggressive.tau_k, preset_aggressive.tau_d);
    ++r.checks;
    if (!(c_drift <= 1e-12 && c_speed >= 4.0)) r.fail(0);

    FieldSpec decay;
    decay.kind = FieldKind::magnitude_decay;
    decay.dimension = 4;
    decay.target = (Vector(4) << 1.0, -1.0, 0.5, 2.0).finished();
    decay.rate = 0.02;
    const auto [d_drift, d_speed] = run(decay, 100, preset_aggressive.tau_k, preset_aggressive.tau_d);
    ++r.checks;
    if (!(d_drift <= 1e-6 && d_speed > 3.0)) r.fail(1);

    r.metrics = {{"constant_terminal_rel_err", c_drift},
                 {"constant_nfe_speedup", c_speed},
                 {"decay_terminal_rel_drift", d_drift},
                 {"decay_nfe_speedup", d_speed}};
    return r;
}

} // namespace tacache

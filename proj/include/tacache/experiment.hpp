#pragma once

// End-to-end experiment: calibrate -> schedule -> sample full / cached /
// step-truncated from shared noise -> compare.

#include "tacache/calibrate.hpp"
#include "tacache/core.hpp"
#include "tacache/csv.hpp"
#include "tacache/diagnostics.hpp"
#include "tacache/field.hpp"
#include "tacache/solver.hpp"
#include "tacache/ssc.hpp"
#include "tacache/tasu.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace tacache {

struct ExperimentConfig {
    FieldSpec field;
    int steps = 50;
    std::vector<std::uint64_t> calibration_seeds;
    std::vector<std::uint64_t> evaluation_seeds;
    double tau_k = preset_aggressive.tau_k;
    double tau_d = preset_aggressive.tau_d;
    int h_max = default_h_max;
    CompensationToggles toggles;
    /// Spread of per-condition mixture log-weight offsets (0 = all conditions share one field).
    double condition_tilt = 0.0;
    std::string out_dir = "out";

    // Optional bench extensions.
    bool ablation = false;
    std::vector<double> sweep_tau_k;
    std::vector<double> sweep_tau_d;
    std::vector<int> calibration_sizes;

    void validate() const {
        field.validate();
        detail::require(steps >= 1, "config: steps must be >= 1");
        detail::require(!calibration_seeds.empty(), "config: calibration seed list is empty");
        detail::require(!evaluation_seeds.empty(), "config: evaluation seed list is empty");
        detail::require(tau_k >= 0.0 && tau_d >= 0.0, "config: thresholds must be non-negative");
        detail::require(h_max >= 1, "config: h_max must be >= 1");
        const std::set<std::uint64_t> cal(calibration_seeds.begin(), calibration_seeds.end());
        detail::require(cal.size() == calibration_seeds.size(), "config: duplicate calibration seed");
        const std::set<std::uint64_t> ev(evaluation_seeds.begin(), evaluation_seeds.end());
        detail::require(ev.size() == evaluation_seeds.size(), "config: duplicate evaluation seed");
        for (auto s : evaluation_seeds) {
            detail::require(!cal.contains(s), "config: seed " + std::to_string(s) +
                                                  " appears in both calibration and evaluation sets");
        }
        for (double t : sweep_tau_k) detail::require(t >= 0.0, "config: sweep thresholds must be non-negative");
        for (double t : sweep_tau_d) detail::require(t >= 0.0, "config: sweep thresholds must be non-negative");
        for (int s : calibration_sizes) {
            detail::require(s >= 1 && static_cast<std::size_t>(s) <= calibration_seeds.size(),
                            "config: calibration size exceeds calibration seed count");
        }
    }
};

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
};

inline MeanStderr mean_stderr(const std::vector<double>& xs) {
    MeanStderr r;
    if (xs.empty()) return r;
    for (double x : xs) r.mean += x;
    r.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - r.mean) * (x - r.mean);
        r.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
    }
    return r;
}

/// Full-step references for a fixed set of evaluation conditions, computed once
/// and shared across schedules and toggles.
class EvaluationSet {
public:
    EvaluationSet(const VelocityField& field, TimeGrid grid, const std::vector<Condition>& conditions)
        : field_(field), grid_(std::move(grid)), conditions_(conditions) {
        for (const auto& c : conditions_) {
            full_.push_back(sample_full(field_, grid_, initial_noise(c, field_.dimension()), c));
        }
    }

    const VelocityField& field() const noexcept { return field_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    const std::vector<Condition>& conditions() const noexcept { return conditions_; }
    const std::vector<TrajectoryRecord>& full() const noexcept { return full_; }

private:
    const VelocityField& field_;
    TimeGrid grid_;
    std::vector<Condition> conditions_;
    std::vector<TrajectoryRecord> full_;
};

struct SeedOutcome {
    std::uint64_t seed = 0;
    DriftReport report;
    std::uint64_t full_nfe = 0;
    std::uint64_t cached_nfe = 0;
    std::uint64_t truncated_nfe = 0;
    double truncated_final_drift = 0.0;
};

struct ExperimentSummary {
    std::vector<SeedOutcome> seeds;
    MeanStderr final_drift;
    MeanStderr truncated_drift;
    MeanStderr cached_velocity_drift;
    MeanStderr evaluated_velocity_drift;
    double skip_ratio = 0.0;
    std::uint64_t full_nfe = 0;
    std::uint64_t cached_nfe = 0;
    double speedup = 1.0;
    std::vector<double> state_drift_mean; // per step, across seeds
    std::vector<double> state_drift_stderr;
    std::vector<int> anchors;
    CosThetaStats cos_theta; // pooled over seeds
};

/// Terminal relative drift of a step-truncated run (uniform grid with
/// `n_steps` steps, same noise) against the full-step terminal state.
inline double truncation_drift(const VelocityField& field, const TrajectoryRecord& full, int n_steps,
                               const Condition& c) {
    const auto trunc = sample_full(field, make_uniform_grid(n_steps), full.states.front(), c);
    const double ref = full.states.back().norm();
    const double diff = (trunc.states.back() - full.states.back()).norm();
    return ref > 0.0 ? diff / ref : diff;
}

/// Runs the cached sampler for every evaluation condition and aggregates drift.
/// The step-truncation baseline runs at the cached sampler's NFE.
inline ExperimentSummary evaluate_bundle(const EvaluationSet& set, const ScheduleBundle& bundle,
                                         CompensationToggles toggles, bool with_truncation = true) {
    detail::require(bundle.grid == set.grid(), "evaluate_bundle: bundle grid differs from evaluation grid");
    const VelocityField& field = set.field();
    ExperimentSummary s;
    std::vector<double> finals, truncs, cached_v, eval_v;
    const std::size_t n_points = static_cast<std::size_t>(set.grid().steps()) + 1;
    std::vector<std::vector<double>> drift_by_step(n_points);

    for (std::size_t i = 0; i < set.conditions().size(); ++i) {
        const auto& c = set.conditions()[i];
        const auto& full = set.full()[i];
        SkipTrace trace;
        const auto before = field.evaluations();
        const auto cached = sample_cached(field, bundle, full.states.front(), c, toggles, &trace);
        if (field.evaluations() - before != cached.nfe) {
            throw std::logic_error("evaluate_bundle: oracle counter disagrees with reported nfe");
        }

        SeedOutcome o;
        o.seed = c.seed;
        o.report = compare_trajectories(full, cached, &trace);
        o.full_nfe = full.nfe;
        o.cached_nfe = cached.nfe;
        if (with_truncation) {
            o.truncated_nfe = cached.nfe;
            o.truncated_final_drift = truncation_drift(field, full, static_cast<int>(cached.nfe), c);
            truncs.push_back(o.truncated_final_drift);
        }
        finals.push_back(o.report.final_state_drift);
        if (o.report.cached_steps > 0) cached_v.push_back(o.report.cached_velocity_drift);
        if (o.report.evaluated_steps > 0) eval_v.push_back(o.report.evaluated_velocity_drift);
        for (std::size_t k = 0; k < n_points; ++k) drift_by_step[k].push_back(o.report.state_drift[k]);
        for (std::size_t k = 0; k < o.report.cos_theta.samples.size(); ++k) {
            s.cos_theta.samples.push_back(o.report.cos_theta.samples[k]);
            s.cos_theta.steps.push_back(o.report.cos_theta.steps[k]);
        }
        s.cos_theta.degenerate += o.report.cos_theta.degenerate;
        s.seeds.push_back(std::move(o));
    }
    finalize_cos_stats(s.cos_theta);

    s.final_drift = mean_stderr(finals);
    s.truncated_drift = mean_stderr(truncs);
    s.cached_velocity_drift = mean_stderr(cached_v);
    s.evaluated_velocity_drift = mean_stderr(eval_v);
    for (const auto& per_step : drift_by_step) {
        const auto ms = mean_stderr(per_step);
        s.state_drift_mean.push_back(ms.mean);
        s.state_drift_stderr.push_back(ms.stderr_);
    }
    if (!s.seeds.empty()) {
        s.full_nfe = s.seeds.front().full_nfe;
        s.cached_nfe = s.seeds.front().cached_nfe;
        s.anchors = s.seeds.front().report.anchors;
        s.skip_ratio = s.seeds.front().report.skip_ratio;
        s.speedup = count_speedup(s.full_nfe, s.cached_nfe);
    }
    return s;
}

inline std::vector<Condition> make_conditions(const std::vector<std::uint64_t>& seeds, const FieldSpec& spec,
                                              double tilt) {
    std::vector<Condition> out;
    out.reserve(seeds.size());
    for (auto s : seeds) out.push_back(make_condition(s, spec, tilt));
    return out;
}

/// Packages precomputed indicators with a schedule for the given thresholds.
inline ScheduleBundle bundle_from_indicators(const IndicatorTable& ind, const TimeGrid& grid, double tau_k,
                                             double tau_d, int h_max, const FieldSpec& spec,
                                             std::vector<std::uint64_t> seeds) {
    ScheduleBundle b;
    b.grid = grid;
    b.indicators = ind;
    b.schedule = build_schedule(ind, grid, tau_k, tau_d, h_max);
    b.tau_k = tau_k;
    b.tau_d = tau_d;
    b.h_max = h_max;
    b.field_digest = field_digest(spec);
    b.seeds = std::move(seeds);
    b.created_by = std::string(tool_name) + " " + tool_version;
    return b;
}

struct ExperimentResult {
    ScheduleBundle bundle;
    ExperimentSummary summary;
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const VelocityField field(cfg.field);
    const auto grid = make_uniform_grid(cfg.steps);
    ExperimentResult r;
    r.bundle = make_bundle(field, grid, make_conditions(cfg.calibration_seeds, cfg.field, cfg.condition_tilt),
                           cfg.tau_k, cfg.tau_d, cfg.h_max);
    const EvaluationSet set(field, grid, make_conditions(cfg.evaluation_seeds, cfg.field, cfg.condition_tilt));
    r.summary = evaluate_bundle(set, r.bundle, cfg.toggles);
    return r;
}

struct SweepRow {
    double tau_k = 0.0;
    double tau_d = 0.0;
    std::uint64_t cached_nfe = 0;
    double speedup = 1.0;
    double skip_ratio = 0.0;
    MeanStderr final_drift;
};

/// Threshold grid over one calibration; rows ordered tau_k-major.
inline std::vector<SweepRow> sweep_thresholds(const EvaluationSet& set, const ScheduleBundle& base,
                                              const std::vector<double>& taus_k, const std::vector<double>& taus_d,
                                              CompensationToggles toggles) {
    std::vector<SweepRow> rows;
    for (double tk : taus_k) {
        for (double td : taus_d) {
            auto b = base;
            b.tau_k = tk;
            b.tau_d = td;
            b.schedule = build_schedule(b.indicators, b.grid, tk, td, b.h_max);
            const auto s = evaluate_bundle(set, b, toggles, false);
            rows.push_back({tk, td, s.cached_nfe, s.speedup, s.skip_ratio, s.final_drift});
        }
    }
    return rows;
}

struct AblationRow {
    CompensationToggles toggles;
    ExperimentSummary summary;
};

inline std::string ablation_label(CompensationToggles t) {
    std::string s = "ssc";
    if (t.use_mi) s += "+mi";
    if (t.use_di) s += "+di";
    return s;
}

/// The four MI/DI toggle combinations on one schedule.
inline std::vector<AblationRow> run_ablation(const EvaluationSet& set, const ScheduleBundle& bundle) {
    std::vector<AblationRow> rows;
    for (CompensationToggles t : {CompensationToggles{false, false}, CompensationToggles{true, false},
                                  CompensationToggles{false, true}, CompensationToggles{true, true}}) {
        rows.push_back({t, evaluate_bundle(set, bundle, t, false)});
    }
    return rows;
}

// CSV writers --------------------------------------------------------------

/// seed, skip_ratio, final_drift, nfe, speedup
inline void write_seed_summary_csv(std::ostream& os, const ExperimentSummary& s) {
    CsvWriter w(os);
    w << "seed" << "skip_ratio" << "final_drift" << "nfe" << "speedup" << "truncated_final_drift"
      << "cached_vel_drift" << "evaluated_vel_drift";
    w.end_row();
    for (const auto& o : s.seeds) {
        w << o.seed << o.report.skip_ratio << o.report.final_state_drift << o.cached_nfe
          << count_speedup(o.full_nfe, o.cached_nfe) << o.truncated_final_drift << o.report.cached_velocity_drift
          << o.report.evaluated_velocity_drift;
        w.end_row();
    }
}

/// Mean drift profile across seeds: n, t_n, state_drift, state_drift_stderr, is_anchor.
inline void write_mean_drift_profile_csv(std::ostream& os, const TimeGrid& grid, const ExperimentSummary& s) {
    CsvWriter w(os);
    w << "n" << "t" << "state_drift" << "state_drift_stderr" << "is_anchor";
    w.end_row();
    std::set<int> anchors(s.anchors.begin(), s.anchors.end());
    for (int n = 0; n <= grid.steps(); ++n) {
        const auto i = static_cast<std::size_t>(n);
        w << n << grid.time(n) << s.state_drift_mean[i] << s.state_drift_stderr[i] << (anchors.contains(n) ? 1 : 0);
        w.end_row();
    }
}

/// seed, n, cos_theta
inline void write_cos_theta_csv(std::ostream& os, const ExperimentSummary& s) {
    CsvWriter w(os);
    w << "seed" << "n" << "cos_theta";
    w.end_row();
    for (const auto& o : s.seeds) {
        for (std::size_t k = 0; k < o.report.cos_theta.samples.size(); ++k) {
            w << o.seed << o.report.cos_theta.steps[k] << o.report.cos_theta.samples[k];
            w.end_row();
        }
    }
}

/// tau_k, tau_d, latency proxy (cached nfe), speedup, skip ratio, fidelity (terminal drift).
inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    CsvWriter w(os);
    w << "tau_k" << "tau_d" << "cached_nfe" << "speedup" << "skip_ratio" << "final_drift_mean" << "final_drift_stderr";
    w.end_row();
    for (const auto& r : rows) {
        w << r.tau_k << r.tau_d << r.cached_nfe << r.speedup << r.skip_ratio << r.final_drift.mean
          << r.final_drift.stderr_;
        w.end_row();
    }
}

inline void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
    CsvWriter w(os);
    w << "variant" << "use_mi" << "use_di" << "nfe" << "speedup" << "skip_ratio" << "final_drift_mean"
      << "final_drift_stderr" << "cached_vel_drift" << "evaluated_vel_drift";
    w.end_row();
    for (const auto& r : rows) {
        const auto& s = r.summary;
        w << ablation_label(r.toggles) << (r.toggles.use_mi ? 1 : 0) << (r.toggles.use_di ? 1 : 0) << s.cached_nfe
          << s.speedup << s.skip_ratio << s.final_drift.mean << s.final_drift.stderr_ << s.cached_velocity_drift.mean
          << s.evaluated_velocity_drift.mean;
        w.end_row();
    }
}

} // namespace tacache

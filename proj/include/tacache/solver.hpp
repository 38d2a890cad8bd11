#pragma once

// Time grids and the first-order Euler sampler.

#include "tacache/core.hpp"
#include "tacache/csv.hpp"
#include "tacache/field.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace tacache {

/// Strictly decreasing grid 1 = t_0 > t_1 > ... > t_N = 0.
class TimeGrid {
public:
    TimeGrid() = default;

    explicit TimeGrid(std::vector<double> times) : times_(std::move(times)) {
        detail::require(times_.size() >= 2, "TimeGrid: need at least two time points");
        detail::require(times_.front() == 1.0 && times_.back() == 0.0, "TimeGrid: endpoints must be exactly 1 and 0");
        for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
            detail::require(times_[i] > times_[i + 1], "TimeGrid: times must be strictly decreasing");
        }
    }

    int steps() const noexcept { return static_cast<int>(times_.size()) - 1; }
    double time(int n) const { return times_.at(static_cast<std::size_t>(n)); }
    /// Delta t_n = t_n - t_{n+1} > 0.
    double dt(int n) const { return times_.at(static_cast<std::size_t>(n)) - times_.at(static_cast<std::size_t>(n) + 1); }
    const std::vector<double>& times() const noexcept { return times_; }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    std::vector<double> times_;
};

/// t_n = 1 - n/N, computed as (N - n)/N so both endpoints are exact.
inline TimeGrid make_uniform_grid(int n_steps) {
    if (n_steps < 1) throw InvalidArgument("make_uniform_grid: n_steps must be >= 1");
    std::vector<double> t(static_cast<std::size_t>(n_steps) + 1);
    for (int n = 0; n <= n_steps; ++n) {
        t[static_cast<std::size_t>(n)] = static_cast<double>(n_steps - n) / static_cast<double>(n_steps);
    }
    return TimeGrid(std::move(t));
}

/// One sampling run: N+1 states, N velocities, and which velocities came from the oracle.
struct TrajectoryRecord {
    TimeGrid grid;
    std::vector<Vector> states;
    std::vector<Vector> velocities;
    std::vector<bool> evaluated;
    std::uint64_t nfe = 0;

    int steps() const noexcept { return grid.steps(); }
};

/// X_{t_{n+1}} = X_{t_n} - dt * v.
inline Vector euler_step(const Vector& state, const Vector& velocity, double dt) {
    detail::require_same_size(state, velocity, "euler_step");
    detail::require_finite(dt, "euler_step");
    detail::require_finite(state, "euler_step");
    detail::require_finite(velocity, "euler_step");
    if (!(dt > 0.0)) throw InvalidArgument("euler_step: dt must be positive");
    return state - dt * velocity;
}

/// Full-step reference sampler: one oracle call per step.
inline TrajectoryRecord sample_full(const VelocityField& field, const TimeGrid& grid, const Vector& x0,
                                    const Condition& c) {
    if (x0.size() != field.dimension()) throw InvalidArgument("sample_full: x0 dimension mismatch");
    const int n_steps = grid.steps();
    TrajectoryRecord rec;
    rec.grid = grid;
    rec.states.reserve(static_cast<std::size_t>(n_steps) + 1);
    rec.velocities.reserve(static_cast<std::size_t>(n_steps));
    rec.evaluated.assign(static_cast<std::size_t>(n_steps), true);
    rec.states.push_back(x0);
    for (int n = 0; n < n_steps; ++n) {
        rec.velocities.push_back(field.evaluate(rec.states.back(), grid.time(n), c));
        rec.states.push_back(euler_step(rec.states.back(), rec.velocities.back(), grid.dt(n)));
    }
    rec.nfe = static_cast<std::uint64_t>(n_steps);
    return rec;
}

/// Rows: n, t_n, evaluated, |X_{t_n}|, |v_n|. The final row (n = N) carries
/// the terminal state with empty flag and velocity cells.
inline void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec) {
    CsvWriter w(os);
    w << "n" << "t" << "evaluated" << "state_norm" << "velocity_norm";
    w.end_row();
    for (int n = 0; n < rec.steps(); ++n) {
        const auto i = static_cast<std::size_t>(n);
        w << n << rec.grid.time(n) << (rec.evaluated[i] ? 1 : 0) << rec.states[i].norm() << rec.velocities[i].norm();
        w.end_row();
    }
    const int last = rec.steps();
    w << last << rec.grid.time(last) << "" << rec.states.back().norm() << "";
    w.end_row();
}

} // namespace tacache

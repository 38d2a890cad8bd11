#pragma once

// Single-step substitution error of the skip update.
//
// Compares the update driven by cached scalars and a historical direction
// (k_tilde, d_tilde, u_hat) with the same update driven by the sample's true
// scalars and direction (k, d, u), both from the same velocity v:
//
//   |v_hat - v_star| / |v| <= sqrt(C^2 (k_tilde - k)^2 + (d_tilde - d)^2 + 2 d_tilde d (1 - cos theta))
//
// with C = dt exp(max(k_tilde, k) dt) and cos theta = <u_hat, u>.

#include "tacache/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <utility>

namespace tacache {

inline constexpr double orthogonality_tol = 1e-10;

namespace detail {

inline void require_orthogonal(const Vector& u, const Vector& v, const char* where) {
    require_same_size(u, v, where);
    if (std::abs(u.dot(v)) > orthogonality_tol * u.norm() * v.norm()) {
        throw InvalidArgument(std::string(where) + ": direction is not orthogonal to the velocity");
    }
}

} // namespace detail

/// exp(k dt) v + d |v| u with u a unit direction orthogonal to v.
inline Vector oracle_update(const Vector& v, double k, double d, const Vector& u_perp, double dt) {
    if (!(v.squaredNorm() > 0.0)) throw DegenerateVelocity("oracle_update: zero velocity");
    if (!(dt > 0.0)) throw InvalidArgument("oracle_update: dt must be positive");
    detail::require_orthogonal(u_perp, v, "oracle_update");
    return std::exp(k * dt) * v + (d * v.norm()) * u_perp;
}

struct BoundTerms {
    double c_n = 0.0;
    double mag_err = 0.0;      // |k_tilde - k|
    double strength_err = 0.0; // |d_tilde - d|
    double cos_theta = 1.0;
    double one_minus_cos = 0.0;
    double alignment = 0.0;    // 2 d_tilde d (1 - cos theta)
    double rhs = 0.0;
    double lhs = 0.0;

    double slack() const noexcept { return rhs - lhs; }
};

/// Parallel and orthogonal parts of v_hat - v_star.
struct ErrorSplit {
    Vector parallel;   // P = (exp(k_tilde dt) - exp(k dt)) v
    Vector orthogonal; // Q = |v| (d_tilde u_hat - d u)
};

inline ErrorSplit split_error(const Vector& v, double k, double d, const Vector& u, double k_t, double d_t,
                              const Vector& u_hat, double dt) {
    return {(std::exp(k_t * dt) - std::exp(k * dt)) * v, v.norm() * (d_t * u_hat - d * u)};
}

/// Evaluates both single-step updates and the three terms of the bound.
///
/// 1 - cos theta is taken as |u_hat - u|^2 / 2, which equals the cosine form
/// for unit vectors but keeps full relative precision when the two
/// directions nearly coincide.
inline BoundTerms bound_terms(const Vector& v, double k, double d, const Vector& u, double k_t, double d_t,
                              const Vector& u_hat, double dt) {
    if (!(d >= 0.0) || !(d_t >= 0.0)) throw InvalidArgument("bound_terms: strengths must be non-negative");
    detail::require_same_size(u, u_hat, "bound_terms");
    const Vector v_star = oracle_update(v, k, d, u, dt);
    const Vector v_hat = oracle_update(v, k_t, d_t, u_hat, dt);

    BoundTerms b;
    b.c_n = dt * std::exp(std::max(k_t, k) * dt);
    b.mag_err = std::abs(k_t - k);
    b.strength_err = std::abs(d_t - d);
    b.one_minus_cos = 0.5 * (u_hat - u).squaredNorm();
    b.cos_theta = std::clamp(1.0 - b.one_minus_cos, -1.0, 1.0);
    b.alignment = 2.0 * d_t * d * b.one_minus_cos;
    b.rhs = std::sqrt(b.c_n * b.c_n * b.mag_err * b.mag_err + b.strength_err * b.strength_err + b.alignment);
    b.lhs = (v_hat - v_star).norm() / v.norm();
    return b;
}

/// Unit vectors e1, e2 orthogonal to v and to each other, from Gaussian draws.
/// Draws whose residual falls below 1e-8 of the draw's norm are rejected.
template <class Rng>
std::pair<Vector, Vector> random_orthonormal_pair(const Vector& v, Rng& rng) {
    detail::require(v.size() >= 3, "random_orthonormal_pair: need dimension >= 3");
    std::normal_distribution<double> normal(0.0, 1.0);
    const Vector v_unit = v.normalized();
    auto draw = [&](const Vector* other) {
        for (;;) {
            Vector g(v.size());
            for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = normal(rng);
            const double gn = g.norm();
            Vector r = g;
            for (int pass = 0; pass < 2; ++pass) {
                r -= r.dot(v_unit) * v_unit;
                if (other) r -= r.dot(*other) * *other;
            }
            const double rn = r.norm();
            if (rn > 1e-8 * gn) return Vector(r / rn);
        }
    };
    Vector e1 = draw(nullptr);
    Vector e2 = draw(&e1);
    return {std::move(e1), std::move(e2)};
}

/// One random configuration of the bound's inputs.
struct BoundDraw {
    Vector v;
    double k = 0.0, k_t = 0.0, d = 0.0, d_t = 0.0, dt = 1.0;
    Vector u, u_hat;
};

/// Dimension in [2, 64]; k, k_tilde in [-5, 5]; d, d_tilde in [0, 2];
/// dt in (0, 1]; u_hat at a uniform angle from u inside the orthogonal
/// complement of v (in two dimensions that complement is a line, so u_hat = +-u).
template <class Rng>
BoundDraw random_bound_draw(Rng& rng) {
    std::uniform_int_distribution<int> dim_dist(2, 64);
    std::uniform_real_distribution<double> k_dist(-5.0, 5.0), d_dist(0.0, 2.0), unit(0.0, 1.0),
        angle(0.0, 3.141592653589793);
    std::normal_distribution<double> normal(0.0, 1.0);

    BoundDraw b;
    const int dim = dim_dist(rng);
    b.v.resize(dim);
    do {
        for (int i = 0; i < dim; ++i) b.v[i] = normal(rng);
    } while (b.v.norm() < 1e-6);
    b.v *= std::exp(normal(rng)); // vary the scale
    b.k = k_dist(rng);
    b.k_t = k_dist(rng);
    b.d = d_dist(rng);
    b.d_t = d_dist(rng);
    b.dt = 1.0 - unit(rng); // (0, 1]
    if (dim == 2) {
        b.u = Vector(2);
        b.u << -b.v[1], b.v[0];
        b.u.normalize();
        b.u_hat = unit(rng) < 0.5 ? Vector(b.u) : Vector(-b.u);
        return b;
    }
    auto [e1, e2] = random_orthonormal_pair(b.v, rng);
    const double theta = angle(rng);
    b.u = e1;
    b.u_hat = std::cos(theta) * e1 + std::sin(theta) * e2;
    b.u_hat.normalize();
    return b;
}

struct BoundSweepResult {
    std::uint64_t draws = 0;
    std::uint64_t violations = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    std::uint64_t worst_draw = 0;
    double max_split_rel_err = 0.0;      // | |v_hat - v_star|^2 - (|P|^2 + |Q|^2) | / |v_hat - v_star|^2
    double max_q_identity_rel_err = 0.0; // | |Q|^2 - |v|^2 [(dd)^2 + 2 d_t d (1 - cos)] | / |Q|^2
    bool passed() const noexcept { return violations == 0; }
};

/// Randomized check of the bound. `on_draw(id, terms)` sees every draw (for CSV audit).
inline BoundSweepResult bound_sweep(std::uint64_t draws, std::uint64_t seed,
                                    const std::function<void(std::uint64_t, const BoundTerms&)>& on_draw = {}) {
    std::mt19937_64 rng(seed);
    BoundSweepResult res;
    for (std::uint64_t id = 0; id < draws; ++id) {
        const BoundDraw b = random_bound_draw(rng);
        const BoundTerms t = bound_terms(b.v, b.k, b.d, b.u, b.k_t, b.d_t, b.u_hat, b.dt);
        ++res.draws;
        if (t.lhs > t.rhs + 1e-9) ++res.violations;
        if (t.slack() < res.min_slack) {
            res.min_slack = t.slack();
            res.worst_draw = id;
        }

        const auto split = split_error(b.v, b.k, b.d, b.u, b.k_t, b.d_t, b.u_hat, b.dt);
        const double vn2 = b.v.squaredNorm();
        const double total = t.lhs * t.lhs * vn2;
        if (total > 0.0) {
            const double sum = split.parallel.squaredNorm() + split.orthogonal.squaredNorm();
            res.max_split_rel_err = std::max(res.max_split_rel_err, std::abs(total - sum) / total);
        }
        const double q2 = split.orthogonal.squaredNorm();
        if (q2 > 0.0) {
            const double ident = vn2 * (t.strength_err * t.strength_err + t.alignment);
            res.max_q_identity_rel_err = std::max(res.max_q_identity_rel_err, std::abs(q2 - ident) / q2);
        }
        if (on_draw) on_draw(id, t);
    }
    return res;
}

} // namespace tacache

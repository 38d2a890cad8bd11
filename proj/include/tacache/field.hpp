#pragma once

// Velocity-field oracles standing in for a learned rectified-flow model.
//
// Time convention: t = 1 is pure noise, t = 0 is data. Sampling integrates
// dX/dt = v(X, t, c) from t = 1 down to t = 0.

#include "tacache/core.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace tacache {

/// Per-sample conditioning. The seed drives the noise initialization; params
/// optionally perturb the field (see FieldSpec for the per-kind meaning).
struct Condition {
    std::uint64_t seed = 0;
    std::vector<double> params;

    friend bool operator==(const Condition&, const Condition&) = default;
};

enum class FieldKind { constant, magnitude_decay, rotation, gaussian_mixture };

inline std::string_view to_string(FieldKind k) {
    switch (k) {
    case FieldKind::constant: return "constant";
    case FieldKind::magnitude_decay: return "magnitude-decay";
    case FieldKind::rotation: return "rotation";
    case FieldKind::gaussian_mixture: return "gaussian-mixture";
    }
    return "?";
}

inline FieldKind field_kind_from_string(std::string_view s) {
    if (s == "constant") return FieldKind::constant;
    if (s == "magnitude-decay") return FieldKind::magnitude_decay;
    if (s == "rotation") return FieldKind::rotation;
    if (s == "gaussian-mixture") return FieldKind::gaussian_mixture;
    throw InvalidArgument("unknown field kind '" + std::string(s) + "'");
}

/// One isotropic Gaussian component of the data distribution X_0.
struct MixtureComponent {
    double weight = 1.0;
    Vector mean;
    double scale = 1.0; // standard deviation sigma_i

    friend bool operator==(const MixtureComponent& a, const MixtureComponent& b) {
        return a.weight == b.weight && a.scale == b.scale && a.mean.size() == b.mean.size() &&
               a.mean == b.mean;
    }
};

/// Oracle catalog entry.
///
///  - constant:         v = target
///  - magnitude-decay:  v = exp(rate * (1 - t)) * target
///  - rotation:         v = R(omega * (1 - t)) * target, rotating in the (axis_a, axis_b) plane
///  - gaussian-mixture: exact marginal velocity E[X1 - X0 | X_t = x] of the linear path with
///                      X0 ~ sum_i w_i N(mean_i, scale_i^2 I) and X1 ~ N(0, I). Condition params,
///                      when present, are per-component additive log-weight offsets.
///
/// Condition params are ignored by the other kinds.
struct FieldSpec {
    FieldKind kind = FieldKind::constant;
    int dimension = 1;
    Vector target;
    double rate = 0.0;
    double omega = 0.0;
    int axis_a = 0;
    int axis_b = 1;
    std::vector<MixtureComponent> components;

    void validate() const {
        detail::require(dimension >= 1, "FieldSpec: dimension must be >= 1");
        switch (kind) {
        case FieldKind::constant:
        case FieldKind::magnitude_decay:
            detail::require(target.size() == dimension, "FieldSpec: target dimension mismatch");
            detail::require(target.allFinite() && std::isfinite(rate), "FieldSpec: non-finite parameter");
            break;
        case FieldKind::rotation:
            detail::require(target.size() == dimension, "FieldSpec: target dimension mismatch");
            detail::require(dimension >= 2, "FieldSpec: rotation needs dimension >= 2");
            detail::require(axis_a >= 0 && axis_b >= 0 && axis_a < dimension && axis_b < dimension &&
                                axis_a != axis_b,
                            "FieldSpec: invalid rotation plane");
            detail::require(target.allFinite() && std::isfinite(omega), "FieldSpec: non-finite parameter");
            break;
        case FieldKind::gaussian_mixture: {
            detail::require(!components.empty(), "FieldSpec: gaussian-mixture needs >= 1 component");
            double total = 0.0;
            for (const auto& c : components) {
                detail::require(c.weight > 0.0, "FieldSpec: mixture weights must be positive");
                detail::require(c.scale > 0.0 && std::isfinite(c.scale),
                                "FieldSpec: mixture scales must be positive");
                detail::require(c.mean.size() == dimension, "FieldSpec: mixture mean dimension mismatch");
                detail::require(c.mean.allFinite(), "FieldSpec: non-finite mixture mean");
                total += c.weight;
            }
            detail::require(std::abs(total - 1.0) <= 1e-12, "FieldSpec: mixture weights must sum to 1");
            break;
        }
        }
    }

    friend bool operator==(const FieldSpec& a, const FieldSpec& b) {
        return a.kind == b.kind && a.dimension == b.dimension && a.target.size() == b.target.size() &&
               a.target == b.target && a.rate == b.rate && a.omega == b.omega && a.axis_a == b.axis_a &&
               a.axis_b == b.axis_b && a.components == b.components;
    }
};

/// Closed-form probability-flow velocity of a Gaussian-mixture data distribution.
///
/// For component i the marginal of X_t is N((1-t) mu_i, s_i^2(t) I) with
/// s_i^2(t) = t^2 + (1-t)^2 sigma_i^2. Responsibilities are normalized in log
/// space so far-away states never underflow to 0/0. `log_weight_offsets` may
/// be empty or hold one additive logit per component.
inline Vector gaussian_mixture_velocity(const Vector& x, double t,
                                        const std::vector<MixtureComponent>& components,
                                        const std::vector<double>& log_weight_offsets = {}) {
    detail::require(!components.empty(), "gaussian_mixture_velocity: no components");
    detail::require(t >= 0.0 && t <= 1.0, "gaussian_mixture_velocity: t outside [0, 1]");
    detail::require(log_weight_offsets.empty() || log_weight_offsets.size() == components.size(),
                    "gaussian_mixture_velocity: log-weight offset count mismatch");
    double total = 0.0;
    for (const auto& c : components) {
        detail::require(c.weight > 0.0 && c.scale > 0.0, "gaussian_mixture_velocity: invalid component");
        detail::require_same_size(x, c.mean, "gaussian_mixture_velocity");
        total += c.weight;
    }
    detail::require(std::abs(total - 1.0) <= 1e-12, "gaussian_mixture_velocity: weights must sum to 1");

    const double dim = static_cast<double>(x.size());
    const double s = 1.0 - t;
    const std::size_t m = components.size();

    std::vector<double> log_resp(m);
    std::vector<Vector> cond_vel(m);
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
        const auto& c = components[i];
        const double var0 = c.scale * c.scale;
        const double var_t = t * t + s * s * var0;
        const Vector centered = x - s * c.mean;
        log_resp[i] = std::log(c.weight) + (log_weight_offsets.empty() ? 0.0 : log_weight_offsets[i]) -
                      0.5 * dim * std::log(var_t) - 0.5 * centered.squaredNorm() / var_t;
        max_log = std::max(max_log, log_resp[i]);
        // E[X1 | x, i] - E[X0 | x, i]
        cond_vel[i] = (t - s * var0) / var_t * centered - c.mean;
    }

    double norm = 0.0;
    for (auto& l : log_resp) {
        l = std::exp(l - max_log);
        norm += l;
    }
    Vector v = Vector::Zero(x.size());
    for (std::size_t i = 0; i < m; ++i) v += (log_resp[i] / norm) * cond_vel[i];
    return v;
}

/// Oracle with an evaluation counter (the NFE meter).
class VelocityField {
public:
    explicit VelocityField(FieldSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

    VelocityField(const VelocityField& other) : spec_(other.spec_), count_(other.evaluations()) {}
    VelocityField& operator=(const VelocityField&) = delete;

    const FieldSpec& spec() const noexcept { return spec_; }
    int dimension() const noexcept { return spec_.dimension; }

    std::uint64_t evaluations() const noexcept { return count_.load(std::memory_order_relaxed); }
    void reset_evaluations() const noexcept { count_.store(0, std::memory_order_relaxed); }

    Vector evaluate(const Vector& state, double t, const Condition& c) const {
        if (state.size() != spec_.dimension) {
            throw InvalidArgument("VelocityField::evaluate: state dimension " + std::to_string(state.size()) +
                                  " does not match field dimension " + std::to_string(spec_.dimension));
        }
        detail::require(t >= 0.0 && t <= 1.0, "VelocityField::evaluate: t outside [0, 1]");
        count_.fetch_add(1, std::memory_order_relaxed);

        switch (spec_.kind) {
        case FieldKind::constant: return spec_.target;
        case FieldKind::magnitude_decay: return std::exp(spec_.rate * (1.0 - t)) * spec_.target;
        case FieldKind::rotation: {
            const double angle = spec_.omega * (1.0 - t);
            const double cs = std::cos(angle), sn = std::sin(angle);
            Vector v = spec_.target;
            const double a = spec_.target[spec_.axis_a], b = spec_.target[spec_.axis_b];
            v[spec_.axis_a] = cs * a - sn * b;
            v[spec_.axis_b] = sn * a + cs * b;
            return v;
        }
        case FieldKind::gaussian_mixture:
            return gaussian_mixture_velocity(state, t, spec_.components, c.params);
        }
        throw InvalidArgument("VelocityField::evaluate: unknown kind");
    }

private:
    FieldSpec spec_;
    mutable std::atomic<std::uint64_t> count_{0};
};

/// Standard-normal noise X_{t_0} for a condition; a pure function of (seed, dimension).
inline Vector initial_noise(const Condition& c, int dimension) {
    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector x(dimension);
    for (int i = 0; i < dimension; ++i) x[i] = normal(rng);
    return x;
}

/// Builds a condition from a seed. For gaussian-mixture fields a nonzero
/// `tilt` draws per-component log-weight offsets ~ N(0, tilt^2) from the seed,
/// so distinct conditions target differently weighted mixtures.
inline Condition make_condition(std::uint64_t seed, const FieldSpec& spec, double tilt = 0.0) {
    Condition c{seed, {}};
    if (spec.kind == FieldKind::gaussian_mixture && tilt != 0.0) {
        std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
        std::normal_distribution<double> normal(0.0, tilt);
        c.params.resize(spec.components.size());
        for (auto& p : c.params) p = normal(rng);
    }
    return c;
}

/// 64-bit FNV-1a over the field parameters, rendered as 16 hex digits.
inline std::string field_digest(const FieldSpec& spec) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix_bytes = [&](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    auto mix_int = [&](std::int64_t v) { mix_bytes(&v, sizeof v); };
    auto mix_real = [&](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        mix_bytes(&bits, sizeof bits);
    };
    auto mix_vec = [&](const Vector& v) {
        mix_int(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) mix_real(v[i]);
    };

    mix_int(static_cast<std::int64_t>(spec.kind));
    mix_int(spec.dimension);
    switch (spec.kind) {
    case FieldKind::constant: mix_vec(spec.target); break;
    case FieldKind::magnitude_decay:
        mix_vec(spec.target);
        mix_real(spec.rate);
        break;
    case FieldKind::rotation:
        mix_vec(spec.target);
        mix_real(spec.omega);
        mix_int(spec.axis_a);
        mix_int(spec.axis_b);
        break;
    case FieldKind::gaussian_mixture:
        mix_int(static_cast<std::int64_t>(spec.components.size()));
        for (const auto& c : spec.components) {
            mix_real(c.weight);
            mix_vec(c.mean);
            mix_real(c.scale);
        }
        break;
    }

    static constexpr char hex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
    return out;
}

} // namespace tacache

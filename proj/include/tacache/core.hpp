#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

namespace tacache {

/// Dense state / velocity vector. All computations run in 64-bit reals.
using Vector = Eigen::VectorXd;

/// Precondition violated by the caller (bad sizes, out-of-range indices, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// NaN / Inf entering or leaving a numerical kernel.
class NumericDomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A velocity with zero norm was used as a projection axis.
class DegenerateVelocity : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

inline void require_same_size(const Vector& a, const Vector& b, const char* where) {
    if (a.size() != b.size()) {
        throw InvalidArgument(std::string(where) + ": dimension mismatch (" +
                              std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
}

inline void require_finite(const Vector& v, const char* where) {
    if (!v.allFinite()) throw NumericDomainError(std::string(where) + ": non-finite vector entry");
}

inline void require_finite(double x, const char* where) {
    if (!std::isfinite(x)) throw NumericDomainError(std::string(where) + ": non-finite scalar");
}

} // namespace detail

} // namespace tacache

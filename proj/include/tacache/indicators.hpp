#pragma once

#include <cstddef>
#include <vector>

namespace tacache {

/// Calibrated per-step magnitude indicator (MI, k_tilde) and direction
/// indicator (DI, d_tilde), one entry per grid step.
struct IndicatorTable {
    std::vector<double> k_tilde;
    std::vector<double> d_tilde;
    std::vector<double> k_std;
    std::vector<double> d_std;
    std::size_t sample_count = 0;

    std::size_t steps() const noexcept { return k_tilde.size(); }

    friend bool operator==(const IndicatorTable&, const IndicatorTable&) = default;
};

} // namespace tacache

// Minimal end-to-end run: calibrate on a 3-D two-component Gaussian mixture, then compare a
// cached trajectory against the full 50-step trajectory from the same noise.

#include "tacache/calibrate.hpp"
#include "tacache/diagnostics.hpp"
#include "tacache/experiment.hpp"

#include <iostream>

using namespace tacache;

int main() {
    FieldSpec spec;
    spec.kind = FieldKind::gaussian_mixture;
    spec.dimension = 3;
    spec.components = {{0.5, (Vector(3) << 1.0, 0.0, -0.5).finished(), 0.05},
                       {0.5, (Vector(3) << -1.0, 0.0, 0.5).finished(), 0.05}};
    const VelocityField field(spec);
    const auto grid = make_uniform_grid(50);

    std::vector<Condition> calibration;
    for (std::uint64_t s = 0; s < 64; ++s) calibration.push_back(make_condition(s, spec));
    const auto bundle = make_bundle(field, grid, calibration, preset_aggressive.tau_k, preset_aggressive.tau_d,
                                    default_h_max);

    const Condition c = make_condition(1000, spec);
    const Vector x0 = initial_noise(c, spec.dimension);
    const auto full = sample_full(field, grid, x0, c);
    SkipTrace trace;
    const auto cached = sample_cached(field, bundle, x0, c, {}, &trace);
    const auto report = compare_trajectories(full, cached, &trace);

    std::cout << "full nfe " << full.nfe << ", cached nfe " << cached.nfe << " (speedup "
              << format_real(count_speedup(full.nfe, cached.nfe)) << ")\n"
              << "terminal relative drift " << format_real(report.final_state_drift) << "\n"
              << "step-truncated drift at same nfe "
              << format_real(truncation_drift(field, full, static_cast<int>(cached.nfe), c)) << "\n";
}

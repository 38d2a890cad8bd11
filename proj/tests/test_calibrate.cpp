#include "tacache/calibrate.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

using namespace tacache;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

FieldSpec mixture() {
    FieldSpec f;
    f.kind = FieldKind::gaussian_mixture;
    f.dimension = 2;
    f.components = {{0.4, (Vector(2) << 1.0, 0.5).finished(), 0.2}, {0.6, (Vector(2) << -1.0, 0.0).finished(), 0.4}};
    return f;
}

ScheduleBundle random_bundle(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> steps(1, 80), hm(1, 16);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int N = steps(rng);
    ScheduleBundle b;
    b.grid = make_uniform_grid(N);
    auto& ind = b.indicators;
    for (int n = 0; n < N; ++n) {
        ind.k_tilde.push_back(10.0 * (u(rng) - 0.5) * std::pow(10.0, -6.0 * u(rng)));
        ind.d_tilde.push_back(u(rng) < 0.1 ? 0.0 : 0.2 * u(rng) / 3.0);
        ind.k_std.push_back(u(rng));
        ind.d_std.push_back(u(rng));
    }
    b.tau_k = 0.1 * u(rng);
    b.tau_d = u(rng);
    b.h_max = hm(rng);
    b.schedule = build_schedule(ind, b.grid, b.tau_k, b.tau_d, b.h_max);
    b.field_digest = "0123456789abcdef";
    for (int i = 0; i < 4; ++i) b.seeds.push_back(rng());
    ind.sample_count = b.seeds.size();
    b.created_by = "test";
    return b;
}

} // namespace

TEST_CASE("indicators are per-step means and sample deviations of the decomposition") {
    const VelocityField field(mixture());
    const auto grid = make_uniform_grid(20);
    std::vector<Condition> conds;
    for (std::uint64_t s = 0; s < 6; ++s) conds.push_back({s, {}});
    const auto t = calibrate(field, grid, conds);
    REQUIRE(t.steps() == 20);
    CHECK(t.sample_count == 6);

    // Direct recomputation from the full trajectories.
    std::vector<std::vector<double>> ks(19), ds(19);
    for (const auto& c : conds) {
        const auto rec = sample_full(field, grid, initial_noise(c, 2), c);
        for (int n = 0; n < 19; ++n) {
            const Vector& v = rec.velocities[static_cast<std::size_t>(n)];
            const Vector a = (rec.velocities[static_cast<std::size_t>(n) + 1] - v) / grid.dt(n);
            const double k = a.dot(v) / v.dot(v);
            ks[static_cast<std::size_t>(n)].push_back(k);
            ds[static_cast<std::size_t>(n)].push_back((a - k * v).norm() * grid.dt(n) / v.norm());
        }
    }
    for (std::size_t n = 0; n < 19; ++n) {
        double km = 0, dm = 0;
        for (int i = 0; i < 6; ++i) {
            km += ks[n][static_cast<std::size_t>(i)] / 6;
            dm += ds[n][static_cast<std::size_t>(i)] / 6;
        }
        double kv = 0;
        for (double k : ks[n]) kv += (k - km) * (k - km) / 5;
        CHECK_THAT(t.k_tilde[n], WithinAbs(km, 1e-12 * (1 + std::abs(km))));
        CHECK_THAT(t.d_tilde[n], WithinAbs(dm, 1e-12));
        CHECK_THAT(t.k_std[n], WithinAbs(std::sqrt(kv), 1e-10));
    }
    CHECK(t.k_tilde[19] == t.k_tilde[18]);
    CHECK(t.d_tilde[19] == t.d_tilde[18]);
}

TEST_CASE("deterministic fields give zero spread") {
    FieldSpec f;
    f.kind = FieldKind::rotation;
    f.dimension = 2;
    f.target = (Vector(2) << 1.0, 0.0).finished();
    f.omega = 1.5;
    const VelocityField field(f);
    const auto t = calibrate(field, make_uniform_grid(30), {{1, {}}, {2, {}}, {3, {}}});
    for (int n = 0; n < 30; ++n) {
        CHECK_THAT(t.d_tilde[static_cast<std::size_t>(n)], WithinRel(std::sin(1.5 / 30), 1e-10));
        CHECK(t.d_std[static_cast<std::size_t>(n)] < 1e-12);
    }
}

TEST_CASE("calibration is deterministic and rejects empty input") {
    const VelocityField field(mixture());
    const auto grid = make_uniform_grid(15);
    const std::vector<Condition> conds{{3, {}}, {4, {}}};
    CHECK(calibrate(field, grid, conds) == calibrate(field, grid, conds));
    CHECK_THROWS_AS(calibrate(field, grid, {}), InvalidArgument);
    const auto one_step = calibrate(field, make_uniform_grid(1), conds);
    CHECK(one_step.k_tilde == std::vector<double>{0.0});
}

TEST_CASE("bundle schedule is consistent with its indicators") {
    const VelocityField field(mixture());
    const auto b = make_bundle(field, make_uniform_grid(40), {{1, {}}, {2, {}}, {3, {}}}, 0.06, 0.6, 12);
    CHECK(schedule_matches_indicators(b));
    CHECK(b.seeds == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(b.field_digest == field_digest(mixture()));
}

TEST_CASE("bundle json round-trip is exact for random bundles") {
    std::mt19937_64 rng(2024);
    const auto dir = std::filesystem::temp_directory_path() / "tacache_test_calibrate";
    std::filesystem::create_directories(dir);
    for (int i = 0; i < 100; ++i) {
        const auto b = random_bundle(rng);
        const auto path = (dir / "bundle.json").string();
        write_bundle(b, path);
        const auto back = read_bundle(path);
        REQUIRE(back == b);
        REQUIRE(build_schedule(back.indicators, back.grid, back.tau_k, back.tau_d, back.h_max) == b.schedule);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("malformed bundles name the offending field") {
    std::mt19937_64 rng(1);
    const auto good = bundle_to_json(random_bundle(rng));

    auto expect_field = [](const nlohmann::ordered_json& j, const std::string& field) {
        try {
            bundle_from_json(j);
            FAIL("expected a parse error");
        } catch (const BundleParseError& e) {
            CHECK(e.field() == field);
        }
    };

    auto j = good;
    j.erase("tau_d");
    expect_field(j, "tau_d");

    j = good;
    j["format_version"] = "tacache-bundle/0";
    expect_field(j, "format_version");

    j = good;
    j["k_tilde"].push_back(1.0);
    expect_field(j, "k_tilde");

    j = good;
    j["h"][0] = 0;
    expect_field(j, "h");

    j = good;
    j["times"][0] = 0.5;
    expect_field(j, "times");

    CHECK_THROWS_AS(read_bundle("/nonexistent/bundle.json"), std::runtime_error);
}

TEST_CASE("indicator csv lists one row per step") {
    std::mt19937_64 rng(8);
    auto b = random_bundle(rng);
    std::ostringstream os;
    write_indicator_csv(os, b);
    const auto text = os.str();
    CHECK(text.rfind("n,t,k_tilde,d_tilde,k_std,d_std\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == b.steps() + 1);
}

#include "tacache/config.hpp"

#include <catch_amalgamated.hpp>

using namespace tacache;

TEST_CASE("config json round-trips") {
    ExperimentConfig cfg;
    cfg.field.kind = FieldKind::gaussian_mixture;
    cfg.field.dimension = 2;
    cfg.field.components = {{0.25, (Vector(2) << 1.0, 0.1).finished(), 0.2},
                            {0.75, (Vector(2) << -1.0, 0.3).finished(), 0.1}};
    cfg.steps = 40;
    cfg.calibration_seeds = {1, 2, 3};
    cfg.evaluation_seeds = {7, 8};
    cfg.tau_k = 0.04;
    cfg.tau_d = 0.4;
    cfg.h_max = 9;
    cfg.toggles = {true, false};
    cfg.condition_tilt = 0.3;
    cfg.ablation = true;
    cfg.sweep_tau_k = {0.01, 0.1};
    cfg.calibration_sizes = {2};
    const auto back = config_from_json(config_to_json(cfg));
    CHECK(back.field == cfg.field);
    CHECK(back.steps == 40);
    CHECK(back.calibration_seeds == cfg.calibration_seeds);
    CHECK(back.evaluation_seeds == cfg.evaluation_seeds);
    CHECK(back.tau_k == 0.04);
    CHECK(back.h_max == 9);
    CHECK(back.toggles == cfg.toggles);
    CHECK(back.condition_tilt == 0.3);
    CHECK(back.ablation);
    CHECK(back.sweep_tau_k == cfg.sweep_tau_k);
    CHECK(back.sweep_tau_d.empty());
    CHECK(back.calibration_sizes == cfg.calibration_sizes);
}

TEST_CASE("every field kind round-trips") {
    FieldSpec f;
    f.kind = FieldKind::rotation;
    f.dimension = 3;
    f.target = (Vector(3) << 1, 2, 3).finished();
    f.omega = 0.7;
    f.axis_a = 2;
    f.axis_b = 0;
    CHECK(field_spec_from_json(field_spec_to_json(f)) == f);
    f.kind = FieldKind::magnitude_decay;
    f.axis_a = 0;
    f.axis_b = 1;
    f.omega = 0.0;
    f.rate = -0.4;
    CHECK(field_spec_from_json(field_spec_to_json(f)) == f);
}

TEST_CASE("seed ranges and defaults") {
    const auto j = Json::parse(R"({
        "field": {"kind": "constant", "dimension": 1, "target": [2.0]},
        "calibration_seeds": {"start": 5, "count": 3},
        "evaluation_seeds": [100]
    })");
    const auto cfg = config_from_json(j);
    CHECK(cfg.calibration_seeds == std::vector<std::uint64_t>{5, 6, 7});
    CHECK(cfg.steps == 50);
    CHECK(cfg.tau_k == 0.06);
    CHECK(cfg.tau_d == 0.6);
    CHECK(cfg.h_max == 12);
    CHECK(cfg.toggles.use_mi);
}

TEST_CASE("a manifest is accepted in place of a config") {
    const auto j = Json::parse(R"({
        "tool": "tacache",
        "resolved_config": {"field": {"kind": "constant", "dimension": 1, "target": [2.0]}, "steps": 12}
    })");
    CHECK(config_from_json(j).steps == 12);
}

TEST_CASE("bad configs raise config errors") {
    CHECK_THROWS_AS(config_from_json(Json::parse(R"({"steps": 3})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(Json::parse(R"({"field": {"kind": "spiral", "dimension": 2}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(Json::parse(
                        R"({"field": {"kind": "constant", "dimension": 2, "target": [1.0]}})")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(Json::parse(
                        R"({"field": {"kind": "constant", "dimension": 1, "target": [1.0]}, "steps": "many"})")),
                    ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

// tacache: calibrate / sample / verify / bench / curves.
//
// Exit codes: 0 success, 1 runtime failure (I/O, bad bundle), 2 configuration
// or usage error, 3 verification failure.

#include "tacache/calibrate.hpp"
#include "tacache/config.hpp"
#include "tacache/experiment.hpp"
#include "tacache/verify.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace tacache;

namespace {

constexpr int exit_runtime = 1;
constexpr int exit_config = 2;
constexpr int exit_verify = 3;

struct Overrides {
    std::string config_path;
    std::string out_dir;
    std::optional<double> tau_k, tau_d;
    std::optional<int> h_max, steps;
    std::string seeds;
    bool no_mi = false;
    bool no_di = false;
    bool ablation = false;
};

struct SubArgs {
    std::string bundle;
    std::string mode = "full";
    std::optional<int> truncate_to;
    std::string suite = "all";
    std::uint64_t draws = 0;
    std::uint64_t seed = 20240501;
};

/// "1,2,5-9" -> {1, 2, 5, 6, 7, 8, 9}
std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            const auto dash = item.find('-');
            if (dash == std::string::npos) {
                out.push_back(std::stoull(item));
            } else {
                const auto lo = std::stoull(item.substr(0, dash));
                const auto hi = std::stoull(item.substr(dash + 1));
                if (hi < lo) throw ConfigError("seed range '" + item + "' is reversed");
                for (auto s = lo; s <= hi; ++s) out.push_back(s);
            }
        } catch (const std::logic_error&) {
            throw ConfigError("cannot parse seed list entry '" + item + "'");
        }
    }
    return out;
}

class Session {
public:
    Session(std::string subcommand, const Overrides& ov) : subcommand_(std::move(subcommand)), ov_(ov) {}

    /// Reads --config (a plain config or a previous manifest) and applies flags.
    ExperimentConfig resolve_config(bool required = true) {
        ExperimentConfig cfg;
        if (!ov_.config_path.empty()) {
            cfg = load_config(ov_.config_path);
            manifest_args_ = load_manifest_arguments(ov_.config_path);
        } else if (required) {
            throw ConfigError("--config is required for '" + subcommand_ + "'");
        }
        if (ov_.tau_k) cfg.tau_k = *ov_.tau_k;
        if (ov_.tau_d) cfg.tau_d = *ov_.tau_d;
        if (ov_.h_max) cfg.h_max = *ov_.h_max;
        if (ov_.steps) cfg.steps = *ov_.steps;
        if (!ov_.seeds.empty()) cfg.evaluation_seeds = parse_seed_list(ov_.seeds);
        if (ov_.no_mi) cfg.toggles.use_mi = false;
        if (ov_.no_di) cfg.toggles.use_di = false;
        if (ov_.ablation) cfg.ablation = true;
        if (!ov_.out_dir.empty()) cfg.out_dir = ov_.out_dir;
        if (required) {
            try {
                cfg.validate();
            } catch (const InvalidArgument& e) {
                throw ConfigError(e.what());
            }
        }
        config_ = cfg;
        return cfg;
    }

    const Json& manifest_args() const { return manifest_args_; }

    fs::path out_dir() {
        fs::path dir = !ov_.out_dir.empty() ? fs::path(ov_.out_dir) : (config_ ? fs::path(config_->out_dir) : "out");
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
        return dir;
    }

    /// Opens a file in the output directory and records it in the manifest.
    std::ofstream open(const std::string& name) {
        const auto path = out_dir() / name;
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
        outputs_.push_back(name);
        return os;
    }

    void record_output(const std::string& name) { outputs_.push_back(name); }
    void set_argument(const std::string& key, Json value) { args_[key] = std::move(value); }

    void write_manifest() {
        Json m;
        m["tool"] = tool_name;
        m["version"] = tool_version;
        m["subcommand"] = subcommand_;
        if (config_) m["resolved_config"] = config_to_json(*config_);
        m["arguments"] = args_.is_null() ? Json::object() : args_;
        m["outputs"] = outputs_;
        const auto path = out_dir() / "manifest.json";
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write manifest '" + path.string() + "'");
        os << m.dump(2) << '\n';
    }

private:
    static Json load_manifest_arguments(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        try {
            const auto j = Json::parse(is);
            if (j.contains("resolved_config") && j.contains("arguments")) return j.at("arguments");
        } catch (const nlohmann::json::exception&) {
        }
        return Json::object();
    }

    std::string subcommand_;
    Overrides ov_;
    std::optional<ExperimentConfig> config_;
    Json args_;
    Json manifest_args_ = Json::object();
    std::vector<std::string> outputs_;
};

void print_summary(const ExperimentSummary& s) {
    std::cout << "nfe: full " << s.full_nfe << ", cached " << s.cached_nfe << " (speedup " << format_real(s.speedup)
              << ", skip ratio " << format_real(s.skip_ratio) << ")\n"
              << "terminal drift: cached " << format_real(s.final_drift.mean) << " +- "
              << format_real(s.final_drift.stderr_) << ", truncated " << format_real(s.truncated_drift.mean) << " +- "
              << format_real(s.truncated_drift.stderr_) << "\n"
              << "velocity drift: cached steps " << format_real(s.cached_velocity_drift.mean) << ", evaluated steps "
              << format_real(s.evaluated_velocity_drift.mean) << "\n"
              << "cos theta: mean " << format_real(s.cos_theta.mean) << ", positive "
              << format_real(s.cos_theta.positive_fraction) << ", p90 " << format_real(s.cos_theta.p90) << " ("
              << s.cos_theta.samples.size() << " samples, " << s.cos_theta.degenerate << " degenerate)\n";
}

int cmd_calibrate(Session& session) {
    const auto cfg = session.resolve_config();
    const VelocityField field(cfg.field);
    const auto grid = make_uniform_grid(cfg.steps);
    const auto conditions = make_conditions(cfg.calibration_seeds, cfg.field, cfg.condition_tilt);

    auto emit = [&](const std::vector<Condition>& conds, const std::string& suffix) {
        const auto bundle = make_bundle(field, grid, conds, cfg.tau_k, cfg.tau_d, cfg.h_max);
        const auto name = "bundle" + suffix + ".json";
        write_bundle(bundle, (session.out_dir() / name).string());
        session.record_output(name);
        auto csv = session.open("mi_di" + suffix + ".csv");
        write_indicator_csv(csv, bundle);
        const auto cov = schedule_coverage(bundle.schedule, bundle.steps());
        std::cout << name << ": " << conds.size() << " conditions, " << cov.anchors.size() << " anchors of "
                  << bundle.steps() << " steps (skip ratio " << format_real(cov.skip_ratio) << ")\n";
    };

    emit(conditions, "");
    for (int size : cfg.calibration_sizes) {
        emit(std::vector<Condition>(conditions.begin(), conditions.begin() + size), "_n" + std::to_string(size));
    }
    session.write_manifest();
    return 0;
}

int cmd_sample(Session& session, SubArgs args) {
    const auto cfg = session.resolve_config();
    const auto& margs = session.manifest_args();
    if (args.bundle.empty() && margs.contains("bundle")) args.bundle = margs.at("bundle").get<std::string>();
    if (args.mode == "full" && margs.contains("mode")) args.mode = margs.at("mode").get<std::string>();
    if (!args.truncate_to && margs.contains("truncate_to")) args.truncate_to = margs.at("truncate_to").get<int>();

    const VelocityField field(cfg.field);
    TimeGrid grid = make_uniform_grid(cfg.steps);
    std::optional<ScheduleBundle> bundle;
    if (args.mode == "cached") {
        if (args.bundle.empty()) throw ConfigError("cached mode needs --bundle");
        bundle = read_bundle(args.bundle);
        if (bundle->steps() != cfg.steps) {
            throw ConfigError("bundle has " + std::to_string(bundle->steps()) + " steps but config asks for " +
                              std::to_string(cfg.steps));
        }
        if (bundle->field_digest != field_digest(cfg.field)) {
            std::cerr << "warning: bundle was calibrated on a different field (digest " << bundle->field_digest
                      << ")\n";
        }
        grid = bundle->grid;
        session.set_argument("bundle", args.bundle);
    } else if (args.mode == "truncated") {
        if (!args.truncate_to || *args.truncate_to < 1) throw ConfigError("truncated mode needs --truncate-to N >= 1");
        grid = make_uniform_grid(*args.truncate_to);
        session.set_argument("truncate_to", *args.truncate_to);
    } else if (args.mode != "full") {
        throw ConfigError("unknown mode '" + args.mode + "'");
    }
    session.set_argument("mode", args.mode);
    const CompensationToggles toggles = cfg.toggles;

    auto summary = session.open("sample_summary.csv");
    CsvWriter w(summary);
    w << "seed" << "mode" << "steps" << "nfe" << "oracle_calls" << "final_state_norm";
    w.end_row();
    for (const auto& c : make_conditions(cfg.evaluation_seeds, cfg.field, cfg.condition_tilt)) {
        const Vector x0 = initial_noise(c, cfg.field.dimension);
        const auto before = field.evaluations();
        const auto rec = bundle ? sample_cached(field, *bundle, x0, c, toggles) : sample_full(field, grid, x0, c);
        const auto calls = field.evaluations() - before;
        auto csv = session.open("trajectory_" + std::to_string(c.seed) + ".csv");
        write_trajectory_csv(csv, rec);
        w << c.seed << args.mode << rec.steps() << rec.nfe << calls << rec.states.back().norm();
        w.end_row();
        std::cout << "seed " << c.seed << ": " << args.mode << " nfe " << rec.nfe << "\n";
    }
    session.write_manifest();
    return 0;
}

int cmd_verify(Session& session, const SubArgs& args, bool write_outputs) {
    std::vector<VerifyReport> reports;
    const auto& s = args.suite;
    if (s != "all" && s != "povd" && s != "ssc" && s != "bound" && s != "exactness") {
        throw ConfigError("unknown suite '" + s + "'");
    }
    session.set_argument("suite", s);
    session.set_argument("seed", args.seed);
    if (s == "all" || s == "povd") reports.push_back(verify_povd(args.draws ? args.draws : 10000, args.seed));
    if (s == "all" || s == "ssc") reports.push_back(verify_ssc(args.draws ? args.draws : 10000, args.seed));
    if (s == "all" || s == "bound") {
        const auto draws = args.draws ? args.draws : 100000;
        session.set_argument("draws", draws);
        if (write_outputs) {
            auto os = session.open("bound_sweep.csv");
            CsvWriter w(os);
            w << "draw" << "lhs" << "rhs" << "slack";
            w.end_row();
            reports.push_back(verify_bound(draws, args.seed, [&](std::uint64_t id, const BoundTerms& t) {
                w << id << t.lhs << t.rhs << t.slack();
                w.end_row();
            }));
        } else {
            reports.push_back(verify_bound(draws, args.seed));
        }
    }
    if (s == "all" || s == "exactness") reports.push_back(verify_exactness(args.seed));

    bool ok = true;
    for (const auto& r : reports) {
        std::cout << r.describe() << "\n";
        ok = ok && r.passed;
    }
    if (write_outputs) session.write_manifest();
    return ok ? 0 : exit_verify;
}

int cmd_bench(Session& session) {
    const auto cfg = session.resolve_config();
    const VelocityField field(cfg.field);
    const auto grid = make_uniform_grid(cfg.steps);
    const auto bundle = make_bundle(field, grid, make_conditions(cfg.calibration_seeds, cfg.field, cfg.condition_tilt),
                                    cfg.tau_k, cfg.tau_d, cfg.h_max);
    const EvaluationSet set(field, grid, make_conditions(cfg.evaluation_seeds, cfg.field, cfg.condition_tilt));
    const auto summary = evaluate_bundle(set, bundle, cfg.toggles);

    write_bundle(bundle, (session.out_dir() / "bundle.json").string());
    session.record_output("bundle.json");
    {
        auto os = session.open("summary.csv");
        CsvWriter w(os);
        w << "mode" << "nfe" << "speedup" << "final_drift_mean" << "final_drift_stderr" << "skip_ratio";
        w.end_row();
        w << "full" << summary.full_nfe << 1.0 << 0.0 << 0.0 << 0.0;
        w.end_row();
        w << "cached" << summary.cached_nfe << summary.speedup << summary.final_drift.mean
          << summary.final_drift.stderr_ << summary.skip_ratio;
        w.end_row();
        w << "truncated" << summary.cached_nfe << summary.speedup << summary.truncated_drift.mean
          << summary.truncated_drift.stderr_ << 0.0;
        w.end_row();
    }
    {
        auto os = session.open("per_seed.csv");
        write_seed_summary_csv(os, summary);
    }
    {
        auto os = session.open("drift_profile.csv");
        write_mean_drift_profile_csv(os, grid, summary);
    }
    {
        auto os = session.open("cos_theta.csv");
        write_cos_theta_csv(os, summary);
    }
    if (cfg.ablation) {
        auto os = session.open("ablation.csv");
        write_ablation_csv(os, run_ablation(set, bundle));
    }
    if (!cfg.sweep_tau_k.empty() || !cfg.sweep_tau_d.empty()) {
        const auto tk = cfg.sweep_tau_k.empty() ? std::vector<double>{cfg.tau_k} : cfg.sweep_tau_k;
        const auto td = cfg.sweep_tau_d.empty() ? std::vector<double>{cfg.tau_d} : cfg.sweep_tau_d;
        auto os = session.open("sweep.csv");
        write_sweep_csv(os, sweep_thresholds(set, bundle, tk, td, cfg.toggles));
    }
    print_summary(summary);
    session.write_manifest();
    return 0;
}

int cmd_curves(Session& session, const SubArgs& args) {
    if (args.bundle.empty()) throw ConfigError("curves needs --bundle");
    const auto bundle = read_bundle(args.bundle);
    session.set_argument("bundle", args.bundle);
    auto os = session.open("mi_di.csv");
    write_indicator_csv(os, bundle);
    session.write_manifest();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tacache: offline-calibrated skip-and-compensate sampling for rectified-flow ODEs"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(tool_name) + " " + tool_version);

    Overrides ov;
    SubArgs args;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", ov.config_path, "Experiment config (JSON) or a previous manifest.json");
        sub->add_option("--out", ov.out_dir, "Output directory");
        sub->add_option("--tau-k", ov.tau_k, "Magnitude threshold");
        sub->add_option("--tau-d", ov.tau_d, "Direction threshold");
        sub->add_option("--h-max", ov.h_max, "Maximum skip interval length");
        sub->add_option("--steps", ov.steps, "Number of sampling steps");
        sub->add_option("--seeds", ov.seeds, "Evaluation seeds, e.g. 1,2,10-19");
        sub->add_flag("--no-mi", ov.no_mi, "Disable the magnitude indicator in skipped updates");
        sub->add_flag("--no-di", ov.no_di, "Disable the direction indicator in skipped updates");
    };

    auto* calibrate = app.add_subcommand("calibrate", "Calibrate indicators and write the schedule bundle");
    add_common(calibrate);
    auto* sample = app.add_subcommand("sample", "Sample trajectories (full, cached, or truncated)");
    add_common(sample);
    sample->add_option("--bundle", args.bundle, "Bundle file (cached mode)");
    sample->add_option("--mode", args.mode, "full | cached | truncated")
        ->check(CLI::IsMember({"full", "cached", "truncated"}));
    sample->add_option("--truncate-to", args.truncate_to, "Step count of the truncated grid");
    auto* verify = app.add_subcommand("verify", "Run property suites");
    add_common(verify);
    verify->add_option("--suite", args.suite, "povd | ssc | bound | exactness | all");
    verify->add_option("--draws", args.draws, "Random draws per suite (default: suite-specific)");
    verify->add_option("--seed", args.seed, "RNG seed");
    auto* bench = app.add_subcommand("bench", "Calibrate, sample all modes, and summarize drift");
    add_common(bench);
    bench->add_flag("--ablation", ov.ablation, "Also run the four MI/DI toggle combinations");
    auto* curves = app.add_subcommand("curves", "Export MI/DI curves from a bundle");
    add_common(curves);
    curves->add_option("--bundle", args.bundle, "Bundle file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    Session session(name, ov);
    try {
        if (name == "calibrate") return cmd_calibrate(session);
        if (name == "sample") return cmd_sample(session, args);
        if (name == "verify") return cmd_verify(session, args, !ov.out_dir.empty());
        if (name == "bench") return cmd_bench(session);
        if (name == "curves") return cmd_curves(session, args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const InvalidArgument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_runtime;
    }
    return exit_runtime;
}

// Config-driven experiment runner: trains the bundled PDE benchmarks, writes
// CSV/checkpoint/manifest artifacts, validates the NTK theory numerically and
// reproduces the bundled result tables at desk or full scale.

#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "ntkkan/harness.hpp"

using namespace ntkkan;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::vector<long> parse_snapshots(const std::string& csv) {
    std::vector<long> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stol(tok));
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chebyshev-KAN physics-informed training and NTK analysis"};
    app.require_subcommand(1);

    // run
    std::string config_path;
    std::string out_override, snapshots_override;
    long seed_override = -1, epochs_override = -1;
    int threads_override = 0;
    auto* run = app.add_subcommand("run", "run one experiment config");
    run->add_option("config", config_path, "experiment config (json)")->required();
    run->add_option("--seed", seed_override, "override the config seed");
    run->add_option("--epochs", epochs_override, "override the epoch budget");
    run->add_option("--snapshots", snapshots_override, "comma-separated snapshot taus");
    run->add_option("--out", out_override, "override the output directory");
    run->add_option("--threads", threads_override, "worker threads (default 1)");

    // ntk-validate
    NtkValidateOptions vopt;
    std::string widths_csv;
    auto* val = app.add_subcommand("ntk-validate", "numerical checks of the NTK theory");
    val->add_option("--width", vopt.width, "hidden width of the theorem-1 network");
    val->add_option("--degree", vopt.degree, "chebyshev degree");
    val->add_option("--dim", vopt.dim, "input dimension");
    val->add_option("--mc-samples", vopt.mc_samples, "monte-carlo samples");
    val->add_option("--ensemble", vopt.ensemble, "initialization ensemble size");
    val->add_option("--pairs", vopt.pairs, "random input pairs to test");
    val->add_option("--widths", widths_csv, "comma-separated sweep widths");
    val->add_option("--sweep-epochs", vopt.sweep_epochs, "drift sweep epoch budget");
    val->add_option("--seed", vopt.seed, "seed");

    // reproduce
    std::string table_id, scale = "desk", configs_dir = "configs", repro_out = "runs/reproduce";
    auto* rep = app.add_subcommand("reproduce", "re-run a bundled results table");
    rep->add_option("table", table_id, "t1 | t2 | t3 | t4")->required();
    rep->add_option("--scale", scale, "desk (default) or full");
    rep->add_option("--configs", configs_dir, "directory with the bundled configs");
    rep->add_option("--out", repro_out, "output root");
    rep->add_option("--threads", threads_override, "worker threads (default 1)");

    // inspect
    std::string manifest_path;
    auto* ins = app.add_subcommand("inspect", "verify a run manifest's artifacts");
    ins->add_option("manifest", manifest_path, "path to manifest.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? kExitConfig : 0;
    }

    try {
        if (*run) {
            ExperimentConfig cfg = load_config(config_path);
            apply_env_overrides(cfg);
            if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
            if (epochs_override >= 0) cfg.epochs = epochs_override;
            if (!snapshots_override.empty()) cfg.snapshots = parse_snapshots(snapshots_override);
            if (!out_override.empty()) cfg.out_dir = out_override;
            if (threads_override > 0) cfg.threads = threads_override;
            if (cfg.optimizer.kind == OptimizerKind::hybrid &&
                cfg.optimizer.adam_epochs + cfg.optimizer.lbfgs_epochs != cfg.epochs)
                throw ConfigError("hybrid phases must sum to the epoch override");
            try {
                auto manifest = run_experiment(cfg);
                std::cout << "run complete: " << cfg.out_dir << "/manifest.json\n";
                std::cout << "rel_l2: " << manifest.doc["metrics"]["rel_l2"].dump() << "\n";
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                std::cerr << "runtime failure: " << e.what() << "\n";
                return kExitRuntime;
            }
        } else if (*val) {
            if (!widths_csv.empty()) {
                vopt.widths.clear();
                for (long w : parse_snapshots(widths_csv)) vopt.widths.push_back(static_cast<int>(w));
            }
            const bool ok = ntk_validate(vopt, std::cout);
            std::cout << (ok ? "ntk-validate: PASS\n" : "ntk-validate: FAIL\n");
            return ok ? 0 : kExitRuntime;
        } else if (*rep) {
            if (threads_override > 0) set_threads(threads_override);
            const bool ok = reproduce_table(table_id, scale, configs_dir, repro_out, std::cout);
            std::cout << (ok ? "reproduce: PASS\n" : "reproduce: FAIL\n");
            return ok ? 0 : kExitRuntime;
        } else if (*ins) {
            const bool ok = inspect_manifest(manifest_path, std::cout);
            return ok ? 0 : kExitRuntime;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}

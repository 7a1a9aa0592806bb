// fedsim command line: run simulations from config files, compare finished
// runs, inspect partitions and execute the verification suite.

#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedsim/fedsim.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int cmd_run(const std::string& config_path, const std::string& out_dir, int workers,
            bool timing) {
    const auto config = fedsim::load_config(config_path);
    fs::create_directories(out_dir);
    const std::time_t started = std::time(nullptr);
    fedsim::log::info("running strategy '%s' for %d rounds",
                      fedsim::strategy_name(config.strategy).c_str(), config.rounds);
    const auto result = fedsim::run_simulation(config, workers);
    const std::time_t finished = std::time(nullptr);

    const fs::path dir(out_dir);
    fedsim::write_rounds_csv(dir / "rounds.csv", result, result.num_classes,
                             config.selected_per_round, timing);
    fedsim::write_summary_json(dir / "summary.json", result, config);
    fedsim::write_manifest_json(dir / "manifest.json", result.config_digest, started, finished,
                                {"rounds.csv", "summary.json", "manifest.json"});
    std::cout << "run complete: strategy=" << result.strategy
              << " rounds=" << result.rounds.size()
              << " final_accuracy=" << fedsim::format_double(result.rounds.back().accuracy)
              << "\noutputs in " << dir.string() << "\n";
    return kExitOk;
}

int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& reference_dir,
                const std::string& out_dir) {
    std::vector<fedsim::RunInfo> runs;
    std::string reference_strategy;
    bool reference_included = false;
    const auto canonical = [](const std::string& p) { return fs::weakly_canonical(fs::path(p)); };
    const auto load = [](const std::string& dir) {
        try {
            return fedsim::read_run_dir(dir);
        } catch (const std::exception& e) {
            throw fedsim::ConfigError(e.what());
        }
    };
    for (const auto& dir : run_dirs) {
        auto stored = load(dir);
        if (canonical(dir) == canonical(reference_dir)) {
            reference_strategy = stored.info.strategy;
            reference_included = true;
        }
        runs.push_back(std::move(stored.info));
    }
    if (!reference_included) {
        auto stored = load(reference_dir);
        reference_strategy = stored.info.strategy;
        runs.push_back(std::move(stored.info));
    }

    const auto table = fedsim::compare_runs(runs, reference_strategy);
    fs::create_directories(out_dir);
    {
        std::ofstream csv(fs::path(out_dir) / "comparison.csv", std::ios::binary);
        fedsim::write_comparison_csv(csv, table);
    }
    {
        std::ofstream json(fs::path(out_dir) / "comparison.json", std::ios::binary);
        fedsim::write_comparison_json(json, table);
    }
    std::cout << fedsim::render_comparison_table(table);
    std::cout << "reference strategy: " << reference_strategy << "\n";
    return kExitOk;
}

int cmd_verify(std::uint64_t seed, const std::string& corrupt) {
    const auto checks = fedsim::run_verification(seed, corrupt);
    bool all_pass = true;
    for (const auto& check : checks) {
        std::cout << (check.pass ? "[ok]   " : "[FAIL] ") << check.name << ": " << check.detail
                  << "\n";
        all_pass = all_pass && check.pass;
    }
    std::cout << (all_pass ? "verification passed" : "verification FAILED") << " (" << checks.size()
              << " checks)\n";
    return all_pass ? kExitOk : kExitRuntime;
}

int cmd_partition_inspect(const std::string& config_path, const std::string& out_dir) {
    const auto config = fedsim::load_config(config_path);
    if (config.dataset.kind != fedsim::DatasetSpec::Kind::synthetic)
        throw fedsim::ConfigError("partition-inspect: only synthetic datasets are supported");
    const auto all = fedsim::generate_synthetic(
        config.dataset.classes, config.dataset.features, config.dataset.per_class,
        config.dataset.spread, fedsim::derive_seed(config.seed, fedsim::fnv1a64("data")));
    auto [train, eval_set] = fedsim::train_test_split(
        all, config.eval_fraction, fedsim::derive_seed(config.seed, fedsim::fnv1a64("eval")));
    (void)eval_set;
    const auto partition = fedsim::partition_maverick(
        train, config.scenario, fedsim::derive_seed(config.seed, fedsim::fnv1a64("assign")));

    fedsim::write_partition_csv(std::cout, partition.profiles);
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "partition.csv", std::ios::binary);
    fedsim::write_partition_csv(csv, partition.profiles);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fedsim: deterministic federated-learning simulation with contribution "
                 "measurement and distribution-aware client selection"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    int workers = 1;
    bool timing = false;
    auto* run = app.add_subcommand("run", "execute a simulation from a config file");
    run->add_option("--config", config_path, "path to the run config (JSON)")->required();
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--workers", workers, "intra-round parallelism degree")
        ->check(CLI::Range(1, 256));
    run->add_flag("--timing", timing,
                  "record per-round wall time in rounds.csv (off keeps reruns byte-identical)");

    std::vector<std::string> run_dirs;
    std::string reference_dir, compare_out = ".";
    auto* compare = app.add_subcommand("compare", "summarize finished runs against a reference");
    compare->add_option("dirs", run_dirs, "run output directories")->expected(-1)->required();
    compare->add_option("--reference", reference_dir, "directory of the reference run")
        ->required();
    compare->add_option("--out", compare_out, "directory for comparison.csv/json");

    std::uint64_t verify_seed = 7;
    std::string corrupt;
    auto* verify = app.add_subcommand("verify", "run the numeric property suite");
    verify->add_option("--seed", verify_seed, "seed for the randomized checks");
    verify->add_option("--corrupt", corrupt, "deliberately break a named check (self-test)")
        ->group("");  // hidden

    std::string inspect_config, inspect_out = ".";
    auto* inspect = app.add_subcommand("partition-inspect", "print the client/class count matrix");
    inspect->add_option("--config", inspect_config, "path to the run config (JSON)")->required();
    inspect->add_option("--out", inspect_out, "directory for partition.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir, workers, timing);
        if (compare->parsed()) return cmd_compare(run_dirs, reference_dir, compare_out);
        if (verify->parsed()) return cmd_verify(verify_seed, corrupt);
        if (inspect->parsed()) return cmd_partition_inspect(inspect_config, inspect_out);
    } catch (const fedsim::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

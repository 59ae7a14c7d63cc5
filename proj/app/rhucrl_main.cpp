// Command-line front end: train / evaluate / sweep / checks.
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rhucrl/commands.hpp"

using namespace rhucrl;

int main(int argc, char** argv) {
    CLI::App app{"Robust model-based RL experiments (RH-UCRL and baselines)"};
    app.require_subcommand(1);

    std::string config_path, out_dir, run_dir, fault;
    std::optional<std::uint64_t> seed;
    int workers = 1;
    bool force = false;

    auto* train = app.add_subcommand("train", "Run the episodic learning loop");
    train->add_option("--config", config_path, "YAML run configuration")->required()->check(CLI::ExistingFile);
    train->add_option("--seed", seed, "Override the config's master seed");
    train->add_option("--out", out_dir, "Output directory (default: output.dir from the config)");
    train->add_flag("--force", force, "Overwrite a run directory created by a different config");

    auto* evaluate = app.add_subcommand("evaluate", "Worst-case evaluation of a run's output policy");
    evaluate->add_option("--run,--out", run_dir, "Run directory holding manifest.json")->required();
    evaluate->add_option("--config", config_path, "Evaluation config (must match the run unless --force)");
    evaluate->add_option("--seed", seed, "Override the evaluation seed");
    evaluate->add_flag("--force", force, "Accept config-hash mismatches");

    auto* sweep = app.add_subcommand("sweep", "train + evaluate over an axis of values and seeds");
    sweep->add_option("--config", config_path, "YAML template with a sweep block")->required()->check(CLI::ExistingFile);
    sweep->add_option("--out", out_dir, "Output directory (default: output.dir from the config)");
    sweep->add_option("--workers", workers, "Parallel cells")->check(CLI::PositiveNumber);

    auto* checks = app.add_subcommand("checks", "Run the property suites");
    checks->add_option("--seed", seed, "Suite seed");
    checks->add_option("--inject-fault", fault, "Deliberate defect to demonstrate detection")
        ->check(CLI::IsMember({"temperature"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_code::kOk : exit_code::kUsage;
    }

    try {
        if (*checks) {
            CheckOptions opts;
            opts.seed = seed.value_or(0);
            opts.misapply_temperature = fault == "temperature";
            return cmd_checks(opts, std::cout);
        }
        if (*evaluate) {
            EvaluateOptions opts;
            if (!config_path.empty()) opts.config = RunConfig::from_yaml_file(config_path);
            opts.seed = seed;
            opts.force = force;
            const auto out = cmd_evaluate(run_dir, opts, &std::cerr);
            std::cout << "worst_case_return," << out.worst_case.worst_case_return << "\naverage_return,"
                      << out.worst_case.average_return << "\n";
            return exit_code::kOk;
        }
        auto config = RunConfig::from_yaml_file(config_path);
        if (seed) config = config.with("seed", *seed);
        const std::filesystem::path out = out_dir.empty() ? config.output_dir() : std::filesystem::path(out_dir);
        if (*train) return cmd_train(config, out, force, &std::cerr).exit_code;
        return cmd_sweep(config, out, workers, &std::cerr).exit_code;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_code::kUsage;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code::kUsage;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return exit_code::kRuntime;
    }
}

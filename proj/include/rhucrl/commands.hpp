#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "rhucrl/checks.hpp"
#include "rhucrl/run_config.hpp"

namespace rhucrl {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;         // bad flags, bad config, refused operation
inline constexpr int kRuntime = 2;       // numeric failure or I/O error
inline constexpr int kChecksFailed = 3;
inline constexpr int kEmptyRun = 4;      // T = 0: artifacts written, nothing learned
}  // namespace exit_code

/// Column order of episodes.csv.
inline constexpr const char* kEpisodeCsvHeader =
    "t,J_opt,J_pess,J_mean,return,gamma_contrib,info_gain,beta,temperature,warmup,config_hash";

/// Writes `content` to `path` via a temporary sibling and a rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

struct TrainOutcome {
    int exit_code = exit_code::kOk;
    nlohmann::json manifest;
};

/// Runs the episodic loop and writes config.json, episodes.csv, timing.csv,
/// policies.jsonl, model snapshots, output_policy.json and manifest.json into
/// `out_dir`. A directory holding a run with a different config hash is
/// refused unless `force`.
TrainOutcome cmd_train(const RunConfig& config, const std::filesystem::path& out_dir, bool force = false,
                       std::ostream* log = nullptr);

struct EvaluateOptions {
    std::optional<RunConfig> config;  // defaults to the run's own config.json
    std::optional<std::uint64_t> seed;
    bool force = false;  // accept config-hash mismatches
};

struct EvaluateOutcome {
    EvaluationReport worst_case;
    std::optional<EvaluationReport> sweep;  // parameter setting only
};

/// Freezes the run's output policy and writes eval/worst_case.{json,csv}
/// (plus eval/sweep.{json,csv} for the parameter setting); records them in
/// the manifest.
EvaluateOutcome cmd_evaluate(const std::filesystem::path& run_dir, const EvaluateOptions& options = {},
                              std::ostream* log = nullptr);

struct SweepCellResult {
    double axis_value = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double worst_case_return = 0.0;
    double average_return = 0.0;
};

struct SweepOutcome {
    int exit_code = exit_code::kOk;
    std::vector<SweepCellResult> cells;
};

/// Aggregated CSV columns.
inline constexpr const char* kSweepCsvHeader =
    "axis,value,cells,failed,worst_mean,worst_std,average_mean,average_std,config_hash";

/// train + evaluate for every (axis value, seed) of the template's sweep
/// block, on `workers` threads. Writes cells.csv and sweep.csv; failing cells
/// are recorded and the sweep continues (exit code 2 if any failed).
SweepOutcome cmd_sweep(const RunConfig& config_template, const std::filesystem::path& out_dir, int workers = 1,
                       std::ostream* log = nullptr);

/// Runs the property suites, prints the table and returns 0 or 3.
int cmd_checks(const CheckOptions& options, std::ostream& out);

}  // namespace rhucrl

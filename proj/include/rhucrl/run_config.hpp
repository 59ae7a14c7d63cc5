#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "rhucrl/evaluation.hpp"
#include "rhucrl/learner.hpp"

namespace rhucrl {

/// Schema or value error in a run configuration; `path()` is the offending
/// key path, e.g. "model.beta.mode".
class ConfigError : public InvalidArgument {
   public:
    ConfigError(std::string path, const std::string& message)
        : InvalidArgument(path + ": " + message), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

   private:
    std::string path_;
};

/// A validated experiment configuration. The tree always holds every key
/// (defaults filled in), so its canonical dump identifies the run.
class RunConfig {
   public:
    RunConfig();  // all defaults

    static RunConfig from_yaml(const std::string& text);
    static RunConfig from_yaml_file(const std::filesystem::path& path);
    /// Overlays `user` on the defaults; unknown keys and type mismatches throw.
    static RunConfig from_json(const nlohmann::json& user);

    /// Full default tree; doubles as the schema.
    static const nlohmann::json& defaults();

    const nlohmann::json& tree() const { return tree_; }
    /// 16 hex digits of FNV-1a over the canonical JSON dump.
    std::string hash() const;

    /// Sets one value by dotted path, re-validating the result.
    RunConfig with(const std::string& path, const nlohmann::json& value) const;

    std::uint64_t seed() const;
    int episodes() const;
    std::filesystem::path output_dir() const;
    int snapshot_every() const;
    RobustSetting setting() const;

    /// The training environment, wrapped for the configured setting.
    std::shared_ptr<Environment> make_environment() const;
    /// The unwrapped physical environment.
    std::shared_ptr<Environment> make_base_environment() const;
    GpModelConfig model_config() const;
    LearnerSettings learner_settings(const Environment& env) const;
    WorstCaseSettings worst_case_settings() const;
    /// Parameter-grid evaluation for the parameter setting (empty values when
    /// no sweep is configured).
    SweepSpec evaluation_sweep() const;

   private:
    void validate() const;
    nlohmann::json tree_;
};

/// FNV-1a (64 bit) of a byte string, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace rhucrl

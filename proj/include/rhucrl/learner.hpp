#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rhucrl/environment.hpp"
#include "rhucrl/gp_model.hpp"
#include "rhucrl/policy.hpp"
#include "rhucrl/policy_optimization.hpp"

namespace rhucrl {

enum class AlgorithmVariant {
    RHUCRL,       // optimistic robust agent, pessimistic adversary
    HUCRL,        // optimistic agent against the nominal (singleton) adversary
    MiniMax,      // expected objective for both players
    BestResponse  // optimistic agent, expected-objective adversary
};

std::string to_string(AlgorithmVariant variant);
AlgorithmVariant variant_from_string(const std::string& name);

struct PolicyFamilies {
    PolicyFamily agent;
    PolicyFamily adversary;
    PolicyFamily eta;
};

/// The singleton adversary family that always plays the nominal action.
PolicyFamily nominal_adversary_family(const Environment& env);

struct LearnerSettings {
    AlgorithmVariant variant = AlgorithmVariant::RHUCRL;
    PolicyFamilies families;
    OptimizerBudget agent_budget;
    OptimizerBudget adversary_budget;
    OptimizerBudget value_budget;  // η searches behind J^(o)_t and J^(p)_t
    BetaSchedule beta = BetaSchedule::fixed(1.0);
    bool recalibrate = false;       // hold out every 10th transition for temperature scaling
    int warmup_episodes = 0;        // episodes with random policies before the first solve
    bool warm_start = true;         // seed solves with the previous episode's solution
};

struct EpisodeRecord {
    int t = 0;
    PolicyParams agent;
    PolicyParams adversary;
    PolicyParams eta_optimistic;
    PolicyParams eta_pessimistic;
    double j_optimistic = 0.0;
    double j_pessimistic = 0.0;
    double j_mean = 0.0;  // η ≡ 0 value under the same noise
    double realized_return = 0.0;
    double gamma_contribution = 0.0;  // Σ p·σ²(z) over the episode's inputs, pre-update posterior
    double info_gain = 0.0;
    double beta = 0.0;
    double temperature = 1.0;
    double seconds = 0.0;
    bool warmup = false;
};

/// State of the episodic loop: the model, the data and the per-episode records.
class Learner {
   public:
    Learner(std::shared_ptr<const Environment> env, GpModelConfig model_config, LearnerSettings settings,
            std::uint64_t master_seed);
    /// Same, for a prebuilt (possibly environment-free) model.
    Learner(std::shared_ptr<const Environment> env, GpDynamicsModel model, LearnerSettings settings,
            std::uint64_t master_seed);

    /// Selects (π_t, π̄_t), deploys them on the true system, refits the model
    /// and records J^(o)_t, J^(p)_t and the realized return.
    const EpisodeRecord& run_episode();

    const std::vector<EpisodeRecord>& records() const { return records_; }
    const GpDynamicsModel& model() const { return model_; }
    const ComplexityTracker& tracker() const { return tracker_; }
    const Dataset& data() const { return data_; }
    const Environment& environment() const { return *env_; }
    const LearnerSettings& settings() const { return settings_; }
    std::uint64_t master_seed() const { return master_seed_; }
    /// β for the current model.
    double current_beta() const;

   private:
    std::shared_ptr<const Environment> env_;
    GpDynamicsModel model_;
    LearnerSettings settings_;
    std::uint64_t master_seed_;
    Dataset data_;
    ComplexityTracker tracker_;
    std::vector<ValidationPoint> validation_;
    std::vector<EpisodeRecord> records_;
};

/// t* = argmax_t J^(p)_t (1-based, ties → smallest t) and the stored π_{t*}.
struct OutputPolicy {
    int t = 0;
    PolicyParams agent;
};
OutputPolicy output_policy(const std::vector<EpisodeRecord>& records);

/// Robust cumulative regret against a benchmark robust value.
struct RegretLedger {
    double benchmark = 0.0;
    bool proxy = false;  // benchmark is a best-known value, not an exact optimum
    std::vector<double> instantaneous;
    std::vector<double> cumulative;
    std::vector<int> flagged;  // 1-based episodes with negative regret (proxy mode)

    double average(int t) const;  // R_t / t
};

/// Appends benchmark − value and the running sum. Negative regrets are kept
/// as they are; in proxy mode they are flagged.
RegretLedger& regret_update(RegretLedger& ledger, double episode_value);

}  // namespace rhucrl

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rhucrl/environment.hpp"
#include "rhucrl/gp_model.hpp"
#include "rhucrl/policy.hpp"
#include "rhucrl/random.hpp"

namespace rhucrl {

/// The dynamics a rollout runs on. Rewards, s₀, H, the noise scale and state
/// wrapping always come from `env`; transitions come from `env` itself (true
/// system) or from `model` (mean or hallucinated predictions).
struct World {
    enum class Kind { True, Model };

    const Environment* env = nullptr;
    const GpDynamicsModel* model = nullptr;
    double beta = 0.0;
    Kind kind = Kind::True;

    static World true_system(const Environment& env) { return {&env, nullptr, 0.0, Kind::True}; }
    static World learned(const Environment& env, const GpDynamicsModel& model, double beta) {
        return {&env, &model, beta, Kind::Model};
    }
};

/// Common random numbers for a batch of rollouts: per particle and step, p
/// noise draws (already scaled) followed by one coin, drawn in that order from
/// a single stream. Particle 0 matches `rollout` with the same seed.
class NoiseBank {
   public:
    NoiseBank(const EnvironmentSpec& spec, int particles, std::uint64_t seed);

    int particles() const { return particles_; }
    int horizon() const { return horizon_; }
    std::uint64_t seed() const { return seed_; }
    const double* noise(int particle, int step) const {
        return noise_.data() + (static_cast<std::size_t>(particle) * horizon_ + step) * state_dim_;
    }
    double coin(int particle, int step) const { return coins_[static_cast<std::size_t>(particle) * horizon_ + step]; }

   private:
    int particles_;
    int horizon_;
    int state_dim_;
    std::uint64_t seed_;
    std::vector<double> noise_;
    std::vector<double> coins_;
};

struct ValueEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int particles = 1;
    std::uint64_t seed = 0;
};

/// One (π, π̄, η) combination to roll out. `eta` is ignored on the true system
/// and may be null (η ≡ 0).
struct RolloutJob {
    const PolicyParams* agent = nullptr;
    const PolicyParams* adversary = nullptr;
    const PolicyParams* eta = nullptr;
};

/// Rolls every job out on every particle of `noise`, all in lockstep. The
/// return of one rollout is Σ_{h=0}^{H} r(s_h, π(s_h), π̄(s_h)).
std::vector<ValueEstimate> evaluate_jobs(const World& world, const std::vector<RolloutJob>& jobs,
                                         const NoiseBank& noise);

/// Monte Carlo value of (π, π̄) under `world` (η ≡ 0 unless given).
ValueEstimate estimate_J(const World& world, const PolicyParams& agent, const PolicyParams& adversary, int particles,
                         std::uint64_t seed, const PolicyParams* eta = nullptr);

struct OptimizerBudget {
    int population = 64;
    double elite_fraction = 0.1;
    int iterations = 30;
    int inner_population = 64;
    int inner_iterations = 15;
    int particles = 8;
    int restarts = 1;
    double initial_std = 1.0;
    double min_std = 0.05;

    void validate() const;
    int elite_count(int population_size) const;
};

/// Ask/tell cross-entropy search (maximizing). Iteration 0 evaluates the
/// anchors followed by Gaussian samples; later iterations re-evaluate the
/// previous elites followed by fresh samples. Ties keep the lowest index and
/// the earliest iteration. A zero-dimensional search evaluates one empty
/// candidate once.
class CrossEntropySearch {
   public:
    CrossEntropySearch(int dim, int population, int elites, int iterations, double initial_std, double min_std,
                       std::uint64_t seed, std::vector<Vector> anchors = {});

    bool done() const;
    const std::vector<Vector>& ask();
    void tell(const std::vector<double>& scores);

    int dim() const { return dim_; }
    const Vector& best() const { return best_; }
    double best_score() const { return best_score_; }
    int evaluations() const { return evaluations_; }
    /// Every (candidate, score) pair told so far.
    const std::vector<double>& history() const { return history_; }

   private:
    int dim_;
    int population_;
    int elites_;
    int iterations_;
    double min_std_;
    RandomStream rng_;
    std::vector<Vector> anchors_;
    Vector mean_;
    Vector std_;
    std::vector<Vector> candidates_;
    std::vector<Vector> elite_set_;
    int iteration_ = 0;
    bool asked_ = false;
    Vector best_;
    double best_score_;
    int evaluations_ = 0;
    std::vector<double> history_;
};

enum class Objective {
    Optimistic,   // max over η
    Pessimistic,  // min over η
    Expected      // mean model, η ≡ 0
};

struct HallucinatedValue {
    double value = 0.0;       // J^(o) or J^(p)
    double anchor_value = 0.0;  // value at η ≡ 0 under the same noise
    PolicyParams eta;
};

/// J^(o)(π, π̄) = max over η of J(f^(o), π, π̄), by population search with
/// η ≡ 0 always evaluated; the result is ≥ the η ≡ 0 value bit-for-bit.
HallucinatedValue optimistic_value(const World& world, const PolicyParams& agent, const PolicyParams& adversary,
                                   const PolicyFamily& eta_family, const OptimizerBudget& budget, std::uint64_t seed);

/// J^(p)(π, π̄) = min over η; mirror of optimistic_value.
HallucinatedValue pessimistic_value(const World& world, const PolicyParams& agent, const PolicyParams& adversary,
                                    const PolicyFamily& eta_family, const OptimizerBudget& budget,
                                    std::uint64_t seed);

struct MaximinResult {
    PolicyParams agent;
    PolicyParams adversary;  // inner minimizer for the returned agent
    PolicyParams eta;        // η paired with the agent (optimistic role only)
    double value = 0.0;      // max over π of (min over π̄) of the objective
    int evaluations = 0;
};

/// Outer population search over π (jointly with η^(o) for the optimistic
/// role), scoring each candidate by a full inner minimization over π̄. Inner
/// searches of one outer iteration run in lockstep and share their seed.
MaximinResult solve_maximin(Objective role, const World& world, const PolicyFamily& agent_family,
                            const PolicyFamily& adversary_family, const PolicyFamily& eta_family,
                            const OptimizerBudget& budget, std::uint64_t seed,
                            const std::vector<Vector>& agent_anchors = {});

struct AdversaryResult {
    PolicyParams adversary;
    PolicyParams eta;  // η^(p) paired with the adversary (pessimistic role)
    double value = 0.0;
    int evaluations = 0;
};

/// Minimizes the objective over π̄ (jointly with η for the pessimistic role,
/// which is exact since both minimize) with π frozen.
AdversaryResult solve_adversary(Objective role, const World& world, const PolicyParams& agent,
                                const PolicyFamily& adversary_family, const PolicyFamily& eta_family,
                                const OptimizerBudget& budget, std::uint64_t seed,
                                const std::vector<Vector>& adversary_anchors = {});

}  // namespace rhucrl

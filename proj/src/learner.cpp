#include "rhucrl/learner.hpp"

#include <chrono>
#include <cmath>

namespace rhucrl {

std::string to_string(AlgorithmVariant variant) {
    switch (variant) {
        case AlgorithmVariant::RHUCRL: return "rh-ucrl";
        case AlgorithmVariant::HUCRL: return "h-ucrl";
        case AlgorithmVariant::MiniMax: return "minimax";
        case AlgorithmVariant::BestResponse: return "best-response";
    }
    return "unknown";
}

AlgorithmVariant variant_from_string(const std::string& name) {
    if (name == "rh-ucrl") return AlgorithmVariant::RHUCRL;
    if (name == "h-ucrl") return AlgorithmVariant::HUCRL;
    if (name == "minimax") return AlgorithmVariant::MiniMax;
    if (name == "best-response") return AlgorithmVariant::BestResponse;
    throw InvalidArgument("unknown algorithm variant '" + name + "'");
}

PolicyFamily nominal_adversary_family(const Environment& env) {
    PolicyFamily family;
    family.features.kind = FeatureKind::Fixed;
    family.features.input_dim = env.spec().state_dim;
    family.box = env.spec().adversary_box;
    family.singleton = true;
    family.singleton_value = env.nominal_adversary_action();
    return family;
}

// ---------------------------------------------------------------- learner

Learner::Learner(std::shared_ptr<const Environment> env, GpModelConfig model_config, LearnerSettings settings,
                 std::uint64_t master_seed)
    : Learner(env, GpDynamicsModel(env, std::move(model_config)), std::move(settings), master_seed) {}

Learner::Learner(std::shared_ptr<const Environment> env, GpDynamicsModel model, LearnerSettings settings,
                 std::uint64_t master_seed)
    : env_(std::move(env)),
      model_(std::move(model)),
      settings_(std::move(settings)),
      master_seed_(master_seed),
      data_(env_->spec().horizon) {
    settings_.agent_budget.validate();
    settings_.adversary_budget.validate();
    settings_.value_budget.validate();
    if (settings_.warmup_episodes < 0) throw InvalidArgument("warm-up episodes must be >= 0");
    if (settings_.variant == AlgorithmVariant::HUCRL) settings_.families.adversary = nominal_adversary_family(*env_);
    const auto& spec = env_->spec();
    if (settings_.families.agent.box.dim() != spec.action_dim ||
        settings_.families.adversary.box.dim() != spec.adversary_dim ||
        settings_.families.eta.box.dim() != spec.state_dim)
        throw InvalidArgument("policy family output dimensions do not match the environment");
}

double Learner::current_beta() const { return settings_.beta(model_.regularizer(), tracker_.information_gain()); }

const EpisodeRecord& Learner::run_episode() {
    const auto start = std::chrono::steady_clock::now();
    const int t = static_cast<int>(records_.size()) + 1;
    const SeedContract seeds{master_seed_};
    const std::uint64_t episode_seed = derive_seed(seeds.stream(streams::kOptimizer).seed(), static_cast<std::uint64_t>(t));
    const auto& fam = settings_.families;

    EpisodeRecord rec;
    rec.t = t;
    rec.beta = current_beta();
    rec.temperature = model_.temperature();
    const World world = World::learned(*env_, model_, rec.beta);

    try {
        const PolicyParams* prev_agent = records_.empty() ? nullptr : &records_.back().agent;
        const PolicyParams* prev_adv = records_.empty() ? nullptr : &records_.back().adversary;
        std::vector<Vector> agent_anchors, adversary_anchors;
        if (settings_.warm_start && prev_agent && prev_agent->parameter_count() == fam.agent.parameter_count())
            agent_anchors.push_back(prev_agent->parameters());
        if (settings_.warm_start && prev_adv && prev_adv->parameter_count() == fam.adversary.parameter_count())
            adversary_anchors.push_back(prev_adv->parameters());

        if (t <= settings_.warmup_episodes) {
            rec.warmup = true;
            RandomStream rng(derive_seed(episode_seed, "warmup"));
            rec.agent = fam.agent.zero();
            rec.agent.set_parameters(rng.normal_vector(fam.agent.parameter_count()));
            rec.adversary = fam.adversary.zero();
            rec.adversary.set_parameters(rng.normal_vector(fam.adversary.parameter_count()));
        } else {
            const Objective agent_role =
                settings_.variant == AlgorithmVariant::MiniMax ? Objective::Expected : Objective::Optimistic;
            const auto agent = solve_maximin(agent_role, world, fam.agent, fam.adversary, fam.eta,
                                             settings_.agent_budget, derive_seed(episode_seed, "agent"),
                                             agent_anchors);
            rec.agent = agent.agent;
            switch (settings_.variant) {
                case AlgorithmVariant::MiniMax: rec.adversary = agent.adversary; break;
                case AlgorithmVariant::HUCRL: rec.adversary = fam.adversary.zero(); break;
                case AlgorithmVariant::RHUCRL:
                case AlgorithmVariant::BestResponse: {
                    const Objective role = settings_.variant == AlgorithmVariant::RHUCRL ? Objective::Pessimistic
                                                                                       : Objective::Expected;
                    rec.adversary = solve_adversary(role, world, rec.agent, fam.adversary, fam.eta,
                                                    settings_.adversary_budget,
                                                    derive_seed(episode_seed, "adversary"), adversary_anchors)
                                        .adversary;
                    break;
                }
            }
        }

        // Identical seeds for both η searches make J^(p) ≤ J(η≡0) ≤ J^(o) exact.
        const std::uint64_t value_seed = derive_seed(episode_seed, "values");
        const auto opt = optimistic_value(world, rec.agent, rec.adversary, fam.eta, settings_.value_budget, value_seed);
        const auto pess =
            pessimistic_value(world, rec.agent, rec.adversary, fam.eta, settings_.value_budget, value_seed);
        rec.j_optimistic = opt.value;
        rec.j_pessimistic = pess.value;
        rec.j_mean = opt.anchor_value;
        rec.eta_optimistic = opt.eta;
        rec.eta_pessimistic = pess.eta;

        RandomStream noise = seeds.stream(streams::kEnvironmentNoise).child(static_cast<std::uint64_t>(t));
        const PolicyParams& agent = rec.agent;
        const PolicyParams& adversary = rec.adversary;
        const Trajectory traj = rollout(
            *env_, [&](const Vector& s) { return agent.act(s); }, [&](const Vector& s) { return adversary.act(s); },
            noise, t);
        rec.realized_return = traj.total_reward;

        // Complexity bookkeeping under the posterior the episode was planned with.
        for (const auto& tr : traj.transitions) {
            const Vector z = join_input(tr.state, tr.agent_action, tr.adversary_action);
            const double var = model_.normalized_variance(z);
            rec.gamma_contribution += model_.state_dim() * var;
            rec.info_gain += info_gain_increment(model_, z, &tracker_);
        }

        data_.append_episode(traj);
        if (settings_.recalibrate) {
            std::vector<Transition> train;
            for (std::size_t i = 0; i < traj.transitions.size(); ++i) {
                const auto& tr = traj.transitions[i];
                if (i % 10 == 9)
                    validation_.push_back({tr.state, tr.agent_action, tr.adversary_action, tr.next_state});
                else
                    train.push_back(tr);
            }
            model_.fit(train);
            if (!validation_.empty()) rec.temperature = recalibrate(model_, validation_).temperature;
        } else {
            model_.fit(traj.transitions);
        }
    } catch (const std::exception& e) {
        throw NumericError("episode " + std::to_string(t) + ": " + e.what());
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    records_.push_back(std::move(rec));
    return records_.back();
}

// ----------------------------------------------------------- output rule

OutputPolicy output_policy(const std::vector<EpisodeRecord>& records) {
    if (records.empty()) throw InvalidArgument("output policy needs at least one episode");
    std::size_t best = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (std::isnan(records[i].j_pessimistic))
            throw NumericError("pessimistic value of episode " + std::to_string(records[i].t) + " is NaN");
        if (records[i].j_pessimistic > records[best].j_pessimistic) best = i;
    }
    return {records[best].t, records[best].agent};
}

// ---------------------------------------------------------------- regret

double RegretLedger::average(int t) const {
    if (t < 1 || t > static_cast<int>(cumulative.size())) throw InvalidArgument("episode out of range");
    return cumulative[t - 1] / t;
}

RegretLedger& regret_update(RegretLedger& ledger, double episode_value) {
    const double r = ledger.benchmark - episode_value;
    ledger.instantaneous.push_back(r);
    ledger.cumulative.push_back((ledger.cumulative.empty() ? 0.0 : ledger.cumulative.back()) + r);
    if (ledger.proxy && r < 0.0) ledger.flagged.push_back(static_cast<int>(ledger.instantaneous.size()));
    return ledger;
}

}  // namespace rhucrl

#include "rhucrl/policy_optimization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rhucrl/hallucination.hpp"

namespace rhucrl {

// ------------------------------------------------------------ noise bank

NoiseBank::NoiseBank(const EnvironmentSpec& spec, int particles, std::uint64_t seed)
    : particles_(particles), horizon_(spec.horizon), state_dim_(spec.state_dim), seed_(seed) {
    if (particles < 1) throw InvalidArgument("particles must be >= 1");
    noise_.resize(static_cast<std::size_t>(particles) * horizon_ * state_dim_);
    coins_.resize(static_cast<std::size_t>(particles) * horizon_);
    RandomStream rng(seed);
    std::size_t n = 0;
    std::size_t c = 0;
    for (int k = 0; k < particles; ++k) {
        for (int h = 0; h < horizon_; ++h) {
            for (int i = 0; i < state_dim_; ++i) noise_[n++] = spec.noise_std[i] * rng.normal();
            coins_[c++] = rng.uniform();
        }
    }
}

// ------------------------------------------------------------- rollouts

std::vector<ValueEstimate> evaluate_jobs(const World& world, const std::vector<RolloutJob>& jobs,
                                         const NoiseBank& noise) {
    if (world.env == nullptr) throw InvalidArgument("world has no environment");
    if (world.kind == World::Kind::Model && world.model == nullptr) throw InvalidArgument("model world without model");
    const Environment& env = *world.env;
    const auto& spec = env.spec();
    const int p = spec.state_dim;
    const int q = spec.action_dim;
    const int qa = spec.adversary_dim;
    const int horizon = spec.horizon;
    if (noise.horizon() != horizon) throw InvalidArgument("noise bank horizon does not match the environment");
    const int particles = noise.particles();
    const Eigen::Index rows = static_cast<Eigen::Index>(jobs.size()) * particles;

    bool need_std = false;
    for (const auto& job : jobs) {
        if (job.agent == nullptr || job.adversary == nullptr) throw InvalidArgument("rollout job without policy");
        if (job.eta != nullptr && world.kind == World::Kind::Model && world.beta > 0.0) need_std = true;
    }

    RowMatrix states(rows, p);
    RowMatrix u(rows, q);
    RowMatrix ua(rows, qa);
    for (Eigen::Index r = 0; r < rows; ++r) states.row(r) = spec.initial_state.transpose();
    std::vector<double> returns(static_cast<std::size_t>(rows), 0.0);
    Vector s(p), uv(q), av(qa), w(p);
    std::vector<double> z(static_cast<std::size_t>(p + q + qa));
    std::vector<double> eta(static_cast<std::size_t>(p));

    auto job_of = [particles](Eigen::Index r) { return static_cast<std::size_t>(r / particles); };
    auto act_all = [&] {
        for (Eigen::Index r = 0; r < rows; ++r) {
            const auto& job = jobs[job_of(r)];
            job.agent->act(states.row(r).data(), u.row(r).data());
            job.adversary->act(states.row(r).data(), ua.row(r).data());
        }
    };
    auto load = [&](Eigen::Index r) {
        s = states.row(r).transpose();
        uv = u.row(r).transpose();
        av = ua.row(r).transpose();
    };
    auto check_finite = [&](Eigen::Index r, int h) {
        for (int i = 0; i < p; ++i) {
            if (!std::isfinite(states(r, i)))
                throw NumericError("non-finite state in rollout at step " + std::to_string(h) + " (job " +
                                   std::to_string(job_of(r)) + ")");
        }
    };

    for (int h = 0; h < horizon; ++h) {
        act_all();
        if (world.kind == World::Kind::True) {
            for (Eigen::Index r = 0; r < rows; ++r) {
                load(r);
                const int k = static_cast<int>(r % particles);
                const StepOutcome out = env.evaluate(s, uv, av, noise.coin(k, h));
                returns[r] += out.reward;
                w = Eigen::Map<const Vector>(noise.noise(k, h), p);
                states.row(r) = env.wrap_state(out.mean_next + w).transpose();
                check_finite(r, h + 1);
            }
        } else {
            for (Eigen::Index r = 0; r < rows; ++r) {
                load(r);
                returns[r] += env.reward(s, uv, av);
            }
            const auto pred = world.model->predict_batch(states, u, ua, !need_std);
            for (Eigen::Index r = 0; r < rows; ++r) {
                const auto& job = jobs[job_of(r)];
                const int k = static_cast<int>(r % particles);
                const double* wn = noise.noise(k, h);
                bool hallucinate = need_std && job.eta != nullptr;
                if (hallucinate) {
                    std::copy_n(states.row(r).data(), p, z.data());
                    std::copy_n(u.row(r).data(), q, z.data() + p);
                    std::copy_n(ua.row(r).data(), qa, z.data() + p + q);
                    job.eta->act(z.data(), eta.data());
                }
                for (int i = 0; i < p; ++i) {
                    const double m = pred.mean(r, i);
                    s[i] = (hallucinate ? hallucinated_coordinate(m, world.beta, eta[i], pred.std(r, i)) : m) + wn[i];
                }
                states.row(r) = env.wrap_state(s).transpose();
                check_finite(r, h + 1);
            }
        }
    }
    act_all();
    for (Eigen::Index r = 0; r < rows; ++r) {
        load(r);
        returns[r] += env.reward(s, uv, av);
        if (!std::isfinite(returns[r]))
            throw NumericError("non-finite reward in rollout at step " + std::to_string(horizon));
    }

    std::vector<ValueEstimate> out(jobs.size());
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const double* v = returns.data() + j * particles;
        double mean = 0.0;
        for (int k = 0; k < particles; ++k) mean += v[k];
        mean /= particles;
        double var = 0.0;
        for (int k = 0; k < particles; ++k) var += (v[k] - mean) * (v[k] - mean);
        out[j].mean = mean;
        out[j].std_error = particles > 1 ? std::sqrt(var / (particles - 1) / particles) : 0.0;
        out[j].particles = particles;
        out[j].seed = noise.seed();
    }
    return out;
}

ValueEstimate estimate_J(const World& world, const PolicyParams& agent, const PolicyParams& adversary, int particles,
                         std::uint64_t seed, const PolicyParams* eta) {
    const NoiseBank noise(world.env->spec(), particles, seed);
    return evaluate_jobs(world, {RolloutJob{&agent, &adversary, eta}}, noise).front();
}

// ------------------------------------------------------------- budgets

void OptimizerBudget::validate() const {
    if (population < 1 || iterations < 1 || inner_population < 1 || inner_iterations < 1 || particles < 1 ||
        restarts < 1)
        throw InvalidArgument("optimizer budget entries must be positive");
    if (!(elite_fraction > 0.0 && elite_fraction <= 1.0)) throw InvalidArgument("elite fraction must lie in (0, 1]");
    if (!(initial_std > 0.0) || !(min_std >= 0.0)) throw InvalidArgument("search std must be positive");
}

int OptimizerBudget::elite_count(int population_size) const {
    return std::clamp(static_cast<int>(std::lround(elite_fraction * population_size)), 1, population_size);
}

// --------------------------------------------------------- CEM search

CrossEntropySearch::CrossEntropySearch(int dim, int population, int elites, int iterations, double initial_std,
                                       double min_std, std::uint64_t seed, std::vector<Vector> anchors)
    : dim_(dim),
      population_(population),
      elites_(std::clamp(elites, 1, population)),
      iterations_(iterations),
      min_std_(min_std),
      rng_(seed),
      anchors_(std::move(anchors)),
      best_score_(-std::numeric_limits<double>::infinity()) {
    if (dim < 0 || population < 1 || iterations < 1) throw InvalidArgument("invalid search settings");
    for (const auto& a : anchors_) {
        if (a.size() != dim) throw InvalidArgument("anchor has wrong dimension");
    }
    mean_ = anchors_.empty() ? Vector::Zero(dim) : anchors_.front();
    std_ = Vector::Constant(dim, initial_std);
    best_ = mean_;
}

bool CrossEntropySearch::done() const { return dim_ == 0 ? iteration_ >= 1 : iteration_ >= iterations_; }

const std::vector<Vector>& CrossEntropySearch::ask() {
    if (done()) throw InvalidArgument("search budget exhausted");
    candidates_.clear();
    if (dim_ == 0) {
        candidates_.emplace_back(0);
    } else {
        const auto& seeds = iteration_ == 0 ? anchors_ : elite_set_;
        candidates_.assign(seeds.begin(), seeds.end());
        while (static_cast<int>(candidates_.size()) < population_) {
            Vector x(dim_);
            for (int i = 0; i < dim_; ++i) x[i] = mean_[i] + std_[i] * rng_.normal();
            candidates_.push_back(std::move(x));
        }
    }
    asked_ = true;
    return candidates_;
}

void CrossEntropySearch::tell(const std::vector<double>& scores) {
    if (!asked_) throw InvalidArgument("tell() without ask()");
    if (scores.size() != candidates_.size()) throw InvalidArgument("one score per candidate required");
    asked_ = false;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (std::isnan(scores[i])) throw NumericError("NaN score in population search");
        history_.push_back(scores[i]);
        if (scores[i] > best_score_) {
            best_score_ = scores[i];
            best_ = candidates_[i];
        }
    }
    evaluations_ += static_cast<int>(scores.size());
    ++iteration_;
    if (dim_ == 0) return;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const int n = std::min<int>(elites_, static_cast<int>(order.size()));
    elite_set_.clear();
    for (int e = 0; e < n; ++e) elite_set_.push_back(candidates_[order[e]]);
    Vector mean = Vector::Zero(dim_);
    for (const auto& x : elite_set_) mean += x;
    mean /= n;
    Vector var = Vector::Zero(dim_);
    for (const auto& x : elite_set_) var += (x - mean).cwiseAbs2();
    var /= n;
    mean_ = mean;
    std_ = var.cwiseSqrt().cwiseMax(min_std_);
}

// ------------------------------------------------------------- helpers

namespace {

std::uint64_t sub_seed(std::uint64_t seed, std::string_view label) { return derive_seed(seed, label); }

CrossEntropySearch make_search(int dim, int population, int iterations, const OptimizerBudget& budget,
                               std::uint64_t seed, std::vector<Vector> anchors) {
    return CrossEntropySearch(dim, population, budget.elite_count(population), iterations, budget.initial_std,
                              budget.min_std, seed, std::move(anchors));
}

Vector concat(const Vector& a, const Vector& b) {
    Vector out(a.size() + b.size());
    out << a, b;
    return out;
}

HallucinatedValue hallucinated_value(bool maximize, const World& world, const PolicyParams& agent,
                                     const PolicyParams& adversary, const PolicyFamily& eta_family,
                                     const OptimizerBudget& budget, std::uint64_t seed) {
    budget.validate();
    if (world.kind != World::Kind::Model) throw InvalidArgument("hallucinated values need a model world");
    const NoiseBank noise(world.env->spec(), budget.particles, sub_seed(seed, "noise"));
    const PolicyParams zero = eta_family.zero();

    // The η ≡ 0 anchor is scored on its own so that the optimistic and
    // pessimistic solves see the bit-identical anchor value.
    HallucinatedValue result;
    result.anchor_value = evaluate_jobs(world, {RolloutJob{&agent, &adversary, &zero}}, noise).front().mean;
    result.value = result.anchor_value;
    result.eta = zero;
    if (world.beta == 0.0 || eta_family.parameter_count() == 0) return result;

    const double sign = maximize ? 1.0 : -1.0;
    auto search = make_search(eta_family.parameter_count(), budget.population, budget.iterations, budget,
                              sub_seed(seed, "eta"), {zero.parameters()});
    std::vector<PolicyParams> etas;
    std::vector<RolloutJob> jobs;
    while (!search.done()) {
        const auto& xs = search.ask();
        etas.clear();
        for (const auto& x : xs) etas.push_back(zero.with_parameters(x));
        jobs.clear();
        for (const auto& e : etas) jobs.push_back({&agent, &adversary, &e});
        const auto values = evaluate_jobs(world, jobs, noise);
        std::vector<double> scores(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) scores[i] = sign * values[i].mean;
        search.tell(scores);
    }
    const double found = sign * search.best_score();
    if (sign * found > sign * result.value) {
        result.value = found;
        result.eta = zero.with_parameters(search.best());
    }
    return result;
}

}  // namespace

HallucinatedValue optimistic_value(const World& world, const PolicyParams& agent, const PolicyParams& adversary,
                                   const PolicyFamily& eta_family, const OptimizerBudget& budget, std::uint64_t seed) {
    return hallucinated_value(true, world, agent, adversary, eta_family, budget, seed);
}

HallucinatedValue pessimistic_value(const World& world, const PolicyParams& agent, const PolicyParams& adversary,
                                    const PolicyFamily& eta_family, const OptimizerBudget& budget,
                                    std::uint64_t seed) {
    return hallucinated_value(false, world, agent, adversary, eta_family, budget, seed);
}

// ------------------------------------------------------------ max-min

MaximinResult solve_maximin(Objective role, const World& world, const PolicyFamily& agent_family,
                            const PolicyFamily& adversary_family, const PolicyFamily& eta_family,
                            const OptimizerBudget& budget, std::uint64_t seed,
                            const std::vector<Vector>& agent_anchors) {
    budget.validate();
    if (role == Objective::Pessimistic) throw InvalidArgument("the agent is never selected pessimistically");
    const bool use_eta = role == Objective::Optimistic && world.kind == World::Kind::Model && world.beta > 0.0 &&
                         eta_family.parameter_count() > 0;
    const PolicyParams agent0 = agent_family.zero();
    const PolicyParams adv0 = adversary_family.zero();
    const PolicyParams eta0 = eta_family.zero();
    const int n_agent = agent_family.parameter_count();
    const int n_eta = use_eta ? eta_family.parameter_count() : 0;
    const int n_adv = adversary_family.parameter_count();

    std::vector<Vector> anchors{Vector::Zero(n_agent + n_eta)};
    for (const auto& a : agent_anchors) {
        if (a.size() != n_agent) throw InvalidArgument("agent anchor has wrong dimension");
        anchors.push_back(concat(a, Vector::Zero(n_eta)));
    }

    const NoiseBank noise(world.env->spec(), budget.particles, sub_seed(seed, "noise"));
    const std::uint64_t inner_seed = sub_seed(seed, "inner");
    auto outer = make_search(n_agent + n_eta, budget.population, budget.iterations, budget, sub_seed(seed, "outer"),
                             std::move(anchors));

    MaximinResult result;
    result.value = -std::numeric_limits<double>::infinity();
    std::vector<PolicyParams> agents, etas, adversaries;
    std::vector<RolloutJob> jobs;
    while (!outer.done()) {
        const auto& xs = outer.ask();
        const std::size_t n_outer = xs.size();
        agents.clear();
        etas.clear();
        for (const auto& x : xs) {
            agents.push_back(agent0.with_parameters(x.head(n_agent)));
            etas.push_back(use_eta ? eta0.with_parameters(x.tail(n_eta)) : eta0);
        }
        std::vector<CrossEntropySearch> inner;
        inner.reserve(n_outer);
        for (std::size_t i = 0; i < n_outer; ++i)
            inner.push_back(make_search(n_adv, budget.inner_population, budget.inner_iterations, budget, inner_seed,
                                        {Vector::Zero(n_adv)}));
        // All inner searches share seed and settings, so they stay in lockstep.
        while (!inner.front().done()) {
            adversaries.clear();
            std::vector<std::size_t> offsets(n_outer + 1, 0);
            for (std::size_t i = 0; i < n_outer; ++i) {
                const auto& ys = inner[i].ask();
                for (const auto& y : ys) adversaries.push_back(adv0.with_parameters(y));
                offsets[i + 1] = adversaries.size();
            }
            jobs.clear();
            for (std::size_t i = 0; i < n_outer; ++i) {
                for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k)
                    jobs.push_back({&agents[i], &adversaries[k], use_eta ? &etas[i] : nullptr});
            }
            const auto values = evaluate_jobs(world, jobs, noise);
            result.evaluations += static_cast<int>(values.size());
            for (std::size_t i = 0; i < n_outer; ++i) {
                std::vector<double> scores;
                for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) scores.push_back(-values[k].mean);
                inner[i].tell(scores);
            }
        }
        std::vector<double> scores(n_outer);
        for (std::size_t i = 0; i < n_outer; ++i) scores[i] = -inner[i].best_score();  // min over π̄
        const double before = outer.best_score();
        outer.tell(scores);
        if (outer.best_score() > before) {
            const auto it = std::find(scores.begin(), scores.end(), outer.best_score());
            const std::size_t i = static_cast<std::size_t>(it - scores.begin());
            result.agent = agents[i];
            result.eta = etas[i];
            result.adversary = adv0.with_parameters(inner[i].best());
            result.value = scores[i];
        }
    }
    return result;
}

AdversaryResult solve_adversary(Objective role, const World& world, const PolicyParams& agent,
                                const PolicyFamily& adversary_family, const PolicyFamily& eta_family,
                                const OptimizerBudget& budget, std::uint64_t seed,
                                const std::vector<Vector>& adversary_anchors) {
    budget.validate();
    if (role == Objective::Optimistic) throw InvalidArgument("the adversary is never selected optimistically");
    const bool use_eta = role == Objective::Pessimistic && world.kind == World::Kind::Model && world.beta > 0.0 &&
                         eta_family.parameter_count() > 0;
    const PolicyParams adv0 = adversary_family.zero();
    const PolicyParams eta0 = eta_family.zero();
    const int n_adv = adversary_family.parameter_count();
    const int n_eta = use_eta ? eta_family.parameter_count() : 0;

    std::vector<Vector> anchors{Vector::Zero(n_adv + n_eta)};
    for (const auto& a : adversary_anchors) {
        if (a.size() != n_adv) throw InvalidArgument("adversary anchor has wrong dimension");
        anchors.push_back(concat(a, Vector::Zero(n_eta)));
    }
    const NoiseBank noise(world.env->spec(), budget.particles, sub_seed(seed, "noise"));
    auto search = make_search(n_adv + n_eta, budget.population, budget.iterations, budget, sub_seed(seed, "adversary"),
                              std::move(anchors));

    AdversaryResult result;
    result.value = std::numeric_limits<double>::infinity();
    std::vector<PolicyParams> adversaries, etas;
    std::vector<RolloutJob> jobs;
    while (!search.done()) {
        const auto& xs = search.ask();
        adversaries.clear();
        etas.clear();
        for (const auto& x : xs) {
            adversaries.push_back(adv0.with_parameters(x.head(n_adv)));
            etas.push_back(use_eta ? eta0.with_parameters(x.tail(n_eta)) : eta0);
        }
        jobs.clear();
        for (std::size_t i = 0; i < xs.size(); ++i)
            jobs.push_back({&agent, &adversaries[i], use_eta ? &etas[i] : nullptr});
        const auto values = evaluate_jobs(world, jobs, noise);
        result.evaluations += static_cast<int>(values.size());
        std::vector<double> scores(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) scores[i] = -values[i].mean;
        const double before = search.best_score();
        search.tell(scores);
        if (search.best_score() > before) {
            const std::size_t i =
                static_cast<std::size_t>(std::find(scores.begin(), scores.end(), search.best_score()) - scores.begin());
            result.adversary = adversaries[i];
            result.eta = etas[i];
            result.value = values[i].mean;
        }
    }
    return result;
}

}  // namespace rhucrl

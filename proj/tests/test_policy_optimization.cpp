#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "rhucrl/hallucination.hpp"
#include "rhucrl/policy_optimization.hpp"

using namespace rhucrl;

namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

FeatureMap constant_features(int input_dim) {
    FeatureMap f;
    f.kind = FeatureKind::Constant;
    f.input_dim = input_dim;
    return f;
}

PolicyFamily constant_family(int input_dim, Box box) {
    PolicyFamily fam;
    fam.features = constant_features(input_dim);
    fam.box = std::move(box);
    return fam;
}

PolicyParams constant_policy(int input_dim, double action, double limit = 1.0) {
    return PolicyParams::fixed(input_dim, Box::symmetric(1, limit), scalar(action));
}

// Scalar toy with reward r = s (no quadratic terms), one step: J = s₀ + s₁.
std::shared_ptr<LinearToyEnv> reward_is_state(double b_adv = -0.5) {
    LinearToyParams p;
    p.linear = 1.0;
    p.state_cost = 0.0;
    p.b_adv = b_adv;
    p.horizon = 1;
    return std::make_shared<LinearToyEnv>(p);
}

GpDynamicsModel fitted_toy_model(const std::shared_ptr<LinearToyEnv>& env) {
    GpModelConfig cfg;
    cfg.regularizer = 0.5;
    GpDynamicsModel model(env, cfg);
    std::vector<Transition> data;
    for (int i = 0; i < 6; ++i) {
        const double s = -1.0 + 0.4 * i, u = 0.3 * std::sin(i), ua = 0.2 * std::cos(i);
        const auto out = env->evaluate(scalar(s), scalar(u), scalar(ua), 1.0);
        data.push_back({scalar(s), scalar(u), scalar(ua), out.mean_next, 0.0, i, 1});
    }
    model.fit(data);
    return model;
}

OptimizerBudget small_budget() {
    OptimizerBudget b;
    b.population = 24;
    b.iterations = 12;
    b.inner_population = 24;
    b.inner_iterations = 10;
    b.particles = 1;
    b.initial_std = 2.0;
    return b;
}

}  // namespace

TEST(NoiseBank, ParticleZeroMatchesRolloutStream) {
    PendulumEnv env;
    const NoiseBank bank(env.spec(), 3, 77);
    RandomStream rng(77);
    for (int h = 0; h < env.spec().horizon; ++h) {
        for (int i = 0; i < 2; ++i) EXPECT_EQ(bank.noise(0, h)[i], env.spec().noise_std[i] * rng.normal());
        EXPECT_EQ(bank.coin(0, h), rng.uniform());
    }
}

TEST(EstimateJ, MatchesTrueRollout) {
    PendulumEnv env;
    const auto agent = constant_policy(2, 1.5, 5.0);
    const auto adv = constant_policy(2, -0.5, 1.0);
    const auto est = estimate_J(World::true_system(env), agent, adv, 1, 123);
    RandomStream rng(123);
    const auto traj = rollout(
        env, [](const Vector&) { return scalar(1.5); }, [](const Vector&) { return scalar(-0.5); }, rng);
    EXPECT_EQ(est.mean, traj.total_reward);
}

TEST(EstimateJ, DeterministicEnvHasZeroStdError) {
    LinearToyParams p;
    p.initial_state = 0.5;
    p.horizon = 10;
    LinearToyEnv env(p);
    const auto zero = constant_policy(1, 0.0);
    const auto est = estimate_J(World::true_system(env), zero, zero, 16, 5);
    EXPECT_EQ(est.std_error, 0.0);
    // s stays at 0.5 for H + 1 reward terms of -(0.5)².
    EXPECT_NEAR(est.mean, -11 * 0.25, 1e-10);
    EXPECT_EQ(est.mean, estimate_J(World::true_system(env), zero, zero, 16, 5).mean);
}

TEST(EstimateJ, NonFiniteStateNamesTheStep) {
    LinearToyParams p;
    p.a = 10.0;
    p.initial_state = 1e300;
    p.horizon = 20;
    LinearToyEnv env(p);
    const auto zero = constant_policy(1, 0.0);
    try {
        estimate_J(World::true_system(env), zero, zero, 1, 0);
        FAIL() << "expected a numeric error";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
    }
}

TEST(CrossEntropy, FindsQuadraticOptimumAndKeepsAnchor) {
    CrossEntropySearch cem(2, 32, 4, 25, 1.0, 0.01, 9, {Vector::Zero(2)});
    const Vector target = (Vector(2) << 0.7, -1.2).finished();
    bool first = true;
    while (!cem.done()) {
        const auto& xs = cem.ask();
        if (first) EXPECT_EQ(xs.front(), Vector::Zero(2));
        first = false;
        std::vector<double> scores;
        for (const auto& x : xs) scores.push_back(-(x - target).squaredNorm());
        cem.tell(scores);
    }
    EXPECT_LT((cem.best() - target).norm(), 0.05);
    EXPECT_GE(cem.best_score(), -target.squaredNorm());
}

TEST(CrossEntropy, ZeroDimensionalSearchEvaluatesOnce) {
    CrossEntropySearch cem(0, 32, 4, 25, 1.0, 0.01, 1);
    ASSERT_FALSE(cem.done());
    EXPECT_EQ(cem.ask().size(), 1u);
    cem.tell({3.0});
    EXPECT_TRUE(cem.done());
    EXPECT_EQ(cem.best_score(), 3.0);
    EXPECT_EQ(cem.evaluations(), 1);
}

TEST(HallucinatedValue, ZeroBetaCollapsesToMeanModel) {
    auto env = reward_is_state();
    const auto model = fitted_toy_model(env);
    const World world = World::learned(*env, model, 0.0);
    const auto fam = hallucination_family(env->spec(), FeatureKind::Identity);
    const auto agent = constant_policy(1, 0.3), adv = constant_policy(1, -0.2);
    const auto opt = optimistic_value(world, agent, adv, fam, small_budget(), 4);
    const auto pess = pessimistic_value(world, agent, adv, fam, small_budget(), 4);
    EXPECT_EQ(opt.value, opt.anchor_value);
    EXPECT_EQ(pess.value, opt.value);
}

TEST(HallucinatedValue, OneStepRewardIsStateOracle) {
    auto env = reward_is_state();
    const auto model = fitted_toy_model(env);
    const double beta = 1.5;
    const World world = World::learned(*env, model, beta);
    const auto fam = hallucination_family(env->spec(), FeatureKind::Constant);
    const auto agent = constant_policy(1, 0.3), adv = constant_policy(1, -0.2);
    const auto pred = model.predict(scalar(0.0), scalar(0.3), scalar(-0.2));
    const double mu = pred.mean[0], width = beta * pred.std[0];
    ASSERT_GT(width, 1e-3);

    // J = r(s₀) + r(s₁) = 0 + s₁ with s₁ = μ + β·η·σ, η = tanh(θ) ∈ (-1, 1).
    const auto opt = optimistic_value(world, agent, adv, fam, small_budget(), 8);
    const auto pess = pessimistic_value(world, agent, adv, fam, small_budget(), 8);
    EXPECT_NEAR(opt.anchor_value, mu, 1e-12);
    EXPECT_LE(opt.value, mu + width + 1e-12);
    EXPECT_GE(opt.value, mu + 0.99 * width);
    EXPECT_GE(pess.value, mu - width - 1e-12);
    EXPECT_LE(pess.value, mu - 0.99 * width);
    EXPECT_GT(opt.eta.act(Vector::Zero(3))[0], 0.99);
    EXPECT_LT(pess.eta.act(Vector::Zero(3))[0], -0.99);
}

TEST(HallucinatedValue, SandwichOnPendulumModel) {
    PendulumParams pp;
    pp.horizon = 15;
    auto env = std::make_shared<PendulumEnv>(pp);
    GpDynamicsModel model(env, GpModelConfig{});
    RandomStream data_rng(1);
    model.fit(rollout(
                  *env, [](const Vector& s) { return scalar(std::clamp(-3.0 * s[1], -5.0, 5.0)); },
                  [](const Vector&) { return scalar(0.3); }, data_rng)
                  .transitions);
    const World world = World::learned(*env, model, 1.0);
    FeatureMap f;
    f.kind = FeatureKind::Identity;
    f.input_dim = 2;
    PolicyParams agent(f, Box::symmetric(1, 5.0)), adv(f, Box::symmetric(1, 1.0));
    const auto eta_fam = hallucination_family(env->spec(), FeatureKind::Identity);
    auto budget = small_budget();
    budget.particles = 3;
    RandomStream rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        agent.set_parameters(rng.normal_vector(agent.parameter_count()));
        adv.set_parameters(rng.normal_vector(adv.parameter_count()));
        const auto seed = static_cast<std::uint64_t>(trial);
        const auto opt = optimistic_value(world, agent, adv, eta_fam, budget, seed);
        const auto pess = pessimistic_value(world, agent, adv, eta_fam, budget, seed);
        EXPECT_EQ(opt.anchor_value, pess.anchor_value);
        EXPECT_LE(pess.value, pess.anchor_value);
        EXPECT_GE(opt.value, opt.anchor_value);
        // The η ≡ 0 anchor is the mean-model value under the same noise.
        EXPECT_EQ(opt.anchor_value,
                  estimate_J(world, agent, adv, budget.particles, derive_seed(seed, "noise")).mean);
    }
}

// ------------------------------------------------------------------ maximin

namespace {

// J(u, ū) on LinearToy for constant policies, H = 1 (two reward terms).
double toy_value(const LinearToyEnv& env, double u, double ua) {
    const auto agent = constant_policy(1, u), adv = constant_policy(1, ua);
    return estimate_J(World::true_system(env), agent, adv, 1, 0).mean;
}

struct GridOracle {
    double maximin = -std::numeric_limits<double>::infinity();
    double minimax = std::numeric_limits<double>::infinity();
};

GridOracle grid_oracle(const LinearToyEnv& env) {
    GridOracle g;
    std::vector<double> col_max(101, -std::numeric_limits<double>::infinity());
    for (int i = 0; i <= 100; ++i) {
        double row_min = std::numeric_limits<double>::infinity();
        for (int j = 0; j <= 100; ++j) {
            const double v = toy_value(env, -1.0 + 0.02 * i, -1.0 + 0.02 * j);
            row_min = std::min(row_min, v);
            col_max[j] = std::max(col_max[j], v);
        }
        g.maximin = std::max(g.maximin, row_min);
    }
    for (double v : col_max) g.minimax = std::min(g.minimax, v);
    return g;
}

}  // namespace

TEST(Maximin, SaddlePointMatchesGridOracle) {
    LinearToyParams p;
    p.horizon = 1;
    p.target = 0.5;
    p.action_cost = 0.1;
    p.adversary_cost = 0.5;
    LinearToyEnv env(p);
    const auto oracle = grid_oracle(env);
    ASSERT_NEAR(oracle.maximin, oracle.minimax, 1e-3);

    const auto fam = constant_family(1, Box::symmetric(1, 1.0));
    const auto eta = hallucination_family(env.spec(), FeatureKind::Constant);
    const auto r = solve_maximin(Objective::Expected, World::true_system(env), fam, fam, eta, small_budget(), 3);
    EXPECT_NEAR(r.value, oracle.maximin, 0.05 * std::abs(oracle.maximin));
    EXPECT_NEAR(toy_value(env, r.agent.act(scalar(0.0))[0], r.adversary.act(scalar(0.0))[0]), r.value, 1e-12);
}

TEST(Maximin, RespectsOrderWithoutSaddle) {
    LinearToyParams p;
    p.horizon = 1;
    p.adversary_cost = 0.05;  // J = −(u − ½ū)² + 0.1·ū², concave in ū
    LinearToyEnv env(p);
    const auto oracle = grid_oracle(env);
    ASSERT_GT(oracle.minimax - oracle.maximin, 0.1);

    const auto fam = constant_family(1, Box::symmetric(1, 1.0));
    const auto eta = hallucination_family(env.spec(), FeatureKind::Constant);
    const auto r = solve_maximin(Objective::Expected, World::true_system(env), fam, fam, eta, small_budget(), 3);
    EXPECT_NEAR(r.value, oracle.maximin, 0.01);
}

TEST(Maximin, SingletonAdversaryReducesToPlainMaximization) {
    auto env = reward_is_state();
    const auto model = fitted_toy_model(env);
    const World world = World::learned(*env, model, 1.0);
    const auto agent_fam = constant_family(1, Box::symmetric(1, 1.0));
    PolicyFamily singleton;
    singleton.features.kind = FeatureKind::Fixed;
    singleton.features.input_dim = 1;
    singleton.box = Box::symmetric(1, 1.0);
    singleton.singleton = true;
    singleton.singleton_value = scalar(0.0);
    const auto eta = hallucination_family(env->spec(), FeatureKind::Constant);
    const auto budget = small_budget();
    const auto a = solve_maximin(Objective::Optimistic, world, agent_fam, singleton, eta, budget, 11);
    const auto b = solve_maximin(Objective::Optimistic, world, agent_fam, singleton, eta, budget, 11);
    EXPECT_TRUE(a.agent == b.agent);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.adversary.act(scalar(0.0))[0], 0.0);
    // Reward = s′ and b > 0: the agent pushes u to the upper edge.
    EXPECT_GT(a.agent.act(scalar(0.0))[0], 0.95);
}

TEST(Maximin, PessimisticRoleRejected) {
    auto env = reward_is_state();
    const auto fam = constant_family(1, Box::symmetric(1, 1.0));
    const auto eta = hallucination_family(env->spec(), FeatureKind::Constant);
    EXPECT_THROW(solve_maximin(Objective::Pessimistic, World::true_system(*env), fam, fam, eta, small_budget(), 0),
                 InvalidArgument);
}

TEST(Adversary, NegativeChannelPushesToGridOptimum) {
    auto env = reward_is_state(-0.5);
    const auto fam = constant_family(1, Box::symmetric(1, 1.0));
    const auto eta = hallucination_family(env->spec(), FeatureKind::Constant);
    const auto agent = constant_policy(1, 0.2);
    const auto r = solve_adversary(Objective::Expected, World::true_system(*env), agent, fam, eta, small_budget(), 2);
    // J = u + b̄·ū is minimized at ū = +1 when b̄ < 0.
    const double best = toy_value(*env, 0.2, 1.0);
    EXPECT_NEAR(r.value, best, 0.01);
    EXPECT_GT(r.adversary.act(scalar(0.0))[0], 0.95);
}

TEST(Adversary, ZeroInfluenceChannelKeepsAnchorValue) {
    auto env = reward_is_state(0.0);
    const auto model = fitted_toy_model(env);
    const World world = World::learned(*env, model, 1.0);
    const auto fam = constant_family(1, Box::symmetric(1, 1.0));
    const auto eta = hallucination_family(env->spec(), FeatureKind::Constant);
    const auto agent = constant_policy(1, 0.2);
    const auto budget = small_budget();
    const auto r = solve_adversary(Objective::Pessimistic, world, agent, fam, eta, budget, 5);
    const auto at_zero = pessimistic_value(world, agent, fam.zero(), eta, budget, 5);
    EXPECT_LE(r.value, at_zero.value + 1e-6);
}

TEST(Adversary, PessimisticNeverWorseThanZeroAnchor) {
    auto env = reward_is_state(-0.5);
    const auto model = fitted_toy_model(env);
    const World world = World::learned(*env, model, 1.0);
    const auto fam = constant_family(1, Box::symmetric(1, 1.0));
    const auto eta = hallucination_family(env->spec(), FeatureKind::Constant);
    const auto agent = constant_policy(1, 0.2);
    const auto budget = small_budget();
    const auto r = solve_adversary(Objective::Pessimistic, world, agent, fam, eta, budget, 6);
    // η ≡ 0 with π̄ ≡ 0 is the first candidate of the joint search.
    const double zero = estimate_J(world, agent, fam.zero(), budget.particles, derive_seed(6, "noise")).mean;
    EXPECT_LE(r.value, zero);
    EXPECT_THROW(solve_adversary(Objective::Optimistic, world, agent, fam, eta, budget, 6), InvalidArgument);
}

TEST(Solvers, PureFunctionsOfSeed) {
    auto env = reward_is_state();
    const auto model = fitted_toy_model(env);
    const World world = World::learned(*env, model, 1.0);
    const auto fam = constant_family(1, Box::symmetric(1, 1.0));
    const auto eta = hallucination_family(env->spec(), FeatureKind::Constant);
    const auto a = solve_maximin(Objective::Optimistic, world, fam, fam, eta, small_budget(), 42);
    const auto b = solve_maximin(Objective::Optimistic, world, fam, fam, eta, small_budget(), 42);
    EXPECT_TRUE(a.agent == b.agent);
    EXPECT_TRUE(a.adversary == b.adversary);
    EXPECT_EQ(a.value, b.value);
}

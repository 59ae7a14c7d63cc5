#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rhucrl/environment.hpp"
#include "rhucrl/random.hpp"

using namespace rhucrl;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

PendulumParams quiet_pendulum() {
    PendulumParams p;
    p.noise_std = 0.0;
    return p;
}

StatePolicy constant(Vector v) {
    return [v](const Vector&) { return v; };
}

}  // namespace

TEST(Trajectory, SingleStepChains) {
    Trajectory t;
    t.transitions.push_back({vec({0.0}), vec({0.0}), vec({0.0}), vec({1.0}), 0.0, 0, 1});
    EXPECT_TRUE(chain_check(t));
}

TEST(Trajectory, BrokenChainDetected) {
    Trajectory t;
    t.transitions.push_back({vec({0.0}), vec({0.0}), vec({0.0}), vec({1.0}), 0.0, 0, 1});
    t.transitions.push_back({vec({2.0}), vec({0.0}), vec({0.0}), vec({3.0}), 0.0, 1, 1});
    EXPECT_FALSE(chain_check(t));
}

TEST(Trajectory, RolloutChainsAndSumsRewards) {
    PendulumParams p;
    p.horizon = 3;
    PendulumEnv env(p);
    RandomStream rng(4);
    const Trajectory t = rollout(env, constant(vec({1.0})), constant(vec({0.0})), rng);
    ASSERT_EQ(t.horizon(), 3);
    EXPECT_TRUE(chain_check(t));
    double total = t.terminal_reward;
    for (const auto& tr : t.transitions) total += env.reward(tr.state, tr.agent_action, tr.adversary_action);
    EXPECT_NEAR(total, t.total_reward, 1e-12);
}

TEST(Trajectory, JsonLinesRoundTrip) {
    LinearToyEnv env;
    RandomStream rng(1);
    const Trajectory t = rollout(env, constant(vec({0.3})), constant(vec({-0.2})), rng, 7);
    const auto back = transitions_from_jsonl(trajectory_to_jsonl(t));
    ASSERT_EQ(back.size(), t.transitions.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].state, t.transitions[i].state);
        EXPECT_EQ(back[i].next_state, t.transitions[i].next_state);
        EXPECT_EQ(back[i].agent_action, t.transitions[i].agent_action);
        EXPECT_EQ(back[i].adversary_action, t.transitions[i].adversary_action);
        EXPECT_EQ(back[i].step, t.transitions[i].step);
        EXPECT_EQ(back[i].episode, 7);
    }
}

TEST(Dataset, SizeIsMultipleOfHorizon) {
    LinearToyEnv env;
    Dataset data(env.spec().horizon);
    for (int e = 1; e <= 3; ++e) {
        RandomStream rng(static_cast<std::uint64_t>(e));
        data.append_episode(rollout(env, constant(vec({0.1})), constant(vec({0.0})), rng, e));
        EXPECT_EQ(data.size(), static_cast<std::size_t>(e * env.spec().horizon));
        EXPECT_EQ(data.episode_count(), e);
    }
}

TEST(Random, SeedContractIsDeterministicAndLabelled) {
    SeedContract a{42}, b{42};
    EXPECT_EQ(a.stream(streams::kOptimizer).seed(), b.stream(streams::kOptimizer).seed());
    EXPECT_NE(a.stream(streams::kOptimizer).seed(), a.stream(streams::kEvaluation).seed());
    auto x = a.stream(streams::kEnvironmentNoise);
    auto y = b.stream(streams::kEnvironmentNoise);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(x.normal(), y.normal());
}

TEST(Pendulum, UprightRestIsFixedPointWithZeroReward) {
    PendulumEnv env(quiet_pendulum());
    auto [next, r] = step(env, vec({0.0, 0.0}), vec({0.0}), vec({0.0}), vec({0.0, 0.0}));
    EXPECT_EQ(next, vec({0.0, 0.0}));
    EXPECT_EQ(r, 0.0);
}

TEST(Pendulum, HangingRewardIsMinusPiSquared) {
    PendulumEnv env(quiet_pendulum());
    EXPECT_NEAR(env.reward(vec({std::numbers::pi, 0.0}), vec({0.0}), vec({0.0})), -9.8696044, 1e-6);
}

TEST(Pendulum, RewardMaximalOnlyAtUpright) {
    PendulumEnv env(quiet_pendulum());
    RandomStream rng(3);
    for (int i = 0; i < 1000; ++i) {
        const Vector s = vec({(2.0 * rng.uniform() - 1.0) * std::numbers::pi, 10.0 * (2.0 * rng.uniform() - 1.0)});
        EXPECT_LT(env.reward(s, vec({0.0}), vec({0.0})), 0.0);
    }
}

TEST(Pendulum, OutOfBoxActionRejected) {
    PendulumEnv env(quiet_pendulum());
    EXPECT_THROW(step(env, vec({0.0, 0.0}), vec({5.5}), vec({0.0}), vec({0.0, 0.0})), BoundsError);
    EXPECT_THROW(step(env, vec({0.0, 0.0}), vec({0.0}), vec({1.5}), vec({0.0, 0.0})), BoundsError);
}

TEST(Pendulum, AngleIsWrapped) {
    PendulumEnv env(quiet_pendulum());
    auto [next, r] = step(env, vec({3.1, 4.0}), vec({0.0}), vec({0.0}), vec({0.0, 0.0}));
    EXPECT_GT(next[0], -std::numbers::pi);
    EXPECT_LE(next[0], std::numbers::pi);
    EXPECT_LT(next[0], 0.0);
}

TEST(Pendulum, ZeroPolicyFromHangingMatchesDirectIntegration) {
    PendulumParams p = quiet_pendulum();
    p.horizon = 50;
    PendulumEnv env(p);
    RandomStream rng(0);
    const Trajectory t = rollout(env, constant(vec({0.0})), constant(vec({0.0})), rng);
    double theta = std::numbers::pi, omega = 0.0;
    for (const auto& tr : t.transitions) {
        omega += p.dt * p.gravity / p.length * std::sin(theta);
        theta = wrap_angle(theta + p.dt * omega);
        EXPECT_DOUBLE_EQ(tr.next_state[0], theta);
        EXPECT_DOUBLE_EQ(tr.next_state[1], omega);
    }
    EXPECT_LT(std::abs(t.final_state()[1]), 1e-10);
}

TEST(Pendulum, HalfMassDoublesTorqueAcceleration) {
    PendulumEnv env(quiet_pendulum());
    const auto light = env.with_parameter("mass", 0.5);
    const auto& l = dynamic_cast<const PendulumEnv&>(*light);
    // At θ = 0 gravity contributes nothing, so θ̈ is torque / (m ℓ²).
    EXPECT_DOUBLE_EQ(l.angular_acceleration(0.0, 2.0, 1.0, 1.0), 2.0 * env.angular_acceleration(0.0, 2.0, 1.0, 1.0));
}

TEST(Pendulum, SpeedClipBoundsVelocity) {
    PendulumParams p = quiet_pendulum();
    p.max_speed = 2.0;
    PendulumEnv env(p);
    auto [next, r] = step(env, vec({1.0, 1.99}), vec({5.0}), vec({0.0}), vec({0.0, 0.0}));
    EXPECT_DOUBLE_EQ(next[1], 2.0);
}

TEST(LinearToy, DirectFormula) {
    LinearToyParams p;
    p.a = 1.0;
    p.b = 1.0;
    p.b_adv = -0.5;
    LinearToyEnv env(p);
    auto [next, r] = step(env, vec({1.0}), vec({0.2}), vec({0.4}), vec({0.0}));
    EXPECT_NEAR(next[0], 1.0, 1e-15);
}

TEST(LinearToy, ZeroPoliciesKeepStateConstant) {
    LinearToyParams p;
    p.initial_state = 0.7;
    LinearToyEnv env(p);
    RandomStream rng(9);
    const Trajectory t = rollout(env, constant(vec({0.0})), constant(vec({0.0})), rng);
    for (const auto& tr : t.transitions) EXPECT_EQ(tr.next_state[0], 0.7);
}

TEST(Rollout, SameSeedIsBitIdentical) {
    PendulumEnv env;
    RandomStream a(11), b(11);
    const auto ta = rollout(env, constant(vec({0.5})), constant(vec({0.1})), a);
    const auto tb = rollout(env, constant(vec({0.5})), constant(vec({0.1})), b);
    for (int h = 0; h < ta.horizon(); ++h) EXPECT_EQ(ta.transitions[h].next_state, tb.transitions[h].next_state);
}

TEST(ActionRobust, DegenerateMixturesExecuteOnePlayer) {
    auto shared = std::make_shared<PendulumEnv>(quiet_pendulum());
    ActionRobustWrapper never(shared, 0.0), always(shared, 1.0);
    const Vector s = vec({0.5, 0.1}), u = vec({1.0}), ua = vec({-2.0}), w = vec({0.0, 0.0});
    RandomStream rng(2);
    for (int i = 0; i < 100; ++i) {
        const double coin = rng.uniform();
        EXPECT_EQ(mixture_step(never, s, u, ua, coin, w).first, step(*shared, s, u, vec({0.0}), w).first);
        EXPECT_EQ(mixture_step(always, s, u, ua, coin, w).first, step(*shared, s, ua, vec({0.0}), w).first);
    }
}

TEST(ActionRobust, AdversaryFrequencyMatchesAlpha) {
    ActionRobustWrapper env(std::make_shared<PendulumEnv>(quiet_pendulum()), 0.3);
    RandomStream rng(5);
    const Vector u = vec({1.0}), ua = vec({-1.0});
    int adversary = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) adversary += env.executed_action(u, ua, rng.uniform())[0] < 0.0 ? 1 : 0;
    EXPECT_NEAR(static_cast<double>(adversary) / n, 0.3, 0.01);
}

TEST(ActionRobust, CoinOutsideUnitIntervalRejected) {
    ActionRobustWrapper env(std::make_shared<PendulumEnv>(quiet_pendulum()), 0.3);
    EXPECT_THROW(mixture_step(env, vec({0.0, 0.0}), vec({0.0}), vec({0.0}), 1.0, vec({0.0, 0.0})), InvalidArgument);
}

TEST(ParameterRobust, NominalValueReproducesInnerTrajectory) {
    auto inner = std::make_shared<PendulumEnv>();
    ParameterRobustWrapper wrapped(inner, "mass", 0.001, 2.0);
    RandomStream a(8), b(8);
    const auto ti = rollout(*inner, constant(vec({1.0})), constant(vec({0.0})), a);
    const auto tw = rollout(wrapped, constant(vec({1.0})), constant(vec({1.0})), b);
    for (int h = 0; h < ti.horizon(); ++h) EXPECT_EQ(ti.transitions[h].next_state, tw.transitions[h].next_state);
    EXPECT_EQ(ti.total_reward, tw.total_reward);
}

TEST(ParameterRobust, ClampsAndRejectsNaN) {
    ParameterRobustWrapper wrapped(std::make_shared<PendulumEnv>(), "mass", 0.5, 1.5);
    const auto high = wrapped.set_parameter(4.0);
    const auto edge = wrapped.set_parameter(1.5);
    const auto& h = dynamic_cast<const PendulumEnv&>(*high);
    const auto& e = dynamic_cast<const PendulumEnv&>(*edge);
    EXPECT_EQ(h.angular_acceleration(0.3, 1.0, 1.0, 1.0), e.angular_acceleration(0.3, 1.0, 1.0, 1.0));
    EXPECT_THROW(wrapped.set_parameter(std::nan("")), InvalidArgument);
    EXPECT_THROW(ParameterRobustWrapper(std::make_shared<PendulumEnv>(), "mass", 2.0, 1.0), InvalidArgument);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "rhucrl/evaluation.hpp"

using namespace rhucrl;

namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

PolicyFamily constant_family(int input_dim, Box box) {
    PolicyFamily fam;
    fam.features.kind = FeatureKind::Constant;
    fam.features.input_dim = input_dim;
    fam.box = std::move(box);
    return fam;
}

WorstCaseSettings small_settings() {
    WorstCaseSettings s;
    s.budget.population = 16;
    s.budget.iterations = 6;
    s.budget.particles = 4;
    s.budget.initial_std = 2.0;
    s.restarts = 2;
    return s;
}

EvaluationReport sample_report() {
    EvaluationReport r;
    r.agent_id = "run-7/t3";
    r.training_curve = {-1.0, -2.5, -2.5};
    r.restart_returns = {-2.5, -2.25};
    r.worst_case_return = -2.5;
    r.average_return = 0.1 + 0.2;  // not exactly representable in short decimal
    r.cells = {{0.5, -3.0, 0.125}, {1.0, -1.0 / 3.0, 0.0}};
    r.worst_cell = 0;
    r.config_hash = "00ff12ab";
    return r;
}

}  // namespace

TEST(Report, JsonRoundTrip) {
    const auto r = sample_report();
    EXPECT_TRUE(EvaluationReport::from_json(nlohmann::json::parse(r.to_json().dump())) == r);
}

TEST(Report, CsvRoundTripIsLossless) {
    const auto r = sample_report();
    const std::string csv = report_to_csv(r);
    EXPECT_EQ(csv.rfind("kind,index,value,return,std_error\n", 0), 0u);
    EXPECT_TRUE(report_from_csv(csv) == r);
    EXPECT_THROW(report_from_csv("bad,header\n"), InvalidArgument);
}

TEST(WorstCase, ZeroInfluenceAdversaryEqualsAverage) {
    LinearToyParams p;
    p.b_adv = 0.0;
    p.noise_std = 0.1;
    LinearToyEnv env(p);
    const auto agent = PolicyParams::fixed(1, env.spec().agent_box, scalar(0.2));
    const auto rep = worst_case_eval(env, agent, constant_family(1, env.spec().adversary_box), small_settings(), 3);
    EXPECT_EQ(rep.worst_case_return, rep.average_return);
}

TEST(WorstCase, BookkeepingAndDeterminism) {
    PendulumParams pp;
    pp.horizon = 40;
    PendulumEnv env(pp);
    FeatureMap f;
    f.kind = FeatureKind::Identity;
    f.input_dim = 2;
    PolicyParams agent(f, env.spec().agent_box);
    agent.set_parameters((Vector(3) << -1.0, -0.5, 0.0).finished());
    const auto fam = constant_family(2, env.spec().adversary_box);
    const auto a = worst_case_eval(env, agent, fam, small_settings(), 11);
    const auto b = worst_case_eval(env, agent, fam, small_settings(), 11);
    EXPECT_TRUE(a == b);
    EXPECT_LE(a.worst_case_return, a.average_return);
    for (double v : a.training_curve) EXPECT_LE(a.worst_case_return, v);
    for (double v : a.restart_returns) EXPECT_LE(a.worst_case_return, v);
    EXPECT_EQ(a.restart_returns.size(), 2u);
}

TEST(WorstCase, StabilizerDegradesWithAdversaryStrength) {
    // A PD stabilizer started upright against constant forces of growing bound.
    double previous = std::numeric_limits<double>::infinity();
    for (double fraction : {0.1, 0.2, 0.4}) {
        PendulumParams pp;
        pp.horizon = 40;
        pp.initial_angle = 0.0;
        pp.adversary_fraction = fraction;
        PendulumEnv env(pp);
        FeatureMap f;
        f.kind = FeatureKind::Identity;
        f.input_dim = 2;
        PolicyParams agent(f, env.spec().agent_box);
        agent.set_parameters((Vector(3) << -2.0, -0.6, 0.0).finished());
        const auto rep =
            worst_case_eval(env, agent, constant_family(2, env.spec().adversary_box), small_settings(), 1);
        EXPECT_LE(rep.worst_case_return, previous);
        previous = rep.worst_case_return;
    }
}

TEST(WorstCase, ZeroPolicyStaysAtHangingReturn) {
    PendulumParams pp;
    pp.horizon = 50;
    pp.noise_std = 0.0;
    PendulumEnv env(pp);
    const auto zero = PolicyParams::fixed(2, env.spec().agent_box, scalar(0.0));
    const auto rep = worst_case_eval(env, zero, constant_family(2, env.spec().adversary_box), small_settings(), 2);
    const double hanging = -std::numbers::pi * std::numbers::pi * (pp.horizon + 1);
    EXPECT_NEAR(rep.worst_case_return, hanging, 1e-9 * std::abs(hanging));
}

TEST(Sweep, Validation) {
    SweepSpec s;
    s.values = {0.5, 1.0, 2.0};
    EXPECT_NO_THROW(s.validate());
    s.values = {0.5, 2.5};
    EXPECT_THROW(s.validate(), InvalidArgument);
    s.values.clear();
    EXPECT_THROW(s.validate(), InvalidArgument);
    s.values = {1.0};
    s.seeds_per_cell = 0;
    EXPECT_THROW(s.validate(), InvalidArgument);
    EXPECT_EQ(setting_from_string(to_string(RobustSetting::Action)), RobustSetting::Action);
    EXPECT_THROW(setting_from_string("chaos"), InvalidArgument);
}

TEST(Sweep, NominalCellEqualsNominalEvaluation) {
    PendulumParams pp;
    pp.horizon = 30;
    auto inner = std::make_shared<PendulumEnv>(pp);
    ParameterRobustWrapper env(inner, "mass", 0.001, 2.0);
    const auto agent = PolicyParams::fixed(2, env.spec().agent_box, scalar(1.0));
    SweepSpec s;
    s.values = {1.0};
    s.seeds_per_cell = 3;
    const auto rep = parameter_sweep(env, agent, s, 4);
    const auto nominal = PolicyParams::fixed(2, inner->spec().adversary_box, inner->nominal_adversary_action());
    const auto direct = estimate_J(World::true_system(*inner), agent, nominal, 3, derive_seed(4, std::uint64_t{0}));
    EXPECT_EQ(rep.cells.at(0).mean_return, direct.mean);
    EXPECT_EQ(rep.worst_cell, 0);
}

TEST(Sweep, WorstCellNoBetterThanNominal) {
    PendulumParams pp;
    pp.horizon = 40;
    pp.initial_angle = 0.2;
    auto inner = std::make_shared<PendulumEnv>(pp);
    ParameterRobustWrapper env(inner, "mass", 0.5, 1.5);
    FeatureMap f;
    f.kind = FeatureKind::Identity;
    f.input_dim = 2;
    PolicyParams agent(f, env.spec().agent_box);
    agent.set_parameters((Vector(3) << -2.0, -0.6, 0.0).finished());
    SweepSpec s;
    s.values = {0.5, 0.75, 1.0, 1.25, 1.5};
    s.seeds_per_cell = 2;
    s.lo = 0.5;
    s.hi = 1.5;
    const auto rep = parameter_sweep(env, agent, s, 1);
    EXPECT_LE(rep.worst_case_return, rep.cells[2].mean_return);
    EXPECT_LE(rep.worst_case_return, rep.average_return);
    s.values = {0.25};
    s.lo = 0.001;
    EXPECT_THROW(parameter_sweep(env, agent, s, 1), InvalidArgument);
}

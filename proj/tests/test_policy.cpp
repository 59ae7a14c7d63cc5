#include <gtest/gtest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "rhucrl/hallucination.hpp"
#include "rhucrl/policy.hpp"
#include "rhucrl/random.hpp"

using namespace rhucrl;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

FeatureMap features(FeatureKind kind, int input_dim) {
    FeatureMap f;
    f.kind = kind;
    f.input_dim = input_dim;
    return f;
}

}  // namespace

TEST(Policy, ZeroParametersOutputBoxCenter) {
    PolicyParams p(features(FeatureKind::Identity, 2), Box(vec({-1.0, 0.0}), vec({3.0, 1.0})));
    EXPECT_EQ(p.parameter_count(), 6);
    EXPECT_EQ(p.act(vec({5.0, -2.0})), vec({1.0, 0.5}));
}

TEST(Policy, SaturatesInsideBox) {
    PolicyParams p(features(FeatureKind::Identity, 1), Box::symmetric(1, 2.0));
    p.set_parameters(vec({100.0, 0.0}));
    for (double x : {-10.0, -1.0, 0.5, 7.0}) EXPECT_TRUE(p.box().contains(p.act(vec({x}))));
    EXPECT_NEAR(p.act(vec({1.0}))[0], 2.0, 1e-12);
}

TEST(Policy, ConstantFeatureIsStateless) {
    PolicyParams p(features(FeatureKind::Constant, 2), Box::symmetric(1, 1.0));
    p.set_parameters(vec({0.5}));
    EXPECT_EQ(p.act(vec({1.0, 2.0})), p.act(vec({-3.0, 0.0})));
    EXPECT_NEAR(p.act(vec({0.0, 0.0}))[0], std::tanh(0.5), 1e-15);
    EXPECT_EQ(p.lipschitz(), 0.0);
}

TEST(Policy, WrongParameterCountRejected) {
    PolicyParams p(features(FeatureKind::Identity, 2), Box::symmetric(1, 1.0));
    EXPECT_THROW(p.set_parameters(vec({1.0})), InvalidArgument);
    EXPECT_THROW(p.act(vec({1.0})), InvalidArgument);
}

TEST(Policy, FixedPolicyIgnoresState) {
    const auto p = PolicyParams::fixed(2, Box::symmetric(1, 1.0), vec({0.25}));
    EXPECT_EQ(p.parameter_count(), 0);
    EXPECT_EQ(p.act(vec({3.0, 1.0})), vec({0.25}));
    EXPECT_THROW(PolicyParams::fixed(2, Box::symmetric(1, 1.0), vec({2.0})), InvalidArgument);
}

TEST(Policy, PolynomialDefaultFeatureCount) {
    FeatureMap f = features(FeatureKind::Polynomial, 2);
    f.angle_dims = {0};
    // embedded (cos θ, θ̇, sin θ): 3 linear + 6 quadratic + bias
    EXPECT_EQ(f.feature_count(), 10);
    f.monomials = {{2}, {1}, {0, 1}};
    EXPECT_EQ(f.feature_count(), 4);
    std::vector<double> out(4);
    const Vector x = vec({0.3, 2.0});
    f.compute(x.data(), out.data());
    EXPECT_NEAR(out[0], std::sin(0.3), 1e-15);
    EXPECT_NEAR(out[1], 2.0, 1e-15);
    EXPECT_NEAR(out[2], std::cos(0.3) * 2.0, 1e-15);
    EXPECT_EQ(out[3], 1.0);
    f.monomials = {{5}};
    EXPECT_THROW(PolicyParams(f, Box::symmetric(1, 1.0)), InvalidArgument);
}

TEST(Policy, LipschitzBoundHoldsEmpirically) {
    FeatureMap f = features(FeatureKind::NormalizedState, 2);
    f.angle_dims = {0};
    f.scale = vec({1.0, 4.0, 1.0});
    PolicyParams p(f, Box::symmetric(1, 2.0));
    RandomStream rng(1);
    p.set_parameters(rng.normal_vector(p.parameter_count()));
    const double L = p.lipschitz();
    for (int i = 0; i < 500; ++i) {
        const Vector a = rng.normal_vector(2) * 2.0, b = a + rng.normal_vector(2) * 0.1;
        EXPECT_LE((p.act(a) - p.act(b)).norm(), L * (a - b).norm() + 1e-12);
    }
}

TEST(Policy, JsonRoundTrip) {
    FeatureMap f = features(FeatureKind::Radial, 2);
    f.angle_dims = {0};
    f.centers = radial_grid(3, 2, 1.0);
    f.width = 0.7;
    PolicyParams p(f, Box::symmetric(1, 5.0));
    RandomStream rng(2);
    p.set_parameters(rng.normal_vector(p.parameter_count()));
    const auto back = PolicyParams::from_json(nlohmann::json::parse(p.to_json().dump()));
    EXPECT_TRUE(back == p);
    EXPECT_EQ(back.act(vec({0.4, -1.0})), p.act(vec({0.4, -1.0})));

    FeatureMap poly = features(FeatureKind::Polynomial, 2);
    poly.monomials = {{0}, {0, 1}};
    PolicyParams q(poly, Box::symmetric(1, 1.0));
    q.set_parameters(vec({0.1, -0.2, 0.3}));
    EXPECT_TRUE(PolicyParams::from_json(q.to_json()) == q);
}

TEST(Policy, FeatureKindNames) {
    for (auto k : {FeatureKind::Fixed, FeatureKind::Constant, FeatureKind::Identity, FeatureKind::NormalizedState,
                   FeatureKind::Radial, FeatureKind::Polynomial})
        EXPECT_EQ(feature_kind_from_string(to_string(k)), k);
    EXPECT_THROW(feature_kind_from_string("mlp"), InvalidArgument);
}

// ------------------------------------------------------------ hallucination

namespace {

// A 1-D model with μ = 0 and σ = 1 everywhere: the GP prior.
GpDynamicsModel prior_model(int p) { return GpDynamicsModel(p, 1, 1, Kernel::squared_exponential(p + 2), 1.0); }

PolicyParams constant_eta(int p, int input_dim, double raw) {
    PolicyParams eta(features(FeatureKind::Constant, input_dim), Box::symmetric(p, 1.0));
    eta.set_parameters(Vector::Constant(p, raw));
    return eta;
}

}  // namespace

TEST(Hallucination, UpperEdgeOfPriorTube) {
    const auto model = prior_model(2);
    // Exact η = +1: a fixed policy at the box corner.
    const auto eta = PolicyParams::fixed(4, Box::symmetric(2, 1.0), vec({1.0, 1.0}));
    HallucinatedDynamics f(model, 2.0, eta, HallucinationRole::Optimistic);
    EXPECT_EQ(f.step(vec({0.0, 0.0}), vec({0.0}), vec({0.0}), vec({0.0, 0.0})), vec({2.0, 2.0}));
}

TEST(Hallucination, ZeroEtaIsMeanPlusNoise) {
    GpDynamicsModel model(1, 1, 1, Kernel::squared_exponential(3), 0.5);
    Transition t{vec({0.2}), vec({0.1}), vec({0.0}), vec({0.7}), 0.0, 0, 1};
    model.fit({t});
    const auto eta = constant_eta(1, 3, 0.0);
    HallucinatedDynamics f(model, 3.0, eta, HallucinationRole::Pessimistic);
    const auto pred = model.predict(vec({0.3}), vec({0.2}), vec({-0.1}));
    EXPECT_EQ(f.step(vec({0.3}), vec({0.2}), vec({-0.1}), vec({0.05}))[0], pred.mean[0] + 0.05);
}

TEST(Hallucination, TubeContainmentIsExact) {
    RandomStream rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double mu = 10.0 * rng.normal(), sigma = std::abs(rng.normal()), beta = 5.0 * rng.uniform();
        const double eta = 4.0 * rng.normal();
        const double next = hallucinated_coordinate(mu, beta, eta, sigma);
        // Interval form: rounding cannot push the result past either edge.
        EXPECT_LE(next, mu + beta * sigma);
        EXPECT_GE(next, mu - beta * sigma);
    }
}

TEST(Hallucination, RejectsMismatchedShapes) {
    const auto model = prior_model(2);
    const auto eta = constant_eta(1, 4, 0.0);
    EXPECT_THROW(HallucinatedDynamics(model, 1.0, eta, HallucinationRole::Optimistic), InvalidArgument);
    const auto ok = constant_eta(2, 4, 0.0);
    EXPECT_THROW(HallucinatedDynamics(model, -1.0, ok, HallucinationRole::Optimistic), InvalidArgument);
    HallucinatedDynamics f(model, 1.0, ok, HallucinationRole::Optimistic);
    EXPECT_THROW(f.step(vec({0.0, 0.0}), vec({0.0}), vec({0.0}), vec({0.0})), InvalidArgument);
}

TEST(PlausibleSet, Membership) {
    GpDynamicsModel model(1, 1, 1, Kernel::squared_exponential(3), 0.5);
    RandomStream rng(3);
    std::vector<Transition> data;
    for (int i = 0; i < 10; ++i)
        data.push_back({rng.normal_vector(1), rng.normal_vector(1), rng.normal_vector(1), rng.normal_vector(1), 0.0, i,
                        1});
    model.fit(data);
    std::vector<Vector> tests;
    for (int i = 0; i < 50; ++i) tests.push_back(2.0 * rng.normal_vector(3));
    const double beta = 1.5;
    auto mean = [&](const Vector& s, const Vector& u, const Vector& ua) { return model.predict(s, u, ua).mean; };
    auto outside = [&](const Vector& s, const Vector& u, const Vector& ua) {
        const auto p = model.predict(s, u, ua);
        return Vector(p.mean + 2.0 * beta * p.std);
    };
    EXPECT_TRUE(plausible_membership(model, beta, mean, tests));
    EXPECT_FALSE(plausible_membership(model, beta, outside, tests));

    FeatureMap fm = features(FeatureKind::Identity, 3);
    for (int trial = 0; trial < 20; ++trial) {
        PolicyParams eta(fm, Box::symmetric(1, 1.0));
        eta.set_parameters(3.0 * rng.normal_vector(eta.parameter_count()));
        HallucinatedDynamics f(model, beta, eta, HallucinationRole::Optimistic);
        auto hallucinated = [&](const Vector& s, const Vector& u, const Vector& ua) {
            return f.step(s, u, ua, Vector::Zero(1));
        };
        EXPECT_TRUE(plausible_membership(model, beta, hallucinated, tests, 1e-12));
    }
}

// ----------------------------------------------------- trajectory deviation

namespace {

// Scalar linear system f(z) = a·s + b·u + b̄·ū with linear policies, a
// synthetic σ(s) = c·(1 + ½ sin s) and a tube center μ = f − β·ξ·σ, so the
// true f lies in the tube and f̃ = μ + β·η·σ is a plausible model.
struct DeviationCase {
    double a = 0.9, b = 0.5, b_adv = -0.3, k = -0.4, k_adv = 0.2, c = 0.1, beta = 1.0;
    double xi = 0.0, eta = 0.0;
    int horizon = 20;

    double sigma(double s) const { return c * (1.0 + 0.5 * std::sin(s)); }
    double f(double s) const { return a * s + b * (k * s) + b_adv * (k_adv * s); }

    DeviationReport run(RandomStream& rng, double leading_factor) const {
        std::vector<Vector> truth{vec({1.0})}, plausible{vec({1.0})};
        std::vector<double> sigma_norms;
        for (int h = 0; h < horizon; ++h) {
            const double w = 0.05 * rng.normal();
            const double s = truth.back()[0], st = plausible.back()[0];
            sigma_norms.push_back(sigma(s));
            truth.push_back(vec({f(s) + w}));
            const double mu = f(st) - beta * xi * sigma(st);
            plausible.push_back(vec({hallucinated_coordinate(mu, beta, eta, sigma(st)) + w}));
        }
        TheoryParams lip;
        lip.dynamics = std::sqrt(a * a + b * b + b_adv * b_adv);
        lip.uncertainty = 0.5 * c;
        lip.agent = std::abs(k);
        lip.adversary = std::abs(k_adv);
        return trajectory_deviation_check(truth, plausible, sigma_norms, lip, beta, leading_factor);
    }
};

}  // namespace

TEST(TrajectoryDeviation, IdenticalDynamicsHaveZeroDeviation) {
    DeviationCase d;
    d.beta = 0.0;
    RandomStream rng(0);
    const auto r = d.run(rng, 2.0);
    EXPECT_TRUE(r.ok);
    for (double dev : r.deviations) EXPECT_EQ(dev, 0.0);
}

TEST(TrajectoryDeviation, BoundHoldsOnRandomSeeds) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        RandomStream rng(seed);
        DeviationCase d;
        d.xi = 2.0 * rng.uniform() - 1.0;
        d.eta = 2.0 * rng.uniform() - 1.0;
        EXPECT_TRUE(d.run(rng, 2.0).ok) << "seed " << seed;
    }
}

TEST(TrajectoryDeviation, DroppingTheFactorTwoIsCaught) {
    DeviationCase d;
    d.xi = 1.0;    // truth on the upper tube edge
    d.eta = -1.0;  // plausible model on the lower edge
    RandomStream rng(1);
    EXPECT_FALSE(d.run(rng, 1.0).ok);
}

TEST(TrajectoryDeviation, MissingLipschitzConstantRejected) {
    TheoryParams lip;
    lip.dynamics = 1.0;
    EXPECT_THROW(trajectory_deviation_check({vec({0.0})}, {vec({0.0})}, {}, lip, 1.0), InvalidArgument);
}

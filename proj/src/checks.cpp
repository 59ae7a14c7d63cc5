#include "rhucrl/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <sstream>

#include "rhucrl/hallucination.hpp"
#include "rhucrl/learner.hpp"
#include "rhucrl/random.hpp"

namespace rhucrl {

namespace {

class Stopwatch {
   public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

   private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

CheckResult finish(std::string name, bool passed, const std::ostringstream& detail, const Stopwatch& clock) {
    return {std::move(name), passed, detail.str(), clock.seconds()};
}

RowMatrix random_rows(RandomStream& rng, int n, int d, double scale) {
    RowMatrix m(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = scale * rng.normal();
    return m;
}

int uniform_int(RandomStream& rng, int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng.uniform() * (hi - lo + 1));
}

double relative_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

CheckResult check_gp_oracle(int instances, int max_points, int max_dim, double tolerance, std::uint64_t seed) {
    Stopwatch clock;
    RandomStream rng(seed);
    double worst = 0.0;
    for (int k = 0; k < instances; ++k) {
        const int n = uniform_int(rng, 1, max_points);
        const int d = uniform_int(rng, 1, max_dim);
        const int p = uniform_int(rng, 1, 3);
        const double lambda = 0.05 + 2.0 * rng.uniform();
        const Kernel kernel = Kernel::squared_exponential(d, 0.5 + 1.5 * rng.uniform(), 0.2 + 0.8 * rng.uniform());
        const RowMatrix x = random_rows(rng, n, d, 1.0);
        const RowMatrix y = random_rows(rng, n, p, 1.0);
        const RowMatrix q = random_rows(rng, 10, d, 1.2);

        // Path under test: data arrives in chunks.
        GpRegressor gp(kernel, d, p, lambda);
        for (int start = 0; start < n;) {
            const int len = std::min(n - start, uniform_int(rng, 1, 8));
            gp.add_data(x.middleRows(start, len), y.middleRows(start, len));
            start += len;
        }
        const auto pred = gp.predict(q);

        // Oracle: explicit inverse of K + λI.
        Matrix a = kernel.cross(x, x);
        a.diagonal().array() += lambda;
        const Matrix inv = a.fullPivLu().inverse();
        const Matrix kq = kernel.cross(x, q);
        const Matrix mean = kq.transpose() * inv * y;
        for (int i = 0; i < q.rows(); ++i) {
            const double var = kernel.diag(q.row(i).transpose()) - kq.col(i).dot(inv * kq.col(i));
            worst = std::max(worst, relative_gap(pred.variance[i], var));
            for (int j = 0; j < p; ++j) worst = std::max(worst, relative_gap(pred.mean(i, j), mean(i, j)));
        }
    }
    std::ostringstream detail;
    detail << instances << " instances, max deviation " << worst;
    return finish("gp_oracle", worst <= tolerance, detail, clock);
}

CheckResult check_prior_coverage(int functions, int test_points, double delta, double min_coverage,
                                 std::uint64_t seed) {
    Stopwatch clock;
    RandomStream rng(seed);
    constexpr int kTrain = 30;
    constexpr int kOutputs = 2;
    constexpr double kNoise = 0.1;
    constexpr double kLambda = 0.1;
    const int per_function = std::max(1, test_points / std::max(1, functions));
    long covered = 0, total = 0;
    for (int f = 0; f < functions; ++f) {
        const int d = uniform_int(rng, 1, 3);
        const Kernel kernel = Kernel::squared_exponential(d, 1.0);
        const int m = kTrain + per_function;
        RowMatrix x(m, d);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < d; ++j) x(i, j) = -2.0 + 4.0 * rng.uniform();
        Matrix k = kernel.cross(x, x);
        k.diagonal().array() += 1e-9;
        const Matrix chol = k.llt().matrixL();
        const Matrix values = chol * random_rows(rng, m, kOutputs, 1.0);  // f on all m points

        RowMatrix y = values.topRows(kTrain);
        for (int i = 0; i < kTrain; ++i)
            for (int j = 0; j < kOutputs; ++j) y(i, j) += kNoise * rng.normal();
        GpRegressor gp(kernel, d, kOutputs, kLambda);
        gp.set_data(x.topRows(kTrain), y);

        const double gamma = kOutputs * information_gain_closed_form(kernel, x.topRows(kTrain), kLambda);
        const double beta = BetaSchedule::theoretical(1.0, kNoise, delta)(kLambda, gamma);
        const auto pred = gp.predict(x.bottomRows(per_function));
        for (int i = 0; i < per_function; ++i) {
            const double width = beta * std::sqrt(std::max(0.0, pred.variance[i]));
            for (int j = 0; j < kOutputs; ++j) {
                covered += std::abs(values(kTrain + i, j) - pred.mean(i, j)) <= width;
                ++total;
            }
        }
    }
    const double coverage = total ? static_cast<double>(covered) / total : 0.0;
    std::ostringstream detail;
    detail << "coverage " << coverage << " over " << total << " held-out outputs (min " << min_coverage << ")";
    return finish("prior_coverage", total > 0 && coverage >= min_coverage, detail, clock);
}

CheckResult check_recalibration(int cases, std::uint64_t seed, bool misapply_temperature) {
    Stopwatch clock;
    RandomStream rng(seed);
    constexpr double kZ90 = 1.6448536269514722;
    int failures = 0;
    double t_min = 1e300, t_max = 0.0, worst_gap = 0.0;

    auto coverage_gap = [&](const std::vector<double>& residuals, double temperature) {
        const double t = misapply_temperature ? 1.0 / temperature : temperature;
        long inside = 0;
        for (double r : residuals) inside += std::abs(r) <= kZ90 * t;
        return std::abs(static_cast<double>(inside) / residuals.size() - 0.9);
    };

    for (int c = 0; c < cases; ++c) {
        std::vector<double> consistent(1000), doubled(1000);
        for (auto& r : consistent) r = rng.normal();
        for (auto& r : doubled) r = 2.0 * rng.normal();
        const double tc = calibrate_residuals(consistent).temperature;
        const double td = calibrate_residuals(doubled).temperature;
        const double huge = calibrate_residuals(std::vector<double>(100, 1e6)).temperature;
        const double tiny = calibrate_residuals(std::vector<double>(100, 1e-9)).temperature;
        t_min = std::min({t_min, tc, td, huge, tiny});
        t_max = std::max({t_max, tc, td, huge, tiny});
        const double gap = std::max(coverage_gap(consistent, tc), coverage_gap(doubled, td));
        worst_gap = std::max(worst_gap, gap);
        const bool ok = td > 1.0 && tc >= 0.8 && tc <= 1.25 && huge <= 100.0 && tiny >= 0.01 && gap <= 0.04;
        failures += !ok;
    }
    std::ostringstream detail;
    detail << failures << "/" << cases << " cases failed, T in [" << t_min << ", " << t_max
           << "], worst 90% coverage gap " << worst_gap;
    return finish("recalibration", failures == 0, detail, clock);
}

CheckResult check_tube_containment(int samples, std::uint64_t seed) {
    Stopwatch clock;
    RandomStream rng(seed);
    constexpr int p = 2, q = 1, qa = 1;
    GpDynamicsModel model(p, q, qa, Kernel::squared_exponential(p + q + qa), 0.3);
    std::vector<Transition> data;
    for (int i = 0; i < 25; ++i)
        data.push_back({rng.normal_vector(p), rng.normal_vector(q), rng.normal_vector(qa), 3.0 * rng.normal_vector(p),
                        0.0, i, 1});
    model.fit(data);

    FeatureMap features;
    features.kind = FeatureKind::Identity;
    features.input_dim = p + q + qa;
    long violations = 0;
    const Vector zero_noise = Vector::Zero(p);
    for (int i = 0; i < samples; ++i) {
        PolicyParams eta(features, Box::symmetric(p, 1.0));
        eta.set_parameters(3.0 * rng.normal_vector(eta.parameter_count()));
        const double beta = 5.0 * rng.uniform();
        const Vector s = 2.0 * rng.normal_vector(p), u = rng.normal_vector(q), ua = rng.normal_vector(qa);
        const HallucinatedDynamics dynamics(model, beta, eta, HallucinationRole::Optimistic);
        const Vector next = dynamics.step(s, u, ua, zero_noise);
        const auto pred = model.predict(s, u, ua);
        for (int j = 0; j < p; ++j) {
            const double w = beta * pred.std[j];
            violations += !(next[j] <= pred.mean[j] + w && next[j] >= pred.mean[j] - w);
        }
    }
    std::ostringstream detail;
    detail << violations << " violations in " << samples << " steps";
    return finish("tube_containment", violations == 0, detail, clock);
}

CheckResult check_variance_sum(int sequences, int steps, std::uint64_t seed) {
    Stopwatch clock;
    RandomStream rng(seed);
    int violations = 0;
    double worst_ratio = 0.0;
    for (int k = 0; k < sequences; ++k) {
        const int p = uniform_int(rng, 1, 3);
        const int q = uniform_int(rng, 0, 3);
        const double lambda = 0.05 + 5.0 * rng.uniform();
        GpDynamicsModel model(p, q, 0, Kernel::squared_exponential(p + q), lambda);
        ComplexityTracker tracker;
        for (int h = 0; h < steps; ++h) {
            const Vector z = 1.5 * rng.normal_vector(model.joint_dim());
            info_gain_increment(model, z, &tracker);
            Transition t;
            t.state = z.head(p);
            t.agent_action = z.segment(p, q);
            t.adversary_action = Vector::Zero(0);
            t.next_state = rng.normal_vector(p);
            model.fit({t});
        }
        const auto report = complexity_report(tracker, lambda);
        violations += !report.bound_ok;
        if (report.information_gain > 0.0)
            worst_ratio = std::max(worst_ratio, report.gamma_hat / ((1.0 + 2.0 * lambda) * report.information_gain));
    }
    std::ostringstream detail;
    detail << violations << " violations in " << sequences << " sequences, max ratio " << worst_ratio;
    return finish("variance_sum", violations == 0, detail, clock);
}

namespace {

// Adversarial pendulum with the gravity/mass channel and a cheap learner set-up.
Learner pendulum_learner(std::uint64_t seed) {
    PendulumParams pp;
    pp.dt = 0.1;
    pp.horizon = 40;
    pp.max_speed = 8.0;
    pp.channel = PendulumAdversaryChannel::GravityAndMass;
    auto env = std::make_shared<PendulumEnv>(pp);

    LearnerSettings s;
    s.variant = AlgorithmVariant::RHUCRL;
    s.families.agent.features.kind = FeatureKind::Polynomial;
    s.families.agent.features.input_dim = 2;
    s.families.agent.features.angle_dims = {0};
    s.families.agent.features.scale = (Vector(3) << 1.0, 6.0, 1.0).finished();
    s.families.agent.box = env->spec().agent_box;
    s.families.adversary.features.kind = FeatureKind::Constant;
    s.families.adversary.features.input_dim = 2;
    s.families.adversary.box = env->spec().adversary_box;
    s.families.eta = hallucination_family(env->spec(), FeatureKind::Constant);
    OptimizerBudget b;
    b.population = 8;
    b.iterations = 2;
    b.inner_population = 4;
    b.inner_iterations = 2;
    b.particles = 1;
    b.initial_std = 2.0;
    s.agent_budget = s.adversary_budget = s.value_budget = b;

    GpModelConfig mc;
    mc.regularizer = 0.01;
    mc.points_per_episode = 2;
    mc.normalization = InputNormalization::Fixed;
    mc.input_scales = {1, 1, 6, 5, 0.5, 0.5};
    mc.output_scales = {0.5, 1.5};
    return Learner(env, mc, s, seed);
}

}  // namespace

CheckResult check_sandwich(int episodes, std::uint64_t seed) {
    Stopwatch clock;
    auto learner = pendulum_learner(seed);
    int violations = 0;
    double tightest = 1e300;
    for (int t = 0; t < episodes; ++t) {
        const auto& r = learner.run_episode();
        violations += !(r.j_pessimistic <= r.j_mean && r.j_mean <= r.j_optimistic);
        tightest = std::min(tightest, r.j_optimistic - r.j_pessimistic);
    }
    std::ostringstream detail;
    detail << violations << " violations in " << episodes << " episodes, min J_opt - J_pess " << tightest;
    return finish("sandwich", violations == 0, detail, clock);
}

namespace {

// Scalar linear system s' = a·s + b·u + b̄·ū + w with linear policies
// u = k·s, ū = k̄·s, and σ(s) = c·(1 + ½ sin s) (Lipschitz ½c). The
// "true" dynamics sit ξ·β·σ above the model mean, the plausible one follows
// μ + β·η·σ; both see the same noise.
struct DeviationPair {
    double a = 0.9, b = 0.5, b_adv = -0.3, k = -0.4, k_adv = 0.2, c = 0.1, beta = 1.0;
    double xi = 0.0, eta = 0.0;
    int horizon = 20;

    double sigma(double s) const { return c * (1.0 + 0.5 * std::sin(s)); }
    double f(double s) const { return a * s + b * (k * s) + b_adv * (k_adv * s); }

    DeviationReport run(RandomStream& rng, double leading_factor) const {
        std::vector<Vector> truth{Vector::Constant(1, 1.0)}, plausible{Vector::Constant(1, 1.0)};
        std::vector<double> sigma_norms;
        for (int h = 0; h < horizon; ++h) {
            const double w = 0.05 * rng.normal();
            const double s = truth.back()[0], st = plausible.back()[0];
            sigma_norms.push_back(sigma(s));
            truth.push_back(Vector::Constant(1, f(s) + w));
            const double mu = f(st) - beta * xi * sigma(st);
            plausible.push_back(Vector::Constant(1, hallucinated_coordinate(mu, beta, eta, sigma(st)) + w));
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

CheckResult check_trajectory_deviation(int pairs, std::uint64_t seed) {
    Stopwatch clock;
    int violations = 0;
    for (int i = 0; i < pairs; ++i) {
        RandomStream rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        DeviationPair d;
        d.xi = 2.0 * rng.uniform() - 1.0;
        d.eta = 2.0 * rng.uniform() - 1.0;
        d.beta = 0.5 + 1.5 * rng.uniform();
        violations += !d.run(rng, 2.0).ok;
    }
    // Negative control: truth on the upper edge, model on the lower one.
    int control_violations = 0;
    for (int i = 0; i < 10; ++i) {
        RandomStream rng(derive_seed(seed, "control") + static_cast<std::uint64_t>(i));
        DeviationPair d;
        d.xi = 1.0;
        d.eta = -1.0;
        const auto r = d.run(rng, 1.0);
        for (std::size_t h = 1; h < r.deviations.size(); ++h) control_violations += r.deviations[h] > r.bounds[h];
    }
    std::ostringstream detail;
    detail << violations << " violations in " << pairs << " pairs; negative control " << control_violations
           << " violations";
    return finish("trajectory_deviation", violations == 0 && control_violations >= 1, detail, clock);
}

std::vector<CheckResult> run_check_suite(const CheckOptions& options) {
    const std::uint64_t s = options.seed;
    std::vector<CheckResult> out;
    out.push_back(check_gp_oracle(40, 30, 6, 1e-8, derive_seed(s, "gp_oracle")));

    // Calibration combines prior coverage and the temperature search.
    auto coverage = check_prior_coverage(5, 500, 0.1, 0.88, derive_seed(s, "coverage"));
    auto recal = check_recalibration(3, derive_seed(s, "recalibration"), options.misapply_temperature);
    out.push_back({"calibration", coverage.passed && recal.passed, coverage.detail + "; " + recal.detail,
                   coverage.seconds + recal.seconds});

    out.push_back(check_tube_containment(20000, derive_seed(s, "tube")));
    out.push_back(check_sandwich(5, derive_seed(s, "sandwich")));
    out.push_back(check_trajectory_deviation(100, derive_seed(s, "deviation")));
    out.push_back(check_variance_sum(10, 100, derive_seed(s, "variance_sum")));
    return out;
}

std::string format_check_table(const std::vector<CheckResult>& results) {
    std::ostringstream os;
    os << "suite,status,seconds,detail\n";
    for (const auto& r : results) {
        std::string detail = r.detail;
        std::replace(detail.begin(), detail.end(), ',', ';');
        os << r.name << ',' << (r.passed ? "PASS" : "FAIL") << ',' << r.seconds << ',' << detail << '\n';
    }
    return os.str();
}

}  // namespace rhucrl

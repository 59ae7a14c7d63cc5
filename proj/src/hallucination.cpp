#include "rhucrl/hallucination.hpp"

#include <cmath>

namespace rhucrl {

PolicyFamily hallucination_family(const EnvironmentSpec& spec, FeatureKind kind, std::vector<int> angle_dims,
                                  Vector scale) {
    PolicyFamily family;
    family.features.kind = kind;
    family.features.input_dim = spec.state_dim + spec.action_dim + spec.adversary_dim;
    family.features.angle_dims = std::move(angle_dims);
    family.features.scale = std::move(scale);
    family.box = Box::symmetric(spec.state_dim, 1.0);
    return family;
}

HallucinatedDynamics::HallucinatedDynamics(const GpDynamicsModel& model, double beta, const PolicyParams& eta,
                                           HallucinationRole role)
    : model_(&model), beta_(beta), eta_(&eta), role_(role) {
    if (!(beta >= 0.0)) throw InvalidArgument("beta must be >= 0");
    if (eta.output_dim() != model.state_dim()) throw InvalidArgument("hallucination policy must output p values");
    if (eta.input_dim() != model.joint_dim()) throw InvalidArgument("hallucination policy must read (s, u, ū)");
}

Vector HallucinatedDynamics::step(const Vector& state, const Vector& u, const Vector& u_adv,
                                  const Vector& noise) const {
    if (noise.size() != model_->state_dim()) throw InvalidArgument("noise has wrong dimension");
    const auto pred = model_->predict(state, u, u_adv);
    const Vector e = eta_->act(join_input(state, u, u_adv));
    Vector next(pred.mean.size());
    for (Eigen::Index i = 0; i < next.size(); ++i)
        next[i] = hallucinated_coordinate(pred.mean[i], beta_, e[i], pred.std[i]) + noise[i];
    return next;
}

bool plausible_membership(const GpDynamicsModel& model, double beta, const DynamicsFunction& candidate,
                          const std::vector<Vector>& test_inputs, double tolerance) {
    const int p = model.state_dim();
    const int q = model.action_dim();
    const int qa = model.adversary_dim();
    for (const auto& z : test_inputs) {
        const Vector s = z.head(p);
        const Vector u = z.segment(p, q);
        const Vector ua = z.tail(qa);
        const auto pred = model.predict(s, u, ua);
        const Vector value = candidate(s, u, ua);
        for (int i = 0; i < p; ++i) {
            if (!(std::abs(value[i] - pred.mean[i]) <= beta * pred.std[i] + tolerance)) return false;
        }
    }
    return true;
}

DeviationReport trajectory_deviation_check(const std::vector<Vector>& true_states,
                                           const std::vector<Vector>& plausible_states,
                                           const std::vector<double>& sigma_norms, const TheoryParams& lipschitz,
                                           double beta, double leading_factor) {
    if (!lipschitz.dynamics || !lipschitz.uncertainty || !lipschitz.agent || !lipschitz.adversary)
        throw InvalidArgument("trajectory deviation check needs L_f, L_sigma, L_pi and L_pi_adv");
    if (true_states.size() != plausible_states.size() || true_states.empty())
        throw InvalidArgument("trajectories must be non-empty and of equal length");
    if (sigma_norms.size() + 1 < true_states.size())
        throw InvalidArgument("need one sigma norm per transition");
    const double policy_factor =
        std::sqrt(1.0 + *lipschitz.agent * *lipschitz.agent + *lipschitz.adversary * *lipschitz.adversary);
    const double growth = 1.0 + (*lipschitz.dynamics + 2.0 * beta * *lipschitz.uncertainty) * policy_factor;

    DeviationReport report;
    double sigma_sum = 0.0;
    for (std::size_t h = 0; h < true_states.size(); ++h) {
        const double deviation = (true_states[h] - plausible_states[h]).norm();
        double bound = 0.0;
        if (h >= 1) {
            sigma_sum += sigma_norms[h - 1];
            bound = leading_factor * beta * std::pow(growth, static_cast<double>(h - 1)) * sigma_sum;
        }
        report.deviations.push_back(deviation);
        report.bounds.push_back(bound);
        if (h >= 1 && !(deviation <= bound)) report.ok = false;
    }
    return report;
}

}  // namespace rhucrl

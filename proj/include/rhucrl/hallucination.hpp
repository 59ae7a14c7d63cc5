#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "rhucrl/gp_model.hpp"
#include "rhucrl/policy.hpp"

namespace rhucrl {

enum class HallucinationRole { Optimistic, Pessimistic };

/// Policy family for η: (s, u, ū) → [-1, 1]^p over the joint input.
PolicyFamily hallucination_family(const EnvironmentSpec& spec, FeatureKind kind, std::vector<int> angle_dims = {},
                                  Vector scale = {});

/// f̃(s,u,ū) = μ(s,u,ū) + β·η(s,u,ū) ⊙ σ(s,u,ū). The role only records which
/// direction η was trained in; the formula is the same for both.
class HallucinatedDynamics {
   public:
    HallucinatedDynamics(const GpDynamicsModel& model, double beta, const PolicyParams& eta, HallucinationRole role);

    /// Noise-free prediction plus `noise`.
    Vector step(const Vector& state, const Vector& u, const Vector& u_adv, const Vector& noise) const;

    const GpDynamicsModel& model() const { return *model_; }
    double beta() const { return beta_; }
    const PolicyParams& eta() const { return *eta_; }
    HallucinationRole role() const { return role_; }

   private:
    const GpDynamicsModel* model_;
    double beta_;
    const PolicyParams* eta_;
    HallucinationRole role_;
};

/// μ + β·η ⊙ σ with η clamped to [-1, 1]; the shared arithmetic of every
/// hallucinated transition.
inline double hallucinated_coordinate(double mean, double beta, double eta, double std) {
    const double e = eta < -1.0 ? -1.0 : (eta > 1.0 ? 1.0 : eta);
    return mean + beta * e * std;
}

using DynamicsFunction = std::function<Vector(const Vector& state, const Vector& u, const Vector& u_adv)>;

/// True iff |f̃(z) − μ(z)| ≤ β·σ(z) elementwise at every tested input.
bool plausible_membership(const GpDynamicsModel& model, double beta, const DynamicsFunction& candidate,
                          const std::vector<Vector>& test_inputs, double tolerance = 0.0);

/// Lipschitz constants used by the trajectory-deviation inequality.
struct TheoryParams {
    std::optional<double> dynamics;        // L_f
    std::optional<double> uncertainty;     // L_σ
    std::optional<double> agent;           // L_π
    std::optional<double> adversary;       // L_π̄
};

struct DeviationReport {
    bool ok = true;
    std::vector<double> deviations;  // ‖s_h − s̃_h‖, h = 0..H
    std::vector<double> bounds;      // right-hand side, h = 0..H
};

/// Checks ‖s_h − s̃_h‖ ≤ c·β·(1 + (L_f + 2βL_σ)·sqrt(1 + L_π² + L_π̄²))^{h−1}·Σ_{h'<h} ‖σ(s_h')‖
/// for every h ≥ 1, with c = `leading_factor` (2 in the lemma).
/// `sigma_norms[h']` is ‖σ_{t−1}(s_h', π(s_h'), π̄(s_h'))‖₂ along the true
/// trajectory. Throws if a Lipschitz constant is missing.
DeviationReport trajectory_deviation_check(const std::vector<Vector>& true_states,
                                           const std::vector<Vector>& plausible_states,
                                           const std::vector<double>& sigma_norms, const TheoryParams& lipschitz,
                                           double beta, double leading_factor = 2.0);

}  // namespace rhucrl

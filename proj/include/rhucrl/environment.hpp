#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "rhucrl/core_types.hpp"
#include "rhucrl/random.hpp"

namespace rhucrl {

struct EnvironmentSpec {
    int state_dim = 0;      // p
    int action_dim = 0;     // q
    int adversary_dim = 0;  // q̄
    int horizon = 1;        // H
    Vector initial_state;
    Box agent_box;
    Box adversary_box;
    Vector noise_std;  // per state dimension
    double dt = 0.05;  // seconds; informational for non-physical envs

    void validate() const;
};

/// Noise-free evaluation of one transition, with the reward computed on the
/// actions that were actually executed.
struct StepOutcome {
    Vector mean_next;
    double reward = 0.0;
};

/// Analytic control environment with an explicit adversary input channel.
class Environment {
   public:
    virtual ~Environment() = default;

    virtual std::string name() const = 0;
    const EnvironmentSpec& spec() const { return spec_; }

    /// f(s, u, ū) without noise or box checks. `coin` selects the executed
    /// action for mixture settings and is ignored otherwise.
    virtual StepOutcome evaluate(const Vector& state, const Vector& u, const Vector& u_adv, double coin) const = 0;

    /// r(s, u, ū) on the given (executed) actions.
    virtual double reward(const Vector& state, const Vector& u, const Vector& u_adv) const = 0;

    /// Canonical representative of a state (angles wrapped to (-π, π]).
    virtual Vector wrap_state(Vector state) const { return state; }

    /// next - state, with angular coordinates wrapped.
    virtual Vector state_difference(const Vector& next, const Vector& state) const { return next - state; }

    /// Smooth embedding of a state used as model input (angles become cos/sin).
    virtual int embedded_state_dim() const { return spec_.state_dim; }
    virtual void embed_state(const double* state, double* out) const;

    /// The adversary action corresponding to "no perturbation".
    virtual Vector nominal_adversary_action() const { return Vector::Zero(spec_.adversary_dim); }

    /// A copy with one physical parameter scaled by `relative_value`.
    virtual std::unique_ptr<Environment> with_parameter(const std::string& parameter, double relative_value) const;

    virtual std::unique_ptr<Environment> clone() const = 0;

   protected:
    explicit Environment(EnvironmentSpec spec) : spec_(std::move(spec)) {}
    EnvironmentSpec& mutable_spec() { return spec_; }

   private:
    EnvironmentSpec spec_;
};

double wrap_angle(double angle);  // to (-π, π]

enum class PendulumAdversaryChannel {
    Force,          // bounded additive torque on the pole
    GravityAndMass  // relative gravity and relative mass multipliers
};

struct PendulumParams {
    double mass = 1.0;
    double length = 1.0;
    double gravity = 9.81;
    double torque_limit = 5.0;
    PendulumAdversaryChannel channel = PendulumAdversaryChannel::Force;
    double adversary_fraction = 0.2;  // Force: box = ±fraction·torque_limit
    double perturbation = 0.5;        // GravityAndMass: box = [1-α, 1+α]^2
    double dt = 0.05;
    int horizon = 200;
    double noise_std = 0.01;
    double initial_angle = 3.141592653589793;  // hanging down; θ = 0 is upright
    double initial_velocity = 0.0;
    double max_speed = 0.0;  // |θ̇| clip after each step; 0 disables
};

/// Torque-limited pendulum, state (θ, θ̇) with θ wrapped to (-π, π], θ = 0
/// upright. Semi-implicit Euler: θ̇' = θ̇ + Δt·θ̈, θ' = θ + Δt·θ̇', with θ̇'
/// optionally clipped to ±max_speed.
/// Reward -(θ² + 0.1·θ̇²).
class PendulumEnv final : public Environment {
   public:
    explicit PendulumEnv(PendulumParams params = {});

    std::string name() const override { return "pendulum"; }
    StepOutcome evaluate(const Vector& state, const Vector& u, const Vector& u_adv, double coin) const override;
    double reward(const Vector& state, const Vector& u, const Vector& u_adv) const override;
    Vector wrap_state(Vector state) const override;
    Vector state_difference(const Vector& next, const Vector& state) const override;
    int embedded_state_dim() const override { return 3; }
    void embed_state(const double* state, double* out) const override;
    Vector nominal_adversary_action() const override;
    std::unique_ptr<Environment> with_parameter(const std::string& parameter, double relative_value) const override;
    std::unique_ptr<Environment> clone() const override { return std::make_unique<PendulumEnv>(*this); }

    const PendulumParams& params() const { return params_; }
    /// θ̈ for the given state, torque and relative multipliers.
    double angular_acceleration(double theta, double torque, double relative_gravity, double relative_mass) const;

   private:
    PendulumParams params_;
    double relative_mass_ = 1.0;
    double relative_gravity_ = 1.0;
    double relative_length_ = 1.0;
};

struct LinearToyParams {
    double a = 1.0;
    double b = 1.0;
    double b_adv = -0.5;
    // r(s,u,ū) = linear·s - state_cost·(s - target)² - action_cost·u² + adversary_cost·ū²
    double linear = 0.0;
    double state_cost = 1.0;
    double target = 0.0;
    double action_cost = 0.0;
    double adversary_cost = 0.0;
    double initial_state = 0.0;
    double action_limit = 1.0;
    double adversary_limit = 1.0;
    int horizon = 5;
    double noise_std = 0.0;
};

/// Scalar linear system s' = a·s + b·u + b̄·ū + ω with quadratic reward.
class LinearToyEnv final : public Environment {
   public:
    explicit LinearToyEnv(LinearToyParams params = {});

    std::string name() const override { return "linear_toy"; }
    StepOutcome evaluate(const Vector& state, const Vector& u, const Vector& u_adv, double coin) const override;
    double reward(const Vector& state, const Vector& u, const Vector& u_adv) const override;
    std::unique_ptr<Environment> with_parameter(const std::string& parameter, double relative_value) const override;
    std::unique_ptr<Environment> clone() const override { return std::make_unique<LinearToyEnv>(*this); }

    const LinearToyParams& params() const { return params_; }

   private:
    LinearToyParams params_;
};

/// Agent and adversary share the action space; the executed action is the
/// adversary's with probability α.
class ActionRobustWrapper final : public Environment {
   public:
    ActionRobustWrapper(std::shared_ptr<const Environment> inner, double alpha);

    std::string name() const override { return "action_robust(" + inner_->name() + ")"; }
    StepOutcome evaluate(const Vector& state, const Vector& u, const Vector& u_adv, double coin) const override;
    double reward(const Vector& state, const Vector& u, const Vector& u_adv) const override;
    Vector wrap_state(Vector state) const override { return inner_->wrap_state(std::move(state)); }
    Vector state_difference(const Vector& next, const Vector& state) const override {
        return inner_->state_difference(next, state);
    }
    int embedded_state_dim() const override { return inner_->embedded_state_dim(); }
    void embed_state(const double* state, double* out) const override { inner_->embed_state(state, out); }
    std::unique_ptr<Environment> with_parameter(const std::string& parameter, double relative_value) const override;
    std::unique_ptr<Environment> clone() const override { return std::make_unique<ActionRobustWrapper>(*this); }

    double alpha() const { return alpha_; }
    const Environment& inner() const { return *inner_; }
    /// The action actually applied for a given coin.
    const Vector& executed_action(const Vector& u, const Vector& u_adv, double coin) const {
        return coin < alpha_ ? u_adv : u;
    }

   private:
    std::shared_ptr<const Environment> inner_;
    double alpha_;
};

/// Stateless parameter adversary: ū is a single relative-parameter value in
/// [lo, hi], held for the whole episode by a constant adversary policy.
class ParameterRobustWrapper final : public Environment {
   public:
    ParameterRobustWrapper(std::shared_ptr<const Environment> inner, std::string parameter, double lo, double hi);

    std::string name() const override { return "parameter_robust(" + inner_->name() + "," + parameter_ + ")"; }
    StepOutcome evaluate(const Vector& state, const Vector& u, const Vector& u_adv, double coin) const override;
    double reward(const Vector& state, const Vector& u, const Vector& u_adv) const override;
    Vector wrap_state(Vector state) const override { return inner_->wrap_state(std::move(state)); }
    Vector state_difference(const Vector& next, const Vector& state) const override {
        return inner_->state_difference(next, state);
    }
    int embedded_state_dim() const override { return inner_->embedded_state_dim(); }
    void embed_state(const double* state, double* out) const override { inner_->embed_state(state, out); }
    Vector nominal_adversary_action() const override { return Vector::Constant(1, std::clamp(1.0, lo_, hi_)); }
    std::unique_ptr<Environment> clone() const override { return std::make_unique<ParameterRobustWrapper>(*this); }

    /// The inner environment with the parameter scaled by `value` (clamped to
    /// [lo, hi]). NaN is rejected.
    std::unique_ptr<Environment> set_parameter(double value) const;

    const std::string& parameter() const { return parameter_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    const Environment& inner() const { return *inner_; }

   private:
    std::shared_ptr<const Environment> inner_;
    std::string parameter_;
    double lo_;
    double hi_;
};

/// One noisy step. Actions outside their boxes raise BoundsError; nothing is
/// clamped here.
std::pair<Vector, double> step(const Environment& env, const Vector& state, const Vector& u, const Vector& u_adv,
                               const Vector& noise, double coin = 1.0);

/// The action-robust step with an explicit coin in [0, 1).
std::pair<Vector, double> mixture_step(const ActionRobustWrapper& wrapper, const Vector& state, const Vector& u,
                                       const Vector& u_adv, double coin, const Vector& noise);

using StatePolicy = std::function<Vector(const Vector&)>;

/// Closed-loop H-step episode from s₀. Each step draws p standard normals
/// (scaled by the noise std) and then one uniform coin from `noise`.
Trajectory rollout(const Environment& env, const StatePolicy& agent, const StatePolicy& adversary, RandomStream& noise,
                   int episode_index = 1);

}  // namespace rhucrl

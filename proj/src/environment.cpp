#include "rhucrl/environment.hpp"

#include <cmath>
#include <numbers>

namespace rhucrl {

void EnvironmentSpec::validate() const {
    if (horizon < 1) throw InvalidArgument("horizon must be >= 1");
    if (state_dim < 1) throw InvalidArgument("state_dim must be >= 1");
    if (initial_state.size() != state_dim) throw InvalidArgument("initial state has wrong dimension");
    if (agent_box.dim() != action_dim) throw InvalidArgument("agent box dimension mismatch");
    if (adversary_box.dim() != adversary_dim) throw InvalidArgument("adversary box dimension mismatch");
    if (noise_std.size() != state_dim) throw InvalidArgument("noise std has wrong dimension");
    if ((noise_std.array() < 0.0).any()) throw InvalidArgument("noise std must be >= 0");
}

void Environment::embed_state(const double* state, double* out) const {
    for (int i = 0; i < spec_.state_dim; ++i) out[i] = state[i];
}

std::unique_ptr<Environment> Environment::with_parameter(const std::string& parameter, double) const {
    throw InvalidArgument(name() + " has no adjustable parameter '" + parameter + "'");
}

double wrap_angle(double angle) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double wrapped = std::fmod(angle + std::numbers::pi, two_pi);
    if (wrapped < 0.0) wrapped += two_pi;
    wrapped -= std::numbers::pi;
    // fmod maps +π to -π; the canonical interval is (-π, π].
    if (wrapped <= -std::numbers::pi) wrapped += two_pi;
    return wrapped;
}

// ---------------------------------------------------------------- pendulum

namespace {

EnvironmentSpec pendulum_spec(const PendulumParams& p) {
    EnvironmentSpec spec;
    spec.state_dim = 2;
    spec.action_dim = 1;
    spec.horizon = p.horizon;
    spec.initial_state = Vector(2);
    spec.initial_state << wrap_angle(p.initial_angle), p.initial_velocity;
    spec.agent_box = Box::symmetric(1, p.torque_limit);
    if (p.channel == PendulumAdversaryChannel::Force) {
        spec.adversary_dim = 1;
        spec.adversary_box = Box::symmetric(1, p.adversary_fraction * p.torque_limit);
    } else {
        spec.adversary_dim = 2;
        spec.adversary_box = Box(Vector::Constant(2, 1.0 - p.perturbation), Vector::Constant(2, 1.0 + p.perturbation));
    }
    spec.noise_std = Vector::Constant(2, p.noise_std);
    spec.dt = p.dt;
    return spec;
}

}  // namespace

PendulumEnv::PendulumEnv(PendulumParams params) : Environment(pendulum_spec(params)), params_(params) {
    if (!(params_.mass > 0 && params_.length > 0 && params_.gravity > 0))
        throw InvalidArgument("pendulum mass, length and gravity must be positive");
    if (!(params_.torque_limit > 0)) throw InvalidArgument("pendulum torque limit must be positive");
    if (!(params_.dt > 0)) throw InvalidArgument("pendulum dt must be positive");
    if (!(params_.max_speed >= 0)) throw InvalidArgument("pendulum max speed must be >= 0");
    if (params_.channel == PendulumAdversaryChannel::GravityAndMass &&
        !(params_.perturbation >= 0.0 && params_.perturbation < 1.0))
        throw InvalidArgument("pendulum perturbation must lie in [0, 1)");
    spec().validate();
}

double PendulumEnv::angular_acceleration(double theta, double torque, double relative_gravity,
                                         double relative_mass) const {
    const double g = params_.gravity * relative_gravity_ * relative_gravity;
    const double m = params_.mass * relative_mass_ * relative_mass;
    const double l = params_.length * relative_length_;
    return g / l * std::sin(theta) + torque / (m * l * l);
}

StepOutcome PendulumEnv::evaluate(const Vector& state, const Vector& u, const Vector& u_adv, double) const {
    double torque = u[0];
    double relative_gravity = 1.0;
    double relative_mass = 1.0;
    if (params_.channel == PendulumAdversaryChannel::Force) {
        torque += u_adv[0];
    } else {
        relative_gravity = u_adv[0];
        relative_mass = u_adv[1];
    }
    const double theta = state[0];
    double omega = state[1] + params_.dt * angular_acceleration(theta, torque, relative_gravity, relative_mass);
    if (params_.max_speed > 0.0) omega = std::clamp(omega, -params_.max_speed, params_.max_speed);
    StepOutcome out;
    out.mean_next = Vector(2);
    out.mean_next << theta + params_.dt * omega, omega;
    out.reward = reward(state, u, u_adv);
    return out;
}

double PendulumEnv::reward(const Vector& state, const Vector&, const Vector&) const {
    const double theta = wrap_angle(state[0]);
    return -(theta * theta + 0.1 * state[1] * state[1]);
}

Vector PendulumEnv::wrap_state(Vector state) const {
    state[0] = wrap_angle(state[0]);
    if (params_.max_speed > 0.0) state[1] = std::clamp(state[1], -params_.max_speed, params_.max_speed);
    return state;
}

Vector PendulumEnv::state_difference(const Vector& next, const Vector& state) const {
    Vector d = next - state;
    d[0] = wrap_angle(d[0]);
    return d;
}

void PendulumEnv::embed_state(const double* state, double* out) const {
    out[0] = std::cos(state[0]);
    out[1] = std::sin(state[0]);
    out[2] = state[1];
}

Vector PendulumEnv::nominal_adversary_action() const {
    if (params_.channel == PendulumAdversaryChannel::Force) return Vector::Zero(1);
    return Vector::Ones(2);
}

std::unique_ptr<Environment> PendulumEnv::with_parameter(const std::string& parameter, double relative_value) const {
    if (std::isnan(relative_value)) throw InvalidArgument("relative parameter value is NaN");
    if (!(relative_value > 0.0)) throw InvalidArgument("relative parameter value must be positive");
    auto copy = std::make_unique<PendulumEnv>(*this);
    if (parameter == "mass") {
        copy->relative_mass_ = relative_value;
    } else if (parameter == "gravity") {
        copy->relative_gravity_ = relative_value;
    } else if (parameter == "length") {
        copy->relative_length_ = relative_value;
    } else {
        throw InvalidArgument("pendulum has no parameter '" + parameter + "'");
    }
    return copy;
}

// -------------------------------------------------------------- linear toy

namespace {

EnvironmentSpec linear_toy_spec(const LinearToyParams& p) {
    EnvironmentSpec spec;
    spec.state_dim = 1;
    spec.action_dim = 1;
    spec.adversary_dim = 1;
    spec.horizon = p.horizon;
    spec.initial_state = Vector::Constant(1, p.initial_state);
    spec.agent_box = Box::symmetric(1, p.action_limit);
    spec.adversary_box = Box::symmetric(1, p.adversary_limit);
    spec.noise_std = Vector::Constant(1, p.noise_std);
    spec.dt = 1.0;
    return spec;
}

}  // namespace

LinearToyEnv::LinearToyEnv(LinearToyParams params) : Environment(linear_toy_spec(params)), params_(params) {
    if (!(std::abs(params_.a) <= 10.0)) throw InvalidArgument("linear toy |a| must be <= 10");
    spec().validate();
}

StepOutcome LinearToyEnv::evaluate(const Vector& state, const Vector& u, const Vector& u_adv, double) const {
    StepOutcome out;
    out.mean_next = Vector::Constant(1, params_.a * state[0] + params_.b * u[0] + params_.b_adv * u_adv[0]);
    out.reward = reward(state, u, u_adv);
    return out;
}

double LinearToyEnv::reward(const Vector& state, const Vector& u, const Vector& u_adv) const {
    const double s = state[0];
    const double e = s - params_.target;
    return params_.linear * s - params_.state_cost * e * e - params_.action_cost * u[0] * u[0] +
           params_.adversary_cost * u_adv[0] * u_adv[0];
}

std::unique_ptr<Environment> LinearToyEnv::with_parameter(const std::string& parameter, double relative_value) const {
    if (std::isnan(relative_value)) throw InvalidArgument("relative parameter value is NaN");
    auto p = params_;
    if (parameter == "b") {
        p.b *= relative_value;
    } else if (parameter == "a") {
        p.a *= relative_value;
    } else {
        throw InvalidArgument("linear toy has no parameter '" + parameter + "'");
    }
    return std::make_unique<LinearToyEnv>(p);
}

// ---------------------------------------------------------------- wrappers

namespace {

EnvironmentSpec action_robust_spec(const Environment& inner) {
    EnvironmentSpec spec = inner.spec();
    spec.adversary_dim = spec.action_dim;
    spec.adversary_box = spec.agent_box;
    return spec;
}

EnvironmentSpec parameter_robust_spec(const Environment& inner, double lo, double hi) {
    EnvironmentSpec spec = inner.spec();
    spec.adversary_dim = 1;
    spec.adversary_box = Box(Vector::Constant(1, lo), Vector::Constant(1, hi));
    return spec;
}

}  // namespace

ActionRobustWrapper::ActionRobustWrapper(std::shared_ptr<const Environment> inner, double alpha)
    : Environment(action_robust_spec(*inner)), inner_(std::move(inner)), alpha_(alpha) {
    if (!(alpha_ >= 0.0 && alpha_ <= 1.0)) throw InvalidArgument("mixture parameter must lie in [0, 1]");
}

StepOutcome ActionRobustWrapper::evaluate(const Vector& state, const Vector& u, const Vector& u_adv,
                                          double coin) const {
    return inner_->evaluate(state, executed_action(u, u_adv, coin), inner_->nominal_adversary_action(), coin);
}

double ActionRobustWrapper::reward(const Vector& state, const Vector& u, const Vector&) const {
    return inner_->reward(state, u, inner_->nominal_adversary_action());
}

std::unique_ptr<Environment> ActionRobustWrapper::with_parameter(const std::string& parameter,
                                                                 double relative_value) const {
    std::shared_ptr<const Environment> inner = inner_->with_parameter(parameter, relative_value);
    return std::make_unique<ActionRobustWrapper>(std::move(inner), alpha_);
}

ParameterRobustWrapper::ParameterRobustWrapper(std::shared_ptr<const Environment> inner, std::string parameter,
                                               double lo, double hi)
    : Environment(parameter_robust_spec(*inner, lo, hi)),
      inner_(std::move(inner)),
      parameter_(std::move(parameter)),
      lo_(lo),
      hi_(hi) {
    if (!(lo_ < hi_)) throw InvalidArgument("parameter interval must satisfy lo < hi");
    // Fails early if the inner environment lacks the parameter.
    (void)inner_->with_parameter(parameter_, std::clamp(1.0, lo_, hi_));
}

std::unique_ptr<Environment> ParameterRobustWrapper::set_parameter(double value) const {
    if (std::isnan(value)) throw InvalidArgument("parameter value is NaN");
    return inner_->with_parameter(parameter_, std::clamp(value, lo_, hi_));
}

StepOutcome ParameterRobustWrapper::evaluate(const Vector& state, const Vector& u, const Vector& u_adv,
                                             double coin) const {
    const auto scaled = set_parameter(u_adv[0]);
    return scaled->evaluate(state, u, scaled->nominal_adversary_action(), coin);
}

double ParameterRobustWrapper::reward(const Vector& state, const Vector& u, const Vector&) const {
    return inner_->reward(state, u, inner_->nominal_adversary_action());
}

// -------------------------------------------------------------- stepping

namespace {

void check_box(const Box& box, const Vector& action, const char* who) {
    if (!box.contains(action)) {
        std::string msg = std::string(who) + " action outside its box:";
        for (Eigen::Index i = 0; i < action.size(); ++i) msg += " " + std::to_string(action[i]);
        throw BoundsError(msg);
    }
}

}  // namespace

std::pair<Vector, double> step(const Environment& env, const Vector& state, const Vector& u, const Vector& u_adv,
                               const Vector& noise, double coin) {
    const auto& spec = env.spec();
    if (state.size() != spec.state_dim) throw InvalidArgument("state has wrong dimension");
    if (noise.size() != spec.state_dim) throw InvalidArgument("noise has wrong dimension");
    check_box(spec.agent_box, u, "agent");
    check_box(spec.adversary_box, u_adv, "adversary");
    StepOutcome out = env.evaluate(state, u, u_adv, coin);
    return {env.wrap_state(out.mean_next + noise), out.reward};
}

std::pair<Vector, double> mixture_step(const ActionRobustWrapper& wrapper, const Vector& state, const Vector& u,
                                       const Vector& u_adv, double coin, const Vector& noise) {
    if (!(coin >= 0.0 && coin < 1.0)) throw InvalidArgument("coin must lie in [0, 1)");
    return step(wrapper, state, u, u_adv, noise, coin);
}

Trajectory rollout(const Environment& env, const StatePolicy& agent, const StatePolicy& adversary, RandomStream& noise,
                   int episode_index) {
    const auto& spec = env.spec();
    Trajectory traj;
    traj.transitions.reserve(spec.horizon);
    Vector state = spec.initial_state;
    double total = 0.0;
    for (int h = 0; h < spec.horizon; ++h) {
        Transition t;
        t.state = state;
        t.agent_action = agent(state);
        t.adversary_action = adversary(state);
        Vector w(spec.state_dim);
        for (int i = 0; i < spec.state_dim; ++i) w[i] = spec.noise_std[i] * noise.normal();
        const double coin = noise.uniform();
        auto [next, r] = step(env, state, t.agent_action, t.adversary_action, w, coin);
        t.next_state = next;
        t.reward = r;
        t.step = h;
        t.episode = episode_index;
        total += r;
        state = std::move(next);
        traj.transitions.push_back(std::move(t));
    }
    traj.terminal_agent_action = agent(state);
    traj.terminal_adversary_action = adversary(state);
    check_box(spec.agent_box, traj.terminal_agent_action, "agent");
    check_box(spec.adversary_box, traj.terminal_adversary_action, "adversary");
    traj.terminal_reward = env.reward(state, traj.terminal_agent_action, traj.terminal_adversary_action);
    traj.total_reward = total + traj.terminal_reward;
    return traj;
}

}  // namespace rhucrl

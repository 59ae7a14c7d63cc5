#include "rhucrl/gp_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rhucrl {

// ------------------------------------------------------------------ kernel

Kernel Kernel::squared_exponential(int dim, double lengthscale, double signal_variance) {
    return Kernel{KernelFamily::SquaredExponential, Vector::Constant(dim, lengthscale), signal_variance};
}

Kernel Kernel::linear(int dim, double scale, double signal_variance) {
    return Kernel{KernelFamily::Linear, Vector::Constant(dim, scale), signal_variance};
}

void Kernel::validate(int input_dim) const {
    if (lengthscales.size() != input_dim)
        throw InvalidArgument("kernel has " + std::to_string(lengthscales.size()) + " lengthscales, input has " +
                              std::to_string(input_dim) + " dimensions");
    if ((lengthscales.array() <= 0.0).any()) throw InvalidArgument("kernel lengthscales must be positive");
    if (!(signal_variance > 0.0 && signal_variance <= 1.0))
        throw InvalidArgument("kernel signal variance must lie in (0, 1]");
}

double Kernel::operator()(const Vector& x, const Vector& y) const {
    const Vector a = x.cwiseQuotient(lengthscales);
    const Vector b = y.cwiseQuotient(lengthscales);
    if (family == KernelFamily::Linear) return signal_variance * a.dot(b);
    return signal_variance * std::exp(-0.5 * (a - b).squaredNorm());
}

double Kernel::diag(const Vector& x) const {
    if (family == KernelFamily::Linear) return signal_variance * x.cwiseQuotient(lengthscales).squaredNorm();
    return signal_variance;
}

Matrix Kernel::cross(const RowMatrix& a, const RowMatrix& b) const {
    const Eigen::RowVectorXd inv = lengthscales.cwiseInverse().transpose();
    const RowMatrix as = a.array().rowwise() * inv.array();
    const RowMatrix bs = b.array().rowwise() * inv.array();
    Matrix gram = as * bs.transpose();
    if (family == KernelFamily::Linear) return signal_variance * gram;
    const Vector na = as.rowwise().squaredNorm();
    const Vector nb = bs.rowwise().squaredNorm();
    for (Eigen::Index j = 0; j < gram.cols(); ++j) {
        for (Eigen::Index i = 0; i < gram.rows(); ++i) {
            const double d2 = std::max(0.0, na[i] + nb[j] - 2.0 * gram(i, j));
            gram(i, j) = signal_variance * std::exp(-0.5 * d2);
        }
    }
    return gram;
}

// --------------------------------------------------------------- regressor

GpRegressor::GpRegressor(Kernel kernel, int input_dim, int output_dim, double regularizer)
    : kernel_(std::move(kernel)),
      input_dim_(input_dim),
      output_dim_(output_dim),
      regularizer_(regularizer),
      inputs_(0, input_dim),
      targets_(0, output_dim) {
    kernel_.validate(input_dim);
    if (output_dim < 1) throw InvalidArgument("GP needs at least one output");
    if (!(regularizer > 0.0)) throw InvalidArgument("GP regularizer must be positive");
}

void GpRegressor::set_data(RowMatrix inputs, RowMatrix targets) {
    if (inputs.cols() != input_dim_ || targets.cols() != output_dim_ || inputs.rows() != targets.rows())
        throw InvalidArgument("GP data has inconsistent dimensions");
    inputs_ = std::move(inputs);
    targets_ = std::move(targets);
    refactor();
}

void GpRegressor::add_data(const RowMatrix& inputs, const RowMatrix& targets) {
    if (inputs.rows() == 0) return;
    if (inputs.cols() != input_dim_ || targets.cols() != output_dim_ || inputs.rows() != targets.rows())
        throw InvalidArgument("GP data has inconsistent dimensions");
    RowMatrix x(inputs_.rows() + inputs.rows(), input_dim_);
    x << inputs_, inputs;
    RowMatrix y(targets_.rows() + targets.rows(), output_dim_);
    y << targets_, targets;
    set_data(std::move(x), std::move(y));
}

void GpRegressor::refactor() {
    const Eigen::Index n = inputs_.rows();
    jitter_ = 0.0;
    if (n == 0) {
        chol_lower_.resize(0, 0);
        alpha_.resize(0, output_dim_);
        return;
    }
    Matrix k = kernel_.cross(inputs_, inputs_);
    k.diagonal().array() += regularizer_;
    Eigen::LLT<Matrix> llt(k);
    double jitter = 1e-10;
    while (llt.info() != Eigen::Success) {
        if (jitter > 1e-6) {
            std::ostringstream msg;
            msg << "kernel matrix not positive definite after jitter escalation up to " << jitter / 10.0;
            throw NumericError(msg.str());
        }
        Matrix kj = k;
        kj.diagonal().array() += jitter;
        llt.compute(kj);
        jitter_ = jitter;
        jitter *= 10.0;
    }
    chol_lower_ = llt.matrixL();
    alpha_ = llt.solve(Matrix(targets_));
}

GpRegressor::Batch GpRegressor::predict(const RowMatrix& queries) const {
    if (queries.cols() != input_dim_) throw InvalidArgument("GP query has wrong dimension");
    Batch out;
    const Eigen::Index b = queries.rows();
    if (inputs_.rows() == 0) {
        out.mean = RowMatrix::Zero(b, output_dim_);
        out.variance.resize(b);
        for (Eigen::Index i = 0; i < b; ++i) out.variance[i] = kernel_.diag(queries.row(i).transpose());
        return out;
    }
    const Matrix kstar = kernel_.cross(inputs_, queries);  // n × B
    out.mean = kstar.transpose() * alpha_;
    const Matrix v = chol_lower_.triangularView<Eigen::Lower>().solve(kstar);
    out.variance.resize(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const double prior = kernel_.diag(queries.row(i).transpose());
        out.variance[i] = std::clamp(prior - v.col(i).squaredNorm(), 0.0, prior);
    }
    return out;
}

RowMatrix GpRegressor::mean(const RowMatrix& queries) const {
    if (queries.cols() != input_dim_) throw InvalidArgument("GP query has wrong dimension");
    if (inputs_.rows() == 0) return RowMatrix::Zero(queries.rows(), output_dim_);
    return kernel_.cross(queries, inputs_) * alpha_;
}

Vector GpRegressor::variance(const RowMatrix& queries) const {
    if (queries.cols() != input_dim_) throw InvalidArgument("GP query has wrong dimension");
    const Eigen::Index b = queries.rows();
    Vector out(b);
    if (inputs_.rows() == 0) {
        for (Eigen::Index i = 0; i < b; ++i) out[i] = kernel_.diag(queries.row(i).transpose());
        return out;
    }
    const Matrix kstar = kernel_.cross(inputs_, queries);
    const Matrix v = chol_lower_.triangularView<Eigen::Lower>().solve(kstar);
    for (Eigen::Index i = 0; i < b; ++i) {
        const double prior = kernel_.diag(queries.row(i).transpose());
        out[i] = std::clamp(prior - v.col(i).squaredNorm(), 0.0, prior);
    }
    return out;
}

// ---------------------------------------------------------- dynamics model

Vector join_input(const Vector& state, const Vector& u, const Vector& u_adv) {
    Vector z(state.size() + u.size() + u_adv.size());
    z << state, u, u_adv;
    return z;
}

namespace {

Vector to_vector(const std::vector<double>& v, int dim, double fallback) {
    if (v.empty()) return Vector::Constant(dim, fallback);
    if (static_cast<int>(v.size()) != dim)
        throw InvalidArgument("expected " + std::to_string(dim) + " values, got " + std::to_string(v.size()));
    return Eigen::Map<const Vector>(v.data(), dim);
}

int model_input_dim(const Environment* env, const GpModelConfig& config, int p, int q, int qa) {
    const int state_part = (env && config.embed_state) ? env->embedded_state_dim() : p;
    return state_part + q + qa;
}

Kernel make_kernel(const GpModelConfig& c, int dim) {
    Kernel k;
    k.family = c.kernel;
    k.lengthscales = to_vector(c.lengthscales, dim, 1.0);
    k.signal_variance = c.signal_variance;
    return k;
}

}  // namespace

GpDynamicsModel::GpDynamicsModel(std::shared_ptr<const Environment> env, GpModelConfig config)
    : env_(std::move(env)),
      config_(std::move(config)),
      state_dim_(env_->spec().state_dim),
      action_dim_(env_->spec().action_dim),
      adversary_dim_(env_->spec().adversary_dim),
      gp_(make_kernel(config_, model_input_dim(env_.get(), config_, state_dim_, action_dim_, adversary_dim_)),
          model_input_dim(env_.get(), config_, state_dim_, action_dim_, adversary_dim_), state_dim_,
          config_.regularizer.value_or(static_cast<double>(state_dim_ * env_->spec().horizon))) {
    output_scales_ = to_vector(config_.output_scales, state_dim_, 1.0);
    if ((output_scales_.array() <= 0.0).any()) throw InvalidArgument("output scales must be positive");
    const int d = transformed_dim();
    input_shift_ = Vector::Zero(d);
    input_scale_ = to_vector(config_.input_scales, d, 1.0);
    if ((input_scale_.array() <= 0.0).any()) throw InvalidArgument("input scales must be positive");
    if (config_.normalization == InputNormalization::None) input_scale_.setOnes();
    if (config_.points_per_episode < 0) throw InvalidArgument("points_per_episode must be >= 0");
}

GpDynamicsModel::GpDynamicsModel(int state_dim, int action_dim, int adversary_dim, Kernel kernel, double regularizer)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      adversary_dim_(adversary_dim),
      gp_(kernel, state_dim + action_dim + adversary_dim, state_dim, regularizer) {
    config_.kernel = kernel.family;
    config_.lengthscales.assign(kernel.lengthscales.data(), kernel.lengthscales.data() + kernel.lengthscales.size());
    config_.signal_variance = kernel.signal_variance;
    config_.regularizer = regularizer;
    config_.target = TargetMode::Absolute;
    config_.normalization = InputNormalization::None;
    config_.embed_state = false;
    output_scales_ = Vector::Ones(state_dim_);
    input_shift_ = Vector::Zero(joint_dim());
    input_scale_ = Vector::Ones(joint_dim());
}

int GpDynamicsModel::transformed_dim() const {
    return model_input_dim(env_.get(), config_, state_dim_, action_dim_, adversary_dim_);
}

Vector GpDynamicsModel::transform_input(const Vector& z) const {
    if (z.size() != joint_dim()) throw InvalidArgument("model input has wrong dimension");
    const int d = transformed_dim();
    Vector x(d);
    int offset = 0;
    if (env_ && config_.embed_state) {
        env_->embed_state(z.data(), x.data());
        offset = env_->embedded_state_dim();
    } else {
        x.head(state_dim_) = z.head(state_dim_);
        offset = state_dim_;
    }
    x.tail(d - offset) = z.tail(action_dim_ + adversary_dim_);
    return (x - input_shift_).cwiseQuotient(input_scale_);
}

void GpDynamicsModel::transform_rows(const RowMatrix& states, const RowMatrix& u, const RowMatrix& u_adv,
                                     RowMatrix& out) const {
    const Eigen::Index b = states.rows();
    const int d = transformed_dim();
    out.resize(b, d);
    const bool embed = env_ && config_.embed_state;
    const int offset = embed ? env_->embedded_state_dim() : state_dim_;
    for (Eigen::Index i = 0; i < b; ++i) {
        double* row = out.row(i).data();
        if (embed) {
            env_->embed_state(states.row(i).data(), row);
        } else {
            for (int k = 0; k < state_dim_; ++k) row[k] = states(i, k);
        }
        for (int k = 0; k < action_dim_; ++k) row[offset + k] = u(i, k);
        for (int k = 0; k < adversary_dim_; ++k) row[offset + action_dim_ + k] = u_adv(i, k);
        for (int k = 0; k < d; ++k) row[k] = (row[k] - input_shift_[k]) / input_scale_[k];
    }
}

Vector GpDynamicsModel::raw_target(const Vector& state, const Vector& next_state) const {
    if (config_.target == TargetMode::Absolute) return next_state;
    return env_ ? env_->state_difference(next_state, state) : Vector(next_state - state);
}

void GpDynamicsModel::fit(const std::vector<Transition>& transitions) {
    if (transitions.empty()) return;
    const int n = static_cast<int>(transitions.size());
    std::vector<int> keep;
    const int m = config_.points_per_episode;
    if (m > 0 && m < n) {
        for (int k = 0; k < m; ++k) keep.push_back(static_cast<int>((k + 0.5) * n / m));
    } else {
        for (int k = 0; k < n; ++k) keep.push_back(k);
    }
    for (int idx : keep) {
        const auto& t = transitions[idx];
        if (t.state.size() != state_dim_ || t.agent_action.size() != action_dim_ ||
            t.adversary_action.size() != adversary_dim_ || t.next_state.size() != state_dim_)
            throw InvalidArgument("transition dimensions do not match the model");
        raw_inputs_.push_back(join_input(t.state, t.agent_action, t.adversary_action));
        raw_targets_.push_back(raw_target(t.state, t.next_state));
    }
    ++episode_count_;
    rebuild();
}

void GpDynamicsModel::rebuild() {
    const int n = static_cast<int>(raw_inputs_.size());
    const int d = transformed_dim();
    if (config_.normalization == InputNormalization::Running && n > 0) {
        // Statistics of the un-normalized transformed inputs.
        input_shift_.setZero();
        input_scale_.setOnes();
        RowMatrix x(n, d);
        for (int i = 0; i < n; ++i) x.row(i) = transform_input(raw_inputs_[i]).transpose();
        const Vector mean = x.colwise().mean().transpose();
        const Vector var = (x.rowwise() - mean.transpose()).colwise().squaredNorm().transpose() / n;
        const Vector floor = to_vector(config_.input_scales, d, 1.0);
        input_shift_ = mean;
        input_scale_ = var.cwiseSqrt().cwiseMax(floor);
    }
    RowMatrix x(n, d);
    RowMatrix y(n, state_dim_);
    for (int i = 0; i < n; ++i) {
        x.row(i) = transform_input(raw_inputs_[i]).transpose();
        y.row(i) = raw_targets_[i].cwiseQuotient(output_scales_).transpose();
    }
    gp_.set_data(std::move(x), std::move(y));
}

void GpDynamicsModel::set_temperature(double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InvalidArgument("temperature must be positive");
    temperature_ = temperature;
}

double GpDynamicsModel::prior_variance(const Vector& z) const { return gp_.kernel().diag(transform_input(z)); }

GpDynamicsModel::Prediction GpDynamicsModel::predict(const Vector& z) const {
    if (z.size() != joint_dim()) throw InvalidArgument("model input has wrong dimension");
    return predict(z.head(state_dim_), z.segment(state_dim_, action_dim_), z.tail(adversary_dim_));
}

GpDynamicsModel::Prediction GpDynamicsModel::predict(const Vector& state, const Vector& u,
                                                     const Vector& u_adv) const {
    if (state.size() != state_dim_ || u.size() != action_dim_ || u_adv.size() != adversary_dim_)
        throw InvalidArgument("model query has wrong dimension");
    RowMatrix s = state.transpose();
    RowMatrix a = u.transpose();
    RowMatrix b = u_adv.transpose();
    Batch batch = predict_batch(s, a, b);
    return {batch.mean.row(0).transpose(), batch.std.row(0).transpose()};
}

GpDynamicsModel::Batch GpDynamicsModel::predict_batch(const RowMatrix& states, const RowMatrix& u,
                                                      const RowMatrix& u_adv, bool mean_only) const {
    if (states.cols() != state_dim_ || u.cols() != action_dim_ || u_adv.cols() != adversary_dim_ ||
        u.rows() != states.rows() || u_adv.rows() != states.rows())
        throw InvalidArgument("model batch query has wrong dimensions");
    RowMatrix x;
    transform_rows(states, u, u_adv, x);
    Batch out;
    const Eigen::Index b = states.rows();
    const Eigen::RowVectorXd scales = output_scales_.transpose();
    if (mean_only) {
        out.mean = gp_.mean(x);
    } else {
        auto pred = gp_.predict(x);
        out.mean = std::move(pred.mean);
        out.std.resize(b, state_dim_);
        for (Eigen::Index i = 0; i < b; ++i)
            out.std.row(i) = temperature_ * std::sqrt(pred.variance[i]) * scales;
    }
    out.mean.array().rowwise() *= scales.array();
    if (config_.target == TargetMode::Delta) {
        for (Eigen::Index i = 0; i < b; ++i) {
            out.mean.row(i) += states.row(i);
        }
    }
    return out;
}

double GpDynamicsModel::normalized_variance(const Vector& z) const {
    RowMatrix x = transform_input(z).transpose();
    return gp_.variance(x)[0];
}

double GpDynamicsModel::normalized_variance(const Vector& state, const Vector& u, const Vector& u_adv) const {
    return normalized_variance(join_input(state, u, u_adv));
}

namespace {

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
Vector json_vec(const nlohmann::json& j) {
    auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

nlohmann::json GpDynamicsModel::to_json() const {
    nlohmann::json j;
    j["format"] = "rhucrl.gp_dynamics_model";
    j["version"] = 1;
    j["dims"] = {{"state", state_dim_}, {"action", action_dim_}, {"adversary", adversary_dim_}};
    j["environment"] = env_ ? nlohmann::json(env_->name()) : nlohmann::json(nullptr);
    j["kernel"] = {{"family", config_.kernel == KernelFamily::Linear ? "linear" : "squared_exponential"},
                   {"lengthscales", vec_json(gp_.kernel().lengthscales)},
                   {"signal_variance", config_.signal_variance}};
    j["regularizer"] = gp_.regularizer();
    j["target"] = config_.target == TargetMode::Delta ? "delta" : "absolute";
    const char* norm = config_.normalization == InputNormalization::None
                           ? "none"
                           : (config_.normalization == InputNormalization::Fixed ? "fixed" : "running");
    j["normalization"] = {{"mode", norm},
                          {"input_scales", config_.input_scales},
                          {"shift", vec_json(input_shift_)},
                          {"scale", vec_json(input_scale_)}};
    j["output_scales"] = vec_json(output_scales_);
    j["points_per_episode"] = config_.points_per_episode;
    j["embed_state"] = config_.embed_state;
    j["temperature"] = temperature_;
    j["episodes"] = episode_count_;
    nlohmann::json inputs = nlohmann::json::array();
    nlohmann::json targets = nlohmann::json::array();
    for (std::size_t i = 0; i < raw_inputs_.size(); ++i) {
        inputs.push_back(vec_json(raw_inputs_[i]));
        targets.push_back(vec_json(raw_targets_[i]));
    }
    j["inputs"] = std::move(inputs);
    j["targets"] = std::move(targets);
    return j;
}

GpDynamicsModel GpDynamicsModel::from_json(const nlohmann::json& j, std::shared_ptr<const Environment> env) {
    if (j.at("format").get<std::string>() != "rhucrl.gp_dynamics_model")
        throw InvalidArgument("not a GP dynamics model snapshot");
    GpModelConfig c;
    const auto& k = j.at("kernel");
    c.kernel = k.at("family").get<std::string>() == "linear" ? KernelFamily::Linear : KernelFamily::SquaredExponential;
    c.lengthscales = k.at("lengthscales").get<std::vector<double>>();
    c.signal_variance = k.at("signal_variance").get<double>();
    c.regularizer = j.at("regularizer").get<double>();
    c.target = j.at("target").get<std::string>() == "delta" ? TargetMode::Delta : TargetMode::Absolute;
    const auto mode = j.at("normalization").at("mode").get<std::string>();
    c.normalization = mode == "none" ? InputNormalization::None
                                     : (mode == "fixed" ? InputNormalization::Fixed : InputNormalization::Running);
    c.input_scales = j.at("normalization").at("input_scales").get<std::vector<double>>();
    c.output_scales = j.at("output_scales").get<std::vector<double>>();
    c.points_per_episode = j.at("points_per_episode").get<int>();
    c.embed_state = j.at("embed_state").get<bool>();

    const auto& dims = j.at("dims");
    std::optional<GpDynamicsModel> model;
    if (env) {
        if (env->spec().state_dim != dims.at("state").get<int>() ||
            env->spec().action_dim != dims.at("action").get<int>() ||
            env->spec().adversary_dim != dims.at("adversary").get<int>())
            throw InvalidArgument("snapshot dimensions do not match the environment");
        model.emplace(std::move(env), c);
    } else {
        Kernel kern{c.kernel, json_vec(k.at("lengthscales")), c.signal_variance};
        model.emplace(dims.at("state").get<int>(), dims.at("action").get<int>(), dims.at("adversary").get<int>(),
                      kern, *c.regularizer);
        model->config_ = c;
    }
    for (const auto& x : j.at("inputs")) model->raw_inputs_.push_back(json_vec(x));
    for (const auto& y : j.at("targets")) model->raw_targets_.push_back(json_vec(y));
    model->input_shift_ = json_vec(j.at("normalization").at("shift"));
    model->input_scale_ = json_vec(j.at("normalization").at("scale"));
    model->episode_count_ = j.at("episodes").get<int>();
    model->temperature_ = j.at("temperature").get<double>();
    if (!model->raw_inputs_.empty()) model->rebuild();
    return std::move(*model);
}

// -------------------------------------------------------------------- beta

BetaSchedule BetaSchedule::fixed(double value) {
    BetaSchedule b;
    b.mode = Mode::Fixed;
    b.fixed_value = value;
    return b;
}

BetaSchedule BetaSchedule::theoretical(double rkhs_bound, double noise_scale, double delta) {
    BetaSchedule b;
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("beta confidence delta must lie in (0, 1)");
    b.mode = Mode::Theoretical;
    b.rkhs_bound = rkhs_bound;
    b.noise_scale = noise_scale;
    b.delta = delta;
    return b;
}

double BetaSchedule::operator()(double regularizer, double information_gain) const {
    if (mode == Mode::Fixed) {
        if (!(fixed_value >= 0.0)) throw InvalidArgument("fixed beta must be >= 0");
        return fixed_value;
    }
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("beta confidence delta must lie in (0, 1)");
    if (!(regularizer > 0.0)) throw InvalidArgument("beta needs a positive regularizer");
    return rkhs_bound +
           noise_scale / regularizer * std::sqrt(2.0 * std::log(1.0 / delta) + 2.0 * std::max(0.0, information_gain));
}

// ------------------------------------------------------------ info gain

void ComplexityTracker::record(double squared_norm_sigma, double info_gain) {
    variance_sum_ += squared_norm_sigma;
    info_gain_ += info_gain;
    ++points_;
}

double info_gain_increment(const GpDynamicsModel& model, const Vector& z, ComplexityTracker* tracker) {
    const double var = model.normalized_variance(z);
    const int p = model.state_dim();
    const double gain = p * 0.5 * std::log1p(var / model.regularizer());
    if (tracker) tracker->record(p * var, gain);
    return gain;
}

double information_gain_closed_form(const Kernel& kernel, const RowMatrix& inputs, double regularizer) {
    if (inputs.rows() == 0) return 0.0;
    Matrix m = kernel.cross(inputs, inputs) / regularizer;
    m.diagonal().array() += 1.0;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) throw NumericError("I + K/λ is not positive definite");
    const Matrix l = llt.matrixL();
    return l.diagonal().array().log().sum();  // ½·ln det = Σ ln L_ii
}

double mig_greedy(const Kernel& kernel, const RowMatrix& candidates, int budget, double regularizer) {
    const Eigen::Index m = candidates.rows();
    if (m == 0) throw InvalidArgument("MIG needs a non-empty candidate set");
    if (budget < 0 || budget > m) throw InvalidArgument("MIG budget must lie in [0, |candidates|]");
    kernel.validate(static_cast<int>(candidates.cols()));
    // Incremental posterior variances via a partial pivoted Cholesky on the
    // candidate Gram matrix with noise λ.
    const Matrix k = kernel.cross(candidates, candidates);
    Vector var = k.diagonal();
    Matrix factors(m, budget);
    std::vector<bool> used(m, false);
    std::vector<Eigen::Index> chosen;
    double total = 0.0;
    for (int step = 0; step < budget; ++step) {
        Eigen::Index best = -1;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (used[i]) continue;
            if (best < 0 || var[i] > var[best]) best = i;
        }
        total += 0.5 * std::log1p(std::max(0.0, var[best]) / regularizer);
        used[best] = true;
        chosen.push_back(best);
        // Rank-one posterior update after observing `best` with noise λ.
        const double denom = std::sqrt(std::max(0.0, var[best]) + regularizer);
        Vector col = k.col(best);
        for (int j = 0; j < step; ++j) col -= factors.col(j) * factors(best, j);
        factors.col(step) = col / denom;
        for (Eigen::Index i = 0; i < m; ++i) var[i] = std::max(0.0, var[i] - factors(i, step) * factors(i, step));
    }

    // Single-swap local search on top of the greedy set; any subset's gain is
    // still a lower bound on γ_n.
    auto gain_of = [&](const std::vector<Eigen::Index>& idx) {
        RowMatrix rows(static_cast<Eigen::Index>(idx.size()), candidates.cols());
        for (std::size_t j = 0; j < idx.size(); ++j) rows.row(static_cast<Eigen::Index>(j)) = candidates.row(idx[j]);
        return information_gain_closed_form(kernel, rows, regularizer);
    };
    if (budget > 0 && budget < m) {
        total = gain_of(chosen);
        for (int pass = 0; pass < 10; ++pass) {
            bool improved = false;
            for (std::size_t j = 0; j < chosen.size(); ++j) {
                for (Eigen::Index i = 0; i < m; ++i) {
                    if (used[i]) continue;
                    auto trial = chosen;
                    trial[j] = i;
                    const double g = gain_of(trial);
                    if (g > total + 1e-12) {
                        used[chosen[j]] = false;
                        used[i] = true;
                        chosen = std::move(trial);
                        total = g;
                        improved = true;
                    }
                }
            }
            if (!improved) break;
        }
    }
    return total;
}

ComplexityReport complexity_report(const ComplexityTracker& tracker, double regularizer) {
    ComplexityReport r;
    r.gamma_hat = tracker.gamma_hat();
    r.information_gain = tracker.information_gain();
    r.bound_ok = r.gamma_hat <= (1.0 + 2.0 * regularizer) * r.information_gain + 1e-12;
    return r;
}

// --------------------------------------------------------- recalibration

namespace {

constexpr int kLevels = 19;  // 0.05, 0.10, ..., 0.95

double level(int i) { return 0.05 * (i + 1); }

// P(|N(0,1)| ≤ x)
double central_mass(double x) { return std::erf(x / std::sqrt(2.0)); }

double coverage_gap(const std::vector<double>& residuals, double temperature) {
    // Mean over levels of (empirical coverage − nominal level).
    std::vector<double> masses(residuals.size());
    for (std::size_t i = 0; i < residuals.size(); ++i) masses[i] = central_mass(std::abs(residuals[i]) / temperature);
    double gap = 0.0;
    for (int l = 0; l < kLevels; ++l) {
        const double p = level(l);
        const auto covered = std::count_if(masses.begin(), masses.end(), [p](double m) { return m <= p; });
        gap += static_cast<double>(covered) / static_cast<double>(masses.size()) - p;
    }
    return gap / kLevels;
}

}  // namespace

double expected_calibration_error(const std::vector<double>& residuals, double temperature) {
    if (residuals.empty()) throw InvalidArgument("calibration error needs data");
    std::vector<double> masses(residuals.size());
    for (std::size_t i = 0; i < residuals.size(); ++i) masses[i] = central_mass(std::abs(residuals[i]) / temperature);
    double ece = 0.0;
    for (int l = 0; l < kLevels; ++l) {
        const double p = level(l);
        const auto covered = std::count_if(masses.begin(), masses.end(), [p](double m) { return m <= p; });
        ece += std::abs(static_cast<double>(covered) / static_cast<double>(masses.size()) - p);
    }
    return ece / kLevels;
}

RecalibrationResult calibrate_residuals(const std::vector<double>& residuals, double lo, double hi) {
    if (residuals.empty()) throw InvalidArgument("recalibration needs a non-empty validation set");
    if (!(lo > 0.0 && lo < hi)) throw InvalidArgument("temperature interval must satisfy 0 < lo < hi");
    // Coverage grows with T, so the gap is monotone and bisection applies.
    double a = std::log(lo);
    double b = std::log(hi);
    if (coverage_gap(residuals, lo) >= 0.0) {
        b = a;
    } else if (coverage_gap(residuals, hi) <= 0.0) {
        a = b;
    } else {
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (a + b);
            if (coverage_gap(residuals, std::exp(mid)) < 0.0) {
                a = mid;
            } else {
                b = mid;
            }
        }
    }
    RecalibrationResult r;
    r.temperature = std::clamp(std::exp(0.5 * (a + b)), lo, hi);
    r.calibration_error = expected_calibration_error(residuals, r.temperature);
    return r;
}

RecalibrationResult recalibrate(GpDynamicsModel& model, const std::vector<ValidationPoint>& validation, double lo,
                                double hi) {
    if (validation.empty()) throw InvalidArgument("recalibration needs a non-empty validation set");
    const double previous = model.temperature();
    model.set_temperature(1.0);
    std::vector<double> residuals;
    try {
        for (const auto& v : validation) {
            const auto pred = model.predict(v.state, v.u, v.u_adv);
            // Delta mode routes through the environment so angles wrap.
            const Vector err = model.config().target == TargetMode::Delta ? model.raw_target(pred.mean, v.next_state)
                                                                          : Vector(v.next_state - pred.mean);
            for (Eigen::Index i = 0; i < err.size(); ++i) {
                if (pred.std[i] > 0.0) residuals.push_back(err[i] / pred.std[i]);
            }
        }
    } catch (...) {
        model.set_temperature(previous);
        throw;
    }
    if (residuals.empty()) {
        model.set_temperature(previous);
        throw InvalidArgument("validation set has no point with positive predictive std");
    }
    auto result = calibrate_residuals(residuals, lo, hi);
    model.set_temperature(result.temperature);
    return result;
}

}  // namespace rhucrl

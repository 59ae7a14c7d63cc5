#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rhucrl/core_types.hpp"
#include "rhucrl/environment.hpp"

namespace rhucrl {

enum class KernelFamily { SquaredExponential, Linear };

/// Stationary SE kernel σ_f²·exp(-½‖(x - x')/ℓ‖²), or the linear kernel
/// σ_f²·⟨x/ℓ, x'/ℓ⟩. Signal variance is capped at 1 so that k(z, z) ≤ 1 on
/// the SE family.
struct Kernel {
    KernelFamily family = KernelFamily::SquaredExponential;
    Vector lengthscales;  // one per (transformed) input dimension
    double signal_variance = 1.0;

    static Kernel squared_exponential(int dim, double lengthscale = 1.0, double signal_variance = 1.0);
    static Kernel linear(int dim, double scale = 1.0, double signal_variance = 1.0);

    void validate(int input_dim) const;
    double operator()(const Vector& x, const Vector& y) const;
    /// Gram matrix between the rows of A and the rows of B.
    Matrix cross(const RowMatrix& a, const RowMatrix& b) const;
    double diag(const Vector& x) const;
};

/// Exact GP regression with p outputs sharing one input kernel, regularizer λ
/// and Cholesky factor of (K_n + λI). The factor is recomputed from scratch on
/// every data change.
class GpRegressor {
   public:
    GpRegressor(Kernel kernel, int input_dim, int output_dim, double regularizer);

    void set_data(RowMatrix inputs, RowMatrix targets);
    void add_data(const RowMatrix& inputs, const RowMatrix& targets);

    struct Batch {
        RowMatrix mean;   // B × p
        Vector variance;  // B, shared by the p outputs
    };
    Batch predict(const RowMatrix& queries) const;
    RowMatrix mean(const RowMatrix& queries) const;
    /// Posterior variance only.
    Vector variance(const RowMatrix& queries) const;

    int size() const { return static_cast<int>(inputs_.rows()); }
    int input_dim() const { return input_dim_; }
    int output_dim() const { return output_dim_; }
    double regularizer() const { return regularizer_; }
    const Kernel& kernel() const { return kernel_; }
    const RowMatrix& inputs() const { return inputs_; }
    const RowMatrix& targets() const { return targets_; }
    double jitter_used() const { return jitter_; }

   private:
    void refactor();

    Kernel kernel_;
    int input_dim_;
    int output_dim_;
    double regularizer_;
    RowMatrix inputs_;
    RowMatrix targets_;
    Matrix chol_lower_;  // L with L·Lᵀ = K + (λ + jitter)·I
    Matrix alpha_;       // (K + λI)⁻¹ Y, n × p
    double jitter_ = 0.0;
};

enum class TargetMode { Delta, Absolute };
enum class InputNormalization { None, Fixed, Running };

struct GpModelConfig {
    KernelFamily kernel = KernelFamily::SquaredExponential;
    std::vector<double> lengthscales;  // empty → all ones
    double signal_variance = 1.0;
    std::optional<double> regularizer;  // empty → λ = p·H
    TargetMode target = TargetMode::Delta;
    InputNormalization normalization = InputNormalization::Running;
    std::vector<double> input_scales;  // Fixed mode scale, Running-mode std floor
    std::vector<double> output_scales;  // per state dimension; empty → ones
    int points_per_episode = 0;         // 0 keeps every transition
    bool embed_state = true;            // use the environment's smooth state embedding
};

/// Calibrated statistical model of the dynamics: p GP regressors over
/// z = (s, u, ū). μ(z) is the predicted next state and σ(z) the per-dimension
/// epistemic std (already multiplied by the recalibration temperature).
class GpDynamicsModel {
   public:
    GpDynamicsModel(std::shared_ptr<const Environment> env, GpModelConfig config);
    /// Environment-free model over raw z ∈ ℝ^(p+q+q̄) with absolute targets.
    GpDynamicsModel(int state_dim, int action_dim, int adversary_dim, Kernel kernel, double regularizer);

    /// Appends the transitions (subsampled per config) and refactorizes.
    void fit(const std::vector<Transition>& transitions);
    void fit_episode(const Trajectory& trajectory) { fit(trajectory.transitions); }

    struct Prediction {
        Vector mean;
        Vector std;
    };
    Prediction predict(const Vector& state, const Vector& u, const Vector& u_adv) const;
    Prediction predict(const Vector& z) const;

    /// Batched query. Rows of `states`, `u`, `u_adv` form z. When `mean_only`,
    /// std is left empty.
    struct Batch {
        RowMatrix mean;  // B × p (next-state prediction)
        RowMatrix std;   // B × p
    };
    Batch predict_batch(const RowMatrix& states, const RowMatrix& u, const RowMatrix& u_adv,
                        bool mean_only = false) const;

    /// Posterior variance of the normalized regression problem (kernel units,
    /// before output scaling or temperature), i.e. σ²_t(z) with k(z,z) ≤ 1.
    double normalized_variance(const Vector& state, const Vector& u, const Vector& u_adv) const;
    double normalized_variance(const Vector& z) const;

    int state_dim() const { return state_dim_; }
    int action_dim() const { return action_dim_; }
    int adversary_dim() const { return adversary_dim_; }
    int joint_dim() const { return state_dim_ + action_dim_ + adversary_dim_; }
    int observation_count() const { return static_cast<int>(raw_inputs_.size()); }
    int episode_count() const { return episode_count_; }
    double regularizer() const { return gp_.regularizer(); }
    double prior_variance(const Vector& z) const;

    double temperature() const { return temperature_; }
    void set_temperature(double temperature);

    const GpModelConfig& config() const { return config_; }
    const GpRegressor& regressor() const { return gp_; }
    const std::vector<Vector>& raw_inputs() const { return raw_inputs_; }
    const std::vector<Vector>& raw_targets() const { return raw_targets_; }

    /// Transformed (embedded, normalized) kernel input for z.
    Vector transform_input(const Vector& z) const;
    /// Regression target for a transition, before output scaling.
    Vector raw_target(const Vector& state, const Vector& next_state) const;

    nlohmann::json to_json() const;
    static GpDynamicsModel from_json(const nlohmann::json& j, std::shared_ptr<const Environment> env);

   private:
    void rebuild();
    void transform_rows(const RowMatrix& states, const RowMatrix& u, const RowMatrix& u_adv, RowMatrix& out) const;
    int transformed_dim() const;

    std::shared_ptr<const Environment> env_;
    GpModelConfig config_;
    int state_dim_;
    int action_dim_;
    int adversary_dim_;
    Vector output_scales_;
    Vector input_shift_;
    Vector input_scale_;
    std::vector<Vector> raw_inputs_;   // z
    std::vector<Vector> raw_targets_;  // Δs or s'
    GpRegressor gp_;
    double temperature_ = 1.0;
    int episode_count_ = 0;
};

Vector join_input(const Vector& state, const Vector& u, const Vector& u_adv);

/// β_t schedule. Theoretical mode: B_f + (σ/λ)·sqrt(2 ln(1/δ) + 2γ_t).
struct BetaSchedule {
    enum class Mode { Theoretical, Fixed };
    Mode mode = Mode::Fixed;
    double fixed_value = 1.0;
    double rkhs_bound = 1.0;  // B_f
    double noise_scale = 0.01;  // σ
    double delta = 0.1;

    static BetaSchedule fixed(double value);
    static BetaSchedule theoretical(double rkhs_bound, double noise_scale, double delta);

    /// β for the given regularizer λ and information gain γ_t.
    double operator()(double regularizer, double information_gain) const;
};

/// Running sums of realized squared predictive uncertainty Σ‖σ_{t-1}(z)‖²
/// and information gain over visited points.
class ComplexityTracker {
   public:
    void record(double squared_norm_sigma, double info_gain);
    double gamma_hat() const { return variance_sum_; }
    double information_gain() const { return info_gain_; }
    int points() const { return points_; }

   private:
    double variance_sum_ = 0.0;
    double info_gain_ = 0.0;
    int points_ = 0;
};

/// ½·ln(1 + λ⁻¹·σ²(z)) summed over the p output copies; added to `tracker`
/// when one is given together with ‖σ(z)‖².
double info_gain_increment(const GpDynamicsModel& model, const Vector& z, ComplexityTracker* tracker = nullptr);

/// Closed-form I(f_Z; y_Z) = ½ ln det(I + λ⁻¹ K) for one output.
double information_gain_closed_form(const Kernel& kernel, const RowMatrix& inputs, double regularizer);

/// Greedy maximization of the information gain over `candidates`
/// (single output).
double mig_greedy(const Kernel& kernel, const RowMatrix& candidates, int budget, double regularizer);

struct ComplexityReport {
    double gamma_hat = 0.0;
    double information_gain = 0.0;
    bool bound_ok = true;  // Γ̂ ≤ (1 + 2λ)·I
};
ComplexityReport complexity_report(const ComplexityTracker& tracker, double regularizer);

/// Validation pair for recalibration: joint input and observed next state.
struct ValidationPoint {
    Vector state;
    Vector u;
    Vector u_adv;
    Vector next_state;
};

struct RecalibrationResult {
    double temperature = 1.0;
    double calibration_error = 0.0;  // ECE at the returned temperature
};

/// Expected calibration error of the Gaussian predictive intervals
/// N(μ, (T·σ)²) over confidence levels 0.05, 0.10, ..., 0.95.
double expected_calibration_error(const std::vector<double>& standardized_residuals, double temperature);

/// Binary search over log T in [lo, hi] for the temperature whose mean
/// coverage gap is zero; applies it to the model.
RecalibrationResult recalibrate(GpDynamicsModel& model, const std::vector<ValidationPoint>& validation,
                                double lo = 0.01, double hi = 100.0);

/// Same search on precomputed standardized residuals (y - μ)/σ.
RecalibrationResult calibrate_residuals(const std::vector<double>& standardized_residuals, double lo = 0.01,
                                        double hi = 100.0);

}  // namespace rhucrl

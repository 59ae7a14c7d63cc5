#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rhucrl/core_types.hpp"

namespace rhucrl {

enum class FeatureKind {
    Fixed,            // no parameters; outputs a fixed action (singleton family)
    Constant,         // bias only: stateless policy
    Identity,         // raw input + bias
    NormalizedState,  // angles embedded as (cos, sin), then divided by scale; + bias
    Radial,           // Gaussian bumps on the normalized input; + bias
    Polynomial        // monomials of the normalized input (default: all of degree ≤ 2) + bias
};

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& name);

/// Fixed feature map φ(x) on the policy input x (a state, or a joint
/// (s, u, ū) vector for hallucination policies).
struct FeatureMap {
    FeatureKind kind = FeatureKind::Identity;
    int input_dim = 0;
    std::vector<int> angle_dims;  // coordinates embedded as (cos, sin)
    Vector scale;                 // per embedded coordinate; empty → ones
    RowMatrix centers;            // Radial only, in normalized coordinates
    double width = 1.0;           // Radial only
    std::vector<std::vector<int>> monomials;  // Polynomial only; index lists into the normalized input

    int embedded_dim() const;
    int feature_count() const;
    /// Writes φ(x) into `out` (size feature_count()).
    void compute(const double* x, double* out) const;
    /// Global Lipschitz constant of φ w.r.t. the Euclidean norm on x
    /// (infinite for Polynomial with degree > 1).
    double lipschitz() const;
};

/// Deterministic saturating policy a(x) = c + w ⊙ tanh(W·φ(x)) with c and w
/// the center and half-width of the output box, followed by a hard clamp.
class PolicyParams {
   public:
    PolicyParams() = default;
    PolicyParams(FeatureMap features, Box box);
    /// Singleton family: always outputs `value` (must lie in `box`).
    static PolicyParams fixed(int input_dim, Box box, Vector value);

    int output_dim() const { return box_.dim(); }
    int input_dim() const { return features_.input_dim; }
    int parameter_count() const { return static_cast<int>(weights_.size()); }

    const Vector& parameters() const { return weights_; }
    void set_parameters(const Vector& flat);
    PolicyParams with_parameters(const Vector& flat) const;

    Vector act(const Vector& x) const;
    /// a(x) for x given as a raw pointer, written to `out`.
    void act(const double* x, double* out) const;

    const FeatureMap& features() const { return features_; }
    const Box& box() const { return box_; }
    bool is_fixed() const { return features_.kind == FeatureKind::Fixed; }

    /// Upper bound on the Lipschitz constant of the policy.
    double lipschitz() const;

    nlohmann::json to_json() const;
    static PolicyParams from_json(const nlohmann::json& j);

    bool operator==(const PolicyParams& other) const;

   private:
    FeatureMap features_;
    Box box_;
    Vector weights_;  // row-major output_dim × feature_count
    Vector fixed_output_;
    Vector center_;
    Vector half_width_;
};

/// Zero-parameter member of a policy family (outputs the box center, or the
/// fixed value for singleton families).
struct PolicyFamily {
    FeatureMap features;
    Box box;
    bool singleton = false;
    Vector singleton_value;

    PolicyParams zero() const;
    int parameter_count() const;
};

/// Builds an evenly spaced radial-feature grid over the normalized embedded
/// input: `per_dim` centers per coordinate spanning [-extent, extent].
RowMatrix radial_grid(int embedded_dim, int per_dim, double extent);

}  // namespace rhucrl

#include "rhucrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace rhucrl {

std::string to_string(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::Fixed: return "fixed";
        case FeatureKind::Constant: return "constant";
        case FeatureKind::Identity: return "identity";
        case FeatureKind::NormalizedState: return "normalized_state";
        case FeatureKind::Radial: return "radial";
        case FeatureKind::Polynomial: return "polynomial";
    }
    return "unknown";
}

FeatureKind feature_kind_from_string(const std::string& name) {
    if (name == "fixed") return FeatureKind::Fixed;
    if (name == "constant") return FeatureKind::Constant;
    if (name == "identity") return FeatureKind::Identity;
    if (name == "normalized_state") return FeatureKind::NormalizedState;
    if (name == "radial") return FeatureKind::Radial;
    if (name == "polynomial") return FeatureKind::Polynomial;
    throw InvalidArgument("unknown feature map '" + name + "'");
}

// ------------------------------------------------------------- features

int FeatureMap::embedded_dim() const { return input_dim + static_cast<int>(angle_dims.size()); }

int FeatureMap::feature_count() const {
    switch (kind) {
        case FeatureKind::Fixed: return 0;
        case FeatureKind::Constant: return 1;
        case FeatureKind::Identity: return input_dim + 1;
        case FeatureKind::NormalizedState: return embedded_dim() + 1;
        case FeatureKind::Radial: return static_cast<int>(centers.rows()) + 1;
        case FeatureKind::Polynomial: {
            if (!monomials.empty()) return static_cast<int>(monomials.size()) + 1;
            const int e = embedded_dim();
            return e + e * (e + 1) / 2 + 1;
        }
    }
    return 0;
}

namespace {

// Embeds angles as (cos, sin) and divides by scale. Angle coordinates
// contribute cos at their own slot and sin appended at the end.
void embed(const FeatureMap& f, const double* x, double* out) {
    const int d = f.input_dim;
    for (int i = 0; i < d; ++i) out[i] = x[i];
    int extra = d;
    for (int a : f.angle_dims) {
        out[a] = std::cos(x[a]);
        out[extra++] = std::sin(x[a]);
    }
    if (f.scale.size() > 0) {
        for (int i = 0; i < extra; ++i) out[i] /= f.scale[i];
    }
}

}  // namespace

void FeatureMap::compute(const double* x, double* out) const {
    switch (kind) {
        case FeatureKind::Fixed: return;
        case FeatureKind::Constant: out[0] = 1.0; return;
        case FeatureKind::Identity:
            for (int i = 0; i < input_dim; ++i) out[i] = x[i];
            out[input_dim] = 1.0;
            return;
        case FeatureKind::NormalizedState: {
            embed(*this, x, out);
            out[embedded_dim()] = 1.0;
            return;
        }
        case FeatureKind::Radial: {
            const int e = embedded_dim();
            double buf[64];
            std::vector<double> heap;
            double* z = buf;
            if (e > 64) {
                heap.resize(e);
                z = heap.data();
            }
            embed(*this, x, z);
            const double inv = 1.0 / (width * width);
            for (Eigen::Index c = 0; c < centers.rows(); ++c) {
                double d2 = 0.0;
                for (int i = 0; i < e; ++i) {
                    const double diff = z[i] - centers(c, i);
                    d2 += diff * diff;
                }
                out[c] = std::exp(-0.5 * d2 * inv);
            }
            out[centers.rows()] = 1.0;
            return;
        }
        case FeatureKind::Polynomial: {
            const int e = embedded_dim();
            if (monomials.empty()) {
                embed(*this, x, out);
                int k = e;
                for (int i = 0; i < e; ++i) {
                    for (int j = i; j < e; ++j) out[k++] = out[i] * out[j];
                }
                out[k] = 1.0;
                return;
            }
            double buf[64];
            std::vector<double> heap;
            double* z = buf;
            if (e > 64) {
                heap.resize(e);
                z = heap.data();
            }
            embed(*this, x, z);
            std::size_t k = 0;
            for (const auto& m : monomials) {
                double v = 1.0;
                for (int i : m) v *= z[i];
                out[k++] = v;
            }
            out[k] = 1.0;
            return;
        }
    }
}

double FeatureMap::lipschitz() const {
    double min_scale = 1.0;
    if (scale.size() > 0) min_scale = scale.minCoeff();
    switch (kind) {
        case FeatureKind::Fixed:
        case FeatureKind::Constant: return 0.0;
        case FeatureKind::Identity: return 1.0;
        case FeatureKind::NormalizedState: return 1.0 / min_scale;  // cos/sin are 1-Lipschitz jointly
        case FeatureKind::Radial:
            // Each bump is (e^{-1/2}/width)-Lipschitz in normalized coordinates.
            return std::sqrt(static_cast<double>(centers.rows())) * std::exp(-0.5) / width / min_scale;
        case FeatureKind::Polynomial: {
            bool linear = !monomials.empty();
            for (const auto& m : monomials) linear = linear && m.size() <= 1;
            if (!linear) return std::numeric_limits<double>::infinity();
            return std::sqrt(static_cast<double>(monomials.size())) / min_scale;
        }
    }
    return 0.0;
}

// --------------------------------------------------------------- policy

PolicyParams::PolicyParams(FeatureMap features, Box box) : features_(std::move(features)), box_(std::move(box)) {
    if (features_.kind == FeatureKind::Fixed) throw InvalidArgument("use PolicyParams::fixed for singleton policies");
    if (features_.scale.size() > 0 && features_.scale.size() != features_.embedded_dim())
        throw InvalidArgument("feature scale has wrong dimension");
    if (features_.kind == FeatureKind::Radial && features_.centers.cols() != features_.embedded_dim())
        throw InvalidArgument("radial centers have wrong dimension");
    for (int a : features_.angle_dims) {
        if (a < 0 || a >= features_.input_dim) throw InvalidArgument("angle dimension out of range");
    }
    for (const auto& m : features_.monomials) {
        if (m.empty()) throw InvalidArgument("polynomial monomial must name at least one coordinate");
        for (int i : m) {
            if (i < 0 || i >= features_.embedded_dim()) throw InvalidArgument("monomial index out of range");
        }
    }
    weights_ = Vector::Zero(static_cast<Eigen::Index>(box_.dim()) * features_.feature_count());
    center_ = box_.center();
    half_width_ = box_.half_width();
}

PolicyParams PolicyParams::fixed(int input_dim, Box box, Vector value) {
    if (!box.contains(value)) throw InvalidArgument("fixed policy output lies outside its box");
    PolicyParams p;
    p.features_.kind = FeatureKind::Fixed;
    p.features_.input_dim = input_dim;
    p.box_ = std::move(box);
    p.fixed_output_ = std::move(value);
    p.weights_ = Vector::Zero(0);
    p.center_ = p.box_.center();
    p.half_width_ = p.box_.half_width();
    return p;
}

void PolicyParams::set_parameters(const Vector& flat) {
    if (flat.size() != weights_.size())
        throw InvalidArgument("policy expects " + std::to_string(weights_.size()) + " parameters, got " +
                              std::to_string(flat.size()));
    weights_ = flat;
}

PolicyParams PolicyParams::with_parameters(const Vector& flat) const {
    PolicyParams copy = *this;
    copy.set_parameters(flat);
    return copy;
}

void PolicyParams::act(const double* x, double* out) const {
    const int m = box_.dim();
    if (features_.kind == FeatureKind::Fixed) {
        for (int i = 0; i < m; ++i) out[i] = fixed_output_[i];
        return;
    }
    const int k = features_.feature_count();
    double buf[128];
    std::vector<double> heap;
    double* phi = buf;
    if (k > 128) {
        heap.resize(k);
        phi = heap.data();
    }
    features_.compute(x, phi);
    for (int i = 0; i < m; ++i) {
        double pre = 0.0;
        const double* w = weights_.data() + static_cast<std::ptrdiff_t>(i) * k;
        for (int j = 0; j < k; ++j) pre += w[j] * phi[j];
        out[i] = std::clamp(center_[i] + half_width_[i] * std::tanh(pre), box_.lo[i], box_.hi[i]);
    }
}

Vector PolicyParams::act(const Vector& x) const {
    if (x.size() != features_.input_dim)
        throw InvalidArgument("policy input has dimension " + std::to_string(x.size()) + ", expected " +
                              std::to_string(features_.input_dim));
    Vector out(box_.dim());
    act(x.data(), out.data());
    return out;
}

double PolicyParams::lipschitz() const {
    if (features_.kind == FeatureKind::Fixed) return 0.0;
    const int k = features_.feature_count();
    const Eigen::Map<const RowMatrix> w(weights_.data(), box_.dim(), k);
    // tanh is 1-Lipschitz; the bias column does not depend on x.
    const Matrix scaled = half_width_.asDiagonal() * Matrix(w.leftCols(k - 1));
    const double op_norm = scaled.size() == 0 ? 0.0 : Eigen::JacobiSVD<Matrix>(scaled).singularValues()(0);
    return op_norm == 0.0 ? 0.0 : op_norm * features_.lipschitz();
}

namespace {

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
Vector json_vec(const nlohmann::json& j) {
    auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

nlohmann::json PolicyParams::to_json() const {
    nlohmann::json f = {{"kind", to_string(features_.kind)},
                        {"input_dim", features_.input_dim},
                        {"angle_dims", features_.angle_dims},
                        {"scale", vec_json(features_.scale)},
                        {"width", features_.width},
                        {"monomials", features_.monomials}};
    nlohmann::json centers = nlohmann::json::array();
    for (Eigen::Index r = 0; r < features_.centers.rows(); ++r) centers.push_back(vec_json(features_.centers.row(r)));
    f["centers"] = std::move(centers);
    nlohmann::json j = {{"feature_map", std::move(f)},
                        {"shape", {box_.dim(), features_.feature_count()}},
                        {"params", vec_json(weights_)},
                        {"box", {{"lo", vec_json(box_.lo)}, {"hi", vec_json(box_.hi)}}},
                        {"saturation", "tanh"}};
    if (is_fixed()) j["fixed_output"] = vec_json(fixed_output_);
    return j;
}

PolicyParams PolicyParams::from_json(const nlohmann::json& j) {
    const auto& f = j.at("feature_map");
    FeatureMap fm;
    fm.kind = feature_kind_from_string(f.at("kind").get<std::string>());
    fm.input_dim = f.at("input_dim").get<int>();
    fm.angle_dims = f.at("angle_dims").get<std::vector<int>>();
    fm.scale = json_vec(f.at("scale"));
    fm.width = f.at("width").get<double>();
    if (f.contains("monomials")) fm.monomials = f.at("monomials").get<std::vector<std::vector<int>>>();
    const auto& centers = f.at("centers");
    if (!centers.empty()) {
        fm.centers.resize(static_cast<Eigen::Index>(centers.size()), static_cast<Eigen::Index>(centers[0].size()));
        for (std::size_t r = 0; r < centers.size(); ++r) fm.centers.row(r) = json_vec(centers[r]).transpose();
    }
    Box box(json_vec(j.at("box").at("lo")), json_vec(j.at("box").at("hi")));
    if (fm.kind == FeatureKind::Fixed) return fixed(fm.input_dim, std::move(box), json_vec(j.at("fixed_output")));
    PolicyParams p(std::move(fm), std::move(box));
    const auto shape = j.at("shape").get<std::vector<int>>();
    if (shape.size() != 2 || shape[0] != p.output_dim() || shape[1] != p.features_.feature_count())
        throw InvalidArgument("policy shape does not match its feature map");
    p.set_parameters(json_vec(j.at("params")));
    return p;
}

bool PolicyParams::operator==(const PolicyParams& other) const {
    return features_.kind == other.features_.kind && features_.input_dim == other.features_.input_dim &&
           features_.monomials == other.features_.monomials &&
           box_.lo == other.box_.lo && box_.hi == other.box_.hi && weights_ == other.weights_ &&
           fixed_output_ == other.fixed_output_;
}

PolicyParams PolicyFamily::zero() const {
    if (singleton) return PolicyParams::fixed(features.input_dim, box, singleton_value);
    return PolicyParams(features, box);
}

int PolicyFamily::parameter_count() const { return singleton ? 0 : box.dim() * features.feature_count(); }

RowMatrix radial_grid(int embedded_dim, int per_dim, double extent) {
    if (per_dim < 1) throw InvalidArgument("radial grid needs at least one center per dimension");
    int total = 1;
    for (int i = 0; i < embedded_dim; ++i) total *= per_dim;
    RowMatrix centers(total, embedded_dim);
    for (int c = 0; c < total; ++c) {
        int rem = c;
        for (int i = 0; i < embedded_dim; ++i) {
            const int idx = rem % per_dim;
            rem /= per_dim;
            centers(c, i) = per_dim == 1 ? 0.0 : -extent + 2.0 * extent * idx / (per_dim - 1);
        }
    }
    return centers;
}

}  // namespace rhucrl

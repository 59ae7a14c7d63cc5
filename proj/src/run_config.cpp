#include "rhucrl/run_config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "rhucrl/hallucination.hpp"

namespace rhucrl {

using nlohmann::json;

namespace {

json policy_block(const std::string& features) {
    return {{"features", features},
            {"angle_dims", json::array()},
            {"scale", json::array()},
            {"monomials", json::array()},
            {"radial", {{"per_dim", 3}, {"extent", 1.0}, {"width", 1.0}}}};
}

json budget_block() {
    const OptimizerBudget b;
    return {{"population", b.population},
            {"elite_fraction", b.elite_fraction},
            {"iterations", b.iterations},
            {"inner_population", b.inner_population},
            {"inner_iterations", b.inner_iterations},
            {"particles", b.particles},
            {"restarts", b.restarts},
            {"initial_std", b.initial_std},
            {"min_std", b.min_std}};
}

json make_defaults() {
    const PendulumParams pp;
    const LinearToyParams lp;
    json d;
    d["environment"] = {
        {"id", "pendulum"},
        {"pendulum",
         {{"mass", pp.mass},
          {"length", pp.length},
          {"gravity", pp.gravity},
          {"torque_limit", pp.torque_limit},
          {"adversary", "force"},
          {"adversary_fraction", pp.adversary_fraction},
          {"perturbation", pp.perturbation},
          {"dt", pp.dt},
          {"horizon", pp.horizon},
          {"noise_std", pp.noise_std},
          {"initial_angle", pp.initial_angle},
          {"initial_velocity", pp.initial_velocity},
          {"max_speed", pp.max_speed}}},
        {"linear_toy",
         {{"a", lp.a},
          {"b", lp.b},
          {"b_adv", lp.b_adv},
          {"linear", lp.linear},
          {"state_cost", lp.state_cost},
          {"target", lp.target},
          {"action_cost", lp.action_cost},
          {"adversary_cost", lp.adversary_cost},
          {"initial_state", lp.initial_state},
          {"action_limit", lp.action_limit},
          {"adversary_limit", lp.adversary_limit},
          {"horizon", lp.horizon},
          {"noise_std", lp.noise_std}}}};
    d["setting"] = {{"kind", "adversarial"}, {"alpha", 0.3}, {"parameter", "mass"}, {"interval", {0.001, 2.0}}};
    d["model"] = {{"kernel", "se"},
                  {"lengthscales", json::array()},
                  {"signal_variance", 1.0},
                  {"regularizer", nullptr},
                  {"target", "delta"},
                  {"normalization", "running"},
                  {"input_scales", json::array()},
                  {"output_scales", json::array()},
                  {"points_per_episode", 0},
                  {"embed_state", true},
                  {"recalibrate", false},
                  {"beta", {{"mode", "fixed"}, {"value", 1.0}, {"rkhs_bound", 1.0}, {"noise_scale", 0.01}, {"delta", 0.1}}}};
    d["policies"] = {{"agent", policy_block("polynomial")},
                     {"adversary", policy_block("constant")},
                     {"eta", policy_block("constant")}};
    d["optimizer"] = {{"agent", budget_block()}, {"adversary", budget_block()}, {"values", budget_block()}};
    d["algorithm"] = {{"variant", "rh-ucrl"}, {"episodes", 30}, {"warmup_episodes", 0}, {"warm_start", true}};
    d["seed"] = 0;
    d["output"] = {{"dir", "runs/default"}, {"snapshot_every", 10}};
    d["evaluation"] = {{"restarts", 2},
                       {"budget_multiplier", 4},
                       {"particles", 8},
                       {"sweep_values", json::array()},
                       {"seeds_per_cell", 5}};
    d["sweep"] = {{"axis", "none"}, {"values", json::array()}, {"seeds", {0}}};
    return d;
}

std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

const char* type_name(const json& v) {
    if (v.is_null()) return "null";
    if (v.is_boolean()) return "boolean";
    if (v.is_number_integer()) return "integer";
    if (v.is_number()) return "number";
    if (v.is_string()) return "string";
    if (v.is_array()) return "list";
    return "mapping";
}

// Overlays `user` on `base` (a defaults subtree) with schema checks.
void overlay(json& base, const json& user, const std::string& path) {
    if (!user.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected a mapping");
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key_path = join(path, it.key());
        if (!base.contains(it.key())) throw ConfigError(key_path, "unknown key");
        json& slot = base[it.key()];
        const json& value = it.value();
        if (slot.is_object()) {
            overlay(slot, value, key_path);
            continue;
        }
        bool ok = false;
        if (slot.is_null()) ok = value.is_null() || value.is_number();
        else if (slot.is_boolean()) ok = value.is_boolean();
        else if (slot.is_number_integer()) ok = value.is_number_integer();
        else if (slot.is_number()) ok = value.is_number();
        else if (slot.is_string()) ok = value.is_string();
        else if (slot.is_array()) ok = value.is_array();
        if (!ok)
            throw ConfigError(key_path, std::string("expected ") + type_name(slot) + ", got " + type_name(value));
        slot = slot.is_number_float() && value.is_number_integer() ? json(value.get<double>()) : value;
    }
}

json yaml_to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined: return nullptr;
        case YAML::NodeType::Sequence: {
            json arr = json::array();
            for (const auto& item : node) arr.push_back(yaml_to_json(item));
            return arr;
        }
        case YAML::NodeType::Map: {
            json obj = json::object();
            for (const auto& kv : node) {
                const auto key = kv.first.as<std::string>();
                if (obj.contains(key)) throw ConfigError(key, "duplicate key");
                obj[key] = yaml_to_json(kv.second);
            }
            return obj;
        }
        case YAML::NodeType::Scalar: break;
    }
    const std::string& text = node.Scalar();
    if (node.Tag() == "!") return text;  // quoted: always a string
    if (text == "~" || text == "null") return nullptr;
    if (text == "true") return true;
    if (text == "false") return false;
    long long i = 0;
    if (YAML::convert<long long>::decode(node, i) && text.find_first_of(".eE") == std::string::npos) return i;
    double x = 0.0;
    if (YAML::convert<double>::decode(node, x)) return x;
    return text;
}

const json& at(const json& tree, const std::string& dotted) {
    const json* cur = &tree;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) cur = &cur->at(part);
    return *cur;
}

std::vector<double> numbers(const json& tree, const std::string& path) {
    std::vector<double> out;
    for (const auto& v : at(tree, path)) {
        if (!v.is_number()) throw ConfigError(path, "expected a list of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

std::vector<int> integers(const json& tree, const std::string& path) {
    std::vector<int> out;
    for (const auto& v : at(tree, path)) {
        if (!v.is_number_integer()) throw ConfigError(path, "expected a list of integers");
        out.push_back(v.get<int>());
    }
    return out;
}

Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

OptimizerBudget budget_from(const json& tree, const std::string& path) {
    const json& b = at(tree, path);
    OptimizerBudget out;
    out.population = b["population"];
    out.elite_fraction = b["elite_fraction"];
    out.iterations = b["iterations"];
    out.inner_population = b["inner_population"];
    out.inner_iterations = b["inner_iterations"];
    out.particles = b["particles"];
    out.restarts = b["restarts"];
    out.initial_std = b["initial_std"];
    out.min_std = b["min_std"];
    try {
        out.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(path, e.what());
    }
    return out;
}

PolicyFamily family_from(const json& tree, const std::string& role, const Environment& env) {
    const std::string path = "policies." + role;
    const json& block = at(tree, path);
    const std::string kind_name = block["features"];
    const auto& spec = env.spec();
    if (kind_name == "nominal") {
        if (role != "adversary") throw ConfigError(path + ".features", "'nominal' is only valid for the adversary");
        return nominal_adversary_family(env);
    }
    FeatureKind kind;
    try {
        kind = feature_kind_from_string(kind_name);
    } catch (const InvalidArgument& e) {
        throw ConfigError(path + ".features", e.what());
    }
    const auto angle_dims = integers(tree, path + ".angle_dims");
    const Vector scale = to_vector(numbers(tree, path + ".scale"));
    PolicyFamily family;
    if (role == "eta") {
        family = hallucination_family(spec, kind, angle_dims, scale);
    } else {
        family.features.kind = kind;
        family.features.input_dim = spec.state_dim;
        family.features.angle_dims = angle_dims;
        family.features.scale = scale;
        family.box = role == "agent" ? spec.agent_box : spec.adversary_box;
    }
    for (const auto& mono : block["monomials"]) {
        if (!mono.is_array()) throw ConfigError(path + ".monomials", "expected a list of index lists");
        std::vector<int> m;
        for (const auto& i : mono) {
            if (!i.is_number_integer()) throw ConfigError(path + ".monomials", "indices must be integers");
            m.push_back(i.get<int>());
        }
        family.features.monomials.push_back(std::move(m));
    }
    if (kind == FeatureKind::Radial) {
        const json& r = block["radial"];
        family.features.centers =
            radial_grid(family.features.embedded_dim(), r["per_dim"].get<int>(), r["extent"].get<double>());
        family.features.width = r["width"];
    }
    try {
        (void)family.zero();
        (void)family.features.feature_count();
    } catch (const InvalidArgument& e) {
        throw ConfigError(path, e.what());
    }
    return family;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

const json& RunConfig::defaults() {
    static const json d = make_defaults();
    return d;
}

RunConfig::RunConfig() : tree_(defaults()) {}

RunConfig RunConfig::from_json(const json& user) {
    RunConfig c;
    overlay(c.tree_, user, "");
    c.validate();
    return c;
}

RunConfig RunConfig::from_yaml(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError("<yaml>", e.what());
    }
    if (root.IsNull()) return from_json(json::object());
    return from_json(yaml_to_json(root));
}

RunConfig RunConfig::from_yaml_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_yaml(ss.str());
}

std::string RunConfig::hash() const { return fnv1a_hex(tree_.dump()); }

RunConfig RunConfig::with(const std::string& path, const json& value) const {
    json patch = value;
    std::vector<std::string> parts;
    std::stringstream ss(path);
    for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
    RunConfig c = *this;
    overlay(c.tree_, patch, "");
    c.validate();
    return c;
}

std::uint64_t RunConfig::seed() const {
    const auto& s = tree_["seed"];
    return static_cast<std::uint64_t>(s.get<long long>());
}
int RunConfig::episodes() const { return tree_["algorithm"]["episodes"]; }
std::filesystem::path RunConfig::output_dir() const { return tree_["output"]["dir"].get<std::string>(); }
int RunConfig::snapshot_every() const { return tree_["output"]["snapshot_every"]; }
RobustSetting RunConfig::setting() const { return setting_from_string(tree_["setting"]["kind"]); }

std::shared_ptr<Environment> RunConfig::make_base_environment() const {
    const json& e = tree_["environment"];
    const std::string id = e["id"];
    if (id == "pendulum") {
        const json& b = e["pendulum"];
        PendulumParams p;
        p.mass = b["mass"];
        p.length = b["length"];
        p.gravity = b["gravity"];
        p.torque_limit = b["torque_limit"];
        const std::string channel = b["adversary"];
        if (channel == "force") p.channel = PendulumAdversaryChannel::Force;
        else if (channel == "gravity_mass") p.channel = PendulumAdversaryChannel::GravityAndMass;
        else throw ConfigError("environment.pendulum.adversary", "expected 'force' or 'gravity_mass'");
        p.adversary_fraction = b["adversary_fraction"];
        p.perturbation = b["perturbation"];
        p.dt = b["dt"];
        p.horizon = b["horizon"];
        p.noise_std = b["noise_std"];
        p.initial_angle = b["initial_angle"];
        p.initial_velocity = b["initial_velocity"];
        p.max_speed = b["max_speed"];
        try {
            return std::make_shared<PendulumEnv>(p);
        } catch (const InvalidArgument& ex) {
            throw ConfigError("environment.pendulum", ex.what());
        }
    }
    if (id == "linear_toy") {
        const json& b = e["linear_toy"];
        LinearToyParams p;
        p.a = b["a"];
        p.b = b["b"];
        p.b_adv = b["b_adv"];
        p.linear = b["linear"];
        p.state_cost = b["state_cost"];
        p.target = b["target"];
        p.action_cost = b["action_cost"];
        p.adversary_cost = b["adversary_cost"];
        p.initial_state = b["initial_state"];
        p.action_limit = b["action_limit"];
        p.adversary_limit = b["adversary_limit"];
        p.horizon = b["horizon"];
        p.noise_std = b["noise_std"];
        try {
            return std::make_shared<LinearToyEnv>(p);
        } catch (const InvalidArgument& ex) {
            throw ConfigError("environment.linear_toy", ex.what());
        }
    }
    throw ConfigError("environment.id", "unknown environment '" + id + "' (expected pendulum or linear_toy)");
}

std::shared_ptr<Environment> RunConfig::make_environment() const {
    auto base = make_base_environment();
    const json& s = tree_["setting"];
    RobustSetting kind;
    try {
        kind = setting();
    } catch (const InvalidArgument& e) {
        throw ConfigError("setting.kind", e.what());
    }
    try {
        switch (kind) {
            case RobustSetting::Adversarial: return base;
            case RobustSetting::Action: return std::make_shared<ActionRobustWrapper>(base, s["alpha"].get<double>());
            case RobustSetting::Parameter: {
                const auto interval = numbers(tree_, "setting.interval");
                if (interval.size() != 2) throw ConfigError("setting.interval", "expected [lo, hi]");
                if (!(interval[0] > 0.0)) throw ConfigError("setting.interval", "lower bound must be > 0");
                return std::make_shared<ParameterRobustWrapper>(base, s["parameter"].get<std::string>(), interval[0],
                                                                interval[1]);
            }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const InvalidArgument& e) {
        throw ConfigError("setting", e.what());
    }
    return base;
}

GpModelConfig RunConfig::model_config() const {
    const json& m = tree_["model"];
    GpModelConfig c;
    const std::string kernel = m["kernel"];
    if (kernel == "se") c.kernel = KernelFamily::SquaredExponential;
    else if (kernel == "linear") c.kernel = KernelFamily::Linear;
    else throw ConfigError("model.kernel", "expected 'se' or 'linear'");
    c.lengthscales = numbers(tree_, "model.lengthscales");
    c.signal_variance = m["signal_variance"];
    if (!m["regularizer"].is_null()) c.regularizer = m["regularizer"].get<double>();
    const std::string target = m["target"];
    if (target == "delta") c.target = TargetMode::Delta;
    else if (target == "absolute") c.target = TargetMode::Absolute;
    else throw ConfigError("model.target", "expected 'delta' or 'absolute'");
    const std::string norm = m["normalization"];
    if (norm == "none") c.normalization = InputNormalization::None;
    else if (norm == "fixed") c.normalization = InputNormalization::Fixed;
    else if (norm == "running") c.normalization = InputNormalization::Running;
    else throw ConfigError("model.normalization", "expected 'none', 'fixed' or 'running'");
    c.input_scales = numbers(tree_, "model.input_scales");
    c.output_scales = numbers(tree_, "model.output_scales");
    c.points_per_episode = m["points_per_episode"];
    if (c.points_per_episode < 0) throw ConfigError("model.points_per_episode", "must be >= 0");
    c.embed_state = m["embed_state"];
    return c;
}

LearnerSettings RunConfig::learner_settings(const Environment& env) const {
    LearnerSettings s;
    try {
        s.variant = variant_from_string(tree_["algorithm"]["variant"]);
    } catch (const InvalidArgument& e) {
        throw ConfigError("algorithm.variant", e.what());
    }
    s.families.agent = family_from(tree_, "agent", env);
    s.families.adversary = family_from(tree_, "adversary", env);
    s.families.eta = family_from(tree_, "eta", env);
    s.agent_budget = budget_from(tree_, "optimizer.agent");
    s.adversary_budget = budget_from(tree_, "optimizer.adversary");
    s.value_budget = budget_from(tree_, "optimizer.values");
    const json& b = tree_["model"]["beta"];
    const std::string mode = b["mode"];
    try {
        if (mode == "fixed") {
            s.beta = BetaSchedule::fixed(b["value"].get<double>());
            (void)s.beta(1.0, 0.0);
        } else if (mode == "theoretical") {
            s.beta = BetaSchedule::theoretical(b["rkhs_bound"].get<double>(), b["noise_scale"].get<double>(),
                                               b["delta"].get<double>());
        } else {
            throw ConfigError("model.beta.mode", "expected 'fixed' or 'theoretical'");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const InvalidArgument& e) {
        throw ConfigError("model.beta", e.what());
    }
    s.recalibrate = tree_["model"]["recalibrate"];
    s.warmup_episodes = tree_["algorithm"]["warmup_episodes"];
    s.warm_start = tree_["algorithm"]["warm_start"];
    if (s.warmup_episodes < 0) throw ConfigError("algorithm.warmup_episodes", "must be >= 0");
    return s;
}

WorstCaseSettings RunConfig::worst_case_settings() const {
    const json& e = tree_["evaluation"];
    WorstCaseSettings w;
    w.budget = budget_from(tree_, "optimizer.adversary");
    const int multiplier = e["budget_multiplier"];
    if (multiplier < 1) throw ConfigError("evaluation.budget_multiplier", "must be >= 1");
    w.budget.population *= multiplier;
    w.budget.particles = e["particles"];
    w.restarts = e["restarts"];
    if (w.budget.particles < 1) throw ConfigError("evaluation.particles", "must be >= 1");
    if (w.restarts < 1) throw ConfigError("evaluation.restarts", "must be >= 1");
    return w;
}

SweepSpec RunConfig::evaluation_sweep() const {
    SweepSpec s;
    s.setting = RobustSetting::Parameter;
    s.seeds_per_cell = tree_["evaluation"]["seeds_per_cell"];
    if (setting() != RobustSetting::Parameter) return s;
    const auto interval = numbers(tree_, "setting.interval");
    s.lo = interval.at(0);
    s.hi = interval.at(1);
    s.values = numbers(tree_, "evaluation.sweep_values");
    if (s.values.empty())
        for (int i = 0; i < 9; ++i) s.values.push_back(s.lo + (s.hi - s.lo) * i / 8.0);
    try {
        s.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError("evaluation.sweep_values", e.what());
    }
    return s;
}

void RunConfig::validate() const {
    if (!tree_["seed"].is_number_integer() || tree_["seed"].get<long long>() < 0)
        throw ConfigError("seed", "must be a non-negative integer");
    if (episodes() < 0) throw ConfigError("algorithm.episodes", "must be >= 0");
    if (snapshot_every() < 0) throw ConfigError("output.snapshot_every", "must be >= 0");
    const auto env = make_environment();
    (void)model_config();
    const auto settings = learner_settings(*env);
    (void)worst_case_settings();
    (void)evaluation_sweep();
    try {
        (void)GpDynamicsModel(env, model_config());
    } catch (const InvalidArgument& e) {
        throw ConfigError("model", e.what());
    }
    const std::string axis = tree_["sweep"]["axis"];
    if (axis != "none" && axis != "alpha" && axis != "perturbation" && axis != "adversary_fraction" &&
        axis != "parameter")
        throw ConfigError("sweep.axis", "expected none, alpha, perturbation, adversary_fraction or parameter");
    for (const auto& s : tree_["sweep"]["seeds"])
        if (!s.is_number_integer() || s.get<long long>() < 0)
            throw ConfigError("sweep.seeds", "expected non-negative integers");
    (void)numbers(tree_, "sweep.values");
}

}  // namespace rhucrl

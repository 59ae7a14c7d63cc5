#include "rhucrl/core_types.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "rhucrl/random.hpp"

namespace rhucrl {

Box::Box(Vector lo_, Vector hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size()) throw InvalidArgument("box bounds have different dimensions");
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        if (!(lo[i] < hi[i])) throw InvalidArgument("degenerate box in coordinate " + std::to_string(i));
    }
}

Box Box::symmetric(int dim, double half_width) {
    return Box(Vector::Constant(dim, -half_width), Vector::Constant(dim, half_width));
}

bool Box::contains(const Vector& x, double tol) const {
    if (x.size() != lo.size()) return false;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!(x[i] >= lo[i] - tol && x[i] <= hi[i] + tol)) return false;
    }
    return true;
}

bool chain_check(const Trajectory& trajectory) {
    const auto& tr = trajectory.transitions;
    if (tr.empty()) return false;
    for (std::size_t h = 0; h < tr.size(); ++h) {
        if (tr[h].step != static_cast<int>(h)) return false;
        if (h + 1 < tr.size()) {
            if (tr[h].next_state.size() != tr[h + 1].state.size()) return false;
            if (tr[h].next_state != tr[h + 1].state) return false;
        }
    }
    return true;
}

Dataset::Dataset(int horizon) : horizon_(horizon) {
    if (horizon < 1) throw InvalidArgument("dataset horizon must be >= 1");
}

void Dataset::append_episode(const Trajectory& trajectory) {
    if (trajectory.horizon() != horizon_)
        throw InvalidArgument("episode has " + std::to_string(trajectory.horizon()) + " transitions, expected " +
                              std::to_string(horizon_));
    transitions_.insert(transitions_.end(), trajectory.transitions.begin(), trajectory.transitions.end());
    ++episode_count_;
}

namespace {

nlohmann::json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const nlohmann::json& j) {
    auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::string trajectory_to_jsonl(const Trajectory& trajectory) {
    std::ostringstream out;
    for (const auto& t : trajectory.transitions) {
        nlohmann::json line = {{"state", to_json(t.state)},
                               {"action", to_json(t.agent_action)},
                               {"adv_action", to_json(t.adversary_action)},
                               {"next_state", to_json(t.next_state)},
                               {"step", t.step},
                               {"episode", t.episode}};
        out << line.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict) << '\n';
    }
    return out.str();
}

std::vector<Transition> transitions_from_jsonl(const std::string& text) {
    std::vector<Transition> result;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        Transition t;
        t.state = vector_from_json(j.at("state"));
        t.agent_action = vector_from_json(j.at("action"));
        t.adversary_action = vector_from_json(j.at("adv_action"));
        t.next_state = vector_from_json(j.at("next_state"));
        t.step = j.at("step").get<int>();
        t.episode = j.at("episode").get<int>();
        result.push_back(std::move(t));
    }
    return result;
}

// random.hpp

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return splitmix64(parent ^ splitmix64(h));
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
    return splitmix64(splitmix64(parent) ^ (index * 0xD1B54A32D192ED03ULL + 1));
}

Vector RandomStream::normal_vector(int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
}

}  // namespace rhucrl

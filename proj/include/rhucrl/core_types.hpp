#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rhucrl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Row-major storage for batches: one row per rollout / query point.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Error raised for malformed inputs to library operations.
class InvalidArgument : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// Action outside its declared box.
class BoundsError : public std::out_of_range {
   public:
    using std::out_of_range::out_of_range;
};

/// Numerical failure (non-PSD kernel matrix, NaN in a rollout, ...).
class NumericError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Axis-aligned box for actions. lo < hi coordinate-wise.
struct Box {
    Vector lo;
    Vector hi;

    Box() = default;
    Box(Vector lo_, Vector hi_);
    static Box symmetric(int dim, double half_width);

    int dim() const { return static_cast<int>(lo.size()); }
    bool contains(const Vector& x, double tol = 0.0) const;
    Vector center() const { return 0.5 * (lo + hi); }
    Vector half_width() const { return 0.5 * (hi - lo); }
};

/// One environment step (s, u, ū, s').
struct Transition {
    Vector state;
    Vector agent_action;
    Vector adversary_action;
    Vector next_state;
    double reward = 0.0;
    int step = 0;     // in [0, H-1]
    int episode = 1;  // >= 1
};

/// An H-step episode. `total_reward` includes the terminal reward
/// r(s_H, π(s_H), π̄(s_H)), so it sums H + 1 reward terms.
struct Trajectory {
    std::vector<Transition> transitions;
    Vector terminal_agent_action;
    Vector terminal_adversary_action;
    double terminal_reward = 0.0;
    double total_reward = 0.0;

    int horizon() const { return static_cast<int>(transitions.size()); }
    const Vector& final_state() const { return transitions.back().next_state; }
};

/// True iff consecutive transitions chain and step indices are 0..H-1.
bool chain_check(const Trajectory& trajectory);

/// Append-only transition store filled by the episodic loop.
class Dataset {
   public:
    explicit Dataset(int horizon);

    void append_episode(const Trajectory& trajectory);
    const std::vector<Transition>& transitions() const { return transitions_; }
    int episode_count() const { return episode_count_; }
    int horizon() const { return horizon_; }
    std::size_t size() const { return transitions_.size(); }

   private:
    int horizon_;
    int episode_count_ = 0;
    std::vector<Transition> transitions_;
};

/// One-object-per-line JSON encoding of a trajectory's transitions.
std::string trajectory_to_jsonl(const Trajectory& trajectory);
std::vector<Transition> transitions_from_jsonl(const std::string& text);

}  // namespace rhucrl

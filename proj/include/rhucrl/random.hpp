#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "rhucrl/core_types.hpp"

namespace rhucrl {

/// Stream labels fixed by the seed contract.
namespace streams {
inline constexpr std::string_view kEnvironmentNoise = "environment-noise";
inline constexpr std::string_view kOptimizer = "optimizer";
inline constexpr std::string_view kEvaluation = "evaluation";
inline constexpr std::string_view kAdversaryTraining = "adversary-training";
}  // namespace streams

std::uint64_t splitmix64(std::uint64_t x);

/// Derives a child seed from a parent seed and a label / index.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

/// A named, seedable random stream. There is no global generator.
class RandomStream {
   public:
    explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }
    RandomStream child(std::string_view label) const { return RandomStream(derive_seed(seed_, label)); }
    RandomStream child(std::uint64_t index) const { return RandomStream(derive_seed(seed_, index)); }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }  // [0, 1)
    Vector normal_vector(int n);
    std::mt19937_64& engine() { return engine_; }

   private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Master seed plus the labelled streams derived from it.
struct SeedContract {
    std::uint64_t master_seed = 0;

    RandomStream stream(std::string_view label) const { return RandomStream(derive_seed(master_seed, label)); }
};

}  // namespace rhucrl

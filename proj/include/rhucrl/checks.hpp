#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rhucrl {

/// Outcome of one property suite.
struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;  // counts / worst observed value
    double seconds = 0.0;
};

// Individual suites. Sizes are arguments so the quick suite and the
// acceptance run share the code.

/// Incremental Cholesky posterior vs dense direct inversion.
CheckResult check_gp_oracle(int instances, int max_points, int max_dim, double tolerance, std::uint64_t seed);

/// Elementwise coverage of μ ± β·σ for functions drawn from the GP prior,
/// with the theoretical β at confidence δ.
CheckResult check_prior_coverage(int functions, int test_points, double delta, double min_coverage,
                                 std::uint64_t seed);

/// Temperature search on synthetic residuals: > 1 under doubled noise,
/// within [0.8, 1.25] when self-consistent, inside [0.01, 100], and the
/// rescaled 90% intervals cover 90% ± 4%. `misapply_temperature` divides by
/// T instead of multiplying (fault injection).
CheckResult check_recalibration(int cases, std::uint64_t seed, bool misapply_temperature = false);

/// μ − β·σ ≤ f̃ ≤ μ + β·σ on random hallucinated steps, zero violations.
CheckResult check_tube_containment(int samples, std::uint64_t seed);

/// Σ‖σ‖² ≤ (1 + 2λ)·(info gain) on random query sequences.
CheckResult check_variance_sum(int sequences, int steps, std::uint64_t seed);

/// J^(p)_t ≤ J^(o)_t on every episode of a pendulum RH-UCRL run.
CheckResult check_sandwich(int episodes, std::uint64_t seed);

/// Trajectory-deviation inequality on seeded pairs; the negative control
/// (leading factor 1 with truth and model on opposite tube edges) must fail.
CheckResult check_trajectory_deviation(int pairs, std::uint64_t seed);

struct CheckOptions {
    std::uint64_t seed = 0;
    bool misapply_temperature = false;
};

/// The fixed-seed quick suite: gp_oracle, calibration, tube_containment,
/// sandwich, trajectory_deviation, variance_sum.
std::vector<CheckResult> run_check_suite(const CheckOptions& options = {});

/// "suite,status,seconds,detail" rows with a header.
std::string format_check_table(const std::vector<CheckResult>& results);

}  // namespace rhucrl

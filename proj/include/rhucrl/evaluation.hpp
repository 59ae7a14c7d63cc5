#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rhucrl/environment.hpp"
#include "rhucrl/policy.hpp"
#include "rhucrl/policy_optimization.hpp"

namespace rhucrl {

struct SweepCell {
    double value = 0.0;  // relative parameter value
    double mean_return = 0.0;
    double std_error = 0.0;
};

struct EvaluationReport {
    std::string agent_id;
    std::vector<double> training_curve;   // best worst-case return after each adversary iteration, all restarts
    std::vector<double> restart_returns;  // minimum found by each restart
    double worst_case_return = 0.0;
    double average_return = 0.0;
    std::vector<SweepCell> cells;  // parameter sweeps only
    int worst_cell = -1;
    std::string config_hash;

    nlohmann::json to_json() const;
    static EvaluationReport from_json(const nlohmann::json& j);
    bool operator==(const EvaluationReport& other) const;
};

/// Flat CSV: one row per adversary iteration, restart and sweep cell, plus the
/// two summary rows. Columns: kind,index,value,return,std_error.
std::string report_to_csv(const EvaluationReport& report);
EvaluationReport report_from_csv(const std::string& csv);

struct WorstCaseSettings {
    OptimizerBudget budget;  // population, elites, iterations, particles, initial/min std
    int restarts = 2;
};

/// Freezes the agent and minimizes its true-system return over the adversary
/// family, with restarts sharing one noise bank. "Average" is the return
/// against the nominal adversary under the same noise, so worst ≤ average.
EvaluationReport worst_case_eval(const Environment& env, const PolicyParams& agent,
                                 const PolicyFamily& adversary_family, const WorstCaseSettings& settings,
                                 std::uint64_t seed);

enum class RobustSetting { Adversarial, Action, Parameter };
std::string to_string(RobustSetting setting);
RobustSetting setting_from_string(const std::string& name);

struct SweepSpec {
    RobustSetting setting = RobustSetting::Parameter;
    std::vector<double> values;
    int seeds_per_cell = 5;
    double lo = 0.001;  // declared interval of the swept quantity
    double hi = 2.0;

    void validate() const;
};

/// Mean return of the frozen agent (nominal adversary) per grid value of the
/// wrapper's parameter; the minimizing cell is the realized worst case.
EvaluationReport parameter_sweep(const ParameterRobustWrapper& env, const PolicyParams& agent, const SweepSpec& sweep,
                                 std::uint64_t seed);

}  // namespace rhucrl

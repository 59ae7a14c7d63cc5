#include "rhucrl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rhucrl {

nlohmann::json EvaluationReport::to_json() const {
    nlohmann::json cells_json = nlohmann::json::array();
    for (const auto& c : cells)
        cells_json.push_back({{"value", c.value}, {"mean_return", c.mean_return}, {"std_error", c.std_error}});
    return {{"agent_id", agent_id},
            {"training_curve", training_curve},
            {"restart_returns", restart_returns},
            {"worst_case_return", worst_case_return},
            {"average_return", average_return},
            {"cells", std::move(cells_json)},
            {"worst_cell", worst_cell},
            {"config_hash", config_hash}};
}

EvaluationReport EvaluationReport::from_json(const nlohmann::json& j) {
    EvaluationReport r;
    r.agent_id = j.at("agent_id").get<std::string>();
    r.training_curve = j.at("training_curve").get<std::vector<double>>();
    r.restart_returns = j.at("restart_returns").get<std::vector<double>>();
    r.worst_case_return = j.at("worst_case_return").get<double>();
    r.average_return = j.at("average_return").get<double>();
    for (const auto& c : j.at("cells"))
        r.cells.push_back({c.at("value").get<double>(), c.at("mean_return").get<double>(), c.at("std_error").get<double>()});
    r.worst_cell = j.at("worst_cell").get<int>();
    r.config_hash = j.at("config_hash").get<std::string>();
    return r;
}

bool EvaluationReport::operator==(const EvaluationReport& o) const {
    auto same_cells = [&] {
        if (cells.size() != o.cells.size()) return false;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (cells[i].value != o.cells[i].value || cells[i].mean_return != o.cells[i].mean_return ||
                cells[i].std_error != o.cells[i].std_error)
                return false;
        }
        return true;
    };
    return agent_id == o.agent_id && training_curve == o.training_curve && restart_returns == o.restart_returns &&
           worst_case_return == o.worst_case_return && average_return == o.average_return && same_cells() &&
           worst_cell == o.worst_cell && config_hash == o.config_hash;
}

// ------------------------------------------------------------------- CSV

namespace {

std::string num(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace

std::string report_to_csv(const EvaluationReport& r) {
    std::ostringstream os;
    os << "kind,index,value,return,std_error\n";
    os << "meta,0,0," << num(r.worst_cell) << ",0," << r.agent_id << ',' << r.config_hash << '\n';
    os << "worst_case,0,0," << num(r.worst_case_return) << ",0\n";
    os << "average,0,0," << num(r.average_return) << ",0\n";
    for (std::size_t i = 0; i < r.training_curve.size(); ++i)
        os << "curve," << i << ",0," << num(r.training_curve[i]) << ",0\n";
    for (std::size_t i = 0; i < r.restart_returns.size(); ++i)
        os << "restart," << i << ",0," << num(r.restart_returns[i]) << ",0\n";
    for (std::size_t i = 0; i < r.cells.size(); ++i)
        os << "cell," << i << ',' << num(r.cells[i].value) << ',' << num(r.cells[i].mean_return) << ','
           << num(r.cells[i].std_error) << '\n';
    return os.str();
}

EvaluationReport report_from_csv(const std::string& csv) {
    std::istringstream is(csv);
    std::string line;
    if (!std::getline(is, line) || line != "kind,index,value,return,std_error")
        throw InvalidArgument("evaluation CSV has an unexpected header");
    EvaluationReport r;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() < 5) throw InvalidArgument("malformed evaluation CSV row: " + line);
        const double value = std::stod(f[2]);
        const double ret = std::stod(f[3]);
        const double se = std::stod(f[4]);
        if (f[0] == "meta") {
            r.worst_cell = static_cast<int>(ret);
            r.agent_id = f.size() > 5 ? f[5] : "";
            r.config_hash = f.size() > 6 ? f[6] : "";
        } else if (f[0] == "worst_case") {
            r.worst_case_return = ret;
        } else if (f[0] == "average") {
            r.average_return = ret;
        } else if (f[0] == "curve") {
            r.training_curve.push_back(ret);
        } else if (f[0] == "restart") {
            r.restart_returns.push_back(ret);
        } else if (f[0] == "cell") {
            r.cells.push_back({value, ret, se});
        } else {
            throw InvalidArgument("unknown evaluation CSV row kind '" + f[0] + "'");
        }
    }
    return r;
}

// ------------------------------------------------------------ worst case

EvaluationReport worst_case_eval(const Environment& env, const PolicyParams& agent,
                                 const PolicyFamily& adversary_family, const WorstCaseSettings& settings,
                                 std::uint64_t seed) {
    settings.budget.validate();
    if (settings.restarts < 1) throw InvalidArgument("restarts must be >= 1");
    const World world = World::true_system(env);
    const NoiseBank noise(env.spec(), settings.budget.particles, derive_seed(seed, "noise"));

    EvaluationReport report;
    const PolicyParams nominal =
        PolicyParams::fixed(env.spec().state_dim, env.spec().adversary_box, env.nominal_adversary_action());
    report.average_return = evaluate_jobs(world, {RolloutJob{&agent, &nominal, nullptr}}, noise).front().mean;
    report.worst_case_return = report.average_return;

    const PolicyParams adv0 = adversary_family.zero();
    const int dim = adversary_family.parameter_count();
    const auto& b = settings.budget;
    std::vector<PolicyParams> candidates;
    std::vector<RolloutJob> jobs;
    for (int k = 0; k < settings.restarts; ++k) {
        CrossEntropySearch search(dim, b.population, b.elite_count(b.population), b.iterations, b.initial_std,
                                  b.min_std, derive_seed(seed, static_cast<std::uint64_t>(k)), {Vector::Zero(dim)});
        double restart_best = std::numeric_limits<double>::infinity();
        while (!search.done()) {
            const auto& xs = search.ask();
            candidates.clear();
            for (const auto& x : xs) candidates.push_back(adv0.with_parameters(x));
            jobs.clear();
            for (const auto& c : candidates) jobs.push_back({&agent, &c, nullptr});
            const auto values = evaluate_jobs(world, jobs, noise);
            std::vector<double> scores(values.size());
            for (std::size_t i = 0; i < values.size(); ++i) {
                scores[i] = -values[i].mean;
                restart_best = std::min(restart_best, values[i].mean);
            }
            search.tell(scores);
            report.worst_case_return = std::min(report.worst_case_return, restart_best);
            report.training_curve.push_back(report.worst_case_return);
        }
        report.restart_returns.push_back(restart_best);
    }
    return report;
}

// ----------------------------------------------------------------- sweeps

std::string to_string(RobustSetting setting) {
    switch (setting) {
        case RobustSetting::Adversarial: return "adversarial";
        case RobustSetting::Action: return "action";
        case RobustSetting::Parameter: return "parameter";
    }
    return "unknown";
}

RobustSetting setting_from_string(const std::string& name) {
    if (name == "adversarial") return RobustSetting::Adversarial;
    if (name == "action") return RobustSetting::Action;
    if (name == "parameter") return RobustSetting::Parameter;
    throw InvalidArgument("unknown robustness setting '" + name + "'");
}

void SweepSpec::validate() const {
    if (values.empty()) throw InvalidArgument("sweep grid is empty");
    if (seeds_per_cell < 1) throw InvalidArgument("sweep needs at least one seed per cell");
    if (!(lo < hi)) throw InvalidArgument("sweep interval must satisfy lo < hi");
    for (double v : values) {
        if (!(v >= lo && v <= hi))
            throw InvalidArgument("sweep value " + num(v) + " lies outside [" + num(lo) + ", " + num(hi) + "]");
    }
}

EvaluationReport parameter_sweep(const ParameterRobustWrapper& env, const PolicyParams& agent, const SweepSpec& sweep,
                                 std::uint64_t seed) {
    sweep.validate();
    if (sweep.setting != RobustSetting::Parameter) throw InvalidArgument("parameter_sweep needs a parameter sweep");
    for (double v : sweep.values) {
        if (v < env.lo() || v > env.hi())
            throw InvalidArgument("sweep value " + num(v) + " lies outside the environment's parameter interval");
    }
    const World world = World::true_system(env);
    EvaluationReport report;
    double total = 0.0;
    for (std::size_t c = 0; c < sweep.values.size(); ++c) {
        const PolicyParams adversary =
            PolicyParams::fixed(env.spec().state_dim, env.spec().adversary_box, Vector::Constant(1, sweep.values[c]));
        const ValueEstimate est = estimate_J(world, agent, adversary, sweep.seeds_per_cell,
                                             derive_seed(seed, static_cast<std::uint64_t>(c)));
        report.cells.push_back({sweep.values[c], est.mean, est.std_error});
        total += est.mean;
        if (report.worst_cell < 0 || est.mean < report.cells[report.worst_cell].mean_return)
            report.worst_cell = static_cast<int>(c);
    }
    report.average_return = total / static_cast<double>(sweep.values.size());
    report.worst_case_return = report.cells[report.worst_cell].mean_return;
    return report;
}

}  // namespace rhucrl

#include "rhucrl/commands.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#ifndef RHUCRL_VERSION
#define RHUCRL_VERSION "unknown"
#endif

namespace rhucrl {

namespace fs = std::filesystem;
using nlohmann::json;

void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

void note(std::ostream* log, const std::string& line) {
    static std::mutex m;
    if (!log) return;
    std::lock_guard<std::mutex> lock(m);
    *log << line << '\n';
    log->flush();
}

std::string episode_row(const EpisodeRecord& r, const std::string& hash) {
    std::ostringstream os;
    os << r.t << ',' << num(r.j_optimistic) << ',' << num(r.j_pessimistic) << ',' << num(r.j_mean) << ','
       << num(r.realized_return) << ',' << num(r.gamma_contribution) << ',' << num(r.info_gain) << ','
       << num(r.beta) << ',' << num(r.temperature) << ',' << (r.warmup ? 1 : 0) << ',' << hash << '\n';
    return os.str();
}

std::string snapshot_name(int t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "models/model_t%04d.json", t);
    return buf;
}

}  // namespace

TrainOutcome cmd_train(const RunConfig& config, const fs::path& out_dir, bool force, std::ostream* log) {
    const std::string hash = config.hash();
    const fs::path manifest_path = out_dir / "manifest.json";
    if (fs::exists(manifest_path) && !force) {
        const auto old = read_json(manifest_path);
        if (old.value("config_hash", "") != hash)
            throw ConfigError("--out", out_dir.string() + " holds a run with config hash " +
                                           old.value("config_hash", "?") + " (this config: " + hash +
                                           "); pass --force to overwrite");
    }
    fs::create_directories(out_dir);
    write_atomic(out_dir / "config.json", json{{"config_hash", hash}, {"config", config.tree()}}.dump(2) + "\n");

    const auto env = config.make_environment();
    Learner learner(env, config.model_config(), config.learner_settings(*env), config.seed());

    TrainOutcome outcome;
    json& m = outcome.manifest;
    m = {{"config_hash", hash},
         {"code_version", RHUCRL_VERSION},
         {"config", "config.json"},
         {"episodes_csv", "episodes.csv"},
         {"timing_csv", "timing.csv"},
         {"policies", "policies.jsonl"},
         {"model_snapshots", json::array()},
         {"output_policy", nullptr},
         {"evaluation_reports", json::array()},
         {"failed_episode", nullptr},
         {"error", nullptr}};

    std::string csv = std::string(kEpisodeCsvHeader) + "\n";
    std::string timing = "t,seconds\n";
    std::string policies;
    auto flush_tables = [&] {
        write_atomic(out_dir / "episodes.csv", csv);
        write_atomic(out_dir / "timing.csv", timing);
        write_atomic(out_dir / "policies.jsonl", policies);
    };
    auto write_snapshot = [&](const std::string& name, int t) {
        write_atomic(out_dir / name,
                     json{{"config_hash", hash}, {"t", t}, {"model", learner.model().to_json()}}.dump() + "\n");
        m["model_snapshots"].push_back(name);
    };

    const int episodes = config.episodes();
    for (int t = 1; t <= episodes; ++t) {
        try {
            const auto& r = learner.run_episode();
            csv += episode_row(r, hash);
            timing += std::to_string(r.t) + "," + num(r.seconds) + "\n";
            policies += json{{"t", r.t},
                             {"agent", r.agent.to_json()},
                             {"adversary", r.adversary.to_json()},
                             {"config_hash", hash}}
                            .dump() +
                        "\n";
            flush_tables();
            note(log, "[train] t=" + std::to_string(t) + "/" + std::to_string(episodes) +
                          " J_opt=" + num(r.j_optimistic) + " J_pess=" + num(r.j_pessimistic) +
                          " return=" + num(r.realized_return));
            if (config.snapshot_every() > 0 && t % config.snapshot_every() == 0) write_snapshot(snapshot_name(t), t);
        } catch (const std::exception& e) {
            flush_tables();
            m["status"] = "failed";
            m["failed_episode"] = t;
            m["error"] = e.what();
            m["episodes"] = t - 1;
            write_atomic(manifest_path, m.dump(2) + "\n");
            note(log, std::string("[train] failed: ") + e.what());
            outcome.exit_code = exit_code::kRuntime;
            return outcome;
        }
    }
    flush_tables();
    m["episodes"] = episodes;
    if (episodes == 0) {
        m["status"] = "empty";
        write_atomic(manifest_path, m.dump(2) + "\n");
        outcome.exit_code = exit_code::kEmptyRun;
        return outcome;
    }
    write_snapshot("models/model_final.json", episodes);
    const auto out = output_policy(learner.records());
    write_atomic(out_dir / "output_policy.json",
                 json{{"config_hash", hash},
                      {"t", out.t},
                      {"j_pessimistic", learner.records()[out.t - 1].j_pessimistic},
                      {"agent", out.agent.to_json()}}
                         .dump(2) +
                     "\n");
    m["output_policy"] = "output_policy.json";
    m["status"] = "complete";
    write_atomic(manifest_path, m.dump(2) + "\n");
    note(log, "[train] done; output policy from episode " + std::to_string(out.t));
    return outcome;
}

EvaluateOutcome cmd_evaluate(const fs::path& run_dir, const EvaluateOptions& options, std::ostream* log) {
    const fs::path manifest_path = run_dir / "manifest.json";
    if (!fs::exists(manifest_path)) throw ConfigError("--run", "no manifest.json in " + run_dir.string());
    json manifest = read_json(manifest_path);
    const std::string hash = manifest.value("config_hash", "");
    if (manifest["output_policy"].is_null())
        throw ConfigError("manifest.output_policy", "run has no output policy (status " +
                                                        manifest.value("status", "?") + ")");

    auto refuse = [&](const std::string& what, const std::string& other) {
        if (options.force) return;
        throw ConfigError(what, "config hash " + other + " does not match the run's " + hash + "; pass --force");
    };
    const RunConfig config = options.config ? *options.config
                                            : RunConfig::from_json(read_json(run_dir / "config.json")["config"]);
    if (config.hash() != hash) refuse("--config", config.hash());

    const json policy_doc = read_json(run_dir / manifest["output_policy"].get<std::string>());
    if (policy_doc.value("config_hash", "") != hash) refuse("output_policy.config_hash", policy_doc.value("config_hash", "?"));
    const PolicyParams agent = PolicyParams::from_json(policy_doc["agent"]);

    const auto env = config.make_environment();
    const auto settings = config.learner_settings(*env);
    const std::uint64_t seed = SeedContract{options.seed.value_or(config.seed())}.stream(streams::kEvaluation).seed();
    const std::string agent_id = hash + "/t" + std::to_string(policy_doc.value("t", 0));

    EvaluateOutcome outcome;
    outcome.worst_case = worst_case_eval(*env, agent, settings.families.adversary, config.worst_case_settings(), seed);
    outcome.worst_case.agent_id = agent_id;
    outcome.worst_case.config_hash = hash;
    write_atomic(run_dir / "eval/worst_case.json", outcome.worst_case.to_json().dump(2) + "\n");
    write_atomic(run_dir / "eval/worst_case.csv", report_to_csv(outcome.worst_case));
    std::vector<std::string> reports{"eval/worst_case.json", "eval/worst_case.csv"};
    note(log, "[evaluate] worst-case " + num(outcome.worst_case.worst_case_return) + ", nominal " +
                  num(outcome.worst_case.average_return));

    if (config.setting() == RobustSetting::Parameter) {
        const auto& wrapper = dynamic_cast<const ParameterRobustWrapper&>(*env);
        auto sweep = parameter_sweep(wrapper, agent, config.evaluation_sweep(), derive_seed(seed, "sweep"));
        sweep.agent_id = agent_id;
        sweep.config_hash = hash;
        write_atomic(run_dir / "eval/sweep.json", sweep.to_json().dump(2) + "\n");
        write_atomic(run_dir / "eval/sweep.csv", report_to_csv(sweep));
        reports.push_back("eval/sweep.json");
        reports.push_back("eval/sweep.csv");
        note(log, "[evaluate] parameter sweep worst " + num(sweep.worst_case_return) + " at cell " +
                      std::to_string(sweep.worst_cell));
        outcome.sweep = std::move(sweep);
    }
    manifest["evaluation_reports"] = reports;
    write_atomic(manifest_path, manifest.dump(2) + "\n");
    return outcome;
}

namespace {

RunConfig apply_axis(const RunConfig& base, const std::string& axis, double value) {
    if (axis == "alpha") return base.with("setting.alpha", value);
    if (axis == "perturbation") return base.with("environment.pendulum.perturbation", value);
    if (axis == "adversary_fraction") return base.with("environment.pendulum.adversary_fraction", value);
    if (axis == "parameter") return base.with("evaluation.sweep_values", json::array({value}));
    return base;
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {std::nan(""), std::nan("")};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, xs.size() > 1 ? std::sqrt(ss / (xs.size() - 1)) : 0.0};
}

}  // namespace

SweepOutcome cmd_sweep(const RunConfig& config_template, const fs::path& out_dir, int workers, std::ostream* log) {
    if (workers < 1) throw ConfigError("--workers", "must be >= 1");
    const json& sweep = config_template.tree()["sweep"];
    const std::string axis = sweep["axis"];
    std::vector<double> values;
    for (const auto& v : sweep["values"]) values.push_back(v.get<double>());
    if (axis == "none") values = {0.0};
    if (values.empty()) throw ConfigError("sweep.values", "empty axis");
    std::vector<std::uint64_t> seeds;
    for (const auto& s : sweep["seeds"]) seeds.push_back(s.get<std::uint64_t>());
    if (seeds.empty()) throw ConfigError("sweep.seeds", "no seeds");

    // Build (and thereby validate) every cell config before running anything.
    struct Job {
        RunConfig config;
        fs::path dir;
        std::size_t value_index;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < values.size(); ++i) {
        RunConfig with_value;
        try {
            with_value = apply_axis(config_template, axis, values[i]);
        } catch (const ConfigError& e) {
            throw ConfigError("sweep.values[" + std::to_string(i) + "]", e.what());
        }
        for (auto s : seeds) {
            char name[64];
            std::snprintf(name, sizeof name, "cells/v%02zu_s%llu", i, static_cast<unsigned long long>(s));
            jobs.push_back({with_value.with("seed", json(s)), out_dir / name, i});
        }
    }

    SweepOutcome outcome;
    outcome.cells.resize(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
            auto& cell = outcome.cells[j];
            cell.axis_value = values[jobs[j].value_index];
            cell.seed = jobs[j].config.seed();
            try {
                const auto train = cmd_train(jobs[j].config, jobs[j].dir, true, nullptr);
                if (train.exit_code != exit_code::kOk)
                    throw std::runtime_error("training " + train.manifest.value("status", std::string("failed")) +
                                             (train.manifest["error"].is_string()
                                                  ? ": " + train.manifest["error"].get<std::string>()
                                                  : std::string()));
                const auto eval = cmd_evaluate(jobs[j].dir, {}, nullptr);
                const auto& rep = eval.sweep ? *eval.sweep : eval.worst_case;
                cell.worst_case_return = rep.worst_case_return;
                cell.average_return = rep.average_return;
                cell.ok = true;
                note(log, "[sweep] " + jobs[j].dir.filename().string() + " worst " + num(cell.worst_case_return));
            } catch (const std::exception& e) {
                cell.error = e.what();
                note(log, "[sweep] " + jobs[j].dir.filename().string() + " failed: " + e.what());
            }
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(workers, static_cast<int>(jobs.size()));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    const std::string hash = config_template.hash();
    std::string cells_csv = "axis,value,seed,status,worst_case_return,average_return,error,config_hash\n";
    for (const auto& c : outcome.cells) {
        std::string err = c.error;
        for (char& ch : err)
            if (ch == ',' || ch == '\n') ch = ';';
        cells_csv += axis + "," + num(c.axis_value) + "," + std::to_string(c.seed) + "," + (c.ok ? "ok" : "failed") +
                     "," + (c.ok ? num(c.worst_case_return) : "") + "," + (c.ok ? num(c.average_return) : "") + "," +
                     err + "," + hash + "\n";
    }
    std::string agg = std::string(kSweepCsvHeader) + "\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::vector<double> worst, avg;
        int failed = 0, total = 0;
        for (const auto& c : outcome.cells) {
            if (c.axis_value != values[i]) continue;
            ++total;
            if (!c.ok) {
                ++failed;
                continue;
            }
            worst.push_back(c.worst_case_return);
            avg.push_back(c.average_return);
        }
        const auto [wm, ws] = mean_std(worst);
        const auto [am, as] = mean_std(avg);
        agg += axis + "," + num(values[i]) + "," + std::to_string(total) + "," + std::to_string(failed) + "," +
               num(wm) + "," + num(ws) + "," + num(am) + "," + num(as) + "," + hash + "\n";
        if (failed) outcome.exit_code = exit_code::kRuntime;
    }
    write_atomic(out_dir / "cells.csv", cells_csv);
    write_atomic(out_dir / "sweep.csv", agg);
    return outcome;
}

int cmd_checks(const CheckOptions& options, std::ostream& out) {
    const auto results = run_check_suite(options);
    out << format_check_table(results);
    for (const auto& r : results)
        if (!r.passed) return exit_code::kChecksFailed;
    return exit_code::kOk;
}

}  // namespace rhucrl

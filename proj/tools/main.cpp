// Command-line front end: scenario runs, experience replay, plan execution,
// toy GRPO training, ensemble vote demos, and trace metrics.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "guiagent/grpo.hpp"
#include "guiagent/sim/pipeline.hpp"
#include "guiagent/sim/world.hpp"

using namespace guiagent;
using namespace guiagent::sim;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path);
    if (!out.good()) throw std::runtime_error("cannot write " + path);
    out << content;
}

std::string default_device(const World& world) {
    if (world.devices.empty()) throw std::runtime_error("scenario defines no devices");
    return world.devices.begin()->first;
}

int cmd_run(const std::string& scenario_path, const std::string& instruction, int ensemble,
            std::optional<std::uint64_t> seed, int repeat, const std::string& device_arg,
            const std::string& call_name, const std::string& call_args,
            const std::string& trace_path, const std::string& experience_out) {
    World world = load_world(read_file(scenario_path));
    if (seed) world.seed = *seed;

    PipelineOptions options;
    options.ensemble_n = ensemble;
    if (!call_name.empty()) {
        options.function_call = {call_name, call_args.empty()
                                                ? ordered_json::object()
                                                : ordered_json::parse(call_args)};
    }

    TraceLog trace;
    bool all_ok = true;

    if (instruction.empty() && world.plan) {
        CrossDeviceResult r = run_cross_device(world, *world.plan, options);
        for (const auto& e : r.plan_events) trace.append(e);
        for (const auto& [dev, t] : r.device_traces) {
            for (const auto& rec : t.records) trace.append(rec);
        }
        ordered_json outcome;
        outcome["plan_outcome"] =
            r.plan_result.outcome == PlanOutcome::Completed ? "completed" : "failed";
        trace.append(outcome);
        all_ok = r.plan_result.outcome == PlanOutcome::Completed;
    } else if (!instruction.empty()) {
        std::string device = device_arg.empty() ? default_device(world) : device_arg;
        for (int k = 0; k < repeat; ++k) {
            if (k > 0) world.reset_devices();
            PipelineResult r = run_pipeline(world, device, instruction, options, trace);
            all_ok = all_ok && r.final_status == TaskStatus::Finish;
        }
        if (world.pool.n_total() > 0) {
            ordered_json pool;
            pool["pool"] = {{"n_hit", world.pool.n_hit()}, {"n_total", world.pool.n_total()}};
            trace.append(pool);
        }
    } else {
        std::cerr << "run: provide --instruction, or a scenario with a plan\n";
        return 2;
    }

    write_output(trace_path, trace.to_jsonl());
    if (!experience_out.empty()) write_output(experience_out, world.pool.save_log());
    return all_ok ? 0 : 1;
}

int cmd_replay(const std::string& log_path, const std::string& scenario_path,
               const std::string& query, std::size_t entry_index, bool raw,
               const std::string& device_arg) {
    World world = load_world(read_file(scenario_path));
    ExperiencePool pool = ExperiencePool::load_log(read_file(log_path));
    if (pool.size() == 0) throw std::runtime_error("experience log holds no entries");

    const ExperienceEntry* entry = nullptr;
    if (!query.empty()) {
        for (const auto& e : pool.entries()) {
            if (e.query == query) entry = &e;
        }
        if (!entry) throw std::runtime_error("no entry with query: " + query);
    } else {
        if (entry_index >= pool.size()) throw std::runtime_error("entry index out of range");
        entry = &pool.entries()[entry_index];
    }

    std::string device = device_arg.empty() ? default_device(world) : device_arg;
    class Env : public ReplayEnv {
    public:
        Env(World& w, std::string dev) : world_(w), device_(std::move(dev)) {}
        std::uint64_t current_digest() override {
            return hash_screen(world_.device(device_).fg.screen);
        }
        void execute(const Action& a) override {
            step_device(world_, device_, a);
            world_.clock += world_.config.action_ticks;
        }

    private:
        World& world_;
        std::string device_;
    } env(world, device);

    ReplayResult r = replay(*entry, env, !raw);
    ordered_json out;
    out["query"] = entry->query;
    out["completed"] = r.completed;
    if (r.diverged_at) out["diverged_at"] = *r.diverged_at;
    out["final_digest"] = digest_hex(hash_screen(world.device(device).fg.screen));
    out["ticks"] = world.clock;
    std::cout << out.dump() << "\n";
    return r.completed ? 0 : 1;
}

int cmd_plan(const std::string& plan_path, const std::vector<std::string>& fail_ids,
             const std::string& events_path) {
    AllocatedPlan plan = load_plan(read_file(plan_path));
    PlanResult r = run_plan(plan, [&](const std::string&, const Subtask& st) {
        for (const auto& f : fail_ids) {
            if (f == st.id) return false;
        }
        return true;
    });
    write_output(events_path, event_log_lines(r.status.events()));
    ordered_json summary;
    summary["outcome"] = r.outcome == PlanOutcome::Completed ? "completed" : "failed";
    std::cout << summary.dump() << "\n";
    return r.outcome == PlanOutcome::Completed ? 0 : 1;
}

int cmd_grpo_train(const std::string& config_path, const std::string& metrics_path) {
    GrpoConfig cfg;
    if (!config_path.empty() && config_path != "default") {
        cfg = GrpoConfig::from_json(read_file(config_path));
    }
    GridTask task;
    TrainingResult r = train(task, cfg);
    write_output(metrics_path, metrics_csv(r.history));

    double first = 0, last = 0;
    for (int i = 0; i < 10; ++i) {
        first += r.history[i].mean_reward;
        last += r.history[r.history.size() - 10 + i].mean_reward;
    }
    ordered_json summary;
    summary["iterations"] = cfg.iterations;
    summary["initial_mean_reward"] = first / 10.0;
    summary["final_mean_reward"] = last / 10.0;
    if (!metrics_path.empty() && metrics_path != "-") {
        std::cout << summary.dump() << "\n";
    } else {
        std::cerr << summary.dump() << "\n";
    }
    return 0;
}

int cmd_vote_demo(const std::string& proposals_path) {
    ordered_json doc = ordered_json::parse(read_file(proposals_path));
    const ordered_json& list = doc.is_array() ? doc : doc.at("proposals");
    std::vector<Proposal> proposals;
    for (const auto& p : list) {
        proposals.push_back({p.at("agent").get<int>(), parse_action(p.at("action").dump()),
                             p.value("thought", std::string{})});
    }
    EnsembleDecision d = decide(proposals);

    ordered_json out;
    out["proposals"] = list;
    ordered_json tally = ordered_json::object();
    for (const auto& [type, count] : d.vote_tally) tally[to_string(type)] = count;
    out["tally"] = tally;
    out["decision"] = ordered_json::parse(serialize_action(d.action));
    out["source_agent"] = d.source_agent;
    out["thought"] = d.thought;
    std::cout << out.dump() << "\n";
    return 0;
}

int cmd_metrics(const std::string& trace_path) {
    std::istringstream in(read_file(trace_path));
    std::string line;
    std::string csv = "name,value\n";
    int session = 0;
    std::optional<long> std_ticks, replay_ticks;
    char buf[160];
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ordered_json rec = ordered_json::parse(line);
        if (rec.contains("session")) {
            ++session;
            const auto& s = rec["session"];
            std::string route = s["route"].get<std::string>();
            std::snprintf(buf, sizeof buf, "session_%d_route,%s\n", session, route.c_str());
            csv += buf;
            std::snprintf(buf, sizeof buf, "session_%d_status,%s\n", session,
                          s["final_status"].get<std::string>().c_str());
            csv += buf;
            std::snprintf(buf, sizeof buf, "session_%d_steps,%d\n", session,
                          s["steps"].get<int>());
            csv += buf;
            std::snprintf(buf, sizeof buf, "session_%d_ticks,%ld\n", session,
                          s["ticks"].get<long>());
            csv += buf;
            if (route == "policy" && !std_ticks) std_ticks = s["ticks"].get<long>();
            if (route == "replay" && !replay_ticks) replay_ticks = s["ticks"].get<long>();
        } else if (rec.contains("pool")) {
            long hit = rec["pool"]["n_hit"].get<long>();
            long total = rec["pool"]["n_total"].get<long>();
            std::snprintf(buf, sizeof buf, "hit_rate,%.6f\n",
                          total ? static_cast<double>(hit) / total : 0.0);
            csv += buf;
        }
    }
    if (std_ticks && replay_ticks) {
        std::snprintf(buf, sizeof buf, "efficiency_gain,%.6f\n",
                      efficiency_gain(static_cast<double>(*std_ticks),
                                      static_cast<double>(*replay_ticks)));
        csv += buf;
    }
    std::cout << csv;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"GUI-agent orchestration kernel and simulated device harness"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run an instruction (or the bundled plan) in a scenario");
    std::string scenario, instruction, device, call_name, call_args, trace_path, experience_out;
    int ensemble = 1, repeat = 1;
    std::optional<std::uint64_t> seed;
    run->add_option("scenario", scenario, "scenario JSON file")->required();
    run->add_option("--instruction", instruction, "task instruction");
    run->add_option("--ensemble", ensemble, "number of voting agents")->check(CLI::PositiveNumber);
    run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--repeat", repeat, "run the instruction this many times")
        ->check(CLI::PositiveNumber);
    run->add_option("--device", device, "device id (defaults to the first device)");
    run->add_option("--call", call_name, "user-selected function name (function-call route)");
    run->add_option("--args", call_args, "JSON arguments for --call");
    run->add_option("--trace", trace_path, "trace output file (default stdout)");
    run->add_option("--experience-out", experience_out, "write the experience pool log here");

    auto* rep = app.add_subcommand("replay", "Replay an experience log against a scenario");
    std::string rep_log, rep_scenario, rep_query, rep_device;
    std::size_t rep_index = 0;
    bool rep_raw = false;
    rep->add_option("log", rep_log, "experience log file")->required();
    rep->add_option("--scenario", rep_scenario, "scenario JSON file")->required();
    rep->add_option("--query", rep_query, "select the entry with this exact query");
    rep->add_option("--entry", rep_index, "entry index (default 0)");
    rep->add_option("--device", rep_device, "device id");
    rep->add_flag("--raw", rep_raw, "skip digest validation");

    auto* pl = app.add_subcommand("plan", "Execute a plan file with a stub executor");
    std::string plan_path, events_path;
    std::vector<std::string> fail_ids;
    pl->add_option("planfile", plan_path, "plan JSON file")->required();
    pl->add_option("--fail", fail_ids, "subtask ids whose execution fails");
    pl->add_option("--events", events_path, "event log output file (default stdout)");

    auto* gt = app.add_subcommand("grpo-train", "Train the toy task with GRPO");
    std::string config_path = "default", metrics_path;
    gt->add_option("config", config_path, "config JSON file, or 'default'");
    gt->add_option("--metrics", metrics_path, "metrics CSV output file (default stdout)");

    auto* vd = app.add_subcommand("vote-demo", "Aggregate a proposal file into one decision");
    std::string proposals_path;
    vd->add_option("proposals", proposals_path, "JSON file with a proposal list")->required();

    auto* mt = app.add_subcommand("metrics", "Summarize a trace file as CSV");
    std::string metrics_trace;
    mt->add_option("tracefile", metrics_trace, "trace JSONL file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(scenario, instruction, ensemble, seed, repeat, device, call_name,
                           call_args, trace_path, experience_out);
        }
        if (rep->parsed()) {
            return cmd_replay(rep_log, rep_scenario, rep_query, rep_index, rep_raw, rep_device);
        }
        if (pl->parsed()) return cmd_plan(plan_path, fail_ids, events_path);
        if (gt->parsed()) return cmd_grpo_train(config_path, metrics_path);
        if (vd->parsed()) return cmd_vote_demo(proposals_path);
        if (mt->parsed()) return cmd_metrics(metrics_trace);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

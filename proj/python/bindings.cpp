// Python bindings for the kernel's main operations. Structured values cross
// the boundary as plain dicts/lists via a JSON bridge; heavy state (worlds,
// stores, pools) stays in C++ behind thin handle classes.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "guiagent/calibration.hpp"
#include "guiagent/dispatch.hpp"
#include "guiagent/ensemble.hpp"
#include "guiagent/experience.hpp"
#include "guiagent/grpo.hpp"
#include "guiagent/memory_store.hpp"
#include "guiagent/planner.hpp"
#include "guiagent/sim/pipeline.hpp"
#include "guiagent/sim/world.hpp"

namespace py = pybind11;
using namespace guiagent;
using ordered_json = nlohmann::ordered_json;

namespace {

py::object json_to_py(const ordered_json& j) {
    py::module_ json = py::module_::import("json");
    return json.attr("loads")(j.dump());
}

ordered_json py_to_json(const py::object& obj) {
    py::module_ json = py::module_::import("json");
    return ordered_json::parse(json.attr("dumps")(obj).cast<std::string>());
}

ordered_json action_record(const Action& a) {
    return ordered_json::parse(serialize_action(a));
}

Action action_from_py(const py::object& obj) {
    if (py::isinstance<py::str>(obj)) return parse_action(obj.cast<std::string>());
    return parse_action(py_to_json(obj).dump());
}

BBox bbox_from_tuple(const std::tuple<int, int, int, int>& t) {
    return BBox{std::get<0>(t), std::get<1>(t), std::get<2>(t), std::get<3>(t)};
}

py::dict widget_dict(const WidgetRecord& w) {
    py::dict d;
    d["index"] = w.index;
    d["type"] = w.widget_type;
    d["content"] = w.content;
    d["interactive"] = w.interactive;
    d["bbox"] = py::make_tuple(w.bbox.x1, w.bbox.y1, w.bbox.x2, w.bbox.y2);
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "GUI-agent orchestration kernel: action schema, calibration, voting, "
              "planning, memory, replay, GRPO, and the simulated device harness";

    // ---- action schema -----------------------------------------------------
    m.def("parse_action", [](const std::string& text) { return json_to_py(
                              action_record(parse_action(text))); },
          py::arg("text"), "Parse a compact action record into a dict");
    m.def("serialize_action",
          [](const py::object& action) { return serialize_action(action_from_py(action)); },
          py::arg("action"), "Serialize a dict (or record string) to the compact wire form");
    m.def("normalize_point", [](int px, int pyx, int w, int h) {
              Point p = normalize_point(px, pyx, w, h);
              return py::make_tuple(p.x, p.y);
          },
          py::arg("px"), py::arg("py"), py::arg("width"), py::arg("height"));
    m.def("denormalize_point", [](int x, int y, int w, int h) {
              Point p = denormalize_point(Point{x, y}, w, h);
              return py::make_tuple(p.x, p.y);
          },
          py::arg("x"), py::arg("y"), py::arg("width"), py::arg("height"));

    // ---- screens -----------------------------------------------------------
    py::class_<Screen>(m, "Screen")
        .def("widgets",
             [](const Screen& s) {
                 py::list out;
                 for (const auto& w : s.widgets) out.append(widget_dict(w));
                 return out;
             })
        .def("hit_test",
             [](const Screen& s, int x, int y) {
                 py::list out;
                 for (const auto& w : hit_test(s, Point{x, y})) out.append(widget_dict(w));
                 return out;
             },
             py::arg("x"), py::arg("y"))
        .def("digest", [](const Screen& s) { return digest_hex(hash_screen(s)); });
    m.def("ingest_widgets",
          [](const std::string& fixture_json, const std::string& screen_id) {
              return ingest_widgets(fixture_json, screen_id);
          },
          py::arg("fixture_json"), py::arg("screen_id") = std::string{});

    // ---- calibration ---------------------------------------------------------
    py::class_<FailureMemory>(m, "FailureMemory")
        .def(py::init<>())
        .def("record",
             [](FailureMemory& fm, const std::string& digest, int x, int y) {
                 fm.record(digest_from_hex(digest), Point{x, y});
             },
             py::arg("digest"), py::arg("x"), py::arg("y"))
        .def("contains",
             [](const FailureMemory& fm, const std::string& digest, int x, int y) {
                 return fm.contains(digest_from_hex(digest), Point{x, y});
             })
        .def("size", &FailureMemory::size);
    m.def("distance_to_box",
          [](std::pair<int, int> p, std::tuple<int, int, int, int> b) {
              return distance_to_box(Point{p.first, p.second}, bbox_from_tuple(b));
          },
          py::arg("point"), py::arg("bbox"));
    m.def("correct_point",
          [](std::pair<int, int> p, const Screen& s, const FailureMemory& fm) {
              CorrectionOutcome out = correct_point(Point{p.first, p.second}, s, fm);
              py::dict d;
              d["final_point"] = py::make_tuple(out.final_point.x, out.final_point.y);
              d["verdict"] = to_string(out.verdict);
              if (out.chosen_box) {
                  d["chosen_box"] = py::make_tuple(out.chosen_box->x1, out.chosen_box->y1,
                                                   out.chosen_box->x2, out.chosen_box->y2);
              }
              if (out.distance) d["distance"] = *out.distance;
              return d;
          },
          py::arg("point"), py::arg("screen"), py::arg("failure_memory"));

    // ---- ensemble ------------------------------------------------------------
    m.def("decide",
          [](const py::list& proposals) {
              std::vector<Proposal> ps;
              for (const auto& item : proposals) {
                  py::dict d = item.cast<py::dict>();
                  ps.push_back({d["agent"].cast<int>(),
                                action_from_py(d["action"].cast<py::object>()),
                                d.contains("thought") ? d["thought"].cast<std::string>()
                                                      : std::string{}});
              }
              EnsembleDecision dec = decide(ps);
              py::dict out;
              out["action"] = json_to_py(action_record(dec.action));
              out["source_agent"] = dec.source_agent;
              out["thought"] = dec.thought;
              py::dict tally;
              for (const auto& [t, c] : dec.vote_tally) tally[to_string(t)] = c;
              out["tally"] = tally;
              return out;
          },
          py::arg("proposals"),
          "Two-stage consensus over [{agent, action, thought}] proposals");

    // ---- planner ---------------------------------------------------------------
    py::class_<AllocatedPlan>(m, "Plan")
        .def_static("from_json",
                    [](const std::string& text) { return load_plan(text); })
        .def("to_json", [](const AllocatedPlan& p) { return save_plan(p); })
        .def("run",
             [](const AllocatedPlan& plan, const py::function& executor) {
                 PlanResult r = run_plan(
                     plan, [&](const std::string& endpoint, const Subtask& st) {
                         return executor(endpoint, st.id, st.description).cast<bool>();
                     });
                 py::dict out;
                 out["outcome"] =
                     r.outcome == PlanOutcome::Completed ? "completed" : "failed";
                 py::list events;
                 for (const auto& e : r.status.events()) {
                     py::dict ev;
                     ev["tick"] = e.tick;
                     ev["subtask"] = e.subtask;
                     ev["transition"] = to_string(e.to);
                     events.append(ev);
                 }
                 out["events"] = events;
                 return out;
             },
             py::arg("executor"),
             "Drive the plan with executor(endpoint, subtask_id, description) -> bool");
    m.def("classify_cross_task",
          [](bool needs_memory, bool proactive_switch, bool linear_flow,
             const std::optional<std::string>& sync, const std::optional<std::string>& roles) {
              CrossTaskFeatures f;
              f.needs_memory = needs_memory;
              f.proactive_switch = proactive_switch;
              f.linear_flow = linear_flow;
              if (sync) f.sync = *sync == "realtime" ? SyncMode::Realtime : SyncMode::Async;
              if (roles) {
                  f.roles = *roles == "peer" ? RoleRelation::Peer : RoleRelation::MasterSlave;
              }
              CrossTaskClass c = classify_cross_task(f);
              py::dict out;
              if (c.app_class) out["app_class"] = to_string(*c.app_class);
              if (c.device_class) out["device_class"] = to_string(*c.device_class);
              out["executable"] = c.executable;
              return out;
          },
          py::arg("needs_memory"), py::arg("proactive_switch"), py::arg("linear_flow"),
          py::arg("sync") = std::nullopt, py::arg("roles") = std::nullopt);

    // ---- memory store -----------------------------------------------------------
    py::class_<MemoryStore>(m, "MemoryStore")
        .def(py::init<>())
        .def("register_field",
             [](MemoryStore& s, const std::string& field, const std::string& pattern,
                const std::string& label) { s.register_field({field, pattern, label}); },
             py::arg("field"), py::arg("pattern"), py::arg("label") = std::string{})
        .def("update",
             [](MemoryStore& s, const std::string& r, const std::string& f,
                const std::string& v, long tick) {
                 switch (s.update({r, f, v}, tick)) {
                     case UpdateOutcome::Inserted: return "inserted";
                     case UpdateOutcome::Changed: return "changed";
                     default: return "unchanged";
                 }
             },
             py::arg("relation"), py::arg("field"), py::arg("value"), py::arg("tick") = 0)
        .def("retrieve",
             [](const MemoryStore& s, const std::string& r, const std::string& f)
                 -> std::optional<std::string> { return s.retrieve(r, f); })
        .def("capture_from_screen",
             [](MemoryStore& s, const std::string& r, const std::string& f,
                const Screen& screen, long tick) {
                 return s.capture_from_screen({r, f}, screen, tick);
             },
             py::arg("relation"), py::arg("field"), py::arg("screen"), py::arg("tick") = 0)
        .def("history",
             [](const MemoryStore& s, const std::string& r, const std::string& f) {
                 py::list out;
                 for (const auto& rec : s.history(r, f)) {
                     py::dict d;
                     d["tick"] = rec.tick;
                     d["old"] = rec.old_value ? py::cast(*rec.old_value) : py::none();
                     d["new"] = rec.new_value;
                     out.append(d);
                 }
                 return out;
             });

    // ---- experience -------------------------------------------------------------
    py::class_<ExperiencePool>(m, "ExperiencePool")
        .def(py::init<>())
        .def_static("load_log",
                    [](const std::string& text) { return ExperiencePool::load_log(text); })
        .def("save_log", &ExperiencePool::save_log)
        .def("size", &ExperiencePool::size)
        .def("match",
             [](ExperiencePool& pool, const std::string& query) -> py::object {
                 const ExperienceEntry* e = pool.match(query);
                 if (!e) return py::none();
                 py::dict d;
                 d["query"] = e->query;
                 d["steps"] = static_cast<int>(e->steps.size());
                 d["duration_ticks"] = e->duration_ticks();
                 return d;
             })
        .def("hit_rate", &ExperiencePool::hit_rate);
    m.def("efficiency_gain", &efficiency_gain, py::arg("t_std"), py::arg("t_replay"));

    // ---- GRPO ---------------------------------------------------------------------
    m.def("group_advantages", &group_advantages, py::arg("rewards"),
          py::arg("eps_stab") = 1e-8);
    m.def("prob_ratio", &prob_ratio, py::arg("logp_new"), py::arg("logp_old"));
    m.def("clipped_term", &clipped_term, py::arg("rho"), py::arg("advantage"),
          py::arg("clip_width") = 0.2);
    m.def("grpo_train",
          [](const std::string& config_json) {
              GrpoConfig cfg = config_json.empty() ? GrpoConfig{}
                                                   : GrpoConfig::from_json(config_json);
              GridTask task;
              TrainingResult r = train(task, cfg);
              double first = 0, last = 0;
              for (int i = 0; i < 10; ++i) {
                  first += r.history[i].mean_reward;
                  last += r.history[r.history.size() - 10 + i].mean_reward;
              }
              py::dict out;
              out["iterations"] = cfg.iterations;
              out["initial_mean_reward"] = first / 10.0;
              out["final_mean_reward"] = last / 10.0;
              out["metrics_csv"] = metrics_csv(r.history);
              return out;
          },
          py::arg("config_json") = std::string{},
          "Run the toy-task trainer; returns summary stats and the metrics CSV");

    // ---- dispatch -------------------------------------------------------------------
    py::class_<FunctionRegistry>(m, "FunctionRegistry")
        .def(py::init([]() {
            FunctionRegistry reg;
            for (auto& d : builtin_toolkits()) reg.register_function(std::move(d));
            return reg;
        }))
        .def_static("from_json",
                    [](const std::string& text) { return FunctionRegistry::from_json(text); })
        .def("to_json", &FunctionRegistry::to_json)
        .def("names", &FunctionRegistry::names)
        .def("resolve",
             [](const FunctionRegistry& reg, const std::string& name, const py::dict& params) {
                 BoundCall call = reg.resolve(name, py_to_json(params));
                 py::dict out;
                 out["function"] = call.function;
                 out["args"] = json_to_py(call.args);
                 py::dict prov;
                 for (const auto& [k, v] : call.provenance) {
                     prov[k.c_str()] =
                         v == ParamProvenance::UserSupplied ? "user_supplied" : "defaulted";
                 }
                 out["provenance"] = prov;
                 return out;
             },
             py::arg("name"), py::arg("params") = py::dict{});

    // ---- harness ----------------------------------------------------------------------
    py::class_<sim::World>(m, "World")
        .def_static("from_json",
                    [](const std::string& text) { return sim::load_world(text); })
        .def("devices",
             [](const sim::World& w) {
                 py::list out;
                 for (const auto& [id, _] : w.devices) out.append(id);
                 return out;
             })
        .def("screen_digest",
             [](sim::World& w, const std::string& device) {
                 return digest_hex(hash_screen(w.device(device).fg.screen));
             })
        .def("reset_devices", &sim::World::reset_devices)
        .def("step",
             [](sim::World& w, const std::string& device, const py::object& action) {
                 sim::StepResult r = sim::step_device(w, device, action_from_py(action));
                 py::dict out;
                 out["state_changed"] = r.state_changed;
                 out["pre_digest"] = digest_hex(r.pre_digest);
                 out["post_digest"] = digest_hex(r.post_digest);
                 return out;
             },
             py::arg("device"), py::arg("action"))
        .def("run",
             [](sim::World& w, const std::string& instruction, const std::string& device,
                int ensemble, const py::object& call, const py::object& args) {
                 sim::PipelineOptions options;
                 options.ensemble_n = ensemble;
                 if (!call.is_none()) {
                     options.function_call = {call.cast<std::string>(),
                                              args.is_none() ? ordered_json::object()
                                                             : py_to_json(args)};
                 }
                 std::string dev = device;
                 if (dev.empty()) {
                     if (w.devices.empty()) throw std::runtime_error("world has no devices");
                     dev = w.devices.begin()->first;
                 }
                 sim::TraceLog trace;
                 sim::PipelineResult r = sim::run_pipeline(w, dev, instruction, options, trace);
                 py::dict out;
                 out["final_status"] = to_string(r.final_status);
                 out["steps"] = r.steps;
                 out["ticks"] = r.ticks;
                 out["policy_invocations"] = r.policy_invocations;
                 out["route"] = r.replay_route ? "replay"
                                : r.function_route ? "function_call"
                                                   : "policy";
                 out["trace"] = trace.to_jsonl();
                 return out;
             },
             py::arg("instruction"), py::arg("device") = std::string{},
             py::arg("ensemble") = 1, py::arg("call") = py::none(),
             py::arg("args") = py::none())
        .def("run_plan",
             [](sim::World& w) {
                 if (!w.plan) throw std::runtime_error("scenario has no plan");
                 sim::CrossDeviceResult r = sim::run_cross_device(w, *w.plan, {});
                 py::dict out;
                 out["outcome"] = r.plan_result.outcome == PlanOutcome::Completed
                                      ? "completed"
                                      : "failed";
                 py::list events;
                 for (const auto& e : r.plan_events) events.append(json_to_py(e));
                 out["events"] = events;
                 py::dict traces;
                 for (const auto& [dev, t] : r.device_traces) {
                     traces[dev.c_str()] = t.to_jsonl();
                 }
                 out["traces"] = traces;
                 return out;
             });

    // error translation: coded errors surface as ValueError with the message
    static py::exception<std::exception> base_exc(m, "KernelError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const SchemaError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const ScreenError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const EnsembleError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const PlannerError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const MemoryError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const ExperienceError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const GrpoError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const DispatchError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const PolicyError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const sim::WorldError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });
}

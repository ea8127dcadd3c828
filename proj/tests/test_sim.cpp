#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "guiagent/sim/pipeline.hpp"
#include "guiagent/sim/world.hpp"

using namespace guiagent;
using namespace guiagent::sim;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string scenario_dir() {
    if (const char* env = std::getenv("GUIAGENT_SCENARIOS")) return env;
    return "scenarios";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE_MESSAGE(in.good(), "cannot open ", path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

World load_scenario(const std::string& name) {
    return load_world(read_file(scenario_dir() + "/" + name));
}

Action click_at(int x, int y) {
    Action a;
    a.point = Point{x, y};
    return a;
}

Action type_text(const std::string& t) {
    Action a;
    a.type_text = t;
    return a;
}

Action press_key(SystemKey k) {
    Action a;
    a.press = k;
    return a;
}

// world with one decorative interactive widget (no transition) and one real
// button, for the failure-memory loop
const char* kBypassWorld = R"json({
  "seed": 7,
  "apps": [{
    "id": "app", "initial": "s1",
    "screens": [
      {"id": "s1", "widgets": [
        {"index": 0, "type": "Button", "content": "Decoration", "interactive": true,
         "bbox": [0.40, 0.40, 0.60, 0.50]},
        {"index": 1, "type": "Button", "content": "Proceed", "interactive": true,
         "bbox": [0.40, 0.80, 0.60, 0.90]}
      ]},
      {"id": "s2", "widgets": [
        {"index": 2, "type": "Text", "content": "Done", "interactive": false,
         "bbox": [0.40, 0.40, 0.60, 0.50]}
      ]}
    ],
    "transitions": [{"screen": "s1", "on": {"click": 1}, "go": {"screen": "s2"}}]
  }],
  "devices": [{"id": "phone", "apps": ["app"], "home": "app"}],
  "policies": {"default": [
    {"emit": {"POINT": [50, 200]}, "thought": "tap above the decoration"},
    {"emit": {"POINT": [50, 200]}, "thought": "tap the same spot again"},
    {"emit": {"click_content": "Proceed"}, "thought": "use the real button"},
    {"emit": {"STATUS": "finish"}, "thought": "done"}
  ]}
})json";

} // namespace

TEST_CASE("load_world builds the bundled scenarios") {
    World yt = load_scenario("youtube_search.json");
    CHECK(yt.devices.size() == 1);
    CHECK(yt.apps.size() == 2);
    CHECK(yt.devices.at("phone").fg.app == "launcher");

    World gift = load_scenario("gift_purchase.json");
    CHECK(gift.devices.size() == 2);
    REQUIRE(gift.plan.has_value());
    CHECK(gift.plan->graph.subtasks().size() == 5);
}

TEST_CASE("dangling references are rejected") {
    try {
        load_world(R"({"seed":1,"apps":[],"devices":[{"id":"d","apps":["ghost"]}]})");
        FAIL("dangling app accepted");
    } catch (const WorldError& e) {
        CHECK(e.code() == WorldErrc::DanglingReference);
    }

    CHECK_THROWS_AS(load_world("not json"), WorldError);
}

TEST_CASE("clicking an app icon opens the app; empty corners change nothing") {
    World w = load_scenario("youtube_search.json");
    // "Apps" folder icon bbox (400,630)-(560,730)
    StepResult r1 = step_device(w, "phone", click_at(480, 680));
    CHECK(r1.state_changed);
    CHECK(w.device("phone").fg.screen_id == "folder");

    // YouTube icon on the folder screen: (740,630)-(900,730)
    StepResult r2 = step_device(w, "phone", click_at(820, 680));
    CHECK(r2.state_changed);
    CHECK(w.device("phone").fg.app == "youtube");

    StepResult r3 = step_device(w, "phone", click_at(0, 0));
    CHECK_FALSE(r3.state_changed);

    CHECK_THROWS_AS(step_device(w, "tablet", click_at(1, 1)), WorldError);
}

TEST_CASE("BACK pops the stack; BACK at home is a no-op") {
    World w = load_scenario("youtube_search.json");
    StepResult home_back = step_device(w, "phone", press_key(SystemKey::Back));
    CHECK_FALSE(home_back.state_changed);

    step_device(w, "phone", click_at(480, 680)); // folder
    StepResult back = step_device(w, "phone", press_key(SystemKey::Back));
    CHECK(back.state_changed);
    CHECK(w.device("phone").fg.screen_id == "home");

    step_device(w, "phone", click_at(480, 680));
    step_device(w, "phone", click_at(820, 680)); // youtube
    StepResult home = step_device(w, "phone", press_key(SystemKey::Home));
    CHECK(home.state_changed);
    CHECK(w.device("phone").fg.app == "launcher");
    CHECK(w.device("phone").fg.screen_id == "home");
    CHECK(w.device("phone").back_stack.empty());
}

TEST_CASE("typing lands in the focused or only input field") {
    World w = load_scenario("youtube_search.json");
    step_device(w, "phone", click_at(480, 680));
    step_device(w, "phone", click_at(820, 680));
    step_device(w, "phone", click_at(880, 60)); // search icon -> search screen
    CHECK(w.device("phone").fg.screen_id == "search");

    // no explicit focus click: the single input field catches the text
    StepResult typed = step_device(w, "phone", type_text("mr-beast"));
    CHECK(typed.state_changed);
    CHECK(w.device("phone").fg.screen_id == "results");

    // typing with no input field anywhere is a no-op
    StepResult nofield = step_device(w, "phone", type_text("hello"));
    CHECK_FALSE(nofield.state_changed);
}

TEST_CASE("typing replaces content; empty TYPE clears the field") {
    World w = load_scenario("email_hybrid.json");
    step_device(w, "phone", click_at(220, 260)); // Mail
    step_device(w, "phone", click_at(775, 860)); // Compose
    CHECK(w.device("phone").fg.screen_id == "compose");

    step_device(w, "phone", click_at(500, 85)); // focus To
    step_device(w, "phone", type_text("a@b"));
    auto content_of = [&](int index) {
        for (const auto& wd : w.device("phone").fg.screen.widgets) {
            if (wd.index == index) return wd.content;
        }
        return std::string{};
    };
    CHECK(content_of(2) == "a@b");

    step_device(w, "phone", type_text("lily@example.com")); // replace
    CHECK(content_of(2) == "lily@example.com");

    step_device(w, "phone", type_text("")); // clear
    CHECK(content_of(2) == "");
}

TEST_CASE("the youtube pipeline finishes with the expected step shape") {
    World w = load_scenario("youtube_search.json");
    TraceLog trace;
    PipelineOptions options;
    PipelineResult r =
        run_pipeline(w, "phone", "Open YouTube, search for Mr.Beast, play videos", options, trace);

    CHECK(r.final_status == TaskStatus::Finish);
    CHECK_FALSE(r.replay_route);
    CHECK(r.steps == 7);
    CHECK(r.policy_invocations == 7);
    CHECK(r.ticks == 7 * (5 + 1));
    CHECK(w.device("phone").fg.screen_id == "playing");

    // trace shape: folder -> launch -> search -> type -> channel -> play -> finish
    std::vector<std::string> thoughts;
    for (const auto& rec : trace.records) {
        if (rec.contains("decision")) {
            thoughts.push_back(rec["decision"]["thought"].get<std::string>());
        }
    }
    CHECK(thoughts == std::vector<std::string>{
                          "open the apps folder", "launch YouTube", "tap search",
                          "enter the query", "identify the channel", "play the video",
                          "task complete"});

    // an experience entry was archived
    CHECK(w.pool.size() == 1);
    CHECK(w.pool.entries()[0].steps.size() == 7);
}

TEST_CASE("the second identical instruction replays with zero policy calls") {
    World w = load_scenario("youtube_search.json");
    const std::string instruction = "Open YouTube, search for Mr.Beast, play videos";

    TraceLog t1;
    PipelineResult first = run_pipeline(w, "phone", instruction, {}, t1);
    REQUIRE(first.final_status == TaskStatus::Finish);
    std::uint64_t final_digest_1 = hash_screen(w.device("phone").fg.screen);
    long t_std = first.ticks;

    w.reset_devices();
    TraceLog t2;
    PipelineResult second = run_pipeline(w, "phone", instruction, {}, t2);
    CHECK(second.final_status == TaskStatus::Finish);
    CHECK(second.replay_route);
    CHECK(second.policy_invocations == 0);
    CHECK(hash_screen(w.device("phone").fg.screen) == final_digest_1);

    // simulated latencies: policy rounds cost 5 ticks, actions 1
    double eta = efficiency_gain(static_cast<double>(t_std),
                                 static_cast<double>(second.ticks));
    CHECK(eta >= 0.4);
    CHECK(w.pool.hit_rate() == doctest::Approx(0.5)); // one miss, one hit
}

TEST_CASE("validated replay diverges when a screen fixture mutates") {
    World w = load_scenario("youtube_search.json");
    const std::string instruction = "Open YouTube, search for Mr.Beast, play videos";
    TraceLog t1;
    run_pipeline(w, "phone", instruction, {}, t1);

    // mutate one widget's content in the folder screen definition
    w.apps.at("launcher").screens.at("folder").widgets[0].content = "YouTube Kids";
    w.reset_devices();

    TraceLog t2;
    PipelineResult second = run_pipeline(w, "phone", instruction, {}, t2);
    CHECK_FALSE(second.replay_route);

    bool diverged_logged = false;
    std::size_t diverged_step = 999;
    for (const auto& rec : t2.records) {
        if (rec.value("mode", "") == "replay_diverged") {
            diverged_logged = true;
            diverged_step = rec["step"].get<std::size_t>();
        }
    }
    CHECK(diverged_logged);
    CHECK(diverged_step == 1); // home matches, the folder screen does not
}

TEST_CASE("need_feedback pauses and a missing script entry declines the task") {
    World w = load_scenario("payment_pause.json");
    TraceLog trace;
    PipelineResult r = run_pipeline(w, "phone", "Recharge 50 yuan via China Unicom", {}, trace);

    CHECK(r.final_status == TaskStatus::Impossible);
    CHECK(w.device("phone").fg.screen_id == "pay"); // paused at the payment interface

    bool declined = false, clicked_pay = false;
    for (const auto& rec : trace.records) {
        if (rec.value("feedback", "") == "declined") declined = true;
        if (rec.contains("decision") &&
            rec["decision"]["thought"].get<std::string>() == "confirm the payment") {
            clicked_pay = true;
        }
    }
    CHECK(declined);
    CHECK_FALSE(clicked_pay); // the pay step never executes

    // failed tasks are not archived
    CHECK(w.pool.size() == 0);
}

TEST_CASE("an accepted feedback reply resumes the pipeline") {
    World w = load_scenario("payment_pause.json");
    w.feedback.push_back({"payment_confirmation", {"yes"}, std::nullopt});

    TraceLog trace;
    PipelineResult r = run_pipeline(w, "phone", "Recharge 50 yuan via China Unicom", {}, trace);
    CHECK(r.final_status == TaskStatus::Finish);
    CHECK(w.device("phone").fg.screen_id == "main"); // Pay clicked, back to main
}

TEST_CASE("slot-targeted feedback validates against the field pattern") {
    World w = load_scenario("payment_pause.json");
    w.memory.register_field({"payment_password", "^\\d{6}$", "Payment password"});

    SUBCASE("a bad reply re-prompts once, then the good one lands") {
        w.feedback.push_back({"payment_confirmation",
                              {"12", "123456"},
                              Slot{"self", "payment_password"}});
        TraceLog trace;
        PipelineResult r =
            run_pipeline(w, "phone", "Recharge 50 yuan via China Unicom", {}, trace);
        CHECK(r.final_status == TaskStatus::Finish);
        CHECK(w.memory.retrieve("self", "payment_password") == "123456");
    }

    SUBCASE("two bad replies decline the task") {
        w.feedback.push_back({"payment_confirmation",
                              {"12", "bad"},
                              Slot{"self", "payment_password"}});
        TraceLog trace;
        PipelineResult r =
            run_pipeline(w, "phone", "Recharge 50 yuan via China Unicom", {}, trace);
        CHECK(r.final_status == TaskStatus::Impossible);
        CHECK_FALSE(w.memory.retrieve("self", "payment_password"));
    }
}

TEST_CASE("a corrected click that changes nothing is bypassed on re-encounter") {
    World w = load_world(kBypassWorld);
    TraceLog trace;
    PipelineResult r = run_pipeline(w, "phone", "poke around", {}, trace);
    CHECK(r.final_status == TaskStatus::Finish);

    // round 1: (50,200) misses everything, corrected to the decoration's
    // center (500,450); the click changes nothing so it lands in memory
    const auto& rec1 = trace.records[0];
    CHECK(rec1["calibration"]["verdict"] == "corrected");
    CHECK(rec1["calibration"]["final"] == ordered_json({500, 450}));
    CHECK(rec1["state_changed"] == false);
    CHECK(w.failure_memory.contains(digest_from_hex(rec1["digest"].get<std::string>()),
                                    Point{500, 450}));

    // round 2: same screen, same proposal; the correction is bypassed and the
    // original point executes
    const auto& rec2 = trace.records[1];
    CHECK(rec2["calibration"]["verdict"] == "bypassed_by_history");
    CHECK(rec2["executed"]["POINT"] == ordered_json({50, 200}));
    CHECK(rec2["state_changed"] == false);

    // round 3 proceeds via the real button
    CHECK(trace.records[2]["state_changed"] == true);
}

TEST_CASE("ensemble runs aggregate jittered proposals deterministically") {
    PipelineOptions options;
    options.ensemble_n = 3;

    World w1 = load_scenario("youtube_search.json");
    TraceLog t1;
    PipelineResult r1 =
        run_pipeline(w1, "phone", "Open YouTube, search for Mr.Beast, play videos", options, t1);
    CHECK(r1.final_status == TaskStatus::Finish);
    CHECK(r1.policy_invocations == 7 * 3);
    CHECK(t1.records[0]["proposals"].size() == 3);

    World w2 = load_scenario("youtube_search.json");
    TraceLog t2;
    run_pipeline(w2, "phone", "Open YouTube, search for Mr.Beast, play videos", options, t2);
    CHECK(t1.to_jsonl() == t2.to_jsonl());
}

TEST_CASE("trace digests chain and ticks are strictly increasing") {
    World w = load_scenario("youtube_search.json");
    TraceLog trace;
    run_pipeline(w, "phone", "Open YouTube, search for Mr.Beast, play videos", {}, trace);

    std::string prev_digest;
    bool prev_changed = false;
    long prev_tick = -1;
    int checked = 0;
    for (const auto& rec : trace.records) {
        if (!rec.contains("digest")) continue;
        if (!prev_digest.empty()) {
            if (prev_changed) {
                CHECK(rec["digest"] != prev_digest);
            } else {
                CHECK(rec["digest"] == prev_digest);
            }
        }
        CHECK(rec["tick"].get<long>() > prev_tick);
        prev_tick = rec["tick"].get<long>();
        prev_digest = rec["digest"].get<std::string>();
        prev_changed = rec["state_changed"].get<bool>();
        ++checked;
    }
    CHECK(checked == 7);
}

TEST_CASE("cross-device plan: downstream subtasks wait for the bus") {
    World w = load_scenario("gift_purchase.json");
    REQUIRE(w.plan.has_value());
    CrossDeviceResult r = run_cross_device(w, *w.plan, {});

    CHECK(r.plan_result.outcome == PlanOutcome::Completed);
    CHECK(r.plan_result.status.all_completed());

    long st3_deliver_tick = -1, st4_start_tick = -1, st5_start_tick = -1;
    for (const auto& e : r.plan_events) {
        if (e.value("bus", "") == "deliver" && e["subtask"] == "st3") {
            st3_deliver_tick = e["tick"].get<long>();
        }
        if (e.value("transition", "") == "running" && e["subtask"] == "st4") {
            st4_start_tick = e["tick"].get<long>();
        }
        if (e.value("transition", "") == "running" && e["subtask"] == "st5") {
            st5_start_tick = e["tick"].get<long>();
        }
    }
    REQUIRE(st3_deliver_tick > 0);
    REQUIRE(st4_start_tick > 0);
    CHECK(st3_deliver_tick < st4_start_tick);
    CHECK(st4_start_tick < st5_start_tick);

    // the bus message carried the preference payload
    bool payload_seen = false;
    for (const auto& e : r.plan_events) {
        if (e.value("bus", "") == "send" && e["subtask"] == "st3") {
            CHECK(e["payload"]["tags"] == "5g-fashion");
            payload_seen = true;
        }
    }
    CHECK(payload_seen);

    CHECK(w.device("my_phone").fg.screen_id == "order");
}

TEST_CASE("a failing subtask skips its descendants") {
    World w = load_scenario("gift_purchase.json");
    // st2's script will find no widget: force the failure by renaming the button
    w.apps.at("fashion").screens.at("history").widgets[2].content = "Renamed";

    CrossDeviceResult r = run_cross_device(w, *w.plan, {});
    CHECK(r.plan_result.outcome == PlanOutcome::Failed);
    CHECK(r.plan_result.status.state("st1") == SubtaskState::Completed);
    CHECK(r.plan_result.status.state("st2") == SubtaskState::Failed);
    for (const auto& id : {"st3", "st4", "st5"}) {
        CHECK(r.plan_result.status.state(id) == SubtaskState::Skipped);
    }
}

TEST_CASE("cross-device runs are deterministic over repeated seeds") {
    auto run_once = [] {
        World w = load_scenario("gift_purchase.json");
        CrossDeviceResult r = run_cross_device(w, *w.plan, {});
        std::string out;
        for (const auto& e : r.plan_events) out += e.dump() + "\n";
        for (const auto& [dev, trace] : r.device_traces) out += trace.to_jsonl();
        return out;
    };
    std::string first = run_once();
    for (int i = 0; i < 5; ++i) CHECK(run_once() == first);
}

TEST_CASE("function-call route completes in one step") {
    World w = load_scenario("email_hybrid.json");
    PipelineOptions options;
    options.function_call = {"send_email",
                             ordered_json{{"to", "lily@example.com"},
                                          {"subject", "weekly report"}}};
    TraceLog trace;
    PipelineResult r = run_pipeline(w, "phone", "Send the weekly report", options, trace);

    CHECK(r.final_status == TaskStatus::Finish);
    CHECK(r.function_route);
    CHECK(r.steps == 1);
    CHECK(r.ticks == 1);
    REQUIRE(w.mailbox.size() == 1);
    CHECK(w.mailbox[0]["to"] == "lily@example.com");
    CHECK(trace.records[0]["executed"]["CALL"] == "send_email");
    CHECK(trace.records[0]["executed"]["ARGS"]["body"] == ""); // defaulted

    // the GUI route for the same goal takes at least five steps
    World gui = load_scenario("email_hybrid.json");
    TraceLog gui_trace;
    PipelineResult gr = run_pipeline(gui, "phone", "Send the weekly report", {}, gui_trace);
    CHECK(gr.final_status == TaskStatus::Finish);
    CHECK(gr.steps >= 5);
}

TEST_CASE("pipeline runs are byte-deterministic under a fixed seed") {
    for (const char* name : {"youtube_search.json", "payment_pause.json"}) {
        auto run_once = [&] {
            World w = load_scenario(name);
            TraceLog trace;
            run_pipeline(w, "phone", "deterministic check", {}, trace);
            return trace.to_jsonl();
        };
        CHECK(run_once() == run_once());
    }
}

TEST_CASE("step cap terminates runaway tasks as impossible") {
    World w = load_world(kBypassWorld);
    w.config.step_cap = 2; // the script needs 4 rounds
    TraceLog trace;
    PipelineResult r = run_pipeline(w, "phone", "poke around", {}, trace);
    CHECK(r.final_status == TaskStatus::Impossible);
    CHECK(r.steps == 2);
}

#include <doctest.h>

#include <algorithm>
#include <map>

#include "guiagent/ensemble.hpp"
#include "guiagent/rng.hpp"

using namespace guiagent;

namespace {

Proposal click(int agent, int x, int y, std::string thought = "") {
    Action a;
    a.point = Point{x, y};
    return {agent, a, std::move(thought)};
}

Proposal press(int agent, SystemKey k) {
    Action a;
    a.press = k;
    return {agent, a, "press"};
}

Proposal wait_ms(int agent, int ms) {
    Action a;
    a.duration_ms = ms;
    return {agent, a, "wait"};
}

Proposal text(int agent, std::string t) {
    Action a;
    a.type_text = std::move(t);
    return {agent, a, "text"};
}

// Brute-force stage oracle used by the randomized equivalence test.
ActionIntent oracle_winning_type(const std::vector<Proposal>& ps) {
    std::map<ActionIntent, int> tally;
    std::map<ActionIntent, int> earliest;
    for (const auto& p : ps) {
        ActionIntent t = intent_of(p.action);
        tally[t]++;
        if (!earliest.count(t) || p.agent_index < earliest[t]) earliest[t] = p.agent_index;
    }
    ActionIntent best = tally.begin()->first;
    for (const auto& [t, c] : tally) {
        if (c > tally[best] || (c == tally[best] && earliest[t] < earliest[best])) best = t;
    }
    return best;
}

} // namespace

TEST_CASE("stage 1: strict majority wins") {
    auto vote = vote_action_type({click(0, 1, 1), click(1, 2, 2), press(2, SystemKey::Back)});
    CHECK(vote.winner == ActionIntent::Click);
    CHECK(vote.tally[ActionIntent::Click] == 2);
    CHECK(vote.tally[ActionIntent::Press] == 1);
}

TEST_CASE("stage 1: ties go to the type with the earliest proposer") {
    auto vote = vote_action_type({click(0, 1, 1), press(1, SystemKey::Back)});
    CHECK(vote.winner == ActionIntent::Click);

    auto flipped = vote_action_type({press(0, SystemKey::Back), click(1, 1, 1)});
    CHECK(flipped.winner == ActionIntent::Press);
}

TEST_CASE("stage 1: single proposal is unanimous; empty set rejected") {
    auto vote = vote_action_type({press(5, SystemKey::Home)});
    CHECK(vote.winner == ActionIntent::Press);
    CHECK_THROWS_AS(vote_action_type({}), EnsembleError);
}

TEST_CASE("duplicate agent indices are rejected") {
    CHECK_THROWS_AS(vote_action_type({click(1, 1, 1), click(1, 2, 2)}), EnsembleError);
}

TEST_CASE("stage 2: centroid voting adopts the candidate nearest the centroid") {
    // centroid of (100,100),(110,100),(400,100) is (203.33,100); (110,100) is closest
    auto d = decide({click(0, 100, 100, "a"), click(1, 110, 100, "b"), click(2, 400, 100, "c")});
    CHECK(d.action.point == Point{110, 100});
    CHECK(d.source_agent == 1);
    CHECK(d.thought == "b");
}

TEST_CASE("stage 2: press majority with lowest-index source") {
    auto d = decide({press(0, SystemKey::Back), press(1, SystemKey::Back),
                     press(2, SystemKey::Home)});
    CHECK(d.action.press == SystemKey::Back);
    CHECK(d.source_agent == 0);
}

TEST_CASE("stage 2: durations adopt the original nearest the mean") {
    // mean(800, 1000, 1500) = 1100 -> 1000
    auto d = decide({wait_ms(0, 800), wait_ms(1, 1000), wait_ms(2, 1500)});
    CHECK(d.action.duration_ms == 1000);
    CHECK(d.source_agent == 1);
}

TEST_CASE("stage 2: text frequency voting") {
    auto d = decide({text(0, "交费"), text(1, "交费"), text(2, "充值")});
    CHECK(d.action.type_text == "交费");
    CHECK(d.source_agent == 0);
}

TEST_CASE("swipe target rides along with the adopted source proposal") {
    Action s1;
    s1.point = Point{100, 500};
    s1.to = SwipeTarget(SwipeDirection::Up);
    Action s2;
    s2.point = Point{120, 500};
    s2.to = SwipeTarget(SwipeDirection::Down);
    auto d = decide({{0, s1, "up"}, {1, s2, "down"}, {2, s1, "up again"}});
    // centroid x = (100+120+100)/3 = 106.67 -> (100,500) closest, earliest agent 0
    CHECK(d.action.point == Point{100, 500});
    CHECK(std::get<SwipeDirection>(*d.action.to) == SwipeDirection::Up);
    CHECK(d.source_agent == 0);
}

TEST_CASE("unanimity reproduces the common proposal field-for-field") {
    Action a;
    a.point = Point{87, 445};
    a.status = TaskStatus::Start;
    auto d = decide({{0, a, "t"}, {1, a, "t2"}, {2, a, "t3"}});
    CHECK(d.action == a);
    CHECK(d.source_agent == 0);
    CHECK(d.thought == "t");
    CHECK(d.vote_tally[ActionIntent::Click] == 3);
}

TEST_CASE("a single proposal is adopted verbatim") {
    Action a;
    a.type_text = "mr-beast";
    auto d = decide({{3, a, "only"}});
    CHECK(d.action == a);
    CHECK(d.source_agent == 3);
    CHECK(d.thought == "only");
}

TEST_CASE("mixed proposals of non-winning type are excluded from aggregation") {
    // two clicks win over one press; the press coordinates must not influence
    auto d = decide({click(0, 100, 100), click(1, 300, 100), press(2, SystemKey::Back)});
    CHECK(intent_of(d.action) == ActionIntent::Click);
    // centroid (200,100): both equidistant -> lowest agent index wins
    CHECK(d.action.point == Point{100, 100});
    CHECK(d.source_agent == 0);
}

TEST_CASE("errors: no proposal of the winning type") {
    CHECK_THROWS_AS(aggregate_parameters(ActionIntent::Wait, {click(0, 1, 1)}), EnsembleError);
}

TEST_CASE("randomized equivalence with the brute-force oracle") {
    Rng rng(2025);
    for (int round = 0; round < 1000; ++round) {
        int n = 1 + static_cast<int>(rng.next_below(7));
        std::vector<Proposal> ps;
        for (int i = 0; i < n; ++i) {
            switch (rng.next_below(4)) {
                case 0:
                    ps.push_back(click(i, static_cast<int>(rng.next_below(1001)),
                                       static_cast<int>(rng.next_below(1001))));
                    break;
                case 1:
                    ps.push_back(press(i, static_cast<SystemKey>(rng.next_below(3))));
                    break;
                case 2: ps.push_back(wait_ms(i, 100 + static_cast<int>(rng.next_below(2000)))); break;
                default: ps.push_back(text(i, std::string("t") + char('a' + rng.next_below(3))));
            }
        }
        EnsembleDecision d = decide(ps);
        ActionIntent expected_type = oracle_winning_type(ps);
        CHECK(intent_of(d.action) == expected_type);

        // tally sums to N
        int total = 0;
        for (const auto& [_, c] : d.vote_tally) total += c;
        CHECK(total == n);

        // adopted parameters come from the candidate set
        bool from_candidates = false;
        for (const auto& p : ps) {
            if (p.agent_index == d.source_agent) {
                CHECK(p.action == d.action);
                CHECK(p.thought == d.thought);
                from_candidates = intent_of(p.action) == expected_type;
            }
        }
        CHECK(from_candidates);

        if (expected_type == ActionIntent::Click) {
            // exhaustive nearest-to-centroid check
            double cx = 0, cy = 0;
            int m = 0;
            for (const auto& p : ps) {
                if (intent_of(p.action) == ActionIntent::Click) {
                    cx += p.action.point->x;
                    cy += p.action.point->y;
                    ++m;
                }
            }
            cx /= m;
            cy /= m;
            double best = 1e18;
            for (const auto& p : ps) {
                if (intent_of(p.action) != ActionIntent::Click) continue;
                double dx = p.action.point->x - cx, dy = p.action.point->y - cy;
                best = std::min(best, dx * dx + dy * dy);
            }
            double dx = d.action.point->x - cx, dy = d.action.point->y - cy;
            CHECK(dx * dx + dy * dy == doctest::Approx(best).epsilon(1e-12));
        }
    }
}

TEST_CASE("permutation stability when tallies and distances are strict") {
    Rng rng(888);
    for (int round = 0; round < 300; ++round) {
        // construct a round with a strict type majority and distinct points
        std::vector<Proposal> ps = {click(0, 100 + static_cast<int>(rng.next_below(100)), 100),
                                    click(1, 400 + static_cast<int>(rng.next_below(100)), 100),
                                    click(2, 700 + static_cast<int>(rng.next_below(100)), 100),
                                    press(3, SystemKey::Back)};
        EnsembleDecision base = decide(ps);

        std::vector<Proposal> shuffled = ps;
        for (std::size_t i = shuffled.size(); i > 1; --i) {
            std::swap(shuffled[i - 1], shuffled[rng.next_below(i)]);
        }
        EnsembleDecision permuted = decide(shuffled);
        CHECK(permuted.action == base.action);
        CHECK(permuted.source_agent == base.source_agent);
    }
}

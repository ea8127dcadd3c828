#include "guiagent/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace guiagent {
namespace {

// Index (into proposals) of the lowest-agent-index proposal satisfying pred.
template <typename Pred>
const Proposal* earliest_matching(const std::vector<Proposal>& proposals, Pred pred) {
    const Proposal* best = nullptr;
    for (const auto& p : proposals) {
        if (!pred(p)) continue;
        if (!best || p.agent_index < best->agent_index) best = &p;
    }
    return best;
}

// Frequency vote over an extractor; winner by count, then by lowest agent
// index among each value's earliest proposer.
template <typename Extract>
const Proposal* frequency_winner(const std::vector<Proposal>& matching, Extract extract) {
    using Value = decltype(extract(matching.front()));
    std::map<Value, int> counts;
    std::map<Value, int> earliest;
    for (const auto& p : matching) {
        Value v = extract(p);
        counts[v]++;
        auto it = earliest.find(v);
        if (it == earliest.end() || p.agent_index < it->second) earliest[v] = p.agent_index;
    }
    const Value* winner = nullptr;
    for (const auto& [value, count] : counts) {
        if (!winner) {
            winner = &value;
            continue;
        }
        int best_count = counts.at(*winner);
        if (count > best_count ||
            (count == best_count && earliest.at(value) < earliest.at(*winner))) {
            winner = &value;
        }
    }
    return earliest_matching(matching,
                             [&](const Proposal& p) { return extract(p) == *winner; });
}

} // namespace

TypeVote vote_action_type(const std::vector<Proposal>& proposals) {
    if (proposals.empty()) {
        throw EnsembleError(EnsembleErrc::EmptyProposalSet, "no proposals to vote on");
    }
    std::set<int> agents;
    for (const auto& p : proposals) {
        if (!agents.insert(p.agent_index).second) {
            throw EnsembleError(EnsembleErrc::DuplicateAgentIndex,
                                "agent index " + std::to_string(p.agent_index) +
                                    " appears twice in one round");
        }
    }

    std::map<ActionIntent, int> tally;
    std::map<ActionIntent, int> earliest; // lowest agent index proposing the type
    for (const auto& p : proposals) {
        ActionIntent t = intent_of(p.action);
        tally[t]++;
        auto it = earliest.find(t);
        if (it == earliest.end() || p.agent_index < it->second) earliest[t] = p.agent_index;
    }

    ActionIntent winner = tally.begin()->first;
    for (const auto& [type, count] : tally) {
        if (count > tally[winner] ||
            (count == tally[winner] && earliest[type] < earliest[winner])) {
            winner = type;
        }
    }
    return {winner, tally};
}

EnsembleDecision aggregate_parameters(ActionIntent winning_type,
                                      const std::vector<Proposal>& proposals) {
    std::vector<Proposal> matching;
    for (const auto& p : proposals) {
        if (intent_of(p.action) == winning_type) matching.push_back(p);
    }
    if (matching.empty()) {
        throw EnsembleError(EnsembleErrc::NoMatchingProposals,
                            "no proposal matches the winning type");
    }
    std::sort(matching.begin(), matching.end(),
              [](const Proposal& a, const Proposal& b) { return a.agent_index < b.agent_index; });

    const Proposal* source = nullptr;
    switch (winning_type) {
        case ActionIntent::Click:
        case ActionIntent::Swipe:
        case ActionIntent::LongPress: {
            double cx = 0.0, cy = 0.0;
            for (const auto& p : matching) {
                cx += p.action.point->x;
                cy += p.action.point->y;
            }
            cx /= static_cast<double>(matching.size());
            cy /= static_cast<double>(matching.size());
            double best = std::numeric_limits<double>::infinity();
            for (const auto& p : matching) { // ascending agent index: ties keep the lowest
                double dx = p.action.point->x - cx;
                double dy = p.action.point->y - cy;
                double d = dx * dx + dy * dy;
                if (d < best) {
                    best = d;
                    source = &p;
                }
            }
            break;
        }
        case ActionIntent::Press:
            source = frequency_winner(matching,
                                      [](const Proposal& p) { return *p.action.press; });
            break;
        case ActionIntent::Status:
            source = frequency_winner(matching,
                                      [](const Proposal& p) { return *p.action.status; });
            break;
        case ActionIntent::InputText:
            source = frequency_winner(matching,
                                      [](const Proposal& p) { return *p.action.type_text; });
            break;
        case ActionIntent::Wait: {
            double mean = 0.0;
            for (const auto& p : matching) mean += *p.action.duration_ms;
            mean /= static_cast<double>(matching.size());
            double best = std::numeric_limits<double>::infinity();
            for (const auto& p : matching) {
                double d = std::abs(*p.action.duration_ms - mean);
                if (d < best) {
                    best = d;
                    source = &p;
                }
            }
            break;
        }
    }

    std::map<ActionIntent, int> tally;
    for (const auto& p : proposals) tally[intent_of(p.action)]++;
    return {source->action, source->agent_index, source->thought, std::move(tally)};
}

EnsembleDecision decide(const std::vector<Proposal>& proposals) {
    TypeVote vote = vote_action_type(proposals);
    return aggregate_parameters(vote.winner, proposals);
}

} // namespace guiagent

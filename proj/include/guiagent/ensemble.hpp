#pragma once

#include <map>
#include <string>
#include <vector>

#include "guiagent/action.hpp"
#include "guiagent/errors.hpp"

namespace guiagent {

// Two-stage consensus over independent agent proposals: majority vote on the
// primary action type, then per-type parameter aggregation.
//
// Stage 2 rules by winning type:
//   click / swipe / long press : centroid of proposed points, adopt the
//     candidate point closest to it; the source proposal's remaining fields
//     (swipe target, press duration) ride along.
//   press / status             : most frequent value.
//   text                       : most frequent string (byte equality; inputs
//                                are assumed normalization-stable).
//   wait                       : original duration nearest the arithmetic mean.
// Frequency and distance ties resolve to the lowest agent index, so the
// decision is deterministic for any proposal ordering.

struct Proposal {
    int agent_index = 0; // unique within one decision round
    Action action;
    std::string thought;
};

struct EnsembleDecision {
    Action action;
    int source_agent = 0;  // proposal that supplied the adopted parameters
    std::string thought;   // copied from source_agent
    std::map<ActionIntent, int> vote_tally;
};

enum class EnsembleErrc { EmptyProposalSet, NoMatchingProposals, DuplicateAgentIndex };
using EnsembleError = CodedError<EnsembleErrc>;

struct TypeVote {
    ActionIntent winner;
    std::map<ActionIntent, int> tally;
};

TypeVote vote_action_type(const std::vector<Proposal>& proposals);

EnsembleDecision aggregate_parameters(ActionIntent winning_type,
                                      const std::vector<Proposal>& proposals);

// vote_action_type then aggregate_parameters.
EnsembleDecision decide(const std::vector<Proposal>& proposals);

} // namespace guiagent

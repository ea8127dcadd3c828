#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "guiagent/errors.hpp"
#include "guiagent/rng.hpp"

namespace guiagent {

// Group-relative policy optimization at toy scale: Z-score advantages within
// a sampled group, probability ratios over whole completions, clipped
// surrogate objective with a KL penalty, and a trainer on a small sequential
// navigation task.
//
// Two distinct epsilons: eps_stab guards the advantage denominator,
// clip_width bounds the surrogate ratio.

enum class GrpoErrc { GroupTooSmall, NonFiniteInput, EnvFault };
using GrpoError = CodedError<GrpoErrc>;

struct GrpoConfig {
    int group_size = 8;
    double clip_width = 0.2;
    double kl_coeff = 0.04;
    double eps_stab = 1e-8;
    double learning_rate = 2.0; // tabular softmax tolerates a large step
    int iterations = 300;
    std::uint64_t seed = 15;
    bool mean_mode = false; // average instead of summing the clipped terms

    static GrpoConfig from_json(const std::string& text);
    std::string to_json() const;
};

// Â_i = (r_i - mean(r)) / (std(r) + eps_stab), population standard deviation.
std::vector<double> group_advantages(const std::vector<double>& rewards, double eps_stab);

// ρ = exp(logp_new - logp_old); log-probabilities are summed per completion
// before the ratio is taken.
double prob_ratio(double logp_new, double logp_old);

// min(ρ·Â, clip(ρ, 1-ε, 1+ε)·Â)
double clipped_term(double rho, double advantage, double clip_width);

// ---------------------------------------------------------------------------
// Tabular softmax policy and the grid navigation toy task
// ---------------------------------------------------------------------------

class TablePolicy {
public:
    TablePolicy(int n_states, int n_actions);

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    std::vector<double> action_probs(int state) const;
    double log_prob(int state, int action) const;
    int sample_action(int state, Rng& rng) const;

private:
    int n_states_;
    int n_actions_;
    std::vector<double> params_; // row-major [state][action]
};

// 5x5 grid of screens. Actions 0..3 move up/down/left/right (clamped at the
// border); action 4 ("finish") ends the episode with reward 1 iff the agent
// stands on the goal screen. Episodes are capped.
struct GridTask {
    int width = 5;
    int height = 5;
    int start = 18; // row 3, col 3
    int goal = 24;  // row 4, col 4
    int step_cap = 12;

    int n_states() const { return width * height; }
    static constexpr int kNumActions = 5;
    static constexpr int kFinish = 4;

    int next_state(int state, int action) const;
};

struct Completion {
    std::vector<int> states;
    std::vector<int> actions;
    double logp_old = 0.0; // sum of per-step log-probs under the sampling policy
    double reward = 0.0;
};

struct GroupSample {
    std::string query;
    std::vector<Completion> completions;
    std::vector<double> rewards;
    std::vector<double> advantages;
};

Completion rollout(const GridTask& task, const TablePolicy& policy, Rng& rng);

GroupSample sample_group(const GridTask& task, const TablePolicy& policy, Rng& rng,
                         const GrpoConfig& cfg);

// KL(π_old ∥ π_new) averaged over the multiset of states visited by the
// group's completions.
double visited_state_kl(const GroupSample& group, const TablePolicy& policy_old,
                        const TablePolicy& policy_new);

// J = Σ_i min(ρ_i·Â_i, clip(ρ_i)·Â_i) - β·KL   (mean over i in mean_mode)
double grpo_objective(const GroupSample& group, const TablePolicy& policy_new,
                      const TablePolicy& policy_old, const GrpoConfig& cfg);

// Analytic ∇_θ of grpo_objective with respect to policy_new's parameters.
// At clip kinks the unclipped branch is taken (a valid subgradient).
std::vector<double> grpo_gradient(const GroupSample& group, const TablePolicy& policy_new,
                                  const TablePolicy& policy_old, const GrpoConfig& cfg);

struct IterationMetrics {
    int iteration = 0;
    double mean_reward = 0.0;
    double objective = 0.0; // evaluated after the update
    double kl = 0.0;        // KL(π_old ∥ π_new) after the update
};

// One iteration: freeze π_old, sample a group, compute advantages, take one
// gradient ascent step on J.
IterationMetrics grpo_step(TablePolicy& policy, const GridTask& task, Rng& rng,
                           const GrpoConfig& cfg, int iteration);

struct TrainingResult {
    std::vector<IterationMetrics> history;
    TablePolicy policy;
};

TrainingResult train(const GridTask& task, const GrpoConfig& cfg);

// CSV with header iteration,mean_reward,objective,kl.
std::string metrics_csv(const std::vector<IterationMetrics>& history);

} // namespace guiagent

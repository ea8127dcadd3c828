#include "guiagent/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace guiagent {

GrpoConfig GrpoConfig::from_json(const std::string& text) {
    auto doc = nlohmann::json::parse(text);
    GrpoConfig cfg;
    cfg.group_size = doc.value("group_size", cfg.group_size);
    cfg.clip_width = doc.value("clip_width", cfg.clip_width);
    cfg.kl_coeff = doc.value("kl_coeff", cfg.kl_coeff);
    cfg.eps_stab = doc.value("eps_stab", cfg.eps_stab);
    cfg.learning_rate = doc.value("learning_rate", cfg.learning_rate);
    cfg.iterations = doc.value("iterations", cfg.iterations);
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.mean_mode = doc.value("mean_mode", cfg.mean_mode);
    if (cfg.group_size < 2 || cfg.clip_width <= 0.0 || cfg.kl_coeff < 0.0 ||
        cfg.eps_stab <= 0.0) {
        throw GrpoError(GrpoErrc::GroupTooSmall,
                        "config requires group_size >= 2, clip_width > 0, kl_coeff >= 0, "
                        "eps_stab > 0");
    }
    return cfg;
}

std::string GrpoConfig::to_json() const {
    nlohmann::ordered_json doc;
    doc["group_size"] = group_size;
    doc["clip_width"] = clip_width;
    doc["kl_coeff"] = kl_coeff;
    doc["eps_stab"] = eps_stab;
    doc["learning_rate"] = learning_rate;
    doc["iterations"] = iterations;
    doc["seed"] = seed;
    doc["mean_mode"] = mean_mode;
    return doc.dump(2);
}

std::vector<double> group_advantages(const std::vector<double>& rewards, double eps_stab) {
    if (rewards.size() < 2) {
        throw GrpoError(GrpoErrc::GroupTooSmall, "advantages need at least two rewards");
    }
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(rewards.size()); // population variance
    double denom = std::sqrt(var) + eps_stab;

    std::vector<double> adv(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / denom;
    return adv;
}

double prob_ratio(double logp_new, double logp_old) {
    if (!std::isfinite(logp_new) || !std::isfinite(logp_old)) {
        throw GrpoError(GrpoErrc::NonFiniteInput, "log-probabilities must be finite");
    }
    return std::exp(logp_new - logp_old);
}

double clipped_term(double rho, double advantage, double clip_width) {
    double clipped = std::clamp(rho, 1.0 - clip_width, 1.0 + clip_width);
    return std::min(rho * advantage, clipped * advantage);
}

// ---------------------------------------------------------------------------

TablePolicy::TablePolicy(int n_states, int n_actions)
    : n_states_(n_states), n_actions_(n_actions),
      params_(static_cast<std::size_t>(n_states) * n_actions, 0.0) {}

std::vector<double> TablePolicy::action_probs(int state) const {
    const double* row = params_.data() + static_cast<std::size_t>(state) * n_actions_;
    double mx = row[0];
    for (int a = 1; a < n_actions_; ++a) mx = std::max(mx, row[a]);
    std::vector<double> probs(n_actions_);
    double sum = 0.0;
    for (int a = 0; a < n_actions_; ++a) {
        probs[a] = std::exp(row[a] - mx);
        sum += probs[a];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

double TablePolicy::log_prob(int state, int action) const {
    return std::log(action_probs(state)[action]);
}

int TablePolicy::sample_action(int state, Rng& rng) const {
    return static_cast<int>(rng.next_weighted(action_probs(state)));
}

int GridTask::next_state(int state, int action) const {
    int r = state / width, c = state % width;
    switch (action) {
        case 0: r = std::max(0, r - 1); break;
        case 1: r = std::min(height - 1, r + 1); break;
        case 2: c = std::max(0, c - 1); break;
        case 3: c = std::min(width - 1, c + 1); break;
        default: break;
    }
    return r * width + c;
}

Completion rollout(const GridTask& task, const TablePolicy& policy, Rng& rng) {
    Completion out;
    int s = task.start;
    for (int step = 0; step < task.step_cap; ++step) {
        int a = policy.sample_action(s, rng);
        out.states.push_back(s);
        out.actions.push_back(a);
        out.logp_old += policy.log_prob(s, a);
        if (a == GridTask::kFinish) {
            out.reward = (s == task.goal) ? 1.0 : 0.0;
            return out;
        }
        s = task.next_state(s, a);
    }
    out.reward = 0.0; // cap reached without finishing
    return out;
}

GroupSample sample_group(const GridTask& task, const TablePolicy& policy, Rng& rng,
                         const GrpoConfig& cfg) {
    GroupSample group;
    group.query = "grid:" + std::to_string(task.start) + "->" + std::to_string(task.goal);
    for (int i = 0; i < cfg.group_size; ++i) {
        Completion c = rollout(task, policy, rng);
        group.rewards.push_back(c.reward);
        group.completions.push_back(std::move(c));
    }
    group.advantages = group_advantages(group.rewards, cfg.eps_stab);
    return group;
}

double visited_state_kl(const GroupSample& group, const TablePolicy& policy_old,
                        const TablePolicy& policy_new) {
    double total = 0.0;
    long count = 0;
    for (const auto& c : group.completions) {
        for (int s : c.states) {
            std::vector<double> po = policy_old.action_probs(s);
            std::vector<double> pn = policy_new.action_probs(s);
            double kl = 0.0;
            for (std::size_t a = 0; a < po.size(); ++a) kl += po[a] * std::log(po[a] / pn[a]);
            total += kl;
            ++count;
        }
    }
    return count == 0 ? 0.0 : total / static_cast<double>(count);
}

namespace {

double completion_logp(const Completion& c, const TablePolicy& policy) {
    double lp = 0.0;
    for (std::size_t t = 0; t < c.states.size(); ++t) {
        lp += policy.log_prob(c.states[t], c.actions[t]);
    }
    return lp;
}

} // namespace

double grpo_objective(const GroupSample& group, const TablePolicy& policy_new,
                      const TablePolicy& policy_old, const GrpoConfig& cfg) {
    double sum = 0.0;
    for (std::size_t i = 0; i < group.completions.size(); ++i) {
        double rho = prob_ratio(completion_logp(group.completions[i], policy_new),
                                group.completions[i].logp_old);
        sum += clipped_term(rho, group.advantages[i], cfg.clip_width);
    }
    if (cfg.mean_mode) sum /= static_cast<double>(group.completions.size());
    return sum - cfg.kl_coeff * visited_state_kl(group, policy_old, policy_new);
}

std::vector<double> grpo_gradient(const GroupSample& group, const TablePolicy& policy_new,
                                  const TablePolicy& policy_old, const GrpoConfig& cfg) {
    const int A = policy_new.n_actions();
    std::vector<double> grad(policy_new.params().size(), 0.0);
    const double scale =
        cfg.mean_mode ? 1.0 / static_cast<double>(group.completions.size()) : 1.0;

    for (std::size_t i = 0; i < group.completions.size(); ++i) {
        const Completion& c = group.completions[i];
        const double adv = group.advantages[i];
        double rho = prob_ratio(completion_logp(c, policy_new), c.logp_old);
        double clipped = std::clamp(rho, 1.0 - cfg.clip_width, 1.0 + cfg.clip_width);

        // d/dρ of min(ρÂ, clip(ρ)Â); the unclipped branch wins ties.
        double dmin_drho;
        if (rho * adv <= clipped * adv) {
            dmin_drho = adv;
        } else {
            const bool inside = rho > 1.0 - cfg.clip_width && rho < 1.0 + cfg.clip_width;
            dmin_drho = inside ? adv : 0.0;
        }
        if (dmin_drho == 0.0) continue;

        // ∇ρ = ρ · ∇ log π_new(o_i);  ∇ log π at (s,a): e_a - π(·|s)
        const double coeff = scale * dmin_drho * rho;
        for (std::size_t t = 0; t < c.states.size(); ++t) {
            const int s = c.states[t];
            std::vector<double> probs = policy_new.action_probs(s);
            double* row = grad.data() + static_cast<std::size_t>(s) * A;
            for (int a = 0; a < A; ++a) row[a] -= coeff * probs[a];
            row[c.actions[t]] += coeff;
        }
    }

    if (cfg.kl_coeff > 0.0) {
        // ∂KL(π_old ∥ π_new)/∂θ_new[s,a] = π_new(a|s) - π_old(a|s), averaged
        // over the visited-state multiset.
        long count = 0;
        for (const auto& c : group.completions) count += static_cast<long>(c.states.size());
        if (count > 0) {
            const double w = cfg.kl_coeff / static_cast<double>(count);
            for (const auto& c : group.completions) {
                for (int s : c.states) {
                    std::vector<double> po = policy_old.action_probs(s);
                    std::vector<double> pn = policy_new.action_probs(s);
                    double* row = grad.data() + static_cast<std::size_t>(s) * A;
                    for (int a = 0; a < A; ++a) row[a] -= w * (pn[a] - po[a]);
                }
            }
        }
    }
    return grad;
}

IterationMetrics grpo_step(TablePolicy& policy, const GridTask& task, Rng& rng,
                           const GrpoConfig& cfg, int iteration) {
    const TablePolicy policy_old = policy; // frozen sampling policy
    GroupSample group = sample_group(task, policy_old, rng, cfg);

    std::vector<double> grad = grpo_gradient(group, policy, policy_old, cfg);
    for (std::size_t k = 0; k < grad.size(); ++k) {
        policy.params()[k] += cfg.learning_rate * grad[k];
    }

    IterationMetrics m;
    m.iteration = iteration;
    double sum = 0.0;
    for (double r : group.rewards) sum += r;
    m.mean_reward = sum / static_cast<double>(group.rewards.size());
    m.objective = grpo_objective(group, policy, policy_old, cfg);
    m.kl = visited_state_kl(group, policy_old, policy);
    return m;
}

TrainingResult train(const GridTask& task, const GrpoConfig& cfg) {
    TablePolicy policy(task.n_states(), GridTask::kNumActions);
    Rng rng(cfg.seed);
    TrainingResult result{.history = {}, .policy = policy};
    for (int it = 0; it < cfg.iterations; ++it) {
        result.history.push_back(grpo_step(policy, task, rng, cfg, it));
    }
    result.policy = policy;
    return result;
}

std::string metrics_csv(const std::vector<IterationMetrics>& history) {
    std::string out = "iteration,mean_reward,objective,kl\n";
    char buf[128];
    for (const auto& m : history) {
        std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f\n", m.iteration, m.mean_reward,
                      m.objective, m.kl);
        out += buf;
    }
    return out;
}

} // namespace guiagent

#include <doctest.h>

#include <cmath>
#include <vector>

#include "guiagent/grpo.hpp"

using namespace guiagent;

namespace {

// From-scratch objective evaluation with naive loops: independent of the
// library's softmax/logic, used as the oracle for grpo_objective.
double oracle_objective(const GroupSample& group, const std::vector<double>& theta_new,
                        const std::vector<double>& theta_old, int n_actions, double clip,
                        double beta, bool mean_mode) {
    auto probs = [&](const std::vector<double>& theta, int s) {
        std::vector<double> p(n_actions);
        double sum = 0;
        for (int a = 0; a < n_actions; ++a) {
            p[a] = std::exp(theta[s * n_actions + a]);
            sum += p[a];
        }
        for (auto& v : p) v /= sum;
        return p;
    };

    double total = 0;
    for (std::size_t i = 0; i < group.completions.size(); ++i) {
        const Completion& c = group.completions[i];
        double lp_new = 0;
        for (std::size_t t = 0; t < c.states.size(); ++t) {
            lp_new += std::log(probs(theta_new, c.states[t])[c.actions[t]]);
        }
        double rho = std::exp(lp_new - c.logp_old);
        double lo = 1 - clip, hi = 1 + clip;
        double clipped = rho < lo ? lo : rho > hi ? hi : rho;
        double a = rho * group.advantages[i], b = clipped * group.advantages[i];
        total += a < b ? a : b;
    }
    if (mean_mode) total /= static_cast<double>(group.completions.size());

    double kl = 0;
    long count = 0;
    for (const auto& c : group.completions) {
        for (int s : c.states) {
            auto po = probs(theta_old, s), pn = probs(theta_new, s);
            for (int a = 0; a < n_actions; ++a) kl += po[a] * std::log(po[a] / pn[a]);
            ++count;
        }
    }
    if (count) kl /= static_cast<double>(count);
    return total - beta * kl;
}

GroupSample toy_group(const TablePolicy& sampler, const GrpoConfig& cfg) {
    // fixed 2-state, 3-action episodes: deterministic group for math checks
    GroupSample g;
    g.query = "toy";
    g.completions = {
        {{0, 1}, {0, 2}, 0.0, 1.0},
        {{0, 1}, {1, 0}, 0.0, 0.0},
        {{1, 0}, {2, 1}, 0.0, 0.0},
        {{0, 0}, {1, 1}, 0.0, 1.0},
    };
    for (auto& c : g.completions) {
        c.logp_old = 0.0;
        for (std::size_t t = 0; t < c.states.size(); ++t) {
            c.logp_old += sampler.log_prob(c.states[t], c.actions[t]);
        }
        g.rewards.push_back(c.reward);
    }
    g.advantages = group_advantages(g.rewards, cfg.eps_stab);
    return g;
}

} // namespace

TEST_CASE("advantages are reward Z-scores with population std") {
    auto adv = group_advantages({1, 0, 0, 1}, 1e-12);
    REQUIRE(adv.size() == 4);
    // mean 0.5, population std 0.5
    CHECK(adv[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(adv[1] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(adv[2] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(adv[3] == doctest::Approx(1.0).epsilon(1e-9));

    // mean 1, population std 1
    auto two = group_advantages({2, 0}, 1e-12);
    CHECK(two[0] == doctest::Approx(1.0));
    CHECK(two[1] == doctest::Approx(-1.0));

    // all-equal rewards: zero numerator, zero advantages (binary rewards have
    // exactly representable means; generic floats may leave ~1e-16 residue)
    auto equal = group_advantages({1.0, 1.0, 1.0, 1.0}, 1e-8);
    for (double a : equal) CHECK(a == 0.0);
    auto near_equal = group_advantages({0.7, 0.7, 0.7}, 1e-8);
    for (double a : near_equal) CHECK(std::abs(a) < 1e-6);

    CHECK_THROWS_AS(group_advantages({1.0}, 1e-8), GrpoError);
}

TEST_CASE("advantage normalization holds on random non-degenerate groups") {
    Rng rng(42);
    for (int round = 0; round < 1000; ++round) {
        std::size_t n = 2 + rng.next_below(14);
        std::vector<double> rewards;
        for (std::size_t i = 0; i < n; ++i) rewards.push_back(rng.next_double() * 10.0);
        // force non-degeneracy
        rewards[0] += 1.0;

        auto adv = group_advantages(rewards, 1e-12);
        double mean = 0;
        for (double a : adv) mean += a;
        mean /= static_cast<double>(n);
        double var = 0;
        for (double a : adv) var += (a - mean) * (a - mean);
        var /= static_cast<double>(n);
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
    }
}

TEST_CASE("probability ratios") {
    CHECK(prob_ratio(-1.5, -1.5) == doctest::Approx(1.0));
    CHECK(prob_ratio(-1.0 + std::log(2.0), -1.0) == doctest::Approx(2.0));
    CHECK_THROWS_AS(prob_ratio(std::nan(""), 0.0), GrpoError);

    // per-completion ratio equals the product of per-step ratios
    TablePolicy pol_new(2, 3), pol_old(2, 3);
    pol_new.params() = {0.3, -0.2, 0.5, 0.1, 0.0, -0.4};
    pol_old.params() = {0.0, 0.1, 0.2, -0.1, 0.3, 0.0};
    std::vector<int> states = {0, 1, 0}, actions = {2, 0, 1};
    double lp_new = 0, lp_old = 0, product = 1;
    for (int t = 0; t < 3; ++t) {
        lp_new += pol_new.log_prob(states[t], actions[t]);
        lp_old += pol_old.log_prob(states[t], actions[t]);
        product *= std::exp(pol_new.log_prob(states[t], actions[t]) -
                            pol_old.log_prob(states[t], actions[t]));
    }
    CHECK(prob_ratio(lp_new, lp_old) == doctest::Approx(product).epsilon(1e-12));
}

TEST_CASE("clipped surrogate term") {
    CHECK(clipped_term(1.0, 0.37, 0.2) == doctest::Approx(0.37));
    CHECK(clipped_term(1.0, -2.5, 0.2) == doctest::Approx(-2.5));
    CHECK(clipped_term(1.5, 1.0, 0.2) == doctest::Approx(1.2));  // min(1.5, 1.2)
    CHECK(clipped_term(0.5, -1.0, 0.2) == doctest::Approx(-0.8)); // min(-0.5, -0.8)

    // the incentive side is capped at |A|(1+eps); the penalty side of the
    // pessimistic min is unbounded below by construction
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
        double rho = rng.next_double() * 3.0;
        double adv = (rng.next_double() - 0.5) * 4.0;
        double eps = 0.05 + rng.next_double() * 0.5;
        CHECK(clipped_term(rho, adv, eps) <= std::abs(adv) * (1 + eps) + 1e-12);
        if (rho >= 1 - eps && rho <= 1 + eps) {
            CHECK(std::abs(clipped_term(rho, adv, eps)) <= std::abs(adv) * (1 + eps) + 1e-12);
        }
    }
}

TEST_CASE("objective: identities at the sampling policy") {
    GrpoConfig cfg;
    cfg.kl_coeff = 0.0;
    cfg.eps_stab = 1e-8;
    TablePolicy policy(2, 3);
    policy.params() = {0.2, -0.1, 0.4, 0.0, 0.3, -0.3};

    GroupSample g = toy_group(policy, cfg);

    // at theta == theta_old every rho is 1: J = sum of advantages ~ 0
    double j = grpo_objective(g, policy, policy, cfg);
    double adv_sum = 0;
    for (double a : g.advantages) adv_sum += a;
    CHECK(j == doctest::Approx(adv_sum).epsilon(1e-10));
    CHECK(std::abs(j) < 1e-9);

    // with beta > 0 and identical policies the KL term is exactly zero
    cfg.kl_coeff = 10.0;
    CHECK(grpo_objective(g, policy, policy, cfg) == doctest::Approx(j));
    CHECK(visited_state_kl(g, policy, policy) == 0.0);
}

TEST_CASE("objective matches the from-scratch oracle on perturbed policies") {
    GrpoConfig cfg;
    cfg.kl_coeff = 0.07;
    cfg.clip_width = 0.2;
    TablePolicy policy_old(2, 3);
    policy_old.params() = {0.2, -0.1, 0.4, 0.0, 0.3, -0.3};
    GroupSample g = toy_group(policy_old, cfg);

    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        TablePolicy policy_new = policy_old;
        for (auto& p : policy_new.params()) p += (rng.next_double() - 0.5) * 0.8;

        double expected = oracle_objective(g, policy_new.params(), policy_old.params(), 3,
                                           cfg.clip_width, cfg.kl_coeff, cfg.mean_mode);
        CHECK(grpo_objective(g, policy_new, policy_old, cfg) ==
              doctest::Approx(expected).epsilon(1e-10));
    }

    cfg.mean_mode = true;
    TablePolicy policy_new = policy_old;
    policy_new.params()[2] += 0.3;
    CHECK(grpo_objective(g, policy_new, policy_old, cfg) ==
          doctest::Approx(oracle_objective(g, policy_new.params(), policy_old.params(), 3,
                                           cfg.clip_width, cfg.kl_coeff, true)));
}

TEST_CASE("analytic gradient matches central finite differences") {
    GrpoConfig cfg;
    cfg.kl_coeff = 0.05;
    TablePolicy policy_old(2, 5); // 10-parameter toy policy
    policy_old.params() = {0.1, -0.2, 0.3, 0.0, -0.1, 0.2, 0.1, -0.3, 0.4, 0.0};

    GroupSample g;
    g.query = "fd";
    Rng rng(11);
    for (int i = 0; i < 6; ++i) {
        Completion c;
        for (int t = 0; t < 4; ++t) {
            c.states.push_back(static_cast<int>(rng.next_below(2)));
            c.actions.push_back(static_cast<int>(rng.next_below(5)));
        }
        for (std::size_t t = 0; t < c.states.size(); ++t) {
            c.logp_old += policy_old.log_prob(c.states[t], c.actions[t]);
        }
        c.reward = static_cast<double>(rng.next_below(2));
        g.completions.push_back(std::move(c));
        g.rewards.push_back(g.completions.back().reward);
    }
    g.rewards[0] = 1.0;
    g.rewards[1] = 0.0; // non-degenerate
    g.completions[0].reward = 1.0;
    g.completions[1].reward = 0.0;
    g.advantages = group_advantages(g.rewards, 1e-8);

    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        TablePolicy policy_new = policy_old;
        for (auto& p : policy_new.params()) p += (rng.next_double() - 0.5) * 0.6;

        // skip parameter points too close to a clip kink
        bool near_kink = false;
        for (const auto& c : g.completions) {
            double lp = 0;
            for (std::size_t t = 0; t < c.states.size(); ++t) {
                lp += policy_new.log_prob(c.states[t], c.actions[t]);
            }
            double rho = std::exp(lp - c.logp_old);
            if (std::abs(rho - (1 - cfg.clip_width)) < 1e-3 ||
                std::abs(rho - (1 + cfg.clip_width)) < 1e-3) {
                near_kink = true;
            }
        }
        if (near_kink) continue;
        ++checked;

        std::vector<double> grad = grpo_gradient(g, policy_new, policy_old, cfg);
        const double h = 1e-6;
        for (std::size_t k = 0; k < grad.size(); ++k) {
            TablePolicy plus = policy_new, minus = policy_new;
            plus.params()[k] += h;
            minus.params()[k] -= h;
            double fd = (grpo_objective(g, plus, policy_old, cfg) -
                         grpo_objective(g, minus, policy_old, cfg)) /
                        (2 * h);
            double denom = std::max({std::abs(fd), std::abs(grad[k]), 1e-8});
            CHECK(std::abs(grad[k] - fd) / denom < 1e-4);
        }
    }
    CHECK(checked >= 20);
}

TEST_CASE("grpo_step: a zero-advantage group leaves parameters unchanged") {
    GrpoConfig cfg;
    cfg.kl_coeff = 0.0;
    cfg.group_size = 4;
    cfg.seed = 3;

    // goal unreachable within the cap: every reward 0, all advantages 0
    GridTask task;
    task.step_cap = 1;
    task.start = 0;
    task.goal = 24;

    TablePolicy policy(task.n_states(), GridTask::kNumActions);
    std::vector<double> before = policy.params();
    Rng rng(cfg.seed);
    grpo_step(policy, task, rng, cfg, 0);
    CHECK(policy.params() == before);
}

TEST_CASE("grpo_step: the KL penalty never widens the update") {
    GridTask task;
    GrpoConfig cfg;
    cfg.seed = 12;

    auto divergence_after_one_step = [&](double beta) {
        GrpoConfig c = cfg;
        c.kl_coeff = beta;
        TablePolicy policy(task.n_states(), GridTask::kNumActions);
        TablePolicy old = policy;
        Rng rng(c.seed);
        GroupSample g = sample_group(task, old, rng, c);
        std::vector<double> grad = grpo_gradient(g, policy, old, c);
        for (std::size_t k = 0; k < grad.size(); ++k) {
            policy.params()[k] += c.learning_rate * grad[k];
        }
        return visited_state_kl(g, old, policy);
    };

    CHECK(divergence_after_one_step(50.0) <= divergence_after_one_step(0.0) + 1e-12);
}

TEST_CASE("grid task geometry") {
    GridTask task;
    CHECK(task.n_states() == 25);
    CHECK(task.next_state(18, 1) == 23); // down
    CHECK(task.next_state(23, 3) == 24); // right
    CHECK(task.next_state(0, 0) == 0);   // clamped at the border
    CHECK(task.next_state(0, 2) == 0);
    CHECK(task.next_state(24, 4) == 24); // finish does not move

    TablePolicy uniform(task.n_states(), GridTask::kNumActions);
    Rng rng(1);
    Completion c = rollout(task, uniform, rng);
    CHECK(c.states.size() == c.actions.size());
    CHECK(c.states.size() <= static_cast<std::size_t>(task.step_cap));
    CHECK(c.states.front() == task.start);
}

TEST_CASE("seeded training climbs to a high success rate and stays there") {
    GridTask task;
    GrpoConfig cfg; // defaults carry the shipped training seed
    TrainingResult r = train(task, cfg);
    REQUIRE(r.history.size() == 300);

    auto window_mean = [&](std::size_t lo) {
        double s = 0;
        for (std::size_t i = lo; i < lo + 10; ++i) s += r.history[i].mean_reward;
        return s / 10.0;
    };
    CHECK(window_mean(0) < 0.4);
    CHECK(window_mean(290) >= 0.9);

    // the 10-iteration moving average never decreases on this seeded run
    for (std::size_t i = 1; i + 10 <= r.history.size(); ++i) {
        CHECK(window_mean(i) >= window_mean(i - 1) - 1e-9);
    }

    // the learned policy finishes on the goal
    Rng rng(123);
    int wins = 0;
    for (int e = 0; e < 100; ++e) {
        wins += rollout(task, r.policy, rng).reward > 0.5 ? 1 : 0;
    }
    CHECK(wins >= 95);

    std::string csv = metrics_csv(r.history);
    CHECK(csv.rfind("iteration,mean_reward,objective,kl\n", 0) == 0);
}

TEST_CASE("config files parse with defaults and validation") {
    GrpoConfig cfg = GrpoConfig::from_json(R"({"group_size": 16, "seed": 99})");
    CHECK(cfg.group_size == 16);
    CHECK(cfg.seed == 99);
    CHECK(cfg.clip_width == doctest::Approx(0.2));
    CHECK_THROWS_AS(GrpoConfig::from_json(R"({"group_size": 1})"), GrpoError);

    GrpoConfig back = GrpoConfig::from_json(cfg.to_json());
    CHECK(back.group_size == 16);
    CHECK(back.seed == 99);
}

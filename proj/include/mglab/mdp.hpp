#pragma once

#include <vector>

#include "mglab/errors.hpp"

namespace mglab {

// Finite Markov decision process: states 0..n_states-1, actions
// 0..n_actions-1, transition kernel p(s'|s,a), reward table r(s,a) and a
// discount factor strictly below 1.
class TabularMDP {
public:
    TabularMDP(int n_states, int n_actions, double discount);

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    double discount() const { return discount_; }

    double transition(int s, int a, int s_next) const {
        return transition_[index(s, a) * n_states_ + s_next];
    }
    void set_transition(int s, int a, int s_next, double p) {
        transition_[index(s, a) * n_states_ + s_next] = p;
    }

    double reward(int s, int a) const { return reward_[index(s, a)]; }
    void set_reward(int s, int a, double r) { reward_[index(s, a)] = r; }

    // Checks kernel row sums (1 within 1e-12), nonnegativity and finiteness.
    // Throws InvalidInputError on the first violation.
    void validate() const;

private:
    int index(int s, int a) const { return s * n_actions_ + a; }

    int n_states_;
    int n_actions_;
    double discount_;
    std::vector<double> transition_;  // [s][a][s']
    std::vector<double> reward_;      // [s][a]
};

using ValueFunction = std::vector<double>;

// Either a deterministic state->action map or per-state action distributions.
class Policy {
public:
    static Policy deterministic(std::vector<int> actions);
    static Policy stochastic(std::vector<std::vector<double>> probs);

    bool is_deterministic() const { return deterministic_; }
    int n_states() const;
    int action(int s) const;                // deterministic policies only
    double prob(int s, int a) const;        // works for both kinds

    // Dimension check against an MDP; throws InvalidInputError on mismatch.
    void validate_for(const TabularMDP& mdp) const;

    bool operator==(const Policy& other) const = default;

private:
    bool deterministic_ = true;
    std::vector<int> actions_;
    std::vector<std::vector<double>> probs_;
};

struct SolveResult {
    ValueFunction values;
    Policy policy;
};

// One optimality backup: (Tv)(s) = max_a { r(s,a) + beta * sum p(s'|s,a) v(s') }.
ValueFunction bellman_backup(const TabularMDP& mdp, const ValueFunction& values);

// One policy backup: (T_pi v)(s) = sum_a pi(a|s) { r(s,a) + beta * sum p v(s') }.
ValueFunction policy_backup(const TabularMDP& mdp, const Policy& policy,
                            const ValueFunction& values);

// Action values induced by a state-value vector:
// Q(s,a) = r(s,a) + beta * sum_s' p(s'|s,a) v(s').
std::vector<std::vector<double>> action_values(const TabularMDP& mdp,
                                               const ValueFunction& values);

// Greedy deterministic policy w.r.t. a value vector, lowest action index
// winning ties.
Policy greedy_from_values(const TabularMDP& mdp, const ValueFunction& values);

// Per-state set of actions whose action value is within eps of the maximum.
std::vector<std::vector<int>> greedy_action_sets(const TabularMDP& mdp,
                                                 const ValueFunction& values,
                                                 double eps);

// Iterative policy evaluation to sup-norm residual <= tol.
ValueFunction evaluate_policy(const TabularMDP& mdp, const Policy& policy,
                              double tol = 1e-10);

// Exact policy value via a dense linear solve of (I - beta P_pi) v = r_pi.
ValueFunction solve_policy_values(const TabularMDP& mdp, const Policy& policy);

// Value iteration to Bellman residual <= tol; the returned policy is greedy
// with respect to the returned values (lowest-index tie-break).
SolveResult value_iteration(const TabularMDP& mdp, double tol = 1e-10);

// Policy iteration with exact evaluation; returns a policy greedy with
// respect to its own values.
Policy policy_iteration(const TabularMDP& mdp);

}  // namespace mglab

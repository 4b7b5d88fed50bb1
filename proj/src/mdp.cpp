#include "mglab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mglab {

namespace {

double sup_distance(const ValueFunction& u, const ValueFunction& w) {
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        d = std::max(d, std::abs(u[i] - w[i]));
    return d;
}

}  // namespace

TabularMDP::TabularMDP(int n_states, int n_actions, double discount)
    : n_states_(n_states),
      n_actions_(n_actions),
      discount_(discount),
      transition_(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0),
      reward_(static_cast<std::size_t>(n_states) * n_actions, 0.0) {
    if (n_states < 1 || n_actions < 1)
        throw InvalidInputError("TabularMDP: need at least one state and action");
    if (!(discount >= 0.0 && discount < 1.0))
        throw InvalidInputError("TabularMDP: discount must lie in [0, 1)");
}

void TabularMDP::validate() const {
    for (int s = 0; s < n_states_; ++s) {
        for (int a = 0; a < n_actions_; ++a) {
            double row = 0.0;
            for (int t = 0; t < n_states_; ++t) {
                const double p = transition(s, a, t);
                if (!(p >= 0.0))
                    throw InvalidInputError("TabularMDP: negative p(s'|s=" +
                                            std::to_string(s) + ",a=" +
                                            std::to_string(a) + ")");
                row += p;
            }
            if (std::abs(row - 1.0) > 1e-12)
                throw InvalidInputError("TabularMDP: kernel row (s=" +
                                        std::to_string(s) + ",a=" +
                                        std::to_string(a) + ") sums to " +
                                        std::to_string(row));
            if (!std::isfinite(reward(s, a)))
                throw InvalidInputError("TabularMDP: non-finite reward at (s=" +
                                        std::to_string(s) + ",a=" +
                                        std::to_string(a) + ")");
        }
    }
}

Policy Policy::deterministic(std::vector<int> actions) {
    Policy p;
    p.deterministic_ = true;
    p.actions_ = std::move(actions);
    return p;
}

Policy Policy::stochastic(std::vector<std::vector<double>> probs) {
    for (std::size_t s = 0; s < probs.size(); ++s) {
        double row = 0.0;
        for (double q : probs[s]) {
            if (!(q >= 0.0))
                throw InvalidInputError("Policy: negative action probability");
            row += q;
        }
        if (std::abs(row - 1.0) > 1e-12)
            throw InvalidInputError("Policy: row " + std::to_string(s) +
                                    " sums to " + std::to_string(row));
    }
    Policy p;
    p.deterministic_ = false;
    p.probs_ = std::move(probs);
    return p;
}

int Policy::n_states() const {
    return deterministic_ ? static_cast<int>(actions_.size())
                          : static_cast<int>(probs_.size());
}

int Policy::action(int s) const {
    if (!deterministic_)
        throw InvalidInputError("Policy::action on a stochastic policy");
    return actions_[s];
}

double Policy::prob(int s, int a) const {
    if (deterministic_) return actions_[s] == a ? 1.0 : 0.0;
    return probs_[s][a];
}

void Policy::validate_for(const TabularMDP& mdp) const {
    if (n_states() != mdp.n_states())
        throw InvalidInputError("Policy: state count " +
                                std::to_string(n_states()) +
                                " does not match MDP with " +
                                std::to_string(mdp.n_states()) + " states");
    for (int s = 0; s < mdp.n_states(); ++s) {
        if (deterministic_) {
            if (actions_[s] < 0 || actions_[s] >= mdp.n_actions())
                throw InvalidInputError("Policy: action index out of range at state " +
                                        std::to_string(s));
        } else if (static_cast<int>(probs_[s].size()) != mdp.n_actions()) {
            throw InvalidInputError("Policy: action distribution size mismatch at state " +
                                    std::to_string(s));
        }
    }
}

ValueFunction bellman_backup(const TabularMDP& mdp, const ValueFunction& values) {
    ValueFunction out(mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < mdp.n_actions(); ++a) {
            double q = mdp.reward(s, a);
            for (int t = 0; t < mdp.n_states(); ++t)
                q += mdp.discount() * mdp.transition(s, a, t) * values[t];
            best = std::max(best, q);
        }
        out[s] = best;
    }
    return out;
}

ValueFunction policy_backup(const TabularMDP& mdp, const Policy& policy,
                            const ValueFunction& values) {
    ValueFunction out(mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s) {
        double v = 0.0;
        for (int a = 0; a < mdp.n_actions(); ++a) {
            const double w = policy.prob(s, a);
            if (w == 0.0) continue;
            double q = mdp.reward(s, a);
            for (int t = 0; t < mdp.n_states(); ++t)
                q += mdp.discount() * mdp.transition(s, a, t) * values[t];
            v += w * q;
        }
        out[s] = v;
    }
    return out;
}

std::vector<std::vector<double>> action_values(const TabularMDP& mdp,
                                               const ValueFunction& values) {
    std::vector<std::vector<double>> q(mdp.n_states(),
                                       std::vector<double>(mdp.n_actions()));
    for (int s = 0; s < mdp.n_states(); ++s) {
        for (int a = 0; a < mdp.n_actions(); ++a) {
            double v = mdp.reward(s, a);
            for (int t = 0; t < mdp.n_states(); ++t)
                v += mdp.discount() * mdp.transition(s, a, t) * values[t];
            q[s][a] = v;
        }
    }
    return q;
}

Policy greedy_from_values(const TabularMDP& mdp, const ValueFunction& values) {
    const auto q = action_values(mdp, values);
    std::vector<int> actions(mdp.n_states(), 0);
    for (int s = 0; s < mdp.n_states(); ++s) {
        int best = 0;
        for (int a = 1; a < mdp.n_actions(); ++a)
            if (q[s][a] > q[s][best]) best = a;  // strict: lowest index wins ties
        actions[s] = best;
    }
    return Policy::deterministic(std::move(actions));
}

std::vector<std::vector<int>> greedy_action_sets(const TabularMDP& mdp,
                                                 const ValueFunction& values,
                                                 double eps) {
    const auto q = action_values(mdp, values);
    std::vector<std::vector<int>> sets(mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s) {
        const double top = *std::max_element(q[s].begin(), q[s].end());
        for (int a = 0; a < mdp.n_actions(); ++a)
            if (q[s][a] >= top - eps) sets[s].push_back(a);
    }
    return sets;
}

ValueFunction evaluate_policy(const TabularMDP& mdp, const Policy& policy,
                              double tol) {
    if (!(tol > 0.0)) throw InvalidInputError("evaluate_policy: tol must be > 0");
    policy.validate_for(mdp);
    ValueFunction v(mdp.n_states(), 0.0);
    // Returning the backed-up vector keeps the residual of the result within
    // beta * tol <= tol once the iterate moves by no more than tol.
    for (long it = 0; it < 1000000; ++it) {
        ValueFunction next = policy_backup(mdp, policy, v);
        const double delta = sup_distance(next, v);
        v = std::move(next);
        if (delta <= tol) return v;
    }
    throw Error("evaluate_policy: iteration cap reached");
}

ValueFunction solve_policy_values(const TabularMDP& mdp, const Policy& policy) {
    policy.validate_for(mdp);
    const int n = mdp.n_states();
    // Assemble A = I - beta * P_pi and b = r_pi, then Gaussian elimination
    // with partial pivoting.
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    std::vector<double> b(n, 0.0);
    for (int s = 0; s < n; ++s) {
        a[s][s] = 1.0;
        for (int act = 0; act < mdp.n_actions(); ++act) {
            const double w = policy.prob(s, act);
            if (w == 0.0) continue;
            b[s] += w * mdp.reward(s, act);
            for (int t = 0; t < n; ++t)
                a[s][t] -= w * mdp.discount() * mdp.transition(s, act, t);
        }
    }
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int row = col + 1; row < n; ++row)
            if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        if (a[col][col] == 0.0)
            throw Error("solve_policy_values: singular system");
        for (int row = col + 1; row < n; ++row) {
            const double f = a[row][col] / a[col][col];
            if (f == 0.0) continue;
            for (int t = col; t < n; ++t) a[row][t] -= f * a[col][t];
            b[row] -= f * b[col];
        }
    }
    ValueFunction v(n, 0.0);
    for (int row = n - 1; row >= 0; --row) {
        double acc = b[row];
        for (int t = row + 1; t < n; ++t) acc -= a[row][t] * v[t];
        v[row] = acc / a[row][row];
    }
    return v;
}

SolveResult value_iteration(const TabularMDP& mdp, double tol) {
    if (!(tol > 0.0)) throw InvalidInputError("value_iteration: tol must be > 0");
    ValueFunction v(mdp.n_states(), 0.0);
    for (long it = 0; it < 1000000; ++it) {
        ValueFunction next = bellman_backup(mdp, v);
        const double delta = sup_distance(next, v);
        v = std::move(next);
        if (delta <= tol)
            return {v, greedy_from_values(mdp, v)};
    }
    throw Error("value_iteration: iteration cap reached");
}

Policy policy_iteration(const TabularMDP& mdp) {
    Policy policy = Policy::deterministic(std::vector<int>(mdp.n_states(), 0));
    // Strict improvement bounds the number of steps by the policy count; the
    // cap below is far above anything the test instances can reach.
    const long cap = 100000;
    for (long it = 0; it < cap; ++it) {
        const ValueFunction v = solve_policy_values(mdp, policy);
        Policy improved = greedy_from_values(mdp, v);
        if (improved == policy) return policy;
        policy = std::move(improved);
    }
    throw Error("policy_iteration: improvement cap reached");
}

}  // namespace mglab

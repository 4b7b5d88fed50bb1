#include "mglab/qlearning.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace mglab {

QTable::QTable(int n_states, int n_actions, double initial_value)
    : n_states_(n_states),
      n_actions_(n_actions),
      values_(static_cast<std::size_t>(n_states) * n_actions, initial_value),
      visits_(static_cast<std::size_t>(n_states) * n_actions, 0) {
    if (n_states < 1 || n_actions < 1)
        throw InvalidInputError("QTable: need at least one state and action");
    if (!std::isfinite(initial_value))
        throw InvalidInputError("QTable: initial value must be finite");
}

double QTable::max_value(int s) const {
    double best = value(s, 0);
    for (int a = 1; a < n_actions_; ++a) best = std::max(best, value(s, a));
    return best;
}

int QTable::greedy_action(int s) const {
    int best = 0;
    for (int a = 1; a < n_actions_; ++a)
        if (value(s, a) > value(s, best)) best = a;
    return best;
}

void q_update(QTable& q, int s, int a, double reward, int s_next,
              double alpha, double beta) {
    if (s < 0 || s >= q.n_states_ || s_next < 0 || s_next >= q.n_states_)
        throw InvalidInputError("q_update: state index out of range");
    if (a < 0 || a >= q.n_actions_)
        throw InvalidInputError("q_update: action index out of range");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw InvalidInputError("q_update: alpha must lie in [0, 1]");
    if (!(beta >= 0.0 && beta < 1.0))
        throw InvalidInputError("q_update: beta must lie in [0, 1)");
    const int idx = q.index(s, a);
    q.values_[idx] = (1.0 - alpha) * q.values_[idx] +
                     alpha * (reward + beta * q.max_value(s_next));
    ++q.visits_[idx];
}

LearningRateSchedule LearningRateSchedule::constant(double alpha0) {
    if (!(alpha0 >= 0.0 && alpha0 < 1.0))
        throw InvalidInputError("LearningRateSchedule: alpha0 must lie in [0, 1)");
    LearningRateSchedule s;
    s.constant_ = true;
    s.alpha0_ = alpha0;
    return s;
}

LearningRateSchedule LearningRateSchedule::polynomial(double omega) {
    if (!(omega > 0.5 && omega <= 1.0))
        throw InvalidInputError("LearningRateSchedule: omega must lie in (0.5, 1]");
    LearningRateSchedule s;
    s.constant_ = false;
    s.omega_ = omega;
    return s;
}

double LearningRateSchedule::alpha_for_visit(long visit_number) const {
    if (constant_) return alpha0_;
    return std::pow(1.0 + static_cast<double>(visit_number), -omega_);
}

EpsilonGreedy::EpsilonGreedy(double initial, double decay, double floor)
    : initial(initial), decay(decay), floor(floor) {
    if (!(initial >= 0.0 && initial <= 1.0))
        throw InvalidInputError("EpsilonGreedy: initial epsilon must lie in [0, 1]");
    if (!(decay > 0.0 && decay <= 1.0))
        throw InvalidInputError("EpsilonGreedy: decay must lie in (0, 1]");
    if (!(floor >= 0.0 && floor <= initial))
        throw InvalidInputError("EpsilonGreedy: floor must lie in [0, initial]");
}

double EpsilonGreedy::epsilon(long episode) const {
    return std::max(floor, initial * std::pow(decay, static_cast<double>(episode)));
}

QLearningResult run_q_learning(EpisodicEnv& env, const QLearningConfig& config,
                               const EpisodeObserver& observer) {
    if (config.episodes < 1)
        throw InvalidInputError("run_q_learning: episodes must be >= 1");
    if (!(config.discount >= 0.0 && config.discount < 1.0))
        throw InvalidInputError("run_q_learning: discount must lie in [0, 1)");

    env.seed(Rng(config.seed).substream("env").next_u64());
    Rng explore = Rng(config.seed).substream("explore");

    QTable q(env.n_states(), env.n_actions(), config.initial_q);
    std::vector<double> returns;
    returns.reserve(static_cast<std::size_t>(config.episodes));

    for (long episode = 0; episode < config.episodes; ++episode) {
        const double eps = config.exploration.epsilon(episode);
        int state = env.reset();
        double episode_return = 0.0;
        bool done = false;
        while (!done) {
            const int action = explore.next_bernoulli(eps)
                                   ? explore.next_int(q.n_actions())
                                   : q.greedy_action(state);
            StepOutcome outcome{};
            try {
                outcome = env.step(action);
            } catch (const std::exception& e) {
                throw RunError("q-learning: environment fault at episode " +
                               std::to_string(episode) + ": " + e.what());
            }
            const double alpha =
                config.schedule.alpha_for_visit(q.visits(state, action) + 1);
            q_update(q, state, action, outcome.reward, outcome.next_state, alpha,
                     config.discount);
            episode_return += outcome.reward;
            state = outcome.next_state;
            done = outcome.done;
        }
        returns.push_back(episode_return);
        if (observer) observer(episode, q);
    }

    Policy greedy = greedy_policy(q);
    return {std::move(q), std::move(returns), std::move(greedy)};
}

Policy greedy_policy(const QTable& q) {
    std::vector<int> actions(q.n_states());
    for (int s = 0; s < q.n_states(); ++s) actions[s] = q.greedy_action(s);
    return Policy::deterministic(std::move(actions));
}

MatrixGame::MatrixGame(std::vector<int> action_counts,
                       std::vector<std::vector<double>> payoffs)
    : action_counts_(std::move(action_counts)), payoffs_(std::move(payoffs)) {
    if (action_counts_.empty())
        throw InvalidInputError("MatrixGame: need at least one agent");
    for (int c : action_counts_) {
        if (c < 1) throw InvalidInputError("MatrixGame: action counts must be >= 1");
        n_joint_ *= c;
    }
    if (static_cast<int>(payoffs_.size()) != n_agents())
        throw InvalidInputError("MatrixGame: one payoff tensor per agent required");
    for (const auto& tensor : payoffs_) {
        if (static_cast<long>(tensor.size()) != n_joint_)
            throw InvalidInputError("MatrixGame: payoff tensor shape mismatch");
        for (double v : tensor)
            if (!std::isfinite(v))
                throw InvalidInputError("MatrixGame: payoffs must be finite");
    }
}

MatrixGame MatrixGame::two_player(const std::vector<std::vector<double>>& payoff0,
                                  const std::vector<std::vector<double>>& payoff1) {
    if (payoff0.empty() || payoff0.size() != payoff1.size())
        throw InvalidInputError("MatrixGame: two_player payoff shape mismatch");
    const int rows = static_cast<int>(payoff0.size());
    const int cols = static_cast<int>(payoff0[0].size());
    std::vector<double> flat0, flat1;
    flat0.reserve(static_cast<std::size_t>(rows) * cols);
    flat1.reserve(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        if (static_cast<int>(payoff0[r].size()) != cols ||
            static_cast<int>(payoff1[r].size()) != cols)
            throw InvalidInputError("MatrixGame: ragged two_player payoff matrix");
        for (int c = 0; c < cols; ++c) {
            flat0.push_back(payoff0[r][c]);
            flat1.push_back(payoff1[r][c]);
        }
    }
    return MatrixGame({rows, cols}, {std::move(flat0), std::move(flat1)});
}

long MatrixGame::joint_index(const std::vector<int>& joint) const {
    if (static_cast<int>(joint.size()) != n_agents())
        throw InvalidInputError("MatrixGame: joint action size mismatch");
    long idx = 0;
    for (int i = 0; i < n_agents(); ++i) {
        if (joint[i] < 0 || joint[i] >= action_counts_[i])
            throw InvalidInputError("MatrixGame: joint action out of range for agent " +
                                    std::to_string(i));
        idx = idx * action_counts_[i] + joint[i];
    }
    return idx;
}

std::vector<int> MatrixGame::joint_from_index(long index) const {
    std::vector<int> joint(n_agents());
    for (int i = n_agents() - 1; i >= 0; --i) {
        joint[i] = static_cast<int>(index % action_counts_[i]);
        index /= action_counts_[i];
    }
    return joint;
}

double MatrixGame::payoff(int agent, const std::vector<int>& joint) const {
    return payoffs_[agent][joint_index(joint)];
}

EquilibriumCheck check_adversarial_equilibrium(const MatrixGame& game,
                                               const std::vector<int>& joint) {
    EquilibriumCheck result;
    result.per_agent.assign(static_cast<std::size_t>(game.n_agents()), true);
    for (int i = 0; i < game.n_agents(); ++i) {
        const double base = game.payoff(i, joint);
        for (long idx = 0; idx < game.n_joint_actions(); ++idx) {
            const auto variant = game.joint_from_index(idx);
            if (variant[i] != joint[i]) continue;  // agent i's action stays fixed
            if (base > game.payoff_by_index(i, idx)) {
                result.per_agent[i] = false;
                break;
            }
        }
        if (!result.per_agent[i]) result.overall = false;
    }
    return result;
}

bool check_coordination_equilibrium(const MatrixGame& game,
                                    const std::vector<int>& joint) {
    const long at = game.joint_index(joint);
    for (int i = 0; i < game.n_agents(); ++i) {
        double best = game.payoff_by_index(i, 0);
        for (long idx = 1; idx < game.n_joint_actions(); ++idx)
            best = std::max(best, game.payoff_by_index(i, idx));
        if (game.payoff_by_index(i, at) != best) return false;
    }
    return true;
}

}  // namespace mglab

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mglab/environments.hpp"
#include "mglab/errors.hpp"
#include "mglab/mdp.hpp"

namespace mglab {

// ---------------------------------------------------------------------------
// Action-value table

class QTable {
public:
    QTable(int n_states, int n_actions, double initial_value = 0.0);

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }

    double value(int s, int a) const { return values_[index(s, a)]; }
    long visits(int s, int a) const { return visits_[index(s, a)]; }

    double max_value(int s) const;
    int greedy_action(int s) const;  // lowest index wins ties

    friend void q_update(QTable& q, int s, int a, double reward, int s_next,
                         double alpha, double beta);

private:
    int index(int s, int a) const { return s * n_actions_ + a; }

    int n_states_;
    int n_actions_;
    std::vector<double> values_;
    std::vector<long> visits_;
};

// One Watkins update on cell (s,a):
//   Q(s,a) <- (1 - alpha) Q(s,a) + alpha (r + beta * max_b Q(s_next, b))
// bumping the cell's visit count.  No other cell changes.
void q_update(QTable& q, int s, int a, double reward, int s_next,
              double alpha, double beta);

// ---------------------------------------------------------------------------
// Learning-rate and exploration schedules

// Either a constant rate or the per-cell polynomial decay
// alpha_n = (1 + n)^-omega, where n >= 1 is the visit number of the cell
// (counting the visit being processed).  With omega in (0.5, 1] the rates
// satisfy sum alpha = inf, sum alpha^2 < inf, and every rate lies in [0, 1).
class LearningRateSchedule {
public:
    static LearningRateSchedule constant(double alpha0);
    static LearningRateSchedule polynomial(double omega = 0.7);

    double alpha_for_visit(long visit_number) const;

private:
    LearningRateSchedule() = default;
    bool constant_ = true;
    double alpha0_ = 0.1;
    double omega_ = 0.7;
};

// Epsilon-greedy with per-episode multiplicative decay and a floor.  A
// strictly positive floor keeps every (s,a) visited in the long run.
struct EpsilonGreedy {
    double initial = 1.0;
    double decay = 1.0;   // multiplicative, per episode
    double floor = 0.05;

    EpsilonGreedy(double initial, double decay, double floor);
    double epsilon(long episode) const;  // always within [floor, initial]
};

// ---------------------------------------------------------------------------
// Learning loop

struct QLearningConfig {
    LearningRateSchedule schedule = LearningRateSchedule::polynomial();
    EpsilonGreedy exploration{1.0, 1.0, 0.05};
    long episodes = 1000;
    double discount = 0.9;
    double initial_q = 0.0;
    std::uint64_t seed = 0;
};

struct QLearningResult {
    QTable q;
    std::vector<double> episode_returns;  // one entry per episode
    Policy greedy;
};

// Called after each finished episode with the table so far.
using EpisodeObserver = std::function<void(long episode, const QTable& q)>;

// Runs episodic Q-learning on the environment.  Deterministic given
// (config.seed, config); environment faults are rethrown as RunError with the
// episode index.
QLearningResult run_q_learning(EpisodicEnv& env, const QLearningConfig& config,
                               const EpisodeObserver& observer = {});

// Greedy deterministic policy of a Q table (lowest index wins ties).
Policy greedy_policy(const QTable& q);

// ---------------------------------------------------------------------------
// Matrix games and equilibrium predicates

// n-agent one-shot game in normal form; payoffs[i] is agent i's payoff tensor
// over joint actions, flattened row-major in agent order.
class MatrixGame {
public:
    MatrixGame(std::vector<int> action_counts,
               std::vector<std::vector<double>> payoffs);

    // Two-player convenience: payoff matrices indexed [a0][a1].
    static MatrixGame two_player(const std::vector<std::vector<double>>& payoff0,
                                 const std::vector<std::vector<double>>& payoff1);

    int n_agents() const { return static_cast<int>(action_counts_.size()); }
    int action_count(int agent) const { return action_counts_[agent]; }
    long n_joint_actions() const { return n_joint_; }

    long joint_index(const std::vector<int>& joint) const;
    std::vector<int> joint_from_index(long index) const;
    double payoff(int agent, const std::vector<int>& joint) const;
    double payoff_by_index(int agent, long joint_index) const {
        return payoffs_[agent][joint_index];
    }

private:
    std::vector<int> action_counts_;
    std::vector<std::vector<double>> payoffs_;
    long n_joint_ = 1;
};

struct EquilibriumCheck {
    std::vector<bool> per_agent;
    bool overall = true;
};

// Adversarial: agent i's payoff at the joint action is <= its payoff at every
// joint action that keeps i's action fixed and varies the others.
EquilibriumCheck check_adversarial_equilibrium(const MatrixGame& game,
                                               const std::vector<int>& joint);

// Coordination: every agent attains its global maximum payoff at the joint
// action.
bool check_coordination_equilibrium(const MatrixGame& game,
                                    const std::vector<int>& joint);

}  // namespace mglab

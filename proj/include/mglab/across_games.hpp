#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mglab/errors.hpp"
#include "mglab/qlearning.hpp"
#include "mglab/rng.hpp"

namespace mglab {

// ---------------------------------------------------------------------------
// Partitions of a game set into analogy classes

class Partition {
public:
    // classes: disjoint, nonempty, covering 0..n_games-1.  Stored in
    // canonical form (members ascending, classes ordered by smallest member).
    explicit Partition(std::vector<std::vector<int>> classes);

    static Partition coarsest(int n_games);  // one class
    static Partition finest(int n_games);    // singleton classes

    int n_games() const { return static_cast<int>(class_index_.size()); }
    int n_classes() const { return static_cast<int>(classes_.size()); }
    int class_of(int game) const { return class_index_[game]; }
    const std::vector<std::vector<int>>& classes() const { return classes_; }

    bool operator==(const Partition& other) const {
        return classes_ == other.classes_;
    }

private:
    std::vector<std::vector<int>> classes_;
    std::vector<int> class_index_;  // game -> class
};

// All set partitions of {0..n_games-1} in canonical order; the count is the
// Bell number B(n).  Capped at n_games <= 8.
std::vector<Partition> enumerate_partitions(int n_games);

// ---------------------------------------------------------------------------
// Game set and opponent model

// Two-player games sharing the learner's (agent 0) action count; draw
// weights are the sampling distribution over games.
struct GameSet {
    std::vector<MatrixGame> games;
    std::vector<double> draw_weights;

    GameSet(std::vector<MatrixGame> games, std::vector<double> draw_weights);

    int n_games() const { return static_cast<int>(games.size()); }
    int learner_actions() const { return games[0].action_count(0); }
};

// Stationary per-game mixed strategy of the opponent (agent 1).
struct OpponentModel {
    std::vector<std::vector<double>> strategies;

    void validate_for(const GameSet& gameset) const;
};

// Expected learner payoff per (game, action) against the opponent model.
std::vector<std::vector<double>> expected_payoffs(const GameSet& gameset,
                                                  const OpponentModel& opponents);

// ---------------------------------------------------------------------------
// Learner state: partition propensities and per-(class, action) attractions

class LearnerState {
public:
    LearnerState(std::vector<Partition> candidates, int n_actions, double kappa,
                 double initial_propensity = 1.0, double initial_attraction = 1.0);

    int n_candidates() const { return static_cast<int>(candidates_.size()); }
    int n_actions() const { return n_actions_; }
    const Partition& candidate(int i) const { return candidates_[i]; }
    const std::vector<Partition>& candidates() const { return candidates_; }

    double propensity(int candidate) const { return propensities_[candidate]; }
    const std::vector<double>& propensities() const { return propensities_; }
    double attraction(int candidate, int cls, int action) const {
        return attractions_[candidate][cls][action];
    }
    std::span<const double> attractions(int candidate, int cls) const {
        return attractions_[candidate][cls];
    }

    // Linear reasoning cost kappa * (classes - 1); zero for the coarsest.
    double reasoning_cost(int candidate) const {
        return kappa_ * (candidates_[candidate].n_classes() - 1);
    }
    double kappa() const { return kappa_; }

    friend void update_learning(LearnerState& state, int candidate, int cls,
                                int action, double payoff);
    friend class OdeIntegrator;

private:
    std::vector<Partition> candidates_;
    int n_actions_;
    double kappa_;
    std::vector<double> propensities_;
    std::vector<std::vector<std::vector<double>>> attractions_;
};

// Softmax choice probabilities, proportional to exp(level / temperature).
std::vector<double> softmax_probs(std::span<const double> levels,
                                  double temperature);

// Sample a candidate partition with probability softmax(propensity/T).
int choose_partition(const LearnerState& state, double temperature, Rng& rng);

// Sample an action from softmax over the (candidate, class) attractions.
int choose_action(const LearnerState& state, int candidate, int cls,
                  double temperature, Rng& rng);

// Reinforcement step: the chosen partition's propensity moves by
// payoff - reasoning_cost, the chosen (class, action) attraction by payoff;
// both floored at 1e-6.  Nothing else changes.
void update_learning(LearnerState& state, int candidate, int cls, int action,
                     double payoff);

// ---------------------------------------------------------------------------
// Learning runs

enum class CandidateSet { AllPartitions, CoarseAndFinest };

struct AcrossGamesConfig {
    double partition_temperature = 100.0;
    double action_temperature = 10.0;
    double kappa = 0.0;
    long rounds = 100000;
    double initial_propensity = 1.0;
    double initial_attraction = 1.0;
    CandidateSet candidates = CandidateSet::AllPartitions;
    std::uint64_t seed = 0;
};

struct AcrossGamesRound {
    int game;
    int candidate;
    int cls;
    int action;
    double payoff;
};

struct AcrossGamesResult {
    LearnerState state;
    std::vector<AcrossGamesRound> trajectory;
    // Frequency of each candidate partition over the final 10% of rounds.
    std::vector<double> final_frequencies;
};

// Repeated play: draw a game, choose a partition, locate the class, choose an
// action, realize the payoff against the opponent model, reinforce.
AcrossGamesResult run_across_games(const GameSet& gameset,
                                   const OpponentModel& opponents,
                                   const AcrossGamesConfig& config);

// ---------------------------------------------------------------------------
// Deterministic mean-field approximation

struct OdeTrajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> propensities;      // snapshot per time
    std::vector<std::vector<double>> attractions_flat;  // [candidate|class|action]
    LearnerState final_state;
    std::vector<double> final_partition_probs;  // softmax at the endpoint
};

// Explicit Euler integration of the expected per-round motion of
// run_across_games:
//   d propensity_P = sigma_P * (E[payoff | P] - cost(P))
//   d attraction_{P,c,a} = sigma_P * sum_{g in c} w_g sigma_{a|P,c} u(g,a)
// with sigma the softmax choice probabilities at the current state.
OdeTrajectory ode_approximation(const GameSet& gameset,
                                const OpponentModel& opponents,
                                const AcrossGamesConfig& config, double horizon,
                                double step, long max_snapshots = 1000);

}  // namespace mglab

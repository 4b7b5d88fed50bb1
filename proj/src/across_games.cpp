#include "mglab/across_games.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace mglab {

namespace {

constexpr double kFloor = 1e-6;

}  // namespace

Partition::Partition(std::vector<std::vector<int>> classes)
    : classes_(std::move(classes)) {
    if (classes_.empty())
        throw InvalidInputError("Partition: needs at least one class");
    int n = 0;
    for (auto& cls : classes_) {
        if (cls.empty()) throw InvalidInputError("Partition: empty class");
        std::sort(cls.begin(), cls.end());
        n += static_cast<int>(cls.size());
    }
    std::sort(classes_.begin(), classes_.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    class_index_.assign(static_cast<std::size_t>(n), -1);
    for (int c = 0; c < n_classes(); ++c) {
        for (int g : classes_[c]) {
            if (g < 0 || g >= n)
                throw InvalidInputError("Partition: game index " +
                                        std::to_string(g) + " out of range");
            if (class_index_[g] != -1)
                throw InvalidInputError("Partition: game " + std::to_string(g) +
                                        " appears in two classes");
            class_index_[g] = c;
        }
    }
    // every slot filled <=> exact cover
    for (int g = 0; g < n; ++g)
        if (class_index_[g] == -1)
            throw InvalidInputError("Partition: classes do not cover all games");
}

Partition Partition::coarsest(int n_games) {
    std::vector<int> all(static_cast<std::size_t>(n_games));
    for (int g = 0; g < n_games; ++g) all[g] = g;
    return Partition({all});
}

Partition Partition::finest(int n_games) {
    std::vector<std::vector<int>> classes;
    classes.reserve(static_cast<std::size_t>(n_games));
    for (int g = 0; g < n_games; ++g) classes.push_back({g});
    return Partition(std::move(classes));
}

std::vector<Partition> enumerate_partitions(int n_games) {
    if (n_games < 1)
        throw InvalidInputError("enumerate_partitions: n_games must be >= 1");
    if (n_games > 8)
        throw InvalidInputError(
            "enumerate_partitions: capped at 8 games (Bell-number growth); "
            "restrict the candidate set instead");
    // Restricted growth strings: code[i] <= 1 + max(code[0..i-1]).
    std::vector<Partition> out;
    std::vector<int> code(static_cast<std::size_t>(n_games), 0);
    const auto emit = [&]() {
        const int n_classes = *std::max_element(code.begin(), code.end()) + 1;
        std::vector<std::vector<int>> classes(static_cast<std::size_t>(n_classes));
        for (int g = 0; g < n_games; ++g) classes[code[g]].push_back(g);
        out.emplace_back(std::move(classes));
    };
    const auto recurse = [&](auto&& self, int i, int max_used) -> void {
        if (i == n_games) {
            emit();
            return;
        }
        for (int c = 0; c <= max_used + 1; ++c) {
            code[i] = c;
            self(self, i + 1, std::max(max_used, c));
        }
    };
    recurse(recurse, 1, 0);  // code[0] is always 0
    return out;
}

GameSet::GameSet(std::vector<MatrixGame> games_in, std::vector<double> weights_in)
    : games(std::move(games_in)), draw_weights(std::move(weights_in)) {
    if (games.empty()) throw InvalidInputError("GameSet: needs at least one game");
    if (draw_weights.size() != games.size())
        throw InvalidInputError("GameSet: one draw weight per game required");
    for (const MatrixGame& g : games) {
        if (g.n_agents() != 2)
            throw InvalidInputError("GameSet: games must be two-player");
        if (g.action_count(0) != games[0].action_count(0))
            throw InvalidInputError("GameSet: learner action counts must match");
    }
    double total = 0.0;
    for (double w : draw_weights) {
        if (!(w >= 0.0))
            throw InvalidInputError("GameSet: draw weights must be nonnegative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw InvalidInputError("GameSet: draw weights sum to " +
                                std::to_string(total) + ", expected 1");
}

void OpponentModel::validate_for(const GameSet& gameset) const {
    if (static_cast<int>(strategies.size()) != gameset.n_games())
        throw InvalidInputError("OpponentModel: one strategy per game required");
    for (int g = 0; g < gameset.n_games(); ++g) {
        const auto& row = strategies[g];
        if (static_cast<int>(row.size()) != gameset.games[g].action_count(1))
            throw InvalidInputError("OpponentModel: strategy size mismatch at game " +
                                    std::to_string(g));
        double total = 0.0;
        for (double p : row) {
            if (!(p >= 0.0))
                throw InvalidInputError("OpponentModel: negative probability");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw InvalidInputError("OpponentModel: strategy row " +
                                    std::to_string(g) + " sums to " +
                                    std::to_string(total));
    }
}

std::vector<std::vector<double>> expected_payoffs(const GameSet& gameset,
                                                  const OpponentModel& opponents) {
    opponents.validate_for(gameset);
    std::vector<std::vector<double>> u(static_cast<std::size_t>(gameset.n_games()));
    for (int g = 0; g < gameset.n_games(); ++g) {
        const MatrixGame& game = gameset.games[g];
        u[g].assign(static_cast<std::size_t>(game.action_count(0)), 0.0);
        for (int a = 0; a < game.action_count(0); ++a)
            for (int b = 0; b < game.action_count(1); ++b)
                u[g][a] += opponents.strategies[g][b] * game.payoff(0, {a, b});
    }
    return u;
}

LearnerState::LearnerState(std::vector<Partition> candidates, int n_actions,
                           double kappa, double initial_propensity,
                           double initial_attraction)
    : candidates_(std::move(candidates)), n_actions_(n_actions), kappa_(kappa) {
    if (candidates_.empty())
        throw InvalidInputError("LearnerState: needs at least one candidate");
    if (n_actions < 1)
        throw InvalidInputError("LearnerState: needs at least one action");
    if (!(kappa >= 0.0))
        throw InvalidInputError("LearnerState: kappa must be >= 0");
    if (!(initial_propensity > 0.0) || !(initial_attraction > 0.0))
        throw InvalidInputError("LearnerState: initial stocks must be > 0");
    propensities_.assign(candidates_.size(), initial_propensity);
    attractions_.resize(candidates_.size());
    for (std::size_t p = 0; p < candidates_.size(); ++p)
        attractions_[p].assign(
            static_cast<std::size_t>(candidates_[p].n_classes()),
            std::vector<double>(static_cast<std::size_t>(n_actions),
                                initial_attraction));
}

std::vector<double> softmax_probs(std::span<const double> levels,
                                  double temperature) {
    if (!(temperature > 0.0))
        throw InvalidInputError("softmax_probs: temperature must be > 0");
    if (levels.empty()) throw InvalidInputError("softmax_probs: empty input");
    const double top = *std::max_element(levels.begin(), levels.end());
    std::vector<double> probs(levels.size());
    double total = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        probs[i] = std::exp((levels[i] - top) / temperature);
        total += probs[i];
    }
    for (double& p : probs) p /= total;
    return probs;
}

namespace {

int sample_index(std::span<const double> probs, Rng& rng) {
    const double u = rng.next_double();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace

int choose_partition(const LearnerState& state, double temperature, Rng& rng) {
    const auto probs = softmax_probs(state.propensities(), temperature);
    return sample_index(probs, rng);
}

int choose_action(const LearnerState& state, int candidate, int cls,
                  double temperature, Rng& rng) {
    const auto probs = softmax_probs(state.attractions(candidate, cls), temperature);
    return sample_index(probs, rng);
}

void update_learning(LearnerState& state, int candidate, int cls, int action,
                     double payoff) {
    if (!std::isfinite(payoff))
        throw InvalidInputError("update_learning: payoff must be finite");
    double& prop = state.propensities_[candidate];
    prop = std::max(kFloor, prop + payoff - state.reasoning_cost(candidate));
    double& attr = state.attractions_[candidate][cls][action];
    attr = std::max(kFloor, attr + payoff);
}

AcrossGamesResult run_across_games(const GameSet& gameset,
                                   const OpponentModel& opponents,
                                   const AcrossGamesConfig& config) {
    if (config.rounds < 1)
        throw InvalidInputError("run_across_games: rounds must be >= 1");
    opponents.validate_for(gameset);

    std::vector<Partition> candidates;
    if (config.candidates == CandidateSet::AllPartitions) {
        candidates = enumerate_partitions(gameset.n_games());
    } else {
        candidates.push_back(Partition::coarsest(gameset.n_games()));
        if (gameset.n_games() > 1)
            candidates.push_back(Partition::finest(gameset.n_games()));
    }

    LearnerState state(std::move(candidates), gameset.learner_actions(),
                       config.kappa, config.initial_propensity,
                       config.initial_attraction);

    Rng rng = Rng(config.seed).substream("across-games");

    AcrossGamesResult result{state, {}, {}};
    result.trajectory.reserve(static_cast<std::size_t>(config.rounds));

    const long tail_start = config.rounds - config.rounds / 10;  // final 10%
    std::vector<long> tail_counts(static_cast<std::size_t>(state.n_candidates()), 0);

    for (long round = 0; round < config.rounds; ++round) {
        // draw game
        const double u = rng.next_double();
        int game = gameset.n_games() - 1;
        double acc = 0.0;
        for (int g = 0; g < gameset.n_games(); ++g) {
            acc += gameset.draw_weights[g];
            if (u < acc) {
                game = g;
                break;
            }
        }
        const int candidate =
            choose_partition(result.state, config.partition_temperature, rng);
        const int cls = result.state.candidate(candidate).class_of(game);
        const int action = choose_action(result.state, candidate, cls,
                                         config.action_temperature, rng);
        const int opp_action = sample_index(opponents.strategies[game], rng);
        const double payoff = gameset.games[game].payoff(0, {action, opp_action});

        update_learning(result.state, candidate, cls, action, payoff);
        result.trajectory.push_back({game, candidate, cls, action, payoff});
        if (round >= tail_start) ++tail_counts[candidate];
    }

    const long tail_len = config.rounds - tail_start;
    result.final_frequencies.resize(tail_counts.size());
    for (std::size_t i = 0; i < tail_counts.size(); ++i)
        result.final_frequencies[i] =
            static_cast<double>(tail_counts[i]) / static_cast<double>(tail_len);
    return result;
}

class OdeIntegrator {
public:
    OdeIntegrator(const GameSet& gameset, const OpponentModel& opponents,
                  const AcrossGamesConfig& config)
        : gameset_(gameset),
          config_(config),
          payoff_table_(expected_payoffs(gameset, opponents)) {}

    OdeTrajectory integrate(double horizon, double step, long max_snapshots) const {
        if (!(step > 0.0))
            throw InvalidInputError("ode_approximation: step must be > 0");
        if (!(horizon >= 0.0))
            throw InvalidInputError("ode_approximation: horizon must be >= 0");

        std::vector<Partition> candidates;
        if (config_.candidates == CandidateSet::AllPartitions) {
            candidates = enumerate_partitions(gameset_.n_games());
        } else {
            candidates.push_back(Partition::coarsest(gameset_.n_games()));
            if (gameset_.n_games() > 1)
                candidates.push_back(Partition::finest(gameset_.n_games()));
        }
        LearnerState state(std::move(candidates), gameset_.learner_actions(),
                           config_.kappa, config_.initial_propensity,
                           config_.initial_attraction);

        const long n_steps = static_cast<long>(std::ceil(horizon / step));
        const long stride = std::max<long>(1, n_steps / std::max<long>(1, max_snapshots));

        OdeTrajectory traj{{}, {}, {}, state, {}};
        snapshot(traj, state, 0.0);
        for (long k = 0; k < n_steps; ++k) {
            const double dt = std::min(step, horizon - static_cast<double>(k) * step);
            euler_step(state, dt);
            if ((k + 1) % stride == 0 || k + 1 == n_steps)
                snapshot(traj, state, std::min(horizon, (k + 1) * step));
        }
        traj.final_state = state;
        traj.final_partition_probs =
            softmax_probs(state.propensities(), config_.partition_temperature);
        return traj;
    }

private:
    void euler_step(LearnerState& state, double dt) const {
        const auto sigma =
            softmax_probs(state.propensities(), config_.partition_temperature);
        std::vector<double> d_prop(sigma.size(), 0.0);
        std::vector<std::vector<std::vector<double>>> d_attr(sigma.size());

        for (int p = 0; p < state.n_candidates(); ++p) {
            const Partition& part = state.candidate(p);
            d_attr[p].assign(static_cast<std::size_t>(part.n_classes()),
                             std::vector<double>(
                                 static_cast<std::size_t>(state.n_actions()), 0.0));
            double expected = 0.0;
            for (int g = 0; g < gameset_.n_games(); ++g) {
                const int cls = part.class_of(g);
                const auto action_probs = softmax_probs(
                    state.attractions(p, cls), config_.action_temperature);
                for (int a = 0; a < state.n_actions(); ++a) {
                    const double flow = gameset_.draw_weights[g] * action_probs[a] *
                                        payoff_table_[g][a];
                    expected += flow;
                    d_attr[p][cls][a] += sigma[p] * flow;
                }
            }
            d_prop[p] = sigma[p] * (expected - state.reasoning_cost(p));
        }

        for (int p = 0; p < state.n_candidates(); ++p) {
            state.propensities_[p] =
                std::max(kFloor, state.propensities_[p] + dt * d_prop[p]);
            for (int c = 0; c < state.candidate(p).n_classes(); ++c)
                for (int a = 0; a < state.n_actions(); ++a)
                    state.attractions_[p][c][a] = std::max(
                        kFloor, state.attractions_[p][c][a] + dt * d_attr[p][c][a]);
        }
    }

    static void snapshot(OdeTrajectory& traj, const LearnerState& state, double t) {
        traj.times.push_back(t);
        traj.propensities.push_back(state.propensities());
        std::vector<double> flat;
        for (int p = 0; p < state.n_candidates(); ++p)
            for (int c = 0; c < state.candidate(p).n_classes(); ++c)
                for (int a = 0; a < state.n_actions(); ++a)
                    flat.push_back(state.attraction(p, c, a));
        traj.attractions_flat.push_back(std::move(flat));
    }

    const GameSet& gameset_;
    const AcrossGamesConfig& config_;
    std::vector<std::vector<double>> payoff_table_;
};

OdeTrajectory ode_approximation(const GameSet& gameset,
                                const OpponentModel& opponents,
                                const AcrossGamesConfig& config, double horizon,
                                double step, long max_snapshots) {
    return OdeIntegrator(gameset, opponents, config)
        .integrate(horizon, step, max_snapshots);
}

}  // namespace mglab

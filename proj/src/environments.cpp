#include "mglab/environments.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace mglab {

MdpEnv::MdpEnv(TabularMDP mdp, long horizon, std::uint64_t seed)
    : mdp_(std::move(mdp)), horizon_(horizon), rng_(Rng(seed).substream("mdp-env")) {
    mdp_.validate();
    if (horizon < 1) throw InvalidInputError("MdpEnv: horizon must be >= 1");
}

void MdpEnv::seed(std::uint64_t seed) {
    rng_ = Rng(seed).substream("mdp-env");
    state_ = 0;
    steps_in_episode_ = 0;
}

int MdpEnv::reset() {
    state_ = 0;
    steps_in_episode_ = 0;
    return state_;
}

StepOutcome MdpEnv::step(int action) {
    if (action < 0 || action >= mdp_.n_actions())
        throw InvalidInputError("MdpEnv: action index " + std::to_string(action) +
                                " out of range");
    const double reward = mdp_.reward(state_, action);
    const double u = rng_.next_double();
    double mass = 0.0;
    int next = mdp_.n_states() - 1;
    for (int t = 0; t < mdp_.n_states(); ++t) {
        mass += mdp_.transition(state_, action, t);
        if (u < mass) {
            next = t;
            break;
        }
    }
    state_ = next;
    ++steps_in_episode_;
    return {reward, next, steps_in_episode_ >= horizon_};
}

BiasedBetEnv::BiasedBetEnv(double win_probability, double payout_ratio,
                           std::uint64_t seed)
    : win_probability_(win_probability),
      payout_ratio_(payout_ratio),
      rng_(Rng(seed).substream("bet")) {
    if (!(win_probability >= 0.0 && win_probability <= 1.0))
        throw InvalidInputError("BiasedBetEnv: win probability must lie in [0, 1]");
    if (!(payout_ratio > 0.0))
        throw InvalidInputError("BiasedBetEnv: payout ratio must be > 0");
}

LogPriceEnv LogPriceEnv::iid_gaussian(double mu, double sigma, std::uint64_t seed) {
    if (!(sigma > 0.0)) throw InvalidInputError("LogPriceEnv: sigma must be > 0");
    LogPriceEnv env;
    env.kind_ = Kind::Iid;
    env.mu_ = mu;
    env.sigma_ = sigma;
    env.seed(seed);
    return env;
}

LogPriceEnv LogPriceEnv::regime_switching(double drift0, double drift1,
                                          double switch_prob, double sigma,
                                          std::uint64_t seed) {
    if (!(sigma > 0.0)) throw InvalidInputError("LogPriceEnv: sigma must be > 0");
    if (!(switch_prob >= 0.0 && switch_prob <= 1.0))
        throw InvalidInputError("LogPriceEnv: switch probability must lie in [0, 1]");
    LogPriceEnv env;
    env.kind_ = Kind::RegimeSwitching;
    env.drift0_ = drift0;
    env.drift1_ = drift1;
    env.switch_prob_ = switch_prob;
    env.sigma_ = sigma;
    env.seed(seed);
    return env;
}

void LogPriceEnv::seed(std::uint64_t seed) {
    rng_ = Rng(seed).substream("price");
    regime_ = 0;
}

double LogPriceEnv::next() {
    if (kind_ == Kind::Iid) return mu_ + sigma_ * rng_.next_gaussian();
    if (rng_.next_bernoulli(switch_prob_)) regime_ = 1 - regime_;
    const double drift = regime_ == 0 ? drift0_ : drift1_;
    return drift + sigma_ * rng_.next_gaussian();
}

double apply_transaction_cost(const TransactionCostModel& model,
                              double gross_profit, double traded_value) {
    return gross_profit - model.proportional_cost * traded_value;
}

PredictionGameResult run_prediction_game(PredictionEnv& env, const Predictor& predictor,
                                         const UtilityFn& utility, long n_rounds) {
    if (n_rounds < 1)
        throw InvalidInputError("run_prediction_game: n_rounds must be >= 1");
    PredictionGameResult result;
    result.rounds.reserve(static_cast<std::size_t>(n_rounds));
    for (long n = 1; n <= n_rounds; ++n) {
        const double x = env.announce_side_info();
        double gamma;
        try {
            gamma = predictor(x, result.rounds);
        } catch (const std::exception& e) {
            throw RunError("prediction game: predictor failed at round " +
                           std::to_string(n) + ": " + e.what());
        }
        const double y = env.announce_outcome();
        const double u = utility(gamma, y);
        if (!std::isfinite(u))
            throw RunError("prediction game: non-finite utility at round " +
                           std::to_string(n));
        result.rounds.push_back({n, x, gamma, y, u});
        result.cumulative_utility += u;
    }
    return result;
}

double majority_predictor(double, const std::vector<PredictionRound>& past) {
    long ones = 0;
    for (const auto& r : past)
        if (r.outcome > 0.5) ++ones;
    return 2 * ones >= static_cast<long>(past.size()) ? 1.0 : 0.0;
}

TabularMDP random_mdp(int n_states, int n_actions, double discount, Rng& rng) {
    TabularMDP mdp(n_states, n_actions, discount);
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            double total = 0.0;
            std::vector<double> row(n_states);
            for (int t = 0; t < n_states; ++t) {
                row[t] = 0.05 + rng.next_double();  // bounded away from 0
                total += row[t];
            }
            for (int t = 0; t < n_states; ++t)
                mdp.set_transition(s, a, t, row[t] / total);
            mdp.set_reward(s, a, rng.next_double());
        }
    }
    return mdp;
}

}  // namespace mglab

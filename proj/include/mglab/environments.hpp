#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mglab/errors.hpp"
#include "mglab/mdp.hpp"
#include "mglab/rng.hpp"

namespace mglab {

// ---------------------------------------------------------------------------
// Episodic environment protocol (consumed by the Q-learning loop)

struct StepOutcome {
    double reward;
    int next_state;
    bool done;
};

class EpisodicEnv {
public:
    virtual ~EpisodicEnv() = default;
    virtual int n_states() const = 0;
    virtual int n_actions() const = 0;
    virtual void seed(std::uint64_t seed) = 0;
    virtual int reset() = 0;
    virtual StepOutcome step(int action) = 0;
};

// Wraps a TabularMDP as an episodic environment: reset starts at state 0,
// step samples the kernel, episodes end after a fixed horizon.
class MdpEnv final : public EpisodicEnv {
public:
    MdpEnv(TabularMDP mdp, long horizon, std::uint64_t seed);

    int n_states() const override { return mdp_.n_states(); }
    int n_actions() const override { return mdp_.n_actions(); }
    void seed(std::uint64_t seed) override;
    int reset() override;
    StepOutcome step(int action) override;

    const TabularMDP& mdp() const { return mdp_; }

private:
    TabularMDP mdp_;
    long horizon_;
    Rng rng_;
    int state_ = 0;
    long steps_in_episode_ = 0;
};

// ---------------------------------------------------------------------------
// Biased binary-bet environment

// Win with probability p; a win pays payout_ratio per unit staked, a loss
// costs the stake.
class BiasedBetEnv {
public:
    BiasedBetEnv(double win_probability, double payout_ratio, std::uint64_t seed);

    double win_probability() const { return win_probability_; }
    double payout_ratio() const { return payout_ratio_; }

    void seed(std::uint64_t seed) { rng_ = Rng(seed).substream("bet"); }
    bool step() { return rng_.next_bernoulli(win_probability_); }

private:
    double win_probability_;
    double payout_ratio_;
    Rng rng_;
};

// ---------------------------------------------------------------------------
// Log-price processes

class PriceSource {
public:
    virtual ~PriceSource() = default;
    virtual double next() = 0;
};

class LogPriceEnv final : public PriceSource {
public:
    enum class Kind { Iid, RegimeSwitching };

    // i.i.d. Gaussian(mu, sigma) log-price deviations.
    static LogPriceEnv iid_gaussian(double mu, double sigma, std::uint64_t seed);

    // Two-drift regime process: each round the drift state flips with
    // probability switch_prob, then emits drift + Gaussian(0, sigma) noise.
    static LogPriceEnv regime_switching(double drift0, double drift1,
                                        double switch_prob, double sigma,
                                        std::uint64_t seed);

    Kind kind() const { return kind_; }
    void seed(std::uint64_t seed);
    double next() override;

private:
    LogPriceEnv() : rng_(0) {}

    Kind kind_ = Kind::Iid;
    double mu_ = 0.0;
    double sigma_ = 1.0;
    double drift0_ = 0.0;
    double drift1_ = 0.0;
    double switch_prob_ = 0.0;
    int regime_ = 0;
    Rng rng_;
};

// ---------------------------------------------------------------------------
// Transaction costs

// Proportional cost per executed trade: net = gross - c * traded_value.
struct TransactionCostModel {
    double proportional_cost = 0.0;

    explicit TransactionCostModel(double c = 0.0) : proportional_cost(c) {
        if (!(c >= 0.0))
            throw InvalidInputError("TransactionCostModel: cost must be >= 0");
    }
};

double apply_transaction_cost(const TransactionCostModel& model,
                              double gross_profit, double traded_value);

// ---------------------------------------------------------------------------
// Prediction game round protocol

struct PredictionRound {
    long index;      // 1-based round number
    double side_info;
    double prediction;
    double outcome;
    double utility;
};

struct PredictionGameResult {
    std::vector<PredictionRound> rounds;
    double cumulative_utility = 0.0;
};

class PredictionEnv {
public:
    virtual ~PredictionEnv() = default;
    virtual double announce_side_info() = 0;
    virtual double announce_outcome() = 0;
};

// Bernoulli(p) outcomes in {0, 1} with no side information.
class BiasedCoinPredictionEnv final : public PredictionEnv {
public:
    BiasedCoinPredictionEnv(double p, std::uint64_t seed)
        : p_(p), rng_(Rng(seed).substream("coin")) {}

    double announce_side_info() override { return 0.0; }
    double announce_outcome() override { return rng_.next_bernoulli(p_) ? 1.0 : 0.0; }

private:
    double p_;
    Rng rng_;
};

using Predictor = std::function<double(double side_info,
                                       const std::vector<PredictionRound>& past)>;
using UtilityFn = std::function<double(double prediction, double outcome)>;

// Runs the round protocol: announce side information, collect the prediction,
// announce the outcome, score it.  Predictor faults become RunError with the
// failing round index.
PredictionGameResult run_prediction_game(PredictionEnv& env, const Predictor& predictor,
                                         const UtilityFn& utility, long n_rounds);

// Predicts the majority outcome seen so far (1 on ties/startup).
double majority_predictor(double side_info, const std::vector<PredictionRound>& past);

// ---------------------------------------------------------------------------
// Synthetic instance generation

// Random dense MDP: kernel rows are normalized uniforms, rewards uniform on
// [0, 1].
TabularMDP random_mdp(int n_states, int n_actions, double discount, Rng& rng);

}  // namespace mglab

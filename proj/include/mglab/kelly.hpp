#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mglab/environments.hpp"
#include "mglab/errors.hpp"

namespace mglab {

struct TradeRecord {
    double pnl = 0.0;  // signed profit; positive = win, zero counts as a loss
};

struct KellyEstimate {
    double W = 0.0;  // winning frequency
    double R = 0.0;  // average win / average loss ratio
    long n_wins = 0;
    long n_losses = 0;
};

// Theta = W - (1 - W) / R.  May be negative; callers decide how to clamp.
double kelly_fraction(double W, double R);

// W and R from a trade history.  Needs at least one win and one loss;
// zero-pnl trades count as losses.
KellyEstimate estimate_from_history(std::span<const TradeRecord> trades);

// One signed pnl per line; blank lines and '#' comments are skipped.
std::vector<TradeRecord> load_trade_history(const std::string& path);

struct FixedFraction {
    double fraction = 0.0;
};

struct OnlineKellyRule {
    long window = 0;  // 0 = all history
};

using FractionRule = std::variant<FixedFraction, OnlineKellyRule>;

struct BankrollOptions {
    double initial_capital = 1.0;
    double fraction_cap = 0.99;
    long warmup_bets = 10;  // online rule: zero-stake observation period
};

// Capital trajectory of length n_bets + 1 under the given staking rule.
// Wins multiply capital by (1 + f * payout_ratio), losses by (1 - f).
std::vector<double> simulate_bankroll(const BiasedBetEnv& env,
                                      const FractionRule& rule, long n_bets,
                                      std::uint64_t seed,
                                      const BankrollOptions& options = {});

// Mean per-step log growth of a positive capital trajectory.
double log_growth_rate(std::span<const double> trajectory);

struct OnlineKellyResult {
    std::vector<double> fractions;  // length n_bets
    std::vector<double> capital;    // length n_bets + 1
};

// Online bias search: re-estimates (W, R) each step from the observed outcome
// window and stakes max(0, kelly_fraction) capped at fraction_cap.  The first
// warmup_bets stakes are forced to zero, as are steps where the estimate
// lacks a win or a loss.
OnlineKellyResult online_kelly(const BiasedBetEnv& env, long window, long n_bets,
                               std::uint64_t seed,
                               const BankrollOptions& options = {});

}  // namespace mglab

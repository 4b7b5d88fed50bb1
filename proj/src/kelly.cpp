#include "mglab/kelly.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

namespace mglab {

double kelly_fraction(double W, double R) {
    if (!(R > 0.0)) throw InvalidInputError("kelly_fraction: R must be > 0");
    if (!(W >= 0.0 && W <= 1.0))
        throw InvalidInputError("kelly_fraction: W must lie in [0, 1]");
    return W - (1.0 - W) / R;
}

KellyEstimate estimate_from_history(std::span<const TradeRecord> trades) {
    KellyEstimate est;
    double win_sum = 0.0;
    double loss_sum = 0.0;
    for (const TradeRecord& t : trades) {
        if (!std::isfinite(t.pnl))
            throw InvalidInputError("estimate_from_history: non-finite pnl");
        if (t.pnl > 0.0) {
            ++est.n_wins;
            win_sum += t.pnl;
        } else {
            ++est.n_losses;
            loss_sum += -t.pnl;
        }
    }
    if (est.n_wins == 0)
        throw InsufficientDataError("estimate_from_history: no winning trades");
    if (est.n_losses == 0)
        throw InsufficientDataError("estimate_from_history: no losing trades");
    est.W = static_cast<double>(est.n_wins) /
            static_cast<double>(est.n_wins + est.n_losses);
    est.R = (win_sum / static_cast<double>(est.n_wins)) /
            (loss_sum / static_cast<double>(est.n_losses));
    return est;
}

std::vector<TradeRecord> load_trade_history(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("load_trade_history: cannot open " + path);
    std::vector<TradeRecord> trades;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        std::istringstream ls(line);
        double pnl;
        if (!(ls >> pnl) || !std::isfinite(pnl))
            throw InvalidInputError("load_trade_history: bad pnl at " + path +
                                    ":" + std::to_string(line_no));
        trades.push_back({pnl});
    }
    return trades;
}

namespace {

void check_options(const BankrollOptions& options) {
    if (!(options.initial_capital > 0.0))
        throw ConfigError("bankroll: initial capital must be > 0");
    if (!(options.fraction_cap >= 0.0 && options.fraction_cap < 1.0))
        throw ConfigError("bankroll: fraction cap must lie in [0, 1)");
    if (options.warmup_bets < 0)
        throw ConfigError("bankroll: warmup must be >= 0");
}

}  // namespace

std::vector<double> simulate_bankroll(const BiasedBetEnv& env,
                                      const FractionRule& rule, long n_bets,
                                      std::uint64_t seed,
                                      const BankrollOptions& options) {
    if (n_bets < 1) throw InvalidInputError("simulate_bankroll: n_bets must be >= 1");
    check_options(options);
    if (const auto* fixed = std::get_if<FixedFraction>(&rule)) {
        if (!(fixed->fraction >= 0.0 && fixed->fraction <= options.fraction_cap))
            throw ConfigError("bankroll: fixed fraction outside [0, cap]");
        BiasedBetEnv local = env;
        local.seed(seed);
        std::vector<double> capital;
        capital.reserve(static_cast<std::size_t>(n_bets) + 1);
        capital.push_back(options.initial_capital);
        const double f = fixed->fraction;
        for (long t = 0; t < n_bets; ++t) {
            const bool win = local.step();
            const double growth = win ? 1.0 + f * env.payout_ratio() : 1.0 - f;
            capital.push_back(capital.back() * growth);
        }
        return capital;
    }
    const auto& online = std::get<OnlineKellyRule>(rule);
    return online_kelly(env, online.window, n_bets, seed, options).capital;
}

double log_growth_rate(std::span<const double> trajectory) {
    if (trajectory.size() < 2)
        throw InvalidInputError("log_growth_rate: need at least two points");
    for (double c : trajectory)
        if (!(c > 0.0))
            throw InvalidInputError("log_growth_rate: nonpositive capital entry");
    return (std::log(trajectory.back()) - std::log(trajectory.front())) /
           static_cast<double>(trajectory.size() - 1);
}

OnlineKellyResult online_kelly(const BiasedBetEnv& env, long window, long n_bets,
                               std::uint64_t seed,
                               const BankrollOptions& options) {
    if (n_bets < 1) throw InvalidInputError("online_kelly: n_bets must be >= 1");
    if (window < 0) throw InvalidInputError("online_kelly: window must be >= 0");
    check_options(options);

    BiasedBetEnv local = env;
    local.seed(seed);

    OnlineKellyResult result;
    result.fractions.reserve(static_cast<std::size_t>(n_bets));
    result.capital.reserve(static_cast<std::size_t>(n_bets) + 1);
    result.capital.push_back(options.initial_capital);

    // Outcome history as unit-stake pnls: +payout_ratio on a win, -1 on a
    // loss.  The windowed (W, R) estimator below is estimate_from_history
    // with the sums maintained incrementally.
    std::deque<double> history;
    long wins = 0, losses = 0;
    double win_sum = 0.0, loss_sum = 0.0;

    for (long t = 0; t < n_bets; ++t) {
        double fraction = 0.0;
        if (t >= options.warmup_bets && wins > 0 && losses > 0) {
            const double w_hat = static_cast<double>(wins) /
                                 static_cast<double>(wins + losses);
            const double r_hat = (win_sum / static_cast<double>(wins)) /
                                 (loss_sum / static_cast<double>(losses));
            fraction = std::clamp(kelly_fraction(w_hat, r_hat), 0.0,
                                  options.fraction_cap);
        }
        result.fractions.push_back(fraction);

        const bool win = local.step();
        const double growth =
            win ? 1.0 + fraction * env.payout_ratio() : 1.0 - fraction;
        result.capital.push_back(result.capital.back() * growth);

        const double pnl = win ? env.payout_ratio() : -1.0;
        history.push_back(pnl);
        if (win) {
            ++wins;
            win_sum += pnl;
        } else {
            ++losses;
            loss_sum += -pnl;
        }
        if (window > 0 && static_cast<long>(history.size()) > window) {
            const double old = history.front();
            history.pop_front();
            if (old > 0.0) {
                --wins;
                win_sum -= old;
            } else {
                --losses;
                loss_sum -= -old;
            }
        }
    }
    return result;
}

}  // namespace mglab

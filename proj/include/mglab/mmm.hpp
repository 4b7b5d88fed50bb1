#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mglab/environments.hpp"
#include "mglab/errors.hpp"

namespace mglab {

// Probability density of the log-price deviation p.  Gaussian support is
// truncated at mu +- 10 sigma for integration (tail mass < 1e-22); histogram
// densities integrate their bins exactly.
class PriceDensity {
public:
    enum class Kind { Gaussian, Uniform, Histogram };

    static PriceDensity gaussian(double mu, double sigma);
    static PriceDensity uniform(double lo, double hi);
    // Bin edges strictly ascending; masses nonnegative, summing to 1 within
    // 1e-9 (then normalized exactly).
    static PriceDensity histogram(std::vector<double> edges,
                                  std::vector<double> masses);
    static PriceDensity histogram_from_samples(std::span<const double> samples,
                                               int n_bins);
    // Two-column file: bin center and mass per line; edges are midpoints
    // between neighbouring centers, outer edges mirrored.
    static PriceDensity from_file(const std::string& path);

    Kind kind() const { return kind_; }
    double support_lo() const { return lo_; }
    double support_hi() const { return hi_; }

    double pdf(double p) const;

    // Integral of eta over (-inf, x], by the module's quadrature.
    double mass_below(double x, double tol = 1e-10) const;
    // Integral of p * eta(p) over (-inf, x].
    double partial_mean_below(double x, double tol = 1e-10) const;

private:
    PriceDensity() = default;

    Kind kind_ = Kind::Gaussian;
    double mu_ = 0.0;
    double sigma_ = 1.0;
    double lo_ = 0.0;
    double hi_ = 0.0;
    std::vector<double> edges_;
    std::vector<double> masses_;
};

struct CycleRecord {
    double buy_price = 0.0;
    double sell_price = 0.0;
    double profit = 0.0;    // sell_price - buy_price, log units
    long waiting_rounds = 0;  // rounds in the cycle before the sell round
};

// Expected profit rate of the buy-below-(-a), sell-next cycle:
//   rho(a) = -I1 / (1 + I0),  I1 = int_{-inf}^{-a} p eta(p) dp,
//                             I0 = int_{-inf}^{-a} eta(p) dp.
// The denominator is always >= 1.
double profit_rate(const PriceDensity& eta, double a, double quad_tol = 1e-10);

// Withdrawal price solving rho(a) = a, found by bisection on rho(a) - a over
// an expanding bracket [0, a_hi].  Throws NoFixedPointError if no sign change
// appears before a_hi = 2^20.
double fixed_point_withdrawal(const PriceDensity& eta, double tol = 1e-8);

// Grid argmax of rho over [lo, hi]; ties go to the lowest a.  Independent
// check of the fixed-point solver: the two agree to one grid step.
double argmax_profit(const PriceDensity& eta, double lo, double hi, double step);

// Historical-average-profit withdrawal price: total profit divided by total
// rounds spent, i.e. sum(profit) / sum(waiting_rounds + 1).  For histories
// with zero waiting this is the arithmetic mean of cycle profits.  Empty
// history yields the start-up value 0.
double adaptive_withdrawal(std::span<const CycleRecord> history);

struct MmmStrategy {
    enum class Kind { Fixed, Adaptive };
    Kind kind = Kind::Fixed;
    double withdrawal = 0.0;  // fixed kind only

    static MmmStrategy fixed(double a) { return {Kind::Fixed, a}; }
    static MmmStrategy adaptive() { return {Kind::Adaptive, 0.0}; }
};

struct MmmOptions {
    // Probability of selling at each round after the buy; 1 = sell at the
    // next round, smaller values give a geometric holding delay.
    double sell_prob = 1.0;
    // Seed of the sell-delay coin (only consumed when sell_prob < 1).
    std::uint64_t delay_seed = 0;
};

// Draws one log-price per round; buys when p <= -a, sells at a later draw,
// closes the cycle and records it.  Incomplete trailing cycles are dropped.
// Environment faults are rethrown as RunError with the round index.
std::vector<CycleRecord> simulate_mmm(PriceSource& prices, const MmmStrategy& strategy,
                                      long n_rounds, const MmmOptions& options = {});

// Convenience overload: reseeds the environment for a reproducible run.
std::vector<CycleRecord> simulate_mmm(LogPriceEnv env, const MmmStrategy& strategy,
                                      long n_rounds, std::uint64_t seed,
                                      const MmmOptions& options = {});

// Total rounds covered by the completed cycles: sum(waiting_rounds + 1).
long total_cycle_rounds(std::span<const CycleRecord> history);

}  // namespace mglab

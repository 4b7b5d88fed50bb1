#include "mglab/mmm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <utility>

#include "mglab/quadrature.hpp"

namespace mglab {

PriceDensity PriceDensity::gaussian(double mu, double sigma) {
    if (!(sigma > 0.0)) throw InvalidInputError("PriceDensity: sigma must be > 0");
    PriceDensity d;
    d.kind_ = Kind::Gaussian;
    d.mu_ = mu;
    d.sigma_ = sigma;
    d.lo_ = mu - 10.0 * sigma;
    d.hi_ = mu + 10.0 * sigma;
    return d;
}

PriceDensity PriceDensity::uniform(double lo, double hi) {
    if (!(lo < hi)) throw InvalidInputError("PriceDensity: need lo < hi");
    PriceDensity d;
    d.kind_ = Kind::Uniform;
    d.lo_ = lo;
    d.hi_ = hi;
    return d;
}

PriceDensity PriceDensity::histogram(std::vector<double> edges,
                                     std::vector<double> masses) {
    if (edges.size() < 2 || masses.size() + 1 != edges.size())
        throw InvalidInputError("PriceDensity: need K+1 edges for K masses");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1]))
            throw InvalidInputError("PriceDensity: edges must be strictly ascending");
    double total = 0.0;
    for (double m : masses) {
        if (!(m >= 0.0))
            throw InvalidInputError("PriceDensity: masses must be nonnegative");
        total += m;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw InvalidInputError("PriceDensity: masses sum to " +
                                std::to_string(total) + ", expected 1");
    for (double& m : masses) m /= total;
    PriceDensity d;
    d.kind_ = Kind::Histogram;
    d.lo_ = edges.front();
    d.hi_ = edges.back();
    d.edges_ = std::move(edges);
    d.masses_ = std::move(masses);
    return d;
}

PriceDensity PriceDensity::histogram_from_samples(std::span<const double> samples,
                                                  int n_bins) {
    if (samples.empty())
        throw InvalidInputError("PriceDensity: no samples for histogram");
    if (n_bins < 1) throw InvalidInputError("PriceDensity: need n_bins >= 1");
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    double lo = *lo_it, hi = *hi_it;
    if (lo == hi) {  // degenerate sample: widen a hair
        lo -= 0.5;
        hi += 0.5;
    }
    std::vector<double> edges(static_cast<std::size_t>(n_bins) + 1);
    for (int k = 0; k <= n_bins; ++k)
        edges[k] = lo + (hi - lo) * static_cast<double>(k) / n_bins;
    std::vector<double> masses(static_cast<std::size_t>(n_bins), 0.0);
    const double unit = 1.0 / static_cast<double>(samples.size());
    for (double x : samples) {
        int bin = static_cast<int>((x - lo) / (hi - lo) * n_bins);
        bin = std::clamp(bin, 0, n_bins - 1);
        masses[static_cast<std::size_t>(bin)] += unit;
    }
    return histogram(std::move(edges), std::move(masses));
}

PriceDensity PriceDensity::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("PriceDensity: cannot open " + path);
    std::vector<double> centers, masses;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double center, mass;
        if (!(ls >> center >> mass))
            throw InvalidInputError("PriceDensity: bad row at " + path + ":" +
                                    std::to_string(line_no));
        centers.push_back(center);
        masses.push_back(mass);
    }
    if (centers.size() < 2)
        throw InvalidInputError("PriceDensity: need at least two bins in " + path);
    for (std::size_t i = 1; i < centers.size(); ++i)
        if (!(centers[i] > centers[i - 1]))
            throw InvalidInputError("PriceDensity: bin centers must ascend in " + path);
    std::vector<double> edges(centers.size() + 1);
    for (std::size_t i = 1; i < centers.size(); ++i)
        edges[i] = 0.5 * (centers[i - 1] + centers[i]);
    edges.front() = centers.front() - (edges[1] - centers.front());
    edges.back() = centers.back() + (centers.back() - edges[centers.size() - 1]);
    return histogram(std::move(edges), std::move(masses));
}

double PriceDensity::pdf(double p) const {
    switch (kind_) {
        case Kind::Gaussian: {
            const double z = (p - mu_) / sigma_;
            return std::exp(-0.5 * z * z) /
                   (sigma_ * std::sqrt(2.0 * std::numbers::pi));
        }
        case Kind::Uniform:
            return (p >= lo_ && p <= hi_) ? 1.0 / (hi_ - lo_) : 0.0;
        case Kind::Histogram: {
            if (p < lo_ || p >= hi_) return 0.0;
            const auto it = std::upper_bound(edges_.begin(), edges_.end(), p);
            const std::size_t bin =
                static_cast<std::size_t>(std::distance(edges_.begin(), it)) - 1;
            if (bin >= masses_.size()) return 0.0;
            return masses_[bin] / (edges_[bin + 1] - edges_[bin]);
        }
    }
    return 0.0;
}

double PriceDensity::mass_below(double x, double tol) const {
    if (kind_ == Kind::Histogram) {
        // exact bin sums
        double acc = 0.0;
        for (std::size_t k = 0; k < masses_.size(); ++k) {
            if (x >= edges_[k + 1]) {
                acc += masses_[k];
            } else if (x > edges_[k]) {
                acc += masses_[k] * (x - edges_[k]) / (edges_[k + 1] - edges_[k]);
                break;
            } else {
                break;
            }
        }
        return acc;
    }
    const double hi = std::min(x, hi_);
    if (hi <= lo_) return 0.0;
    return integrate([this](double p) { return pdf(p); }, lo_, hi, tol);
}

double PriceDensity::partial_mean_below(double x, double tol) const {
    if (kind_ == Kind::Histogram) {
        double acc = 0.0;
        for (std::size_t k = 0; k < masses_.size(); ++k) {
            const double w = edges_[k + 1] - edges_[k];
            const double dens = masses_[k] / w;
            if (x >= edges_[k + 1]) {
                acc += dens * 0.5 * (edges_[k + 1] * edges_[k + 1] - edges_[k] * edges_[k]);
            } else if (x > edges_[k]) {
                acc += dens * 0.5 * (x * x - edges_[k] * edges_[k]);
                break;
            } else {
                break;
            }
        }
        return acc;
    }
    const double hi = std::min(x, hi_);
    if (hi <= lo_) return 0.0;
    return integrate([this](double p) { return p * pdf(p); }, lo_, hi, tol);
}

double profit_rate(const PriceDensity& eta, double a, double quad_tol) {
    if (!std::isfinite(a)) throw InvalidInputError("profit_rate: a must be finite");
    const double numerator = -eta.partial_mean_below(-a, quad_tol);
    const double denominator = 1.0 + eta.mass_below(-a, quad_tol);
    return numerator / denominator;
}

double fixed_point_withdrawal(const PriceDensity& eta, double tol) {
    if (!(tol > 0.0))
        throw InvalidInputError("fixed_point_withdrawal: tol must be > 0");
    const auto h = [&](double a) { return profit_rate(eta, a) - a; };

    double h_lo = h(0.0);
    if (std::abs(h_lo) <= tol) return 0.0;  // rho(0) >= 0, so h(0) >= 0

    // Expand the bracket until rho(a) - a goes negative.
    double hi = 1.0;
    double h_hi = h(hi);
    while (h_hi >= 0.0) {
        hi *= 2.0;
        if (hi > static_cast<double>(1 << 20))
            throw NoFixedPointError(
                "fixed_point_withdrawal: no sign change below 2^20; "
                "pathological density");
        h_hi = h(hi);
    }

    double lo = 0.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double h_mid = h(mid);
        if (std::abs(h_mid) <= tol) return mid;
        if (h_mid > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    throw NoFixedPointError("fixed_point_withdrawal: bisection failed to reach tol");
}

double argmax_profit(const PriceDensity& eta, double lo, double hi, double step) {
    if (!(step > 0.0)) throw InvalidInputError("argmax_profit: step must be > 0");
    if (!(lo < hi)) throw InvalidInputError("argmax_profit: need lo < hi");
    double best_a = lo;
    double best_rho = -std::numeric_limits<double>::infinity();
    for (double a = lo; a <= hi + 0.5 * step; a += step) {
        const double r = profit_rate(eta, std::min(a, hi));
        if (r > best_rho) {  // strict: ties keep the lowest a
            best_rho = r;
            best_a = std::min(a, hi);
        }
    }
    return best_a;
}

double adaptive_withdrawal(std::span<const CycleRecord> history) {
    if (history.empty()) return 0.0;
    double profit = 0.0;
    double rounds = 0.0;
    for (const CycleRecord& c : history) {
        profit += c.profit;
        rounds += static_cast<double>(c.waiting_rounds + 1);
    }
    return profit / rounds;
}

long total_cycle_rounds(std::span<const CycleRecord> history) {
    long rounds = 0;
    for (const CycleRecord& c : history) rounds += c.waiting_rounds + 1;
    return rounds;
}

std::vector<CycleRecord> simulate_mmm(PriceSource& prices, const MmmStrategy& strategy,
                                      long n_rounds, const MmmOptions& options) {
    if (n_rounds < 1) throw InvalidInputError("simulate_mmm: n_rounds must be >= 1");
    if (!(options.sell_prob > 0.0 && options.sell_prob <= 1.0))
        throw InvalidInputError("simulate_mmm: sell probability must lie in (0, 1]");
    if (strategy.kind == MmmStrategy::Kind::Fixed && !std::isfinite(strategy.withdrawal))
        throw InvalidInputError("simulate_mmm: withdrawal price must be finite");

    // The sell-delay coin draws from its own stream so the price sequence
    // stays aligned with the sell_prob = 1 case.
    Rng sell_coin = Rng(options.delay_seed).substream("sell-delay");

    std::vector<CycleRecord> cycles;
    double a = strategy.kind == MmmStrategy::Kind::Fixed ? strategy.withdrawal : 0.0;
    bool holding = false;
    double buy_price = 0.0;
    long rounds_in_cycle = 0;
    double profit_sum = 0.0;
    double round_sum = 0.0;

    for (long round = 0; round < n_rounds; ++round) {
        double p;
        try {
            p = prices.next();
        } catch (const std::exception& e) {
            throw RunError("mmm: environment fault at round " +
                           std::to_string(round) + ": " + e.what());
        }
        ++rounds_in_cycle;
        if (!holding) {
            if (p <= -a) {
                holding = true;
                buy_price = p;
            }
        } else if (options.sell_prob >= 1.0 || sell_coin.next_bernoulli(options.sell_prob)) {
            CycleRecord rec;
            rec.buy_price = buy_price;
            rec.sell_price = p;
            rec.profit = p - buy_price;
            rec.waiting_rounds = rounds_in_cycle - 1;
            cycles.push_back(rec);
            holding = false;
            profit_sum += rec.profit;
            round_sum += static_cast<double>(rounds_in_cycle);
            rounds_in_cycle = 0;
            if (strategy.kind == MmmStrategy::Kind::Adaptive)
                a = profit_sum / round_sum;  // adaptive_withdrawal(cycles)
        }
    }
    return cycles;
}

std::vector<CycleRecord> simulate_mmm(LogPriceEnv env, const MmmStrategy& strategy,
                                      long n_rounds, std::uint64_t seed,
                                      const MmmOptions& options) {
    env.seed(seed);
    MmmOptions seeded = options;
    seeded.delay_seed = Rng(seed).substream("sell-delay").next_u64();
    return simulate_mmm(static_cast<PriceSource&>(env), strategy, n_rounds, seeded);
}

}  // namespace mglab

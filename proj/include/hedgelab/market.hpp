#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hedgelab/errors.hpp"
#include "hedgelab/rng.hpp"
#include "hedgelab/threads.hpp"

namespace hedgelab {

/// The simulated world: GBM drift/volatility, risk-free rate, time grid.
struct MarketParams {
    double mu = 0.0;     ///< drift per year
    double sigma = 0.2;  ///< volatility per year
    double r = 0.0;      ///< risk-free rate per year
    double dt = 1.0 / 252.0;
    int n_steps = 1;
    double s0 = 1.0;

    double maturity_years() const { return n_steps * dt; }
    double step_discount() const { return std::exp(-r * dt); }

    void validate() const {
        if (!(sigma >= 0.0)) throw ValidationError("MarketParams: sigma must be >= 0");
        if (!(s0 > 0.0)) throw ValidationError("MarketParams: s0 must be > 0");
        if (!(dt > 0.0)) throw ValidationError("MarketParams: dt must be > 0");
        if (n_steps < 1) throw ValidationError("MarketParams: n_steps must be >= 1");
        if (!std::isfinite(mu) || !std::isfinite(r))
            throw ValidationError("MarketParams: mu and r must be finite");
    }
};

/// Normalized RL observation X_t = -(mu - sigma^2/2) t + log s_t.
inline double normalize_state(int t_index, double s_t, const MarketParams& p) {
    if (!(s_t > 0.0)) throw std::domain_error("normalize_state: price must be > 0");
    if (t_index < 0 || t_index > p.n_steps)
        throw std::domain_error("normalize_state: t_index out of range");
    const double t = t_index * p.dt;
    return -(p.mu - 0.5 * p.sigma * p.sigma) * t + std::log(s_t);
}

/// A seeded batch of simulated price paths, immutable after creation.
class PathBatch {
  public:
    PathBatch(MarketParams params, int n_paths, std::uint64_t seed,
              std::vector<double> prices)
        : params_(params), n_paths_(n_paths), seed_(seed), prices_(std::move(prices)) {
        const std::size_t expected =
            static_cast<std::size_t>(n_paths_) * (params_.n_steps + 1);
        if (prices_.size() != expected)
            throw ValidationError("PathBatch: price matrix size mismatch");
        for (int p = 0; p < n_paths_; ++p) {
            if (price(p, 0) != params_.s0)
                throw ValidationError("PathBatch: path does not start at s0");
        }
        for (double v : prices_) {
            if (!(v > 0.0)) throw ValidationError("PathBatch: non-positive price entry");
        }
    }

    int n_paths() const { return n_paths_; }
    int n_steps() const { return params_.n_steps; }
    std::uint64_t seed() const { return seed_; }
    const MarketParams& params() const { return params_; }

    double price(int path, int t) const {
        return prices_[static_cast<std::size_t>(path) * (params_.n_steps + 1) + t];
    }

    std::span<const double> path(int p) const {
        return {prices_.data() + static_cast<std::size_t>(p) * (params_.n_steps + 1),
                static_cast<std::size_t>(params_.n_steps + 1)};
    }

    double normalized_state(int p, int t) const {
        return normalize_state(t, price(p, t), params_);
    }

    std::span<const double> raw() const { return prices_; }

  private:
    MarketParams params_;
    int n_paths_;
    std::uint64_t seed_;
    std::vector<double> prices_;
};

/// Simulates GBM paths with the exact log-Euler scheme
/// S_{t+1} = S_t exp((mu - sigma^2/2) dt + sigma sqrt(dt) Z).
/// Identical (params, n_paths, seed) give a bitwise identical batch,
/// independent of worker count.
inline PathBatch simulate_paths(const MarketParams& params, int n_paths,
                                std::uint64_t seed) {
    params.validate();
    if (n_paths < 1) throw ValidationError("simulate_paths: n_paths must be >= 1");

    const int n_steps = params.n_steps;
    const double drift = (params.mu - 0.5 * params.sigma * params.sigma) * params.dt;
    const double diffusion = params.sigma * std::sqrt(params.dt);
    const CounterRng rng(seed);

    std::vector<double> prices(static_cast<std::size_t>(n_paths) * (n_steps + 1));
    parallel_for_blocks(static_cast<std::size_t>(n_paths), 256,
                        [&](std::size_t lo, std::size_t hi) {
                            for (std::size_t p = lo; p < hi; ++p) {
                                double* row = prices.data() + p * (n_steps + 1);
                                row[0] = params.s0;
                                for (int t = 0; t < n_steps; ++t) {
                                    const double z = rng.normal(p, static_cast<std::uint64_t>(t));
                                    row[t + 1] = row[t] * std::exp(drift + diffusion * z);
                                }
                            }
                        });
    return PathBatch(params, n_paths, seed, std::move(prices));
}

}  // namespace hedgelab

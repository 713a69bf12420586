#pragma once

#include <Eigen/Core>
#include <cmath>
#include <span>
#include <vector>

#include "hedgelab/accounting.hpp"
#include "hedgelab/market.hpp"
#include "hedgelab/payoff.hpp"
#include "hedgelab/rng.hpp"
#include "hedgelab/threads.hpp"

namespace hedgelab {

/// Replication penalty shape: either the absolute terminal error or its
/// square; both are non-positive and zero only at exact replication.
enum class PenaltyKind { absolute, squared };

inline double penalty(double payoff_value, double portfolio_value, PenaltyKind kind) {
    const double gap = payoff_value - portfolio_value;
    return kind == PenaltyKind::absolute ? -std::abs(gap) : -gap * gap;
}

struct RlopConfig {
    MarketParams params;
    CostSpec cost;
    CallPayoff payoff;
    PenaltyKind penalty_kind = PenaltyKind::squared;
    int batch_size = 128;
    LedgerConventions conventions;

    void validate() const {
        params.validate();
        cost.validate();
        payoff.validate();
        if (batch_size < 1) throw ValidationError("RlopConfig: batch_size must be >= 1");
    }
};

/// Trainable initial capital, one entry per expiry i = 1..T. The converged
/// entry for expiry i is the model's price of the i-step option.
struct InitialWealth {
    std::vector<double> pi0;
    bool trained = false;

    void validate(int n_steps) const {
        if (static_cast<int>(pi0.size()) != n_steps)
            throw ValidationError("InitialWealth: needs one entry per expiry");
        for (double v : pi0)
            if (!std::isfinite(v))
                throw ValidationError("InitialWealth: entries must be finite");
    }
};

/// Discounted-intrinsic starting point for the wealth vector.
inline InitialWealth default_initial_wealth(const RlopConfig& cfg) {
    InitialWealth w;
    w.pi0.resize(cfg.params.n_steps);
    const double intrinsic = cfg.payoff(cfg.params.s0);
    for (int i = 1; i <= cfg.params.n_steps; ++i)
        w.pi0[i - 1] = std::exp(-cfg.params.r * i * cfg.params.dt) * intrinsic;
    return w;
}

/// Ensemble rollout: along each path the agent runs one self-financing
/// portfolio per expiry i, hedging only while t < i. Actions for t >= i do
/// not exist (the flattened layout has no slot for them).
struct RlopRollout {
    PathBatch batch;
    int rows_per_path = 0;     ///< T(T+1)/2 flattened (expiry, step) slots
    Eigen::MatrixXd features;  ///< [(paths * rows_per_path) x 3]
    Eigen::VectorXd actions;   ///< aligned with features rows
    std::vector<std::vector<HedgeLedger>> ledgers;  ///< [path][expiry-1]
    Eigen::MatrixXd rewards;         ///< [paths x T], column i-1 holds R_i
    Eigen::MatrixXd payoff_at_expiry;  ///< h(S_i) per (path, expiry)
    Eigen::MatrixXd terminal_value;    ///< Pi_i^{(i)} per (path, expiry)
    PenaltyKind penalty_kind = PenaltyKind::squared;

    /// Row of the flattened layout for (path, expiry i, step t), t < i.
    Eigen::Index row(int path, int expiry, int t) const {
        return static_cast<Eigen::Index>(path) * rows_per_path +
               static_cast<Eigen::Index>(expiry - 1) * expiry / 2 + t;
    }

    std::span<const double> actions_for(int path, int expiry) const {
        return {actions.data() + row(path, expiry, 0),
                static_cast<std::size_t>(expiry)};
    }
};

template <class Policy>
RlopRollout rlop_rollout(const Policy& policy, const InitialWealth& wealth,
                         const RlopConfig& cfg, std::uint64_t seed,
                         bool antithetic_actions = false) {
    cfg.validate();
    const int n_paths = cfg.batch_size;
    const int n_steps = cfg.params.n_steps;
    wealth.validate(n_steps);

    RlopRollout roll{
        simulate_paths(cfg.params, n_paths, child_seed(seed, detail::kPathStream)),
        0, {}, {}, {}, {}, {}, {}, cfg.penalty_kind};
    roll.rows_per_path = n_steps * (n_steps + 1) / 2;

    roll.features.resize(static_cast<Eigen::Index>(n_paths) * roll.rows_per_path, 3);
    for (int p = 0; p < n_paths; ++p)
        for (int i = 1; i <= n_steps; ++i)
            for (int t = 0; t < i; ++t) {
                const Eigen::Index r = roll.row(p, i, t);
                roll.features(r, 0) = static_cast<double>(t) / n_steps;
                roll.features(r, 1) = roll.batch.normalized_state(p, t);
                roll.features(r, 2) = (i - t) * cfg.params.dt;
            }

    Eigen::VectorXd mean, std_dev;
    policy.eval(roll.features, mean, std_dev);

    const CounterRng action_rng(child_seed(seed, detail::kActionStream));
    const double noise_sign = antithetic_actions ? -1.0 : 1.0;
    roll.actions.resize(roll.features.rows());
    for (int p = 0; p < n_paths; ++p)
        for (int i = 1; i <= n_steps; ++i)
            for (int t = 0; t < i; ++t) {
                const Eigen::Index r = roll.row(p, i, t);
                roll.actions[r] =
                    mean[r] + std_dev[r] * noise_sign *
                                  action_rng.normal(
                                      p, static_cast<std::uint64_t>(roll.row(0, i, t)));
            }

    roll.ledgers.assign(n_paths, {});
    roll.rewards.resize(n_paths, n_steps);
    roll.payoff_at_expiry.resize(n_paths, n_steps);
    roll.terminal_value.resize(n_paths, n_steps);
    parallel_for_blocks(n_paths, 16, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            auto& per_expiry = roll.ledgers[p];
            per_expiry.reserve(n_steps);
            const auto full_path = roll.batch.path(static_cast<int>(p));
            for (int i = 1; i <= n_steps; ++i) {
                MarketParams sub = cfg.params;
                sub.n_steps = i;
                const std::span<const double> path = full_path.first(i + 1);
                const std::span<const double> u{
                    roll.actions.data() + roll.row(static_cast<int>(p), i, 0),
                    static_cast<std::size_t>(i)};
                per_expiry.push_back(rlop_forward_portfolio(
                    wealth.pi0[i - 1], path, u, sub, cfg.cost, cfg.conventions));
                const double h_i = cfg.payoff(path[i]);
                const double pi_i = per_expiry.back().value[i];
                roll.payoff_at_expiry(p, i - 1) = h_i;
                roll.terminal_value(p, i - 1) = pi_i;
                roll.rewards(p, i - 1) = penalty(h_i, pi_i, cfg.penalty_kind);
            }
        }
    });
    return roll;
}

struct RlopPriceResult {
    double price = 0.0;
    double mean_penalty = 0.0;  ///< quality tag: average reward at that expiry
    bool warning = false;       ///< set when the wealth vector is untrained
};

/// The learned price is the converged initial wealth for the requested
/// expiry (1-based); a rollout under the given policy tags it with the
/// achieved replication penalty.
template <class Policy>
RlopPriceResult rlop_price(const Policy& policy, const InitialWealth& wealth,
                           const RlopConfig& cfg, int expiry_index,
                           std::uint64_t seed = 12345) {
    cfg.validate();
    wealth.validate(cfg.params.n_steps);
    if (expiry_index < 1 || expiry_index > cfg.params.n_steps)
        throw ValidationError("rlop_price: expiry_index out of range");
    const RlopRollout roll = rlop_rollout(policy, wealth, cfg, seed);
    RlopPriceResult result;
    result.price = wealth.pi0[expiry_index - 1];
    result.mean_penalty = roll.rewards.col(expiry_index - 1).mean();
    result.warning = !wealth.trained;
    return result;
}

}  // namespace hedgelab

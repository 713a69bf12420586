#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "hedgelab/accounting.hpp"
#include "hedgelab/market.hpp"
#include "hedgelab/payoff.hpp"
#include "hedgelab/rng.hpp"
#include "hedgelab/threads.hpp"

namespace hedgelab {

/// Adaptive-QLBS environment configuration: the value function weights the
/// portfolio by the diminishing factor (1 - t/T) and penalizes the
/// square-root dispersion of the portfolio at every remaining step.
struct QlbsConfig {
    MarketParams params;
    CostSpec cost;
    double lambda = 0.0;  ///< risk-aversion coefficient
    CallPayoff payoff;
    int batch_size = 256;
    LedgerConventions conventions;

    void validate() const {
        params.validate();
        cost.validate();
        payoff.validate();
        if (!(lambda >= 0.0)) throw ValidationError("QlbsConfig: lambda must be >= 0");
        if (batch_size < 2)
            throw ValidationError("QlbsConfig: batch_size must be >= 2 (dispersion)");
    }
};

/// One sampled batch: actions drawn forward, portfolios computed backward,
/// pathwise value estimates and rewards whose sums telescope exactly.
struct QlbsRollout {
    PathBatch batch;
    Eigen::MatrixXd features;  ///< [(paths * n_steps) x 3], row = p * n_steps + t
    Eigen::MatrixXd actions;   ///< [paths x n_steps]
    std::vector<HedgeLedger> ledgers;
    std::vector<double> risk;  ///< sqrt of cross-sectional Var[Pi_t], per step
    Eigen::MatrixXd v_hat;     ///< [paths x (n_steps + 1)]
    Eigen::MatrixXd rewards;   ///< [paths x n_steps]
};

namespace detail {

inline Eigen::MatrixXd qlbs_feature_matrix(const PathBatch& batch) {
    const int n_paths = batch.n_paths();
    const int n_steps = batch.n_steps();
    const MarketParams& params = batch.params();
    Eigen::MatrixXd features(static_cast<Eigen::Index>(n_paths) * n_steps, 3);
    for (int p = 0; p < n_paths; ++p) {
        for (int t = 0; t < n_steps; ++t) {
            const Eigen::Index row = static_cast<Eigen::Index>(p) * n_steps + t;
            features(row, 0) = static_cast<double>(t) / n_steps;
            features(row, 1) = batch.normalized_state(p, t);
            features(row, 2) = (n_steps - t) * params.dt;
        }
    }
    return features;
}

}  // namespace detail

/// Samples one batch. `antithetic_actions` flips the sign of every action
/// noise draw while keeping the same price paths; pairing a rollout with its
/// mirrored twin is the variance-reduction hook used by the trainer.
template <class Policy>
QlbsRollout qlbs_rollout(const Policy& policy, const QlbsConfig& cfg,
                         std::uint64_t seed, bool antithetic_actions = false) {
    cfg.validate();
    const int n_paths = cfg.batch_size;
    const int n_steps = cfg.params.n_steps;
    const double gamma = cfg.params.step_discount();

    QlbsRollout roll{
        simulate_paths(cfg.params, n_paths, child_seed(seed, detail::kPathStream)),
        {}, {}, {}, {}, {}, {}};
    roll.features = detail::qlbs_feature_matrix(roll.batch);

    Eigen::VectorXd mean, std;
    policy.eval(roll.features, mean, std);

    const CounterRng action_rng(child_seed(seed, detail::kActionStream));
    const double noise_sign = antithetic_actions ? -1.0 : 1.0;
    roll.actions.resize(n_paths, n_steps);
    for (int p = 0; p < n_paths; ++p)
        for (int t = 0; t < n_steps; ++t) {
            const Eigen::Index row = static_cast<Eigen::Index>(p) * n_steps + t;
            roll.actions(p, t) =
                mean[row] + std[row] * noise_sign * action_rng.normal(p, t);
        }

    roll.ledgers.resize(n_paths);
    parallel_for_blocks(n_paths, 64, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> u(n_steps);
        for (std::size_t p = lo; p < hi; ++p) {
            for (int t = 0; t < n_steps; ++t) u[t] = roll.actions(p, t);
            roll.ledgers[p] =
                qlbs_backward_portfolio(roll.batch.path(static_cast<int>(p)), u,
                                        cfg.payoff, cfg.params, cfg.cost,
                                        cfg.conventions);
        }
    });

    // Cross-sectional dispersion per step: shifted two-pass sample variance,
    // exact zero when the batch is degenerate (sigma = 0 worlds).
    roll.risk.assign(n_steps + 1, 0.0);
    for (int t = 0; t <= n_steps; ++t) {
        const double shift = roll.ledgers[0].value[t];
        double sum = 0.0;
        for (int p = 0; p < n_paths; ++p) sum += roll.ledgers[p].value[t] - shift;
        const double mean_d = sum / n_paths;
        double ss = 0.0;
        for (int p = 0; p < n_paths; ++p) {
            const double d = roll.ledgers[p].value[t] - shift - mean_d;
            ss += d * d;
        }
        roll.risk[t] = std::sqrt(ss / (n_paths - 1.0));
    }

    // Discounted suffix of risk terms: R_t = risk_t + gamma R_{t+1}.
    std::vector<double> risk_suffix(n_steps + 2, 0.0);
    for (int t = n_steps; t >= 0; --t)
        risk_suffix[t] = roll.risk[t] + gamma * risk_suffix[t + 1];

    roll.v_hat.resize(n_paths, n_steps + 1);
    roll.rewards.resize(n_paths, n_steps);
    for (int p = 0; p < n_paths; ++p) {
        for (int t = 0; t <= n_steps; ++t) {
            const double d_T = 1.0 - static_cast<double>(t) / n_steps;
            roll.v_hat(p, t) =
                -d_T * roll.ledgers[p].value[t] - cfg.lambda * risk_suffix[t];
        }
        for (int t = 0; t < n_steps; ++t)
            roll.rewards(p, t) = roll.v_hat(p, t) - roll.v_hat(p, t + 1);
    }
    return roll;
}

struct PriceEstimate {
    double price = 0.0;
    double std_error = 0.0;
    int n_samples = 0;
};

/// Price estimate: the negative of the mean value estimate at t = 0 over
/// freshly sampled batches, with its Monte-Carlo standard error.
template <class Policy>
PriceEstimate qlbs_price(const Policy& policy, const QlbsConfig& cfg, int n_batches,
                         std::uint64_t seed) {
    if (n_batches < 1) throw ValidationError("qlbs_price: n_batches must be >= 1");
    double sum = 0.0, sum_sq = 0.0;
    long n = 0;
    for (int b = 0; b < n_batches; ++b) {
        const QlbsRollout roll = qlbs_rollout(policy, cfg, child_seed(seed, 7001, b));
        for (int p = 0; p < cfg.batch_size; ++p) {
            const double v = roll.v_hat(p, 0);
            sum += v;
            sum_sq += v * v;
            ++n;
        }
    }
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    return {-mean, std::sqrt(var / n), static_cast<int>(n)};
}

}  // namespace hedgelab

#include "hedgelab/qlbs.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "hedgelab/policy.hpp"
#include "hedgelab/pricers.hpp"

using namespace hedgelab;

namespace {

QlbsConfig base_config() {
    QlbsConfig cfg;
    cfg.params.mu = 0.05;
    cfg.params.sigma = 0.2;
    cfg.params.r = 0.04;
    cfg.params.dt = 1.0 / 252.0;
    cfg.params.n_steps = 21;
    cfg.params.s0 = 1.0;
    cfg.payoff.strike = 1.0;
    cfg.lambda = 0.01;
    cfg.batch_size = 64;
    return cfg;
}

// Spot price reconstructed from the normalized state feature.
double spot_from_features(double t_frac, double x, const MarketParams& p) {
    const double t_years = t_frac * p.n_steps * p.dt;
    return std::exp(x + (p.mu - 0.5 * p.sigma * p.sigma) * t_years);
}

auto noisy_policy() {
    return make_callback_policy(
        [](double t, double x, double) { return 0.2 + 0.1 * std::sin(x + t); }, 0.3);
}

TEST(QlbsRollout, PathwiseRewardTelescoping) {
    const QlbsConfig cfg = base_config();
    const QlbsRollout roll = qlbs_rollout(noisy_policy(), cfg, 31);
    for (int p = 0; p < cfg.batch_size; ++p) {
        const double total = roll.rewards.row(p).sum();
        EXPECT_NEAR(total, roll.v_hat(p, 0) - roll.v_hat(p, cfg.params.n_steps), 1e-9);
    }
}

TEST(QlbsRollout, LambdaZeroValueIsMinusPortfolio) {
    QlbsConfig cfg = base_config();
    cfg.lambda = 0.0;
    const QlbsRollout roll = qlbs_rollout(noisy_policy(), cfg, 91);
    double mean_pi0 = 0.0;
    for (int p = 0; p < cfg.batch_size; ++p) {
        EXPECT_DOUBLE_EQ(roll.v_hat(p, 0), -roll.ledgers[p].value[0]);
        mean_pi0 += roll.ledgers[p].value[0];
    }
    mean_pi0 /= cfg.batch_size;
    EXPECT_NEAR(roll.v_hat.col(0).mean(), -mean_pi0, 1e-12);
}

TEST(QlbsRollout, TerminalValueIsMinusLambdaRisk) {
    const QlbsConfig cfg = base_config();
    const QlbsRollout roll = qlbs_rollout(noisy_policy(), cfg, 17);
    const int T = cfg.params.n_steps;
    for (int p = 0; p < cfg.batch_size; ++p)
        EXPECT_NEAR(roll.v_hat(p, T), -cfg.lambda * roll.risk[T], 1e-12);
    // Telescoping + terminal factor: mean total reward = mean v0 + lambda risk_T.
    const double mean_total = roll.rewards.sum() / cfg.batch_size;
    EXPECT_NEAR(mean_total, roll.v_hat.col(0).mean() + cfg.lambda * roll.risk[T], 1e-9);
}

TEST(QlbsRollout, MeanValueStrictlyDecreasingInLambda) {
    QlbsConfig cfg = base_config();
    double prev = std::numeric_limits<double>::infinity();
    double risk_sum = 0.0;
    for (double lambda : {0.0, 0.001, 0.01, 0.1}) {
        cfg.lambda = lambda;
        const QlbsRollout roll = qlbs_rollout(noisy_policy(), cfg, 55);
        risk_sum = std::accumulate(roll.risk.begin(), roll.risk.end(), 0.0);
        const double v0 = roll.v_hat.col(0).mean();
        EXPECT_LT(v0, prev);
        prev = v0;
    }
    EXPECT_GT(risk_sum, 0.0);  // strictness premise
}

TEST(QlbsRollout, DeterministicWorldHasZeroRisk) {
    QlbsConfig cfg = base_config();
    cfg.params.sigma = 0.0;
    cfg.lambda = 0.5;
    const QlbsRollout roll = qlbs_rollout(zero_policy(), cfg, 3);
    for (double r : roll.risk) EXPECT_DOUBLE_EQ(r, 0.0);
    for (int p = 0; p < cfg.batch_size; ++p)
        for (int t = 0; t <= cfg.params.n_steps; ++t) {
            const double d = 1.0 - static_cast<double>(t) / cfg.params.n_steps;
            EXPECT_DOUBLE_EQ(roll.v_hat(p, t), -d * roll.ledgers[p].value[t]);
        }
}

TEST(QlbsRollout, RiskInvariantUnderPathPermutation) {
    const QlbsConfig cfg = base_config();
    const QlbsRollout roll = qlbs_rollout(noisy_policy(), cfg, 77);
    const int T = cfg.params.n_steps;
    for (int t = 0; t <= T; ++t) {
        // Recompute the dispersion scanning paths in reverse order.
        const double shift = roll.ledgers[cfg.batch_size - 1].value[t];
        double sum = 0.0;
        for (int p = cfg.batch_size - 1; p >= 0; --p)
            sum += roll.ledgers[p].value[t] - shift;
        const double mean = sum / cfg.batch_size;
        double ss = 0.0;
        for (int p = cfg.batch_size - 1; p >= 0; --p) {
            const double d = roll.ledgers[p].value[t] - shift - mean;
            ss += d * d;
        }
        EXPECT_NEAR(std::sqrt(ss / (cfg.batch_size - 1.0)), roll.risk[t], 1e-12);
        EXPECT_GE(roll.risk[t], 0.0);
    }
}

TEST(QlbsRollout, SeedDeterminism) {
    const QlbsConfig cfg = base_config();
    const QlbsRollout a = qlbs_rollout(noisy_policy(), cfg, 123);
    const QlbsRollout b = qlbs_rollout(noisy_policy(), cfg, 123);
    ASSERT_EQ(a.actions, b.actions);
    ASSERT_EQ(a.v_hat, b.v_hat);
}

TEST(QlbsPrice, ZeroPolicyZeroRatePriceIsMeanPayoff) {
    QlbsConfig cfg = base_config();
    cfg.lambda = 0.0;
    cfg.params.r = 0.0;
    cfg.params.mu = 0.06;
    cfg.batch_size = 4096;
    const QlbsRollout roll = qlbs_rollout(zero_policy(), cfg, 41);
    double mean_payoff = 0.0;
    for (int p = 0; p < cfg.batch_size; ++p)
        mean_payoff += cfg.payoff(roll.batch.price(p, cfg.params.n_steps));
    mean_payoff /= cfg.batch_size;
    EXPECT_NEAR(-roll.v_hat.col(0).mean(), mean_payoff, 1e-12);

    // Cross-check against the closed-form undiscounted expected payoff.
    const PriceEstimate est = qlbs_price(zero_policy(), cfg, 4, 41);
    const double T = cfg.params.maturity_years();
    const double fwd = cfg.params.s0 * std::exp(cfg.params.mu * T);
    const double vol = cfg.params.sigma * std::sqrt(T);
    const double d1 = (std::log(fwd / cfg.payoff.strike) + 0.5 * vol * vol) / vol;
    const double expected = fwd * normal_cdf(d1) - cfg.payoff.strike * normal_cdf(d1 - vol);
    EXPECT_NEAR(est.price, expected, 3.0 * est.std_error);
}

// Replication limit: with Black-Scholes deltas at a fine step, epsilon = 0
// and lambda = 0, the QLBS price recovers the Black-Scholes premium.
TEST(QlbsPrice, BsDeltaPolicyReplicationLimit) {
    QlbsConfig cfg = base_config();
    cfg.lambda = 0.0;
    cfg.params.mu = 0.07;
    cfg.params.r = 0.03;
    cfg.params.dt = 1.0 / 2520.0;
    cfg.params.n_steps = 630;  // quarter year
    cfg.batch_size = 512;
    const MarketParams mp = cfg.params;
    const double strike = cfg.payoff.strike;
    const auto policy = make_callback_policy([mp, strike](double t, double x, double tte) {
        const double s = spot_from_features(t, x, mp);
        return bs_delta({strike, tte, s, mp.r}, mp.sigma);
    });
    const PriceEstimate est = qlbs_price(policy, cfg, 1, 99);
    const double bs =
        bs_price({strike, mp.maturity_years(), mp.s0, mp.r}, mp.sigma);
    EXPECT_NEAR(est.price, bs, 0.01 * bs);
}

TEST(QlbsConfig, Validation) {
    QlbsConfig cfg = base_config();
    cfg.batch_size = 1;
    EXPECT_THROW(qlbs_rollout(zero_policy(), cfg, 1), ValidationError);
    cfg = base_config();
    cfg.lambda = -0.1;
    EXPECT_THROW(qlbs_rollout(zero_policy(), cfg, 1), ValidationError);
}

}  // namespace

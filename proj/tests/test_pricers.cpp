#include "hedgelab/pricers.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "hedgelab/rng.hpp"
#include "oracles.hpp"

using namespace hedgelab;
using hedgelab::testing::bs_quadrature_oracle;
using hedgelab::testing::jd_mc_oracle;

namespace {

TEST(BsPrice, ZeroVolIsDiscountedIntrinsic) {
    EXPECT_DOUBLE_EQ(bs_price({90.0, 1.0, 100.0, 0.0}, 0.0), 10.0);
    EXPECT_DOUBLE_EQ(bs_price({110.0, 1.0, 100.0, 0.0}, 0.0), 0.0);
    const EuroCall opt{100.0, 2.0, 100.0, 0.05};
    EXPECT_DOUBLE_EQ(bs_price(opt, 0.0), 100.0 - 100.0 * std::exp(-0.1));
}

TEST(BsPrice, MatchesQuadratureOracle) {
    const EuroCall atm{100.0, 1.0, 100.0, 0.05};
    const double oracle = bs_quadrature_oracle(atm, 0.2);
    EXPECT_NEAR(oracle, 10.4506, 5e-5);  // sanity anchor for the oracle itself
    EXPECT_NEAR(bs_price(atm, 0.2), oracle, 1e-8);

    const CounterRng rng(404);
    for (int i = 0; i < 300; ++i) {
        const double strike = 50.0 + 100.0 * rng.uniform(0, i);
        const double tau = 0.02 + 2.0 * rng.uniform(1, i);
        const double r = -0.01 + 0.11 * rng.uniform(2, i);
        const double sigma = 0.05 + 0.75 * rng.uniform(3, i);
        const EuroCall opt{strike, tau, 100.0, r};
        EXPECT_NEAR(bs_price(opt, sigma), bs_quadrature_oracle(opt, sigma), 1e-8)
            << "K=" << strike << " tau=" << tau << " r=" << r << " sigma=" << sigma;
    }
}

TEST(BsPrice, VegaPositivity) {
    const EuroCall opt{105.0, 0.7, 100.0, 0.02};
    EXPECT_GT(bs_price(opt, 0.3), bs_price(opt, 0.2));
}

TEST(BsPrice, MonotoneInMaturityAndStrike) {
    const CounterRng rng(11);
    for (int i = 0; i < 200; ++i) {
        const double sigma = 0.1 + 0.5 * rng.uniform(0, i);
        const double r = 0.08 * rng.uniform(1, i);
        const double k = 70.0 + 60.0 * rng.uniform(2, i);
        const double tau = 0.1 + rng.uniform(3, i);
        EXPECT_LE(bs_price({k, tau, 100.0, r}, sigma),
                  bs_price({k, tau * 1.5, 100.0, r}, sigma) + 1e-12);
        EXPECT_GE(bs_price({k, tau, 100.0, r}, sigma),
                  bs_price({k + 5.0, tau, 100.0, r}, sigma) - 1e-12);
    }
}

TEST(BsDelta, LimitsAndBounds) {
    EXPECT_NEAR(bs_delta({100.0, 0.5, 300.0, 0.01}, 0.05), 1.0, 1e-9);
    EXPECT_NEAR(bs_delta({100.0, 0.5, 30.0, 0.01}, 0.05), 0.0, 1e-9);
    const CounterRng rng(12);
    for (int i = 0; i < 200; ++i) {
        const double d = bs_delta({80.0 + 40.0 * rng.uniform(0, i), 0.03 + rng.uniform(1, i),
                                   100.0, 0.05 * rng.uniform(2, i)},
                                  0.05 + 0.6 * rng.uniform(3, i));
        EXPECT_GE(d, 0.0);
        EXPECT_LE(d, 1.0);
    }
}

TEST(BsDelta, MatchesCentralDifferenceOfPrice) {
    const CounterRng rng(13);
    for (int i = 0; i < 100; ++i) {
        const EuroCall opt{80.0 + 40.0 * rng.uniform(0, i), 0.1 + rng.uniform(1, i),
                           100.0, 0.06 * rng.uniform(2, i)};
        const double sigma = 0.1 + 0.4 * rng.uniform(3, i);
        const double fd =
            numeric_delta([&](const EuroCall& o) { return bs_price(o, sigma); }, opt);
        EXPECT_NEAR(fd, bs_delta(opt, sigma), 1e-6);
    }
}

TEST(JdPrice, ZeroIntensityCollapsesToBlackScholes) {
    const EuroCall opt{100.0, 0.5, 100.0, 0.03};
    JDParams p;
    p.sigma = 0.25;
    p.jump_intensity = 0.0;
    p.jump_mean = -0.2;
    p.jump_vol = 0.3;
    EXPECT_NEAR(jd_price(opt, p), bs_price(opt, 0.25), 1e-12);
}

TEST(JdPrice, DegenerateJumpsAreNoOps) {
    const EuroCall opt{95.0, 0.75, 100.0, 0.02};
    JDParams p;
    p.sigma = 0.2;
    p.jump_intensity = 1.5;
    p.jump_mean = 0.0;
    p.jump_vol = 0.0;
    EXPECT_NEAR(jd_price(opt, p), bs_price(opt, 0.2), 1e-10);
}

TEST(JdPrice, MatchesMonteCarloOracle) {
    const EuroCall opt{100.0, 0.5, 100.0, 0.03};
    JDParams p;
    p.sigma = 0.2;
    p.jump_intensity = 0.5;
    p.jump_mean = -0.1;
    p.jump_vol = 0.2;
    const auto mc = jd_mc_oracle(opt, p, 500000, 777);
    EXPECT_NEAR(jd_price(opt, p), mc.value, 3.0 * mc.std_error);
}

TEST(JdPrice, NestsBlackScholesFromBelowInBounds) {
    const CounterRng rng(15);
    for (int i = 0; i < 50; ++i) {
        const EuroCall opt{85.0 + 30.0 * rng.uniform(0, i), 0.1 + 0.6 * rng.uniform(1, i),
                           100.0, 0.04};
        JDParams p;
        p.sigma = 0.15 + 0.2 * rng.uniform(2, i);
        p.jump_intensity = 2.0 * rng.uniform(3, i);
        p.jump_mean = -0.3 + 0.4 * rng.uniform(4, i);
        p.jump_vol = 0.4 * rng.uniform(5, i);
        const double c = jd_price(opt, p);
        EXPECT_GE(c, std::max(opt.spot - opt.discounted_strike(), 0.0) - 1e-12);
        EXPECT_LE(c, opt.spot + 1e-12);
    }
}

TEST(SvPrice, DegenerateHestonMatchesBlackScholes) {
    const EuroCall opt{100.0, 0.5, 100.0, 0.04};
    SVParams p;
    p.v0 = 0.04;
    p.theta = 0.04;
    p.kappa = 2.0;
    p.xi = 1e-3;  // exercises the integral path, not the analytic limit
    p.rho = 0.0;
    EXPECT_NEAR(sv_price(opt, p), bs_price(opt, 0.2), 1e-3);
    p.xi = 0.0;  // analytic limit branch
    EXPECT_NEAR(sv_price(opt, p), bs_price(opt, 0.2), 1e-9);
}

TEST(SvPrice, RespectsNoArbitrageBounds) {
    const CounterRng rng(16);
    for (int i = 0; i < 40; ++i) {
        const EuroCall opt{80.0 + 40.0 * rng.uniform(0, i), 0.05 + 1.2 * rng.uniform(1, i),
                           100.0, 0.06 * rng.uniform(2, i)};
        SVParams p;
        p.v0 = 0.01 + 0.2 * rng.uniform(3, i);
        p.kappa = 0.5 + 4.0 * rng.uniform(4, i);
        p.theta = 0.01 + 0.2 * rng.uniform(5, i);
        p.xi = 0.05 + 0.9 * rng.uniform(6, i);
        p.rho = -0.9 + 1.4 * rng.uniform(7, i);
        const double c = sv_price(opt, p);
        EXPECT_GE(c, std::max(opt.spot - opt.discounted_strike(), 0.0) - 1e-7);
        EXPECT_LE(c, opt.spot + 1e-7);
    }
}

TEST(SvPrice, PutCallParityFromSameCharacteristicFunction) {
    SVParams p;
    p.v0 = 0.05;
    p.kappa = 1.5;
    p.theta = 0.06;
    p.xi = 0.6;
    p.rho = -0.7;
    for (double strike : {85.0, 100.0, 115.0}) {
        const EuroCall opt{strike, 0.6, 100.0, 0.03};
        const double call = sv_price(opt, p);
        const double put = sv_put(opt, p);
        EXPECT_NEAR(call - put, opt.spot - opt.discounted_strike(), 1e-8);
    }
}

TEST(ImpliedVol, RoundTrip) {
    const EuroCall opt{100.0, 0.5, 100.0, 0.02};
    const double price = bs_price(opt, 0.2);
    EXPECT_NEAR(implied_vol(opt, price), 0.2, 1e-8);
}

TEST(ImpliedVol, IntrinsicPriceIsOutOfDomain) {
    const EuroCall opt{50.0, 0.25, 100.0, 0.05};  // deep ITM
    const double intrinsic = opt.spot - opt.discounted_strike();
    EXPECT_THROW(implied_vol(opt, intrinsic), std::domain_error);
    EXPECT_THROW(implied_vol(opt, opt.spot), std::domain_error);
    EXPECT_THROW(implied_vol(opt, opt.spot * 1.5), std::domain_error);
}

TEST(ImpliedVol, RandomGridRoundTripUnderTolerance) {
    const CounterRng rng(17);
    double worst = 0.0;
    int used = 0;
    for (int i = 0; i < 1000; ++i) {
        const double sigma = 0.05 + 0.95 * rng.uniform(0, i);
        const double moneyness = 0.7 + 0.6 * rng.uniform(1, i);
        const double tau = 0.05 + 1.5 * rng.uniform(2, i);
        const EuroCall opt{100.0 * moneyness, tau, 100.0, 0.03};
        const double price = bs_price(opt, sigma);
        // Quotes this far below solver resolution are dropped in calibration.
        if (price - std::max(opt.spot - opt.discounted_strike(), 0.0) < 1e-9 * opt.spot)
            continue;
        const double back = implied_vol(opt, price);
        worst = std::max(worst, std::abs(back - sigma));
        ++used;
    }
    EXPECT_GT(used, 900);
    EXPECT_LT(worst, 1e-7);
}

TEST(NumericDelta, ConstantAndLinearPriceFunctions) {
    const EuroCall opt{100.0, 0.5, 100.0, 0.02};
    EXPECT_DOUBLE_EQ(numeric_delta([](const EuroCall&) { return 7.0; }, opt), 0.0);
    const double b = 0.37;
    EXPECT_NEAR(numeric_delta([&](const EuroCall& o) { return 2.0 + b * o.spot; }, opt),
                b, 1e-10);
}

TEST(Pricers, InputValidation) {
    EXPECT_THROW(bs_price({-1.0, 1.0, 100.0, 0.0}, 0.2), ValidationError);
    EXPECT_THROW(bs_price({100.0, 0.0, 100.0, 0.0}, 0.2), ValidationError);
    EXPECT_THROW(bs_price({100.0, 1.0, 100.0, 0.0}, -0.2), ValidationError);
    JDParams jd;
    jd.jump_intensity = -1.0;
    EXPECT_THROW(jd_price({100.0, 1.0, 100.0, 0.0}, jd), ValidationError);
    SVParams sv;
    sv.rho = 2.0;
    EXPECT_THROW(sv_price({100.0, 1.0, 100.0, 0.0}, sv), ValidationError);
}

}  // namespace

#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <limits>

#include "hedgelab/errors.hpp"
#include "hedgelab/quadrature.hpp"
#include "hedgelab/rng.hpp"

namespace hedgelab {

/// A European call quote context: strike, maturity, spot and rate.
struct EuroCall {
    double strike;
    double tau;  ///< time to maturity in years
    double spot;
    double r;

    double discounted_strike() const { return strike * std::exp(-r * tau); }
    double forward() const { return spot * std::exp(r * tau); }

    void validate() const {
        if (!(strike > 0.0)) throw ValidationError("EuroCall: strike must be > 0");
        if (!(tau > 0.0)) throw ValidationError("EuroCall: tau must be > 0");
        if (!(spot > 0.0)) throw ValidationError("EuroCall: spot must be > 0");
        if (!std::isfinite(r)) throw ValidationError("EuroCall: rate must be finite");
    }
};

/// Merton jump-diffusion parameters (lognormal jumps).
struct JDParams {
    double sigma = 0.2;
    double jump_intensity = 0.0;  ///< jumps per year
    double jump_mean = 0.0;       ///< mean of log jump size
    double jump_vol = 0.0;        ///< std of log jump size

    void validate() const {
        if (!(sigma >= 0.0)) throw ValidationError("JDParams: sigma must be >= 0");
        if (!(jump_intensity >= 0.0))
            throw ValidationError("JDParams: jump_intensity must be >= 0");
        if (!(jump_vol >= 0.0)) throw ValidationError("JDParams: jump_vol must be >= 0");
    }
};

/// Heston stochastic-volatility parameters.
struct SVParams {
    double v0 = 0.04;
    double kappa = 1.0;
    double theta = 0.04;
    double xi = 0.5;
    double rho = -0.5;

    void validate() const {
        if (!(v0 > 0.0)) throw ValidationError("SVParams: v0 must be > 0");
        if (!(kappa > 0.0)) throw ValidationError("SVParams: kappa must be > 0");
        if (!(theta > 0.0)) throw ValidationError("SVParams: theta must be > 0");
        if (!(xi >= 0.0)) throw ValidationError("SVParams: xi must be >= 0");
        if (!(rho >= -1.0 && rho <= 1.0))
            throw ValidationError("SVParams: rho must be in [-1, 1]");
    }
};

inline double bs_price(const EuroCall& opt, double sigma) {
    opt.validate();
    if (!(sigma >= 0.0)) throw ValidationError("bs_price: sigma must be >= 0");
    const double df_strike = opt.discounted_strike();
    const double vol = sigma * std::sqrt(opt.tau);
    if (vol < 1e-12) return std::max(opt.spot - df_strike, 0.0);
    const double d1 = (std::log(opt.spot / opt.strike) + (opt.r + 0.5 * sigma * sigma) * opt.tau) / vol;
    const double d2 = d1 - vol;
    return opt.spot * normal_cdf(d1) - df_strike * normal_cdf(d2);
}

inline double bs_delta(const EuroCall& opt, double sigma) {
    opt.validate();
    const double vol = sigma * std::sqrt(opt.tau);
    if (vol < 1e-12) return opt.spot > opt.discounted_strike() ? 1.0 : 0.0;
    const double d1 = (std::log(opt.spot / opt.strike) + (opt.r + 0.5 * sigma * sigma) * opt.tau) / vol;
    return normal_cdf(d1);
}

inline double bs_vega(const EuroCall& opt, double sigma) {
    const double vol = sigma * std::sqrt(opt.tau);
    if (vol < 1e-12) return 0.0;
    const double d1 = (std::log(opt.spot / opt.strike) + (opt.r + 0.5 * sigma * sigma) * opt.tau) / vol;
    return opt.spot * normal_pdf(d1) * std::sqrt(opt.tau);
}

/// Merton series price: Poisson mixture over jump counts of adjusted
/// Black-Scholes terms, truncated when the remaining tail mass < 1e-12.
inline double jd_price(const EuroCall& opt, const JDParams& p) {
    opt.validate();
    p.validate();
    if (p.jump_intensity == 0.0) return bs_price(opt, p.sigma);

    const double jump_drift = p.jump_mean + 0.5 * p.jump_vol * p.jump_vol;
    const double kappa_bar = std::exp(jump_drift) - 1.0;
    const double lambda_prime = p.jump_intensity * (1.0 + kappa_bar) * opt.tau;

    double price = 0.0;
    double weight = std::exp(-lambda_prime);  // Poisson(0) mass
    double cumulative = 0.0;
    for (int n = 0;; ++n) {
        const double sigma_n =
            std::sqrt(p.sigma * p.sigma + n * p.jump_vol * p.jump_vol / opt.tau);
        EuroCall adjusted = opt;
        adjusted.r = opt.r - p.jump_intensity * kappa_bar + n * jump_drift / opt.tau;
        price += weight * bs_price(adjusted, sigma_n);
        cumulative += weight;
        if (1.0 - cumulative < 1e-12) break;
        if (n >= 200) throw NumericError("jd_price: series failed to converge");
        weight *= lambda_prime / (n + 1);
    }
    return price;
}

namespace detail {

// Heston characteristic-function probabilities P1, P2 in the trap-free
// parameterization; the price combines them as one damped integral.
struct HestonIntegrand {
    const EuroCall& opt;
    const SVParams& p;

    std::complex<double> f(double u, int j) const {
        const std::complex<double> i(0.0, 1.0);
        const double uj = j == 1 ? 0.5 : -0.5;
        const double bj = j == 1 ? p.kappa - p.rho * p.xi : p.kappa;
        const std::complex<double> iu = i * u;
        const std::complex<double> beta = bj - p.rho * p.xi * iu;
        const std::complex<double> d =
            std::sqrt(beta * beta - p.xi * p.xi * (2.0 * uj * iu - u * u));
        const std::complex<double> c = (beta - d) / (beta + d);
        const std::complex<double> e_dt = std::exp(-d * opt.tau);
        const std::complex<double> big_d =
            (beta - d) / (p.xi * p.xi) * (1.0 - e_dt) / (1.0 - c * e_dt);
        const std::complex<double> big_c =
            opt.r * iu * opt.tau +
            p.kappa * p.theta / (p.xi * p.xi) *
                ((beta - d) * opt.tau - 2.0 * std::log((1.0 - c * e_dt) / (1.0 - c)));
        return std::exp(big_c + big_d * p.v0 + iu * std::log(opt.spot));
    }

    double operator()(double u) const {
        const std::complex<double> i(0.0, 1.0);
        const std::complex<double> phase = std::exp(-i * u * std::log(opt.strike));
        const std::complex<double> combined =
            phase * (opt.spot * f(u, 1) - opt.discounted_strike() * f(u, 2)) / (i * u);
        return combined.real();
    }

    // Integrands for the individual probabilities, used by the put.
    double pj(double u, int j) const {
        const std::complex<double> i(0.0, 1.0);
        const std::complex<double> phase = std::exp(-i * u * std::log(opt.strike));
        return (phase * f(u, j) / (i * u)).real();
    }
};

// Extends the integral over [0, inf) in blocks until the tail contribution
// falls below tail_tol.
template <class Fn>
double integrate_to_infinity(const Fn& f, double block, double abs_tol,
                             double tail_tol) {
    double total = integrate_adaptive(f, 1e-10, block, abs_tol);
    double lo = block;
    for (int k = 0; k < 12; ++k) {
        const double piece = integrate_adaptive(f, lo, lo + block, abs_tol);
        total += piece;
        lo += block;
        if (std::abs(piece) < tail_tol) return total;
    }
    throw NumericError("sv_price: characteristic-function integral tail did not decay");
}

// xi -> 0 limit: variance follows the deterministic mean-reversion path, so
// the price is Black-Scholes at the average variance.
inline double heston_degenerate_sigma(const EuroCall& opt, const SVParams& p) {
    const double kt = p.kappa * opt.tau;
    const double avg_var = p.theta + (p.v0 - p.theta) * (1.0 - std::exp(-kt)) / kt;
    return std::sqrt(avg_var);
}

}  // namespace detail

/// Heston semi-analytic call price via a single damped integral of the
/// characteristic function; absolute quadrature tolerance 1e-8.
inline double sv_price(const EuroCall& opt, const SVParams& p) {
    opt.validate();
    p.validate();
    if (p.xi < 1e-8) return bs_price(opt, detail::heston_degenerate_sigma(opt, p));

    const detail::HestonIntegrand integrand{opt, p};
    const double integral =
        detail::integrate_to_infinity(integrand, 200.0, 1e-9, 1e-10);
    const double price =
        0.5 * (opt.spot - opt.discounted_strike()) + integral / M_PI;
    return price;
}

/// Heston put priced from the same characteristic function (via the
/// individual probabilities, not via call parity).
inline double sv_put(const EuroCall& opt, const SVParams& p) {
    opt.validate();
    p.validate();
    if (p.xi < 1e-8) {
        const double sigma = detail::heston_degenerate_sigma(opt, p);
        const double call = bs_price(opt, sigma);
        return call - opt.spot + opt.discounted_strike();
    }
    const detail::HestonIntegrand integrand{opt, p};
    const double p1 =
        0.5 + detail::integrate_to_infinity([&](double u) { return integrand.pj(u, 1); },
                                            200.0, 1e-9, 1e-10) /
                  M_PI;
    const double p2 =
        0.5 + detail::integrate_to_infinity([&](double u) { return integrand.pj(u, 2); },
                                            200.0, 1e-9, 1e-10) /
                  M_PI;
    return opt.discounted_strike() * (1.0 - p2) - opt.spot * (1.0 - p1);
}

/// Black-Scholes implied volatility: bracketed bisection to localize,
/// Newton to polish. Throws std::domain_error when the price violates the
/// no-arbitrage bounds (callers drop such quotes).
inline double implied_vol(const EuroCall& opt, double price) {
    opt.validate();
    const double intrinsic = std::max(opt.spot - opt.discounted_strike(), 0.0);
    if (!(price > intrinsic) || !(price < opt.spot))
        throw std::domain_error("implied_vol: price outside no-arbitrage bounds");

    const double tol = 1e-10 * opt.spot;
    double lo = 1e-9, hi = 1.0;
    while (bs_price(opt, hi) < price) {
        hi *= 2.0;
        if (hi > 1024.0) throw std::domain_error("implied_vol: no bracketing volatility");
    }
    double sigma = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double diff = bs_price(opt, sigma) - price;
        // Converge in sigma as well as price, so low-vega wings still invert.
        if (std::abs(diff) < tol && (hi - lo < 1e-9 || diff == 0.0)) break;
        if (diff > 0.0)
            hi = sigma;
        else if (diff < 0.0)
            lo = sigma;
        else
            break;
        // Newton step when it stays inside the bracket, bisection otherwise.
        const double vega = bs_vega(opt, sigma);
        double next = sigma - (vega > 1e-12 ? diff / vega : 0.0);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        sigma = next;
        if (hi - lo < 1e-13) break;
    }
    return sigma;
}

/// Central-difference delta with a relative spot bump; exact for prices
/// linear in spot.
template <class PriceFn>
double numeric_delta(const PriceFn& price_fn, const EuroCall& opt,
                     double h_rel = 1e-4) {
    opt.validate();
    const double h = h_rel * opt.spot;
    EuroCall up = opt, down = opt;
    up.spot = opt.spot + h;
    down.spot = opt.spot - h;
    return (price_fn(up) - price_fn(down)) / (2.0 * h);
}

}  // namespace hedgelab

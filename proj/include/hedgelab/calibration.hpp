#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hedgelab/data_io.hpp"
#include "hedgelab/errors.hpp"
#include "hedgelab/nelder_mead.hpp"
#include "hedgelab/pricers.hpp"
#include "hedgelab/rng.hpp"

namespace hedgelab {

// ---------------------------------------------------------------------------
// Daily slices and maturity buckets
// ---------------------------------------------------------------------------

/// Maturity buckets centered at 14/28/56 days with midpoint boundaries
/// 21/42 (left-closed) inside the retained [3, 70] calendar-day window.
struct BucketSpec {
    static constexpr int centers[3] = {14, 28, 56};
    static constexpr int min_dte = 3;
    static constexpr int max_dte = 70;

    static int bucket_for_dte(int dte) {
        if (dte < min_dte || dte > max_dte) return -1;
        if (dte < 21) return 14;
        if (dte < 42) return 28;
        return 56;
    }

    static std::string label(int center) { return std::to_string(center) + "d"; }
};

struct Quote {
    double strike = 0.0;
    double tau_years = 0.0;
    double mid = 0.0;
    double forward = 0.0;
    double moneyness = 0.0;  ///< K / F
    double market_iv = 0.0;
};

/// One trading day's cross-section of call quotes for one maturity bucket.
struct OptionSlice {
    std::string date;
    std::string asset;
    double spot = 0.0;
    double rate = 0.0;
    int bucket_days = 0;
    std::vector<Quote> quotes;
    int n_dropped_bounds = 0;  ///< quotes violating no-arbitrage bounds

    bool empty() const { return quotes.empty(); }
};

/// Filters one day's rows into a bucket slice with derived forward,
/// moneyness and market implied vol; bound-violating quotes are dropped
/// and counted.
inline OptionSlice bucket_slice(std::span<const ChainRow> day_rows, int bucket_center) {
    OptionSlice slice;
    slice.bucket_days = bucket_center;
    if (day_rows.empty()) return slice;
    slice.date = day_rows.front().date;
    slice.asset = day_rows.front().asset;
    slice.spot = day_rows.front().spot;
    slice.rate = day_rows.front().rate;

    for (const auto& row : day_rows) {
        const int dte = days_between(row.date, row.expiry);
        if (BucketSpec::bucket_for_dte(dte) != bucket_center) continue;
        Quote q;
        q.strike = row.strike;
        q.tau_years = dte / 365.0;
        q.mid = row.call_mid;
        q.forward = slice.spot * std::exp(slice.rate * q.tau_years);
        q.moneyness = q.strike / q.forward;
        try {
            q.market_iv =
                implied_vol({q.strike, q.tau_years, slice.spot, slice.rate}, q.mid);
        } catch (const std::domain_error&) {
            ++slice.n_dropped_bounds;
            continue;
        }
        slice.quotes.push_back(q);
    }
    return slice;
}

// ---------------------------------------------------------------------------
// Parametric daily calibration
// ---------------------------------------------------------------------------

enum class ParametricModel { bs, jd, sv };

inline const char* model_name(ParametricModel m) {
    switch (m) {
        case ParametricModel::bs: return "bs";
        case ParametricModel::jd: return "jd";
        default: return "sv";
    }
}

/// Declared parameter boxes for the daily least-squares fits.
struct FitSettings {
    std::uint64_t seed = 7;
    int multi_starts = 5;
    double sigma_lo = 0.01, sigma_hi = 3.0;
    double jd_intensity_hi = 5.0;
    double jd_mean_lo = -1.0, jd_mean_hi = 1.0;
    double jd_vol_hi = 2.0;
    double sv_var_lo = 1e-4, sv_var_hi = 4.0;
    double sv_kappa_lo = 0.01, sv_kappa_hi = 20.0;
    double sv_xi_hi = 5.0;
    double sv_rho_cap = 0.999;
};

struct FitResult {
    std::string model;
    std::vector<double> params;
    double objective = std::numeric_limits<double>::infinity();
    bool converged = false;
    double ivrmse_1e3 = std::numeric_limits<double>::quiet_NaN();
    int n_quotes = 0;
    bool boundary_hit = false;
    std::string status;  ///< "ok" | "empty_slice" | "no_convergence"
};

struct IvrmseResult {
    std::optional<double> value_1e3;
    int n_used = 0;
    int n_dropped = 0;
};

/// Equal-weight implied-volatility RMSE on the 10^3 scale; model prices
/// outside arbitrage bounds are dropped and counted.
inline IvrmseResult ivrmse(const OptionSlice& slice,
                           std::span<const double> model_prices) {
    if (model_prices.size() != slice.quotes.size())
        throw ValidationError("ivrmse: price vector length mismatch");
    IvrmseResult result;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < slice.quotes.size(); ++i) {
        const Quote& q = slice.quotes[i];
        try {
            const double model_iv = implied_vol(
                {q.strike, q.tau_years, slice.spot, slice.rate}, model_prices[i]);
            const double diff = model_iv - q.market_iv;
            sum_sq += diff * diff;
            ++result.n_used;
        } catch (const std::domain_error&) {
            ++result.n_dropped;
        }
    }
    if (result.n_used > 0) result.value_1e3 = 1000.0 * std::sqrt(sum_sq / result.n_used);
    return result;
}

namespace detail {

template <class PriceFn>
double price_objective(const OptionSlice& slice, const PriceFn& price_fn) {
    double total = 0.0;
    for (const Quote& q : slice.quotes) {
        double price;
        try {
            price = price_fn(q);
        } catch (const NumericError&) {
            return 1e100;  // reject numerically failing parameter points
        }
        if (!std::isfinite(price)) return 1e100;
        const double diff = price - q.mid;
        total += diff * diff;
    }
    return total;
}

inline double slice_price(const OptionSlice& slice, ParametricModel model,
                          const Eigen::VectorXd& x, const Quote& q) {
    const EuroCall opt{q.strike, q.tau_years, slice.spot, slice.rate};
    switch (model) {
        case ParametricModel::bs:
            return bs_price(opt, x[0]);
        case ParametricModel::jd: {
            JDParams p;
            p.sigma = x[0];
            p.jump_intensity = x[1];
            p.jump_mean = x[2];
            p.jump_vol = x[3];
            return jd_price(opt, p);
        }
        default: {
            SVParams p;
            p.v0 = x[0];
            p.kappa = x[1];
            p.theta = x[2];
            p.xi = x[3];
            p.rho = x[4];
            return sv_price(opt, p);
        }
    }
}

// Cheap deterministic sigma anchor for nested starting points.
inline double slice_vol_anchor(const OptionSlice& slice) {
    double sum = 0.0;
    for (const Quote& q : slice.quotes) sum += q.market_iv;
    return slice.quotes.empty() ? 0.2 : sum / slice.quotes.size();
}

}  // namespace detail

/// Daily cross-section least squares in price space: bounded Nelder-Mead
/// from a nested-at-Black-Scholes start plus seeded random restarts; the
/// best objective wins. Deterministic given (slice, settings.seed).
inline FitResult fit_parametric(const OptionSlice& slice, ParametricModel model,
                                const FitSettings& settings = {}) {
    FitResult result;
    result.model = model_name(model);
    result.n_quotes = static_cast<int>(slice.quotes.size());
    if (slice.empty()) {
        result.status = "empty_slice";
        return result;
    }

    const double anchor = detail::slice_vol_anchor(slice);
    Eigen::VectorXd lo, hi, nested;
    switch (model) {
        case ParametricModel::bs:
            lo = Eigen::VectorXd::Constant(1, settings.sigma_lo);
            hi = Eigen::VectorXd::Constant(1, settings.sigma_hi);
            nested = Eigen::VectorXd::Constant(1, anchor);
            break;
        case ParametricModel::jd:
            lo.resize(4), hi.resize(4), nested.resize(4);
            lo << settings.sigma_lo, 0.0, settings.jd_mean_lo, 0.0;
            hi << settings.sigma_hi, settings.jd_intensity_hi, settings.jd_mean_hi,
                settings.jd_vol_hi;
            nested << anchor, 0.0, 0.0, 0.0;  // intensity 0 == Black-Scholes
            break;
        default:
            lo.resize(5), hi.resize(5), nested.resize(5);
            lo << settings.sv_var_lo, settings.sv_kappa_lo, settings.sv_var_lo, 0.0,
                -settings.sv_rho_cap;
            hi << settings.sv_var_hi, settings.sv_kappa_hi, settings.sv_var_hi,
                settings.sv_xi_hi, settings.sv_rho_cap;
            nested << anchor * anchor, 1.0, anchor * anchor, 0.0, 0.0;  // xi 0 == BS
            break;
    }
    nested = nested.cwiseMax(lo).cwiseMin(hi);

    const auto objective = [&](const Eigen::VectorXd& x) {
        return detail::price_objective(
            slice, [&](const Quote& q) { return detail::slice_price(slice, model, x, q); });
    };

    const CounterRng rng(settings.seed);
    NelderMeadResult best;
    best.fval = std::numeric_limits<double>::infinity();
    bool any_converged = false;
    for (int start = 0; start < std::max(1, settings.multi_starts); ++start) {
        Eigen::VectorXd x0(lo.size());
        if (start == 0) {
            x0 = nested;
        } else {
            for (Eigen::Index i = 0; i < x0.size(); ++i)
                x0[i] = lo[i] + (hi[i] - lo[i]) *
                                    rng.uniform(static_cast<std::uint64_t>(start), i);
        }
        const Eigen::VectorXd step = 0.05 * (hi - lo);
        const NelderMeadResult run = nelder_mead(objective, x0, step, lo, hi);
        any_converged = any_converged || run.converged;
        if (run.fval < best.fval) best = run;
    }
    if (!std::isfinite(best.fval) || best.fval >= 1e100) {
        result.status = "no_convergence";
        return result;
    }

    result.params.assign(best.x.data(), best.x.data() + best.x.size());
    result.objective = best.fval;
    result.converged = any_converged;
    result.status = "ok";
    for (Eigen::Index i = 0; i < best.x.size(); ++i) {
        const double span = hi[i] - lo[i];
        if (span > 0.0 && (best.x[i] - lo[i] < 1e-6 * span || hi[i] - best.x[i] < 1e-6 * span))
            result.boundary_hit = true;
    }

    std::vector<double> prices(slice.quotes.size());
    for (std::size_t i = 0; i < slice.quotes.size(); ++i)
        prices[i] = detail::slice_price(slice, model, best.x, slice.quotes[i]);
    if (const auto iv = ivrmse(slice, prices); iv.value_1e3) result.ivrmse_1e3 = *iv.value_1e3;
    return result;
}

// ---------------------------------------------------------------------------
// RL model daily fit (precomputed price table, sigma is the only knob)
// ---------------------------------------------------------------------------

namespace detail {

// Fritsch-Carlson monotone cubic interpolation.
inline double pchip_eval(std::span<const double> xs, std::span<const double> ys,
                         double x) {
    const std::size_t n = xs.size();
    if (n < 2) return ys.empty() ? 0.0 : ys[0];
    x = std::clamp(x, xs.front(), xs.back());

    std::vector<double> h(n - 1), delta(n - 1), m(n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = xs[i + 1] - xs[i];
        delta[i] = (ys[i + 1] - ys[i]) / h[i];
    }
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0.0) {
            m[i] = 0.0;
        } else {
            const double w1 = 2.0 * h[i] + h[i - 1];
            const double w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    std::size_t k = 0;
    while (k + 2 < n && x > xs[k + 1]) ++k;
    const double t = (x - xs[k]) / h[k];
    const double t2 = t * t, t3 = t2 * t;
    return ys[k] * (2 * t3 - 3 * t2 + 1) + h[k] * m[k] * (t3 - 2 * t2 + t) +
           ys[k + 1] * (-2 * t3 + 3 * t2) + h[k] * m[k + 1] * (t3 - t2);
}

inline double lerp_clamped(std::span<const double> xs, std::span<const double> ys,
                           double x) {
    const std::size_t n = xs.size();
    if (n == 1) return ys[0];
    x = std::clamp(x, xs.front(), xs.back());
    std::size_t k = 0;
    while (k + 2 < n && x > xs[k + 1]) ++k;
    const double t = (x - xs[k]) / (xs[k + 1] - xs[k]);
    return ys[k] + t * (ys[k + 1] - ys[k]);
}

}  // namespace detail

/// Precomputed trained-model prices on a (sigma, moneyness) grid for one
/// maturity bucket, spot-normalized to 1. (lambda, epsilon) are baked in at
/// table-build time from config.
struct RlPriceTable {
    std::string model;  ///< "qlbs" | "rlop"
    int bucket_days = 0;
    double rate = 0.0;
    std::vector<double> sigma_grid;
    std::vector<double> moneyness_grid;
    std::vector<std::vector<double>> values;  ///< [sigma][moneyness]

    void validate() const {
        if (sigma_grid.size() < 2 || moneyness_grid.empty())
            throw ValidationError("RlPriceTable: grid too small");
        if (values.size() != sigma_grid.size())
            throw ValidationError("RlPriceTable: sigma rows mismatch");
        for (const auto& row : values)
            if (row.size() != moneyness_grid.size())
                throw ValidationError("RlPriceTable: moneyness columns mismatch");
        if (!std::is_sorted(sigma_grid.begin(), sigma_grid.end()) ||
            !std::is_sorted(moneyness_grid.begin(), moneyness_grid.end()))
            throw ValidationError("RlPriceTable: grids must be ascending");
    }

    /// Normalized price at (sigma, moneyness): linear across moneyness,
    /// monotone cubic across sigma.
    double price(double sigma, double moneyness) const {
        std::vector<double> by_sigma(sigma_grid.size());
        for (std::size_t i = 0; i < sigma_grid.size(); ++i)
            by_sigma[i] = detail::lerp_clamped(moneyness_grid, values[i], moneyness);
        return detail::pchip_eval(sigma_grid, by_sigma, sigma);
    }
};

/// Golden-section search of the table's sigma axis for the least-squares
/// price fit of one slice.
inline FitResult fit_rl_sigma(const OptionSlice& slice, const RlPriceTable& table) {
    table.validate();
    FitResult result;
    result.model = table.model;
    result.n_quotes = static_cast<int>(slice.quotes.size());
    if (slice.empty()) {
        result.status = "empty_slice";
        return result;
    }

    const auto objective = [&](double sigma) {
        double total = 0.0;
        for (const Quote& q : slice.quotes) {
            const double diff = slice.spot * table.price(sigma, q.moneyness) - q.mid;
            total += diff * diff;
        }
        return total;
    };

    double a = table.sigma_grid.front(), b = table.sigma_grid.back();
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = objective(c), fd = objective(d);
    while (b - a > 1e-6) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    const double sigma = 0.5 * (a + b);
    result.params = {sigma};
    result.objective = objective(sigma);
    result.converged = true;
    result.status = "ok";
    result.boundary_hit = sigma - table.sigma_grid.front() < 1e-4 ||
                          table.sigma_grid.back() - sigma < 1e-4;

    std::vector<double> prices(slice.quotes.size());
    for (std::size_t i = 0; i < slice.quotes.size(); ++i)
        prices[i] = slice.spot * table.price(sigma, slice.quotes[i].moneyness);
    if (const auto iv = ivrmse(slice, prices); iv.value_1e3) result.ivrmse_1e3 = *iv.value_1e3;
    return result;
}

}  // namespace hedgelab

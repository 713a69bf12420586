#pragma once

#include <cmath>
#include <cstdint>

namespace hedgelab {

// SplitMix64 finalizer (Steele et al.), used here as a stateless
// counter-based generator: every draw is a pure function of
// (seed, stream, position), so results do not depend on evaluation order.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent child seed, e.g. per epoch or per batch.
inline constexpr std::uint64_t child_seed(std::uint64_t seed, std::uint64_t a,
                                          std::uint64_t b = 0) noexcept {
    return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

namespace detail {

// Stream tags separating path noise from action noise within one seed.
constexpr std::uint64_t kPathStream = 0x70617468;  // "path"
constexpr std::uint64_t kActionStream = 0x616374;  // "act"

// Inverse standard-normal CDF: Acklam's rational approximation followed by
// one Halley step against erfc, giving close to full double precision.
inline double inverse_normal_cdf(double p) {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement.
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

}  // namespace detail

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Standard normal density.
inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

/// Quantile of the standard normal distribution, p in (0, 1).
inline double normal_quantile(double p) { return detail::inverse_normal_cdf(p); }

/// Counter-based random source. Draws are indexed by (stream, position);
/// identical seeds give bitwise identical values regardless of the order or
/// the thread the draws are made on.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed) : key_(splitmix64(seed)) {}

    /// Uniform draw strictly inside (0, 1).
    double uniform(std::uint64_t stream, std::uint64_t position) const {
        const std::uint64_t bits =
            splitmix64(splitmix64(key_ ^ splitmix64(stream)) ^ position);
        return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal draw via the inverse CDF of a uniform.
    double normal(std::uint64_t stream, std::uint64_t position) const {
        return detail::inverse_normal_cdf(uniform(stream, position));
    }

  private:
    std::uint64_t key_;
};

}  // namespace hedgelab

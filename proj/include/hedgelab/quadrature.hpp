#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "hedgelab/errors.hpp"

namespace hedgelab {

namespace detail {

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1]; the embedded Gauss rule
// provides the error estimate.
struct Gk15 {
    static constexpr std::array<double, 15> nodes = {
        -0.991455371120813, -0.949107912342759, -0.864864423359769,
        -0.741531185599394, -0.586087235467691, -0.405845151377397,
        -0.207784955007898, 0.0,                0.207784955007898,
        0.405845151377397,  0.586087235467691,  0.741531185599394,
        0.864864423359769,  0.949107912342759,  0.991455371120813};
    static constexpr std::array<double, 15> kronrod_w = {
        0.022935322010529, 0.063092092629979, 0.104790010322250,
        0.140653259715525, 0.169004726639267, 0.190350578064785,
        0.204432940075298, 0.209482141084728, 0.204432940075298,
        0.190350578064785, 0.169004726639267, 0.140653259715525,
        0.104790010322250, 0.063092092629979, 0.022935322010529};
    // Gauss-7 weights aligned with the odd Kronrod node positions.
    static constexpr std::array<double, 7> gauss_w = {
        0.129484966168870, 0.279705391489277, 0.381830050505119,
        0.417959183673469, 0.381830050505119, 0.279705391489277,
        0.129484966168870};
};

template <class Fn>
void gk15_segment(const Fn& f, double a, double b, double& value, double& error) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double kronrod = 0.0, gauss = 0.0;
    for (int i = 0; i < 15; ++i) {
        const double fx = f(c + h * Gk15::nodes[i]);
        kronrod += Gk15::kronrod_w[i] * fx;
        if (i % 2 == 1) gauss += Gk15::gauss_w[i / 2] * fx;
    }
    value = kronrod * h;
    error = std::abs((kronrod - gauss) * h);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [a, b] to an absolute
/// tolerance. Throws NumericError when the subdivision budget is exhausted.
template <class Fn>
double integrate_adaptive(const Fn& f, double a, double b, double abs_tol,
                          int max_segments = 400) {
    struct Segment {
        double a, b, value, error;
    };
    std::vector<Segment> segments;
    segments.reserve(64);
    Segment first{a, b, 0.0, 0.0};
    detail::gk15_segment(f, a, b, first.value, first.error);
    segments.push_back(first);

    double total_error = first.error;
    while (total_error > abs_tol) {
        if (static_cast<int>(segments.size()) >= max_segments)
            throw NumericError("integrate_adaptive: subdivision budget exhausted");
        auto worst = std::max_element(
            segments.begin(), segments.end(),
            [](const Segment& x, const Segment& y) { return x.error < y.error; });
        const Segment seg = *worst;
        const double mid = 0.5 * (seg.a + seg.b);
        Segment left{seg.a, mid, 0.0, 0.0}, right{mid, seg.b, 0.0, 0.0};
        detail::gk15_segment(f, left.a, left.b, left.value, left.error);
        detail::gk15_segment(f, right.a, right.b, right.value, right.error);
        *worst = left;
        segments.push_back(right);
        total_error += left.error + right.error - seg.error;
    }
    double sum = 0.0;
    for (const auto& s : segments) sum += s.value;
    return sum;
}

}  // namespace hedgelab

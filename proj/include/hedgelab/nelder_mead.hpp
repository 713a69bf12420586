#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

#include "hedgelab/errors.hpp"

namespace hedgelab {

struct NelderMeadOptions {
    int max_iters = 600;
    double f_tol = 1e-14;  ///< spread of simplex values
    double x_tol = 1e-10;  ///< spread of simplex vertices
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double fval = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Box-constrained Nelder-Mead (candidate points are clamped to the box).
/// Deterministic for a fixed starting point.
template <class Fn>
NelderMeadResult nelder_mead(const Fn& fn, const Eigen::VectorXd& x0,
                             const Eigen::VectorXd& step,
                             const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper,
                             const NelderMeadOptions& opts = {}) {
    const Eigen::Index dim = x0.size();
    if (step.size() != dim || lower.size() != dim || upper.size() != dim)
        throw ValidationError("nelder_mead: dimension mismatch");

    auto clamp = [&](Eigen::VectorXd x) {
        for (Eigen::Index i = 0; i < dim; ++i)
            x[i] = std::clamp(x[i], lower[i], upper[i]);
        return x;
    };

    std::vector<Eigen::VectorXd> simplex;
    simplex.reserve(dim + 1);
    simplex.push_back(clamp(x0));
    for (Eigen::Index i = 0; i < dim; ++i) {
        Eigen::VectorXd v = x0;
        v[i] += step[i];
        if (v[i] > upper[i]) v[i] = x0[i] - step[i];
        simplex.push_back(clamp(v));
    }
    std::vector<double> values(dim + 1);
    for (Eigen::Index i = 0; i <= dim; ++i) values[i] = fn(simplex[i]);

    NelderMeadResult result;
    constexpr double alpha = 1.0, gamma = 2.0, rho = 0.5, shrink = 0.5;
    std::vector<int> order(dim + 1);
    for (int it = 0; it < opts.max_iters; ++it) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return values[a] < values[b]; });
        const int best = order.front(), worst = order.back();
        const int second_worst = order[dim - 1];

        double x_spread = 0.0;
        for (int i = 0; i <= dim; ++i)
            x_spread = std::max(
                x_spread, (simplex[i] - simplex[best]).cwiseAbs().maxCoeff());
        result.iterations = it;
        if (values[worst] - values[best] < opts.f_tol && x_spread < opts.x_tol) {
            result.converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
        for (int i = 0; i <= dim; ++i)
            if (i != worst) centroid += simplex[i];
        centroid /= dim;

        const Eigen::VectorXd reflected =
            clamp(centroid + alpha * (centroid - simplex[worst]));
        const double f_reflected = fn(reflected);
        if (f_reflected < values[best]) {
            const Eigen::VectorXd expanded =
                clamp(centroid + gamma * (reflected - centroid));
            const double f_expanded = fn(expanded);
            if (f_expanded < f_reflected) {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if (f_reflected < values[second_worst]) {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            const Eigen::VectorXd contracted =
                clamp(centroid + rho * (simplex[worst] - centroid));
            const double f_contracted = fn(contracted);
            if (f_contracted < values[worst]) {
                simplex[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                for (int i = 0; i <= dim; ++i) {
                    if (i == best) continue;
                    simplex[i] =
                        clamp(simplex[best] + shrink * (simplex[i] - simplex[best]));
                    values[i] = fn(simplex[i]);
                }
            }
        }
    }
    const auto best_it = std::min_element(values.begin(), values.end());
    result.x = simplex[static_cast<std::size_t>(best_it - values.begin())];
    result.fval = *best_it;
    return result;
}

}  // namespace hedgelab

#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hedgelab/accounting.hpp"
#include "hedgelab/data_io.hpp"
#include "hedgelab/errors.hpp"

namespace hedgelab {

/// One short-call hedge: entry instrument, premium received, cost spec.
struct HedgePlan {
    std::string model;
    std::string entry_date;
    double strike = 0.0;
    double tau_years = 0.0;
    double premium = 0.0;  ///< entry mid by default
    CostSpec cost;

    void validate() const {
        if (!(strike > 0.0)) throw ValidationError("HedgePlan: strike must be > 0");
        if (!(premium > 0.0)) throw ValidationError("HedgePlan: premium must be > 0");
        if (!(tau_years > 0.0)) throw ValidationError("HedgePlan: tau must be > 0");
        cost.validate();
    }
};

/// The realized underlying path over the hedge horizon (trading days).
struct RealizedPath {
    std::vector<std::string> dates;  ///< ascending, dates[0] = entry
    std::vector<double> spots;
    double rate = 0.0;

    void validate() const {
        if (dates.size() != spots.size() || dates.size() < 2)
            throw DataError("RealizedPath: need at least two dated spots");
        for (double s : spots)
            if (!(s > 0.0)) throw DataError("RealizedPath: non-positive spot");
    }
};

struct BacktestOptions {
    bool charge_initial_position = false;
    bool liquidate_at_expiry = false;
};

/// Position source: (step index, spot, remaining maturity in years) -> units.
using DeltaSource = std::function<double(int, double, double)>;

struct HedgeOutcome {
    double pi_T = 0.0;        ///< V_T - (S_T - K)^+
    double total_cost = 0.0;  ///< cumulative transaction costs
    std::vector<double> positions;
    std::vector<double> cash;
    std::vector<double> value;
    std::vector<double> dt_years;  ///< per-step calendar gaps / 365
};

/// Discrete-time short-call delta hedge along a realized path: the book is
/// seeded with the premium and evolved under the self-financing condition
/// with cash accruing over actual calendar-day gaps.
inline HedgeOutcome run_hedge(const HedgePlan& plan, const RealizedPath& path,
                              const DeltaSource& delta_source,
                              const BacktestOptions& options = {}) {
    plan.validate();
    path.validate();
    const int n_steps = static_cast<int>(path.dates.size()) - 1;

    HedgeOutcome out;
    out.positions.resize(n_steps);
    out.cash.resize(n_steps + 1);
    out.value.resize(n_steps + 1);
    out.dt_years.resize(n_steps);

    double elapsed = 0.0;
    for (int t = 0; t < n_steps; ++t) {
        out.dt_years[t] =
            days_between(path.dates[t], path.dates[t + 1]) / 365.0;
        if (!(out.dt_years[t] > 0.0))
            throw DataError("run_hedge: dates must be strictly ascending");
    }

    const double u0 = delta_source(0, path.spots[0], plan.tau_years);
    double cash = plan.premium - u0 * path.spots[0];
    if (options.charge_initial_position) {
        const double tc0 = tc_linear(u0, path.spots[0], plan.cost);
        cash -= tc0;
        out.total_cost += tc0;
    }
    out.positions[0] = u0;
    out.cash[0] = cash;
    out.value[0] = plan.premium - out.total_cost;

    for (int t = 0; t < n_steps; ++t) {
        elapsed += out.dt_years[t];
        const double s_next = path.spots[t + 1];
        double u_next;
        if (t + 1 < n_steps) {
            u_next = delta_source(t + 1, s_next,
                                  std::max(plan.tau_years - elapsed, 0.0));
        } else {
            u_next = options.liquidate_at_expiry ? 0.0 : out.positions[t];
        }
        const double tc = tc_linear(u_next - out.positions[t], s_next, plan.cost);
        out.total_cost += tc;
        cash = out.positions[t] * s_next + std::exp(path.rate * out.dt_years[t]) * cash -
               u_next * s_next - tc;
        if (t + 1 < n_steps) out.positions[t + 1] = u_next;
        out.cash[t + 1] = cash;
        out.value[t + 1] = u_next * s_next + cash;
    }

    const double s_T = path.spots[n_steps];
    out.pi_T = out.value[n_steps] - std::max(s_T - plan.strike, 0.0);
    return out;
}

/// Hedging RMSE sqrt(mean Pi_T^2), mean trading cost, and shortfall
/// frequency P(Pi_T < 0) over one set of hedges.
struct HedgeMetrics {
    double hedging_rmse = 0.0;
    double avg_trading_cost = 0.0;
    double shortfall_prob = 0.0;
    int n_hedges = 0;
};

inline HedgeMetrics metrics(std::span<const double> pi_T,
                            std::span<const double> costs) {
    if (pi_T.empty() || pi_T.size() != costs.size())
        throw ValidationError("metrics: need matching non-empty lists");
    HedgeMetrics m;
    m.n_hedges = static_cast<int>(pi_T.size());
    double sum_sq = 0.0, cost_sum = 0.0;
    int shortfalls = 0;
    for (std::size_t i = 0; i < pi_T.size(); ++i) {
        sum_sq += pi_T[i] * pi_T[i];
        cost_sum += costs[i];
        if (pi_T[i] < 0.0) ++shortfalls;
    }
    m.hedging_rmse = std::sqrt(sum_sq / m.n_hedges);
    m.avg_trading_cost = cost_sum / m.n_hedges;
    m.shortfall_prob = static_cast<double>(shortfalls) / m.n_hedges;
    return m;
}

/// Unweighted mean across days: every trading day is one observation no
/// matter how many hedges it contributed.
inline HedgeMetrics equal_day_aggregate(std::span<const HedgeMetrics> per_day) {
    if (per_day.empty()) throw ValidationError("equal_day_aggregate: no days");
    HedgeMetrics m;
    for (const auto& day : per_day) {
        m.hedging_rmse += day.hedging_rmse;
        m.avg_trading_cost += day.avg_trading_cost;
        m.shortfall_prob += day.shortfall_prob;
        m.n_hedges += day.n_hedges;
    }
    const double n = static_cast<double>(per_day.size());
    m.hedging_rmse /= n;
    m.avg_trading_cost /= n;
    m.shortfall_prob /= n;
    return m;
}

}  // namespace hedgelab

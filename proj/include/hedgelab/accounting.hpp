#pragma once

#include <cmath>
#include <cstdlib>
#include <span>
#include <vector>

#include "hedgelab/errors.hpp"
#include "hedgelab/market.hpp"

namespace hedgelab {

/// Proportional transaction cost specification, TC(du, S) = epsilon |du| S.
struct CostSpec {
    double epsilon = 0.0;

    void validate() const {
        if (!(epsilon >= 0.0)) throw ValidationError("CostSpec: epsilon must be >= 0");
    }
};

/// Ledger conventions the self-financing condition leaves open.
struct LedgerConventions {
    /// When true, the final position is sold at expiry and its cost charged;
    /// default holds the last position through expiry (u_T := u_{T-1}).
    bool liquidate_at_expiry = false;
    /// When true, establishing the initial position in a forward ledger is
    /// charged like any rebalance; default treats it as cost-free.
    bool charge_initial_position = false;
};

inline double tc_linear(double delta_u, double s, const CostSpec& cost) {
    return cost.epsilon * std::abs(delta_u) * s;
}

/// Per-path time series of positions, cash and portfolio value under the
/// self-financing condition u_t S_{t+1} + e^{r dt} B_t =
/// u_{t+1} S_{t+1} + B_{t+1} + TC(u_{t+1} - u_t, S_{t+1}).
struct HedgeLedger {
    std::vector<double> positions;  ///< u_t, t = 0..n_steps-1
    std::vector<double> cash;       ///< B_t, t = 0..n_steps
    std::vector<double> value;      ///< Pi_t = u_t S_t + B_t, t = 0..n_steps
    double terminal_position = 0.0; ///< u_T under the active convention
    double cum_cost = 0.0;
    MarketParams params;
    CostSpec cost;
};

/// Largest relative residual of the self-financing condition over all
/// interior steps of the ledger.
inline double max_self_financing_residual(const HedgeLedger& ledger,
                                          std::span<const double> path) {
    const int n = ledger.params.n_steps;
    const double growth = std::exp(ledger.params.r * ledger.params.dt);
    double worst = 0.0;
    for (int t = 0; t < n; ++t) {
        const double u_t = ledger.positions[t];
        const double u_next =
            t + 1 < n ? ledger.positions[t + 1] : ledger.terminal_position;
        const double s_next = path[t + 1];
        const double lhs = u_t * s_next + growth * ledger.cash[t];
        const double rhs = u_next * s_next + ledger.cash[t + 1] +
                           tc_linear(u_next - u_t, s_next, ledger.cost);
        const double scale = std::max(1.0, std::abs(lhs) + std::abs(rhs));
        worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
    return worst;
}

namespace detail {

inline void check_ledger_inputs(std::span<const double> path,
                                std::span<const double> actions,
                                const MarketParams& params) {
    params.validate();
    if (static_cast<int>(path.size()) != params.n_steps + 1)
        throw ValidationError("ledger: path length must be n_steps + 1");
    if (static_cast<int>(actions.size()) != params.n_steps)
        throw ValidationError("ledger: actions length must be n_steps");
}

inline double terminal_action(std::span<const double> actions,
                              const LedgerConventions& conv) {
    return conv.liquidate_at_expiry ? 0.0 : actions.back();
}

}  // namespace detail

/// Backward portfolio recursion from the terminal condition Pi_T = h(S_T):
/// Pi_t = u_t S_t + gamma (Pi_{t+1} + TC(u_{t+1}-u_t, S_{t+1}) - u_t S_{t+1}).
template <class PayoffFn>
HedgeLedger qlbs_backward_portfolio(std::span<const double> path,
                                    std::span<const double> actions, PayoffFn&& payoff,
                                    const MarketParams& params, const CostSpec& cost,
                                    const LedgerConventions& conv = {}) {
    detail::check_ledger_inputs(path, actions, params);
    cost.validate();
    const int n = params.n_steps;
    const double gamma = params.step_discount();

    HedgeLedger ledger;
    ledger.params = params;
    ledger.cost = cost;
    ledger.positions.assign(actions.begin(), actions.end());
    ledger.terminal_position = detail::terminal_action(actions, conv);
    ledger.value.resize(n + 1);
    ledger.cash.resize(n + 1);

    ledger.value[n] = payoff(path[n]);
    ledger.cash[n] = ledger.value[n] - ledger.terminal_position * path[n];
    for (int t = n - 1; t >= 0; --t) {
        const double u_next = t + 1 < n ? actions[t + 1] : ledger.terminal_position;
        const double tc = tc_linear(u_next - actions[t], path[t + 1], cost);
        ledger.cum_cost += tc;
        ledger.value[t] = actions[t] * path[t] +
                          gamma * (ledger.value[t + 1] + tc - actions[t] * path[t + 1]);
        ledger.cash[t] = ledger.value[t] - actions[t] * path[t];
    }
    return ledger;
}

/// Exact closed-form split of the backward portfolio at t = 0. The friction
/// slope is the coefficient of epsilon; the terminal leg is discounted by
/// gamma^T. hedge_leg collects every epsilon-independent trading term, so
///   Pi_0 = hedge_leg + epsilon * friction_slope + gamma^T * terminal_leg
/// holds exactly for any action sequence.
struct PortfolioDecomposition {
    double hedge_leg = 0.0;
    double friction_slope = 0.0;  ///< sum_j gamma^{j+1} |du_j| S_{j+1}
    double terminal_leg = 0.0;    ///< h(S_T) - u_{T-1} S_T

    double reconstruct(double epsilon, double gamma, int n_steps) const {
        return hedge_leg + epsilon * friction_slope +
               std::pow(gamma, n_steps) * terminal_leg;
    }
};

template <class PayoffFn>
PortfolioDecomposition appendixB_decomposition(std::span<const double> path,
                                               std::span<const double> actions,
                                               PayoffFn&& payoff,
                                               const MarketParams& params,
                                               const LedgerConventions& conv = {}) {
    detail::check_ledger_inputs(path, actions, params);
    const int n = params.n_steps;
    const double gamma = params.step_discount();
    const double u_terminal = detail::terminal_action(actions, conv);

    PortfolioDecomposition out;
    out.hedge_leg = actions[0] * path[0];
    double disc = 1.0;
    for (int j = 0; j + 1 < n; ++j) {
        disc *= gamma;
        const double du = actions[j + 1] - actions[j];
        out.hedge_leg += disc * du * path[j + 1];
        out.friction_slope += disc * std::abs(du) * path[j + 1];
    }
    disc *= gamma;  // gamma^n
    out.friction_slope += disc * std::abs(u_terminal - actions[n - 1]) * path[n];
    out.terminal_leg = payoff(path[n]) - actions[n - 1] * path[n];
    return out;
}

/// Forward portfolio evolution from initial wealth pi0 under the same
/// self-financing condition. The initial purchase is cost-free unless
/// conventions say otherwise.
inline HedgeLedger rlop_forward_portfolio(double pi0, std::span<const double> path,
                                          std::span<const double> actions,
                                          const MarketParams& params,
                                          const CostSpec& cost,
                                          const LedgerConventions& conv = {}) {
    detail::check_ledger_inputs(path, actions, params);
    cost.validate();
    if (!std::isfinite(pi0))
        throw ValidationError("rlop_forward_portfolio: pi0 must be finite");
    const int n = params.n_steps;
    const double growth = std::exp(params.r * params.dt);

    HedgeLedger ledger;
    ledger.params = params;
    ledger.cost = cost;
    ledger.positions.assign(actions.begin(), actions.end());
    ledger.terminal_position = detail::terminal_action(actions, conv);
    ledger.value.resize(n + 1);
    ledger.cash.resize(n + 1);

    double b = pi0 - actions[0] * path[0];
    if (conv.charge_initial_position) {
        const double tc0 = tc_linear(actions[0], path[0], cost);
        b -= tc0;
        ledger.cum_cost += tc0;
    }
    ledger.cash[0] = b;
    ledger.value[0] = actions[0] * path[0] + b;
    for (int t = 0; t < n; ++t) {
        const double u_next = t + 1 < n ? actions[t + 1] : ledger.terminal_position;
        const double tc = tc_linear(u_next - actions[t], path[t + 1], cost);
        ledger.cum_cost += tc;
        b = actions[t] * path[t + 1] + growth * b - u_next * path[t + 1] - tc;
        ledger.cash[t + 1] = b;
        ledger.value[t + 1] = u_next * path[t + 1] + b;
    }
    return ledger;
}

}  // namespace hedgelab

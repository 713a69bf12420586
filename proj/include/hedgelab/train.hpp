#pragma once

#include <Eigen/Core>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "hedgelab/errors.hpp"
#include "hedgelab/net.hpp"
#include "hedgelab/policy.hpp"
#include "hedgelab/qlbs.hpp"
#include "hedgelab/rlop.hpp"

namespace hedgelab {

struct TrainConfig {
    double learning_rate = 1e-4;  ///< Adam step size for both networks
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int batches_per_epoch = 1;
    int n_epochs = 300;
    double entropy_floor = 0.01;  ///< lower bound on the policy std
    double grad_clip_norm = 10.0;
    double pi0_lr_scale = 10.0;  ///< initial-wealth step relative to learning_rate
    bool normalize_advantages = true;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate > 0.0))
            throw ValidationError("TrainConfig: learning_rate must be > 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
            throw ValidationError("TrainConfig: betas must be in [0, 1)");
        if (n_epochs < 1 || batches_per_epoch < 1)
            throw ValidationError("TrainConfig: epochs and batches must be >= 1");
        if (!(entropy_floor > 0.0))
            throw ValidationError("TrainConfig: entropy_floor must be > 0");
        if (!(grad_clip_norm > 0.0))
            throw ValidationError("TrainConfig: grad_clip_norm must be > 0");
        if (!(pi0_lr_scale > 0.0))
            throw ValidationError("TrainConfig: pi0_lr_scale must be > 0");
    }
};

struct AdamState {
    Eigen::VectorXd m, v;
    long step = 0;
};

inline void adam_update(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                        AdamState& state, double lr, const TrainConfig& cfg) {
    if (state.m.size() != grad.size()) {
        state.m = Eigen::VectorXd::Zero(grad.size());
        state.v = Eigen::VectorXd::Zero(grad.size());
        state.step = 0;
    }
    ++state.step;
    state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
    state.v = cfg.beta2 * state.v.array().matrix() +
              (1.0 - cfg.beta2) * grad.array().square().matrix();
    const double m_corr = 1.0 - std::pow(cfg.beta1, state.step);
    const double v_corr = 1.0 - std::pow(cfg.beta2, state.step);
    params.array() -= lr * (state.m.array() / m_corr) /
                      ((state.v.array() / v_corr).sqrt() + cfg.adam_eps);
}

/// Flattened (state, action, discounted reward-to-go) rows collected from an
/// environment rollout; rows align with the rollout's feature matrix.
struct Trajectories {
    Eigen::MatrixXd features;
    Eigen::VectorXd actions;
    Eigen::VectorXd returns;
    /// Optional separate mean-channel credit (antithetic pair differences);
    /// empty means both policy heads share the baseline-corrected returns.
    Eigen::VectorXd mean_returns;
    /// Optional Rao-Blackwell term: exact d(return)/d(mu) contributions for
    /// reward components whose action dependence is known in closed form.
    Eigen::VectorXd analytic_mean_grad;
    double mean_episode_return = 0.0;
    int n_episodes = 0;
};

/// Stacks a rollout with its mirrored-noise twin. The pair difference feeds
/// the mean head (path noise and baseline error cancel exactly); the usual
/// baseline-corrected returns feed the std head.
inline Trajectories stack_antithetic(const Trajectories& a, const Trajectories& b) {
    const Eigen::Index n = a.actions.size();
    if (b.actions.size() != n)
        throw ValidationError("stack_antithetic: mismatched trajectory sizes");
    Trajectories out;
    out.features.resize(2 * n, a.features.cols());
    out.features << a.features, b.features;
    out.actions.resize(2 * n);
    out.actions << a.actions, b.actions;
    out.returns.resize(2 * n);
    out.returns << a.returns, b.returns;
    const Eigen::VectorXd diff = 0.5 * (a.returns - b.returns);
    out.mean_returns.resize(2 * n);
    out.mean_returns << diff, -diff;
    if (a.analytic_mean_grad.size() == n) {
        out.analytic_mean_grad.resize(2 * n);
        out.analytic_mean_grad << a.analytic_mean_grad, b.analytic_mean_grad;
    }
    out.mean_episode_return = 0.5 * (a.mean_episode_return + b.mean_episode_return);
    out.n_episodes = a.n_episodes + b.n_episodes;
    return out;
}

// Score-function credit for the backward environment. Textbook reward-to-go
// is wrong here: the backward recursion routes an action's influence into
// Pi_tau and risk_tau for tau <= t, i.e. into *earlier* rewards. Each score
// is therefore weighted by exactly the return terms its action noise
// touches, all other terms being independent of that noise and droppable
// without bias:
//   * the action's own discounted trading increment -u_t gamma^t (S_t -
//     gamma S_{t+1}) and its two adjacent transaction-cost terms (from the
//     episode-level -Pi_0);
//   * the dispersion penalties up to t, attributed per path as
//     (Pi_tau - mean)^2 / risk_tau, which has the same expectation as
//     risk_tau but correlates with the path's own noise at first order.
inline Trajectories qlbs_trajectories(const QlbsRollout& roll, double lambda) {
    const int n_paths = roll.batch.n_paths();
    const int n_steps = roll.batch.n_steps();
    const MarketParams& params = roll.batch.params();
    const double gamma = params.step_discount();
    const double epsilon = roll.ledgers.front().cost.epsilon;

    Eigen::VectorXd pi_mean = Eigen::VectorXd::Zero(n_steps + 1);
    for (int t = 0; t <= n_steps; ++t) {
        double sum = 0.0;
        for (int p = 0; p < n_paths; ++p) sum += roll.ledgers[p].value[t];
        pi_mean[t] = sum / n_paths;
    }
    const double unbias = static_cast<double>(n_paths) / (n_paths - 1.0);

    std::vector<double> disc(n_steps + 2);
    disc[0] = 1.0;
    for (int t = 1; t <= n_steps + 1; ++t) disc[t] = disc[t - 1] * gamma;

    // The action's own trading increment -u_t gamma^t (S_t - gamma S_{t+1})
    // has a known conditional mean, so it is Rao-Blackwellized out of the
    // score weights into an exact d/d(mu) term; only the cost and dispersion
    // terms remain as sampled credit.
    const double drift_factor = 1.0 - gamma * std::exp(params.mu * params.dt);

    Trajectories traj;
    traj.features = roll.features;
    traj.actions.resize(static_cast<Eigen::Index>(n_paths) * n_steps);
    traj.returns.resize(traj.actions.size());
    traj.analytic_mean_grad.resize(traj.actions.size());
    double total = 0.0;
    for (int p = 0; p < n_paths; ++p) {
        double risk_credit = 0.0;
        for (int t = 0; t < n_steps; ++t) {
            if (roll.risk[t] > 0.0) {
                const double dev = roll.ledgers[p].value[t] - pi_mean[t];
                risk_credit += disc[t] * unbias * dev * dev / roll.risk[t];
            }
            const double u_t = roll.actions(p, t);
            const double s_t = roll.batch.price(p, t);
            const double s_next = roll.batch.price(p, t + 1);
            double local = 0.0;
            if (epsilon > 0.0) {
                // Initial-position setup is cost-free in the backward ledger,
                // so only t >= 1 carries the rebalance-into-t charge.
                if (t > 0)
                    local -= disc[t] * epsilon *
                             std::abs(u_t - roll.actions(p, t - 1)) * s_t;
                if (t + 1 < n_steps)
                    local -= disc[t + 1] * epsilon *
                             std::abs(roll.actions(p, t + 1) - u_t) * s_next;
                else
                    local -= disc[t + 1] * epsilon *
                             std::abs(roll.ledgers[p].terminal_position - u_t) * s_next;
            }
            const Eigen::Index row = static_cast<Eigen::Index>(p) * n_steps + t;
            traj.actions[row] = u_t;
            traj.returns[row] = local - lambda * risk_credit;
            traj.analytic_mean_grad[row] = -disc[t] * s_t * drift_factor;
        }
        // Diagnostic: the env's own discounted episode return.
        double episode = 0.0;
        for (int t = 0; t < n_steps; ++t) episode += disc[t] * roll.rewards(p, t);
        total += episode;
    }
    traj.mean_episode_return = total / n_paths;
    traj.n_episodes = n_paths;
    return traj;
}

inline Trajectories rlop_trajectories(const RlopRollout& roll) {
    const int n_paths = roll.batch.n_paths();
    const int n_steps = roll.batch.n_steps();
    const double gamma = roll.batch.params().step_discount();

    Trajectories traj;
    traj.features = roll.features;
    traj.actions = roll.actions;
    traj.returns.resize(roll.actions.size());
    double total = 0.0;
    for (int p = 0; p < n_paths; ++p)
        for (int i = 1; i <= n_steps; ++i) {
            const double reward = roll.rewards(p, i - 1);
            for (int t = 0; t < i; ++t)
                traj.returns[roll.row(p, i, t)] =
                    std::pow(gamma, i - 1 - t) * reward;
            total += std::pow(gamma, i - 1) * reward;
        }
    traj.mean_episode_return = total / (static_cast<double>(n_paths) * n_steps);
    traj.n_episodes = n_paths * n_steps;
    return traj;
}

struct StepDiagnostics {
    double policy_grad_norm = 0.0;
    double value_grad_norm = 0.0;
    double value_loss = 0.0;
    double mean_return = 0.0;
    double mean_sigma = 0.0;
};

namespace detail {

inline double clip_to_norm(Eigen::VectorXd& grad, double max_norm) {
    const double norm = grad.norm();
    if (norm > max_norm) grad *= max_norm / norm;
    return norm;
}

inline void check_finite(const Eigen::VectorXd& grad, const StepDiagnostics& diag,
                         const char* which) {
    if (grad.allFinite()) return;
    std::ostringstream msg;
    msg << "reinforce_step: NaN in " << which
        << " gradient; mean_return=" << diag.mean_return
        << " value_loss=" << diag.value_loss;
    throw NumericError(msg.str());
}

}  // namespace detail

/// One REINFORCE-with-baseline update: the advantage is the discounted
/// reward-to-go minus the learned value estimate; the value net regresses
/// on the reward-to-go; both get one Adam step.
inline StepDiagnostics reinforce_step(NetParams& policy, NetParams& value,
                                      const Trajectories& traj,
                                      const TrainConfig& cfg, AdamState& policy_state,
                                      AdamState& value_state) {
    cfg.validate();
    const Eigen::Index n = traj.actions.size();
    if (n == 0) throw ValidationError("reinforce_step: empty trajectories");

    StepDiagnostics diag;
    diag.mean_return = traj.mean_episode_return;

    ForwardCache value_cache;
    const Eigen::VectorXd baseline = value_forward(value, traj.features, &value_cache);
    const Eigen::VectorXd raw_advantage = traj.returns - baseline;
    diag.value_loss = raw_advantage.squaredNorm() / n;

    ForwardCache policy_cache;
    const PolicyEval eval =
        policy_forward(policy, traj.features, cfg.entropy_floor, &policy_cache);
    diag.mean_sigma = eval.std.mean();

    double mean_scale = 1.0;
    auto normalized = [&](Eigen::VectorXd v, double* scale_out) {
        if (!cfg.normalize_advantages) return v;
        const double mean = v.mean();
        const double sd = std::sqrt((v.array() - mean).square().sum() /
                                    std::max<Eigen::Index>(n - 1, 1));
        if (sd > 1e-12) {
            v = (v.array() - mean) / sd;
            if (scale_out) *scale_out = sd;
        }
        return v;
    };
    const Eigen::VectorXd std_channel = normalized(raw_advantage, nullptr);
    const Eigen::VectorXd mean_channel =
        traj.mean_returns.size() == n ? normalized(traj.mean_returns, &mean_scale)
                                      : std_channel;

    Eigen::MatrixXd dout(n, 2);
    const bool has_analytic = traj.analytic_mean_grad.size() == n;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double sd = eval.std[i];
        const double z = (traj.actions[i] - eval.mean[i]) / sd;
        double dmu = mean_channel[i] * z / sd;
        if (has_analytic) dmu += traj.analytic_mean_grad[i] / mean_scale;
        dout(i, 0) = dmu / n;
        dout(i, 1) = std_channel[i] * ((z * z - 1.0) / sd) *
                     detail::sigmoid(eval.raw_std[i]) / n;
    }
    Eigen::VectorXd policy_grad = Eigen::VectorXd::Zero(policy.spec.param_count());
    net_backward(policy, policy_cache, dout, policy_grad);

    Eigen::VectorXd value_grad = Eigen::VectorXd::Zero(value.spec.param_count());
    const Eigen::MatrixXd dvalue = (-2.0 / n) * raw_advantage;
    net_backward(value, value_cache, dvalue, value_grad);

    detail::check_finite(policy_grad, diag, "policy");
    detail::check_finite(value_grad, diag, "value");
    diag.policy_grad_norm = detail::clip_to_norm(policy_grad, cfg.grad_clip_norm);
    diag.value_grad_norm = detail::clip_to_norm(value_grad, cfg.grad_clip_norm);

    // Ascent on expected return for the policy, descent on squared error
    // for the baseline.
    Eigen::VectorXd neg = -policy_grad;
    adam_update(policy.values, neg, policy_state, cfg.learning_rate, cfg);
    adam_update(value.values, value_grad, value_state, cfg.learning_rate, cfg);
    return diag;
}

/// Ascent direction on the initial-wealth vector: the replication reward is
/// differentiable in pi0 pathwise, with d Pi_i / d pi0_i = e^{r i dt}.
inline Eigen::VectorXd rlop_wealth_gradient(const RlopRollout& roll) {
    const int n_paths = roll.batch.n_paths();
    const int n_steps = roll.batch.n_steps();
    const MarketParams& params = roll.batch.params();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n_steps);
    for (int i = 1; i <= n_steps; ++i) {
        const double growth = std::exp(params.r * i * params.dt);
        double g = 0.0;
        for (int p = 0; p < n_paths; ++p) {
            const double gap =
                roll.payoff_at_expiry(p, i - 1) - roll.terminal_value(p, i - 1);
            const double dr_dpi = roll.penalty_kind == PenaltyKind::squared
                                      ? 2.0 * gap
                                      : (gap > 0.0 ? 1.0 : (gap < 0.0 ? -1.0 : 0.0));
            g += dr_dpi * growth;
        }
        grad[i - 1] = g / n_paths;
    }
    return grad;
}

enum class EnvKind { qlbs, rlop };

inline const char* env_kind_name(EnvKind kind) {
    return kind == EnvKind::qlbs ? "qlbs" : "rlop";
}

struct LossCurvePoint {
    int epoch = 0;
    double mean_return = 0.0;
    double price = 0.0;
    double hedge_error = 0.0;  ///< mean replication gap at the full horizon
    double mean_sigma = 0.0;
    double policy_grad_norm = 0.0;
};

struct TrainedModel {
    EnvKind kind = EnvKind::qlbs;
    NetParams policy;
    NetParams value;
    InitialWealth wealth;  ///< empty for QLBS models
    std::vector<LossCurvePoint> curve;
    TrainConfig cfg;
};

/// Deterministic hedge-quality probe: run the policy mean (no sampling)
/// forward from initial capital pi0 and report mean |Pi_T - h(S_T)|.
template <class Policy>
double mean_terminal_hedge_error(const Policy& policy, double pi0,
                                 const MarketParams& params, const CostSpec& cost,
                                 const CallPayoff& payoff, int n_paths,
                                 std::uint64_t seed) {
    const PathBatch batch = simulate_paths(params, n_paths, seed);
    const Eigen::MatrixXd features = detail::qlbs_feature_matrix(batch);
    Eigen::VectorXd mean, sigma;
    policy.eval(features, mean, sigma);
    const int n_steps = params.n_steps;
    std::vector<double> u(n_steps);
    double total = 0.0;
    for (int p = 0; p < n_paths; ++p) {
        for (int t = 0; t < n_steps; ++t)
            u[t] = mean[static_cast<Eigen::Index>(p) * n_steps + t];
        const auto ledger = rlop_forward_portfolio(pi0, batch.path(p), u, params, cost);
        total += std::abs(ledger.value[n_steps] - payoff(batch.price(p, n_steps)));
    }
    return total / n_paths;
}

/// REINFORCE training loop for the backward value-based environment.
inline TrainedModel train_qlbs(const QlbsConfig& env, NetSpec spec,
                               const TrainConfig& cfg) {
    env.validate();
    cfg.validate();
    TrainedModel model;
    model.kind = EnvKind::qlbs;
    model.cfg = cfg;
    spec.output_dim = 2;
    model.policy = init_net(spec, child_seed(cfg.seed, 1));
    NetSpec value_spec = spec;
    value_spec.output_dim = 1;
    model.value = init_net(value_spec, child_seed(cfg.seed, 2));

    AdamState policy_state, value_state;
    for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
        LossCurvePoint point;
        point.epoch = epoch;
        for (int b = 0; b < cfg.batches_per_epoch; ++b) {
            const NetPolicy policy(model.policy, cfg.entropy_floor);
            const std::uint64_t step_seed = child_seed(cfg.seed, 0x9000 + epoch, b);
            const QlbsRollout roll = qlbs_rollout(policy, env, step_seed, false);
            const QlbsRollout twin = qlbs_rollout(policy, env, step_seed, true);
            const Trajectories traj =
                stack_antithetic(qlbs_trajectories(roll, env.lambda),
                                 qlbs_trajectories(twin, env.lambda));
            const StepDiagnostics diag = reinforce_step(
                model.policy, model.value, traj, cfg, policy_state, value_state);
            point.mean_return += diag.mean_return / cfg.batches_per_epoch;
            point.price += -0.5 *
                           (roll.v_hat.col(0).mean() + twin.v_hat.col(0).mean()) /
                           cfg.batches_per_epoch;
            point.mean_sigma += diag.mean_sigma / cfg.batches_per_epoch;
            point.policy_grad_norm += diag.policy_grad_norm / cfg.batches_per_epoch;
        }
        model.curve.push_back(point);
    }
    return model;
}

/// REINFORCE training loop for the forward replication environment; the
/// initial-wealth vector is optimized jointly by pathwise gradient steps
/// whose rate decays cosine-style to settle the learned price.
inline TrainedModel train_rlop(const RlopConfig& env, NetSpec spec,
                               const TrainConfig& cfg) {
    env.validate();
    cfg.validate();
    TrainedModel model;
    model.kind = EnvKind::rlop;
    model.cfg = cfg;
    spec.output_dim = 2;
    model.policy = init_net(spec, child_seed(cfg.seed, 1));
    NetSpec value_spec = spec;
    value_spec.output_dim = 1;
    model.value = init_net(value_spec, child_seed(cfg.seed, 2));
    model.wealth = default_initial_wealth(env);

    AdamState policy_state, value_state, wealth_state;
    Eigen::VectorXd wealth_vec =
        Eigen::Map<const Eigen::VectorXd>(model.wealth.pi0.data(),
                                          model.wealth.pi0.size());
    const long total_steps =
        static_cast<long>(cfg.n_epochs) * cfg.batches_per_epoch;
    long step_index = 0;
    for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
        LossCurvePoint point;
        point.epoch = epoch;
        for (int b = 0; b < cfg.batches_per_epoch; ++b, ++step_index) {
            const NetPolicy policy(model.policy, cfg.entropy_floor);
            const std::uint64_t step_seed = child_seed(cfg.seed, 0x9000 + epoch, b);
            const RlopRollout roll =
                rlop_rollout(policy, model.wealth, env, step_seed, false);
            const RlopRollout twin =
                rlop_rollout(policy, model.wealth, env, step_seed, true);
            const Trajectories traj =
                stack_antithetic(rlop_trajectories(roll), rlop_trajectories(twin));
            const StepDiagnostics diag = reinforce_step(
                model.policy, model.value, traj, cfg, policy_state, value_state);

            const double progress = static_cast<double>(step_index) / total_steps;
            const double decay = 0.01 + 0.99 * 0.5 * (1.0 + std::cos(M_PI * progress));
            const double lr_pi0 = cfg.learning_rate * cfg.pi0_lr_scale * decay;
            Eigen::VectorXd neg =
                -0.5 * (rlop_wealth_gradient(roll) + rlop_wealth_gradient(twin));
            adam_update(wealth_vec, neg, wealth_state, lr_pi0, cfg);
            for (int i = 0; i < wealth_vec.size(); ++i)
                model.wealth.pi0[i] = wealth_vec[i];

            point.mean_return += diag.mean_return / cfg.batches_per_epoch;
            point.price += wealth_vec[wealth_vec.size() - 1] / cfg.batches_per_epoch;
            point.hedge_error +=
                0.5 *
                ((roll.payoff_at_expiry.col(env.params.n_steps - 1) -
                  roll.terminal_value.col(env.params.n_steps - 1))
                     .cwiseAbs()
                     .mean() +
                 (twin.payoff_at_expiry.col(env.params.n_steps - 1) -
                  twin.terminal_value.col(env.params.n_steps - 1))
                     .cwiseAbs()
                     .mean()) /
                cfg.batches_per_epoch;
            point.mean_sigma += diag.mean_sigma / cfg.batches_per_epoch;
            point.policy_grad_norm += diag.policy_grad_norm / cfg.batches_per_epoch;
        }
        model.curve.push_back(point);
    }
    model.wealth.trained = true;
    return model;
}

}  // namespace hedgelab

#include "hedgelab/train.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "hedgelab/checkpoint.hpp"
#include "hedgelab/pricers.hpp"

using namespace hedgelab;

namespace {

NetSpec tiny_spec() {
    NetSpec spec;
    spec.hidden_width = 16;
    spec.n_residual_blocks = 1;
    return spec;
}

Trajectories synthetic_trajectories(int n, double constant_return,
                                    std::uint64_t seed) {
    const CounterRng rng(seed);
    Trajectories traj;
    traj.features.resize(n, 3);
    traj.actions.resize(n);
    traj.returns.resize(n);
    for (int i = 0; i < n; ++i) {
        traj.features(i, 0) = rng.uniform(0, i);
        traj.features(i, 1) = 2.0 * rng.uniform(1, i) - 1.0;
        traj.features(i, 2) = rng.uniform(2, i);
        traj.actions[i] = rng.normal(3, i);
        traj.returns[i] = constant_return;
    }
    traj.mean_episode_return = constant_return;
    traj.n_episodes = n;
    return traj;
}

TEST(ReinforceStep, ZeroRewardsAreAFixedPoint) {
    NetSpec spec = tiny_spec();
    spec.output_dim = 2;
    NetParams policy = init_net(spec, 3);
    NetSpec vspec = spec;
    vspec.output_dim = 1;
    NetParams value = init_net(vspec, 4);
    const Eigen::VectorXd policy_before = policy.values;
    const Eigen::VectorXd value_before = value.values;

    TrainConfig cfg;
    AdamState ps, vs;
    const Trajectories traj = synthetic_trajectories(64, 0.0, 5);
    // Zero-init heads give a zero baseline, so the advantage vanishes and
    // neither network moves.
    const StepDiagnostics diag = reinforce_step(policy, value, traj, cfg, ps, vs);
    EXPECT_DOUBLE_EQ(diag.policy_grad_norm, 0.0);
    EXPECT_DOUBLE_EQ(diag.value_grad_norm, 0.0);
    EXPECT_EQ(policy.values, policy_before);
    EXPECT_EQ(value.values, value_before);
}

TEST(ReinforceStep, BaselineAbsorbsConstantReward) {
    NetSpec spec = tiny_spec();
    NetParams policy = init_net(spec, 13);
    NetSpec vspec = spec;
    vspec.output_dim = 1;
    NetParams value = init_net(vspec, 14);

    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.normalize_advantages = false;  // isolate the raw baseline effect
    AdamState ps, vs;
    double first_norm = 0.0, last_norm = 0.0;
    for (int step = 0; step < 200; ++step) {
        const Trajectories traj = synthetic_trajectories(128, 0.01, 100 + step);
        const StepDiagnostics diag = reinforce_step(policy, value, traj, cfg, ps, vs);
        if (step == 0) first_norm = diag.policy_grad_norm;
        last_norm = diag.policy_grad_norm;
    }
    EXPECT_LT(last_norm, 0.2 * first_norm);
}

TEST(ReinforceStep, LearnedBaselineReducesGradientVariance) {
    QlbsConfig env;
    env.params.mu = 0.04;
    env.params.sigma = 0.2;
    env.params.r = 0.04;
    env.params.dt = 1.0 / 252.0;
    env.params.n_steps = 8;
    env.params.s0 = 1.0;
    env.payoff.strike = 1.0;
    env.lambda = 0.001;
    env.batch_size = 32;

    NetSpec spec = tiny_spec();
    TrainConfig cfg;
    cfg.n_epochs = 150;
    cfg.learning_rate = 1e-3;
    cfg.seed = 99;
    const TrainedModel model = train_qlbs(env, spec, cfg);

    // Same rollouts, gradient estimator with and without the baseline.
    const int n_rollouts = 100;
    const Eigen::Index n_params = model.policy.spec.param_count();
    Eigen::MatrixXd with(n_params, n_rollouts), without(n_params, n_rollouts);
    const NetPolicy policy(model.policy, cfg.entropy_floor);
    for (int k = 0; k < n_rollouts; ++k) {
        const QlbsRollout roll = qlbs_rollout(policy, env, child_seed(424242, k));
        const Trajectories traj = qlbs_trajectories(roll, env.lambda);
        const Eigen::VectorXd baseline = value_forward(model.value, traj.features);

        ForwardCache cache;
        const PolicyEval eval =
            policy_forward(model.policy, traj.features, cfg.entropy_floor, &cache);
        const Eigen::Index n = traj.actions.size();
        Eigen::VectorXd g = Eigen::VectorXd::Zero(n_params);
        weighted_log_prob_backward(model.policy, cache, eval, traj.actions,
                                   (traj.returns - baseline) / double(n), g);
        with.col(k) = g;
        g.setZero();
        weighted_log_prob_backward(model.policy, cache, eval, traj.actions,
                                   traj.returns / double(n), g);
        without.col(k) = g;
    }
    auto total_variance = [](const Eigen::MatrixXd& samples) {
        const Eigen::VectorXd mean = samples.rowwise().mean();
        return (samples.colwise() - mean).squaredNorm() / (samples.cols() - 1.0);
    };
    EXPECT_LT(total_variance(with), total_variance(without));
}

TEST(ReinforceStep, NanRewardAborts) {
    NetSpec spec = tiny_spec();
    NetParams policy = init_net(spec, 23);
    NetSpec vspec = spec;
    vspec.output_dim = 1;
    NetParams value = init_net(vspec, 24);
    TrainConfig cfg;
    AdamState ps, vs;
    Trajectories traj = synthetic_trajectories(8, 1.0, 6);
    traj.returns[3] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(reinforce_step(policy, value, traj, cfg, ps, vs), NumericError);
}

// Smoke training run: the trained policy hedges the terminal payoff at
// least five times more tightly than the untrained one.
TEST(Train, QlbsSmokeImprovesHedgeError) {
    QlbsConfig env;
    env.params.mu = 0.04;
    env.params.sigma = 0.2;
    env.params.r = 0.04;
    env.params.dt = 1.0 / 252.0;
    env.params.n_steps = 28;
    env.params.s0 = 1.0;
    env.payoff.strike = 1.0;
    env.lambda = 0.001;
    env.batch_size = 128;

    NetSpec spec;
    spec.hidden_width = 32;
    TrainConfig cfg;
    cfg.n_epochs = 300;
    cfg.batches_per_epoch = 4;
    cfg.learning_rate = 1e-3;
    cfg.entropy_floor = 0.12;
    cfg.seed = 7;

    const NetParams untrained_policy = init_net(spec, child_seed(cfg.seed, 1));
    const TrainedModel model = train_qlbs(env, spec, cfg);

    const PriceEstimate trained_price =
        qlbs_price(NetPolicy(model.policy, cfg.entropy_floor), env, 4, 5150);
    const PriceEstimate untrained_price =
        qlbs_price(NetPolicy(untrained_policy, cfg.entropy_floor), env, 4, 5150);

    const double before = mean_terminal_hedge_error(
        NetPolicy(untrained_policy, cfg.entropy_floor), untrained_price.price,
        env.params, env.cost, env.payoff, 2000, 888);
    const double after = mean_terminal_hedge_error(
        NetPolicy(model.policy, cfg.entropy_floor), trained_price.price, env.params,
        env.cost, env.payoff, 2000, 888);
    EXPECT_LE(after * 5.0, before)
        << "before=" << before << " after=" << after;
}

// Deterministic world: zero penalty is attainable and the learned initial
// wealth converges to the discounted deterministic payoff.
TEST(Train, RlopDeterministicWorldConverges) {
    RlopConfig env;
    env.params.mu = 0.04;
    env.params.sigma = 0.0;
    env.params.r = 0.04;
    env.params.dt = 1.0 / 252.0;
    env.params.n_steps = 10;
    env.params.s0 = 1.0;
    env.payoff.strike = 0.95;
    env.penalty_kind = PenaltyKind::absolute;
    env.batch_size = 4;

    NetSpec spec = tiny_spec();
    TrainConfig cfg;
    cfg.n_epochs = 400;
    cfg.seed = 21;
    const TrainedModel model = train_rlop(env, spec, cfg);

    const double T = env.params.maturity_years();
    const double s_T = env.params.s0 * std::exp(env.params.mu * T);
    const double target = std::exp(-env.params.r * T) * env.payoff(s_T);
    EXPECT_NEAR(model.wealth.pi0.back(), target, 1e-3);
    EXPECT_LE(std::abs(model.curve.back().hedge_error), 1e-3);

    const auto priced = rlop_price(NetPolicy(model.policy, cfg.entropy_floor),
                                   model.wealth, env, env.params.n_steps);
    EXPECT_FALSE(priced.warning);
    EXPECT_GE(priced.mean_penalty, -1e-3);
}

TEST(Train, SameSeedGivesBitwiseIdenticalModels) {
    QlbsConfig env;
    env.params.sigma = 0.2;
    env.params.r = 0.02;
    env.params.mu = 0.02;
    env.params.n_steps = 6;
    env.batch_size = 16;
    env.lambda = 0.01;

    NetSpec spec = tiny_spec();
    TrainConfig cfg;
    cfg.n_epochs = 25;
    cfg.seed = 31337;
    const TrainedModel a = train_qlbs(env, spec, cfg);
    const TrainedModel b = train_qlbs(env, spec, cfg);
    ASSERT_EQ(a.policy.values, b.policy.values);
    ASSERT_EQ(a.value.values, b.value.values);

    setenv("HEDGELAB_THREADS", "2", 1);
    const TrainedModel c = train_qlbs(env, spec, cfg);
    unsetenv("HEDGELAB_THREADS");
    ASSERT_EQ(a.policy.values, c.policy.values);
}

TEST(Checkpoint, RoundTripAndByteDeterminism) {
    RlopConfig env;
    env.params.n_steps = 4;
    env.batch_size = 4;
    NetSpec spec = tiny_spec();
    TrainConfig cfg;
    cfg.n_epochs = 5;
    cfg.seed = 77;
    const TrainedModel model = train_rlop(env, spec, cfg);

    const auto dir = std::filesystem::temp_directory_path() / "hedgelab_ckpt_test";
    std::filesystem::create_directories(dir);
    const auto path_a = dir / "a.json";
    const auto path_b = dir / "b.json";
    save_checkpoint(path_a, model);
    save_checkpoint(path_b, model);

    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    EXPECT_EQ(slurp(path_a), slurp(path_b));

    const TrainedModel loaded = load_checkpoint(path_a);
    EXPECT_EQ(loaded.kind, EnvKind::rlop);
    EXPECT_EQ(loaded.policy.values, model.policy.values);
    EXPECT_EQ(loaded.value.values, model.value.values);
    EXPECT_EQ(loaded.wealth.pi0, model.wealth.pi0);
    EXPECT_TRUE(loaded.wealth.trained);
    EXPECT_EQ(loaded.cfg.seed, model.cfg.seed);
    std::filesystem::remove_all(dir);
}

}  // namespace

#pragma once

#include <Eigen/Core>
#include <utility>

#include "hedgelab/net.hpp"

namespace hedgelab {

/// Policy backed by a trained network; evaluates a whole feature batch with
/// two matrix passes.
class NetPolicy {
  public:
    NetPolicy(const NetParams& params, double entropy_floor)
        : params_(&params), entropy_floor_(entropy_floor) {}

    void eval(const Eigen::MatrixXd& features, Eigen::VectorXd& mean,
              Eigen::VectorXd& std) const {
        const PolicyEval out = policy_forward(*params_, features, entropy_floor_);
        mean = out.mean;
        std = out.std;
    }

  private:
    const NetParams* params_;
    double entropy_floor_;
};

/// Adapts a scalar rule (t_frac, x, time_to_expiry) -> (mean, std) to the
/// batch policy interface; handy for fixed benchmark policies in tests and
/// backtests.
template <class Fn>
class CallbackPolicy {
  public:
    explicit CallbackPolicy(Fn fn, double std = 0.0) : fn_(std::move(fn)), std_(std) {}

    void eval(const Eigen::MatrixXd& features, Eigen::VectorXd& mean,
              Eigen::VectorXd& std) const {
        const Eigen::Index n = features.rows();
        mean.resize(n);
        std.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            mean[i] = fn_(features(i, 0), features(i, 1), features(i, 2));
            std[i] = std_;
        }
    }

  private:
    Fn fn_;
    double std_;
};

template <class Fn>
CallbackPolicy<Fn> make_callback_policy(Fn fn, double std = 0.0) {
    return CallbackPolicy<Fn>(std::move(fn), std);
}

inline auto zero_policy() {
    return make_callback_policy([](double, double, double) { return 0.0; });
}

}  // namespace hedgelab

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hedgelab/errors.hpp"
#include "hedgelab/rng.hpp"

namespace hedgelab {

/// Architecture descriptor for the residual MLPs used by the policy and
/// value heads. Two output columns mean (action mean, raw action std);
/// one means a scalar value estimate.
struct NetSpec {
    int input_dim = 3;  ///< t/T, X_t, time to expiry
    int hidden_width = 64;
    int n_residual_blocks = 2;
    int output_dim = 2;

    int param_count() const {
        const int h = hidden_width;
        return hidden_width * input_dim + h +
               n_residual_blocks * 2 * (h * h + h) + output_dim * h + output_dim;
    }

    void validate() const {
        if (input_dim < 1 || hidden_width < 1 || n_residual_blocks < 0 ||
            output_dim < 1)
            throw ValidationError("NetSpec: dimensions must be positive");
    }

    bool operator==(const NetSpec&) const = default;
};

/// Flat parameter vector plus its architecture and the seed used at init.
struct NetParams {
    NetSpec spec;
    Eigen::VectorXd values;
    std::uint64_t init_seed = 0;

    void validate() const {
        spec.validate();
        if (values.size() != spec.param_count())
            throw ValidationError("NetParams: parameter vector length mismatch");
    }
};

namespace detail {

// Offset bookkeeping into the flat parameter buffer. Layout:
// W_in, b_in, then per block (W1, b1, W2, b2), then W_out, b_out.
template <bool IsConst>
struct ParamView {
    using Mat = Eigen::Map<std::conditional_t<IsConst, const Eigen::MatrixXd, Eigen::MatrixXd>>;
    using Vec = Eigen::Map<std::conditional_t<IsConst, const Eigen::VectorXd, Eigen::VectorXd>>;
    using Ptr = std::conditional_t<IsConst, const double*, double*>;

    ParamView(const NetSpec& spec, Ptr data) : spec_(spec), data_(data) {}

    Mat w_in() const { return Mat(data_, spec_.hidden_width, spec_.input_dim); }
    Vec b_in() const {
        return Vec(data_ + spec_.hidden_width * spec_.input_dim, spec_.hidden_width);
    }
    Mat w1(int k) const { return Mat(data_ + block_offset(k), h(), h()); }
    Vec b1(int k) const { return Vec(data_ + block_offset(k) + h() * h(), h()); }
    Mat w2(int k) const {
        return Mat(data_ + block_offset(k) + h() * h() + h(), h(), h());
    }
    Vec b2(int k) const {
        return Vec(data_ + block_offset(k) + 2 * h() * h() + h(), h());
    }
    Mat w_out() const { return Mat(data_ + head_offset(), spec_.output_dim, h()); }
    Vec b_out() const {
        return Vec(data_ + head_offset() + spec_.output_dim * h(), spec_.output_dim);
    }
    int head_offset() const { return block_offset(spec_.n_residual_blocks); }

  private:
    int h() const { return spec_.hidden_width; }
    int block_offset(int k) const {
        return spec_.hidden_width * spec_.input_dim + spec_.hidden_width +
               k * 2 * (h() * h() + h());
    }

    NetSpec spec_;
    Ptr data_;
};

using ConstParamView = ParamView<true>;
using MutableParamView = ParamView<false>;

inline double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                    : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace detail

/// Zero-initialized output head on top of Xavier-uniform hidden layers:
/// the initial policy mean is exactly zero for every input.
inline NetParams init_net(const NetSpec& spec, std::uint64_t seed) {
    spec.validate();
    NetParams params;
    params.spec = spec;
    params.init_seed = seed;
    params.values = Eigen::VectorXd::Zero(spec.param_count());
    const CounterRng rng(seed);
    detail::MutableParamView view(spec, params.values.data());

    auto fill = [&](auto mat, double fan_in, double fan_out, std::uint64_t stream) {
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (int j = 0; j < mat.cols(); ++j)
            for (int i = 0; i < mat.rows(); ++i)
                mat(i, j) = bound * (2.0 * rng.uniform(stream, i + j * mat.rows()) - 1.0);
    };
    fill(view.w_in(), spec.input_dim, spec.hidden_width, 1);
    for (int k = 0; k < spec.n_residual_blocks; ++k) {
        fill(view.w1(k), spec.hidden_width, spec.hidden_width, 10 + 2 * k);
        fill(view.w2(k), spec.hidden_width, spec.hidden_width, 11 + 2 * k);
    }
    // Output head stays zero.
    return params;
}

/// Activations retained for backpropagation.
struct ForwardCache {
    Eigen::MatrixXd x;
    std::vector<Eigen::MatrixXd> h;  ///< residual trunk states, size blocks+1
    std::vector<Eigen::MatrixXd> a;  ///< per-block tanh activations
    Eigen::MatrixXd out;
};

/// Batched forward pass: rows of `features` are independent samples.
inline void net_forward(const NetParams& params, const Eigen::MatrixXd& features,
                        Eigen::MatrixXd& out, ForwardCache* cache = nullptr) {
    params.validate();
    if (features.cols() != params.spec.input_dim)
        throw ValidationError("net_forward: feature dimension mismatch");
    const auto& spec = params.spec;
    detail::ConstParamView view(spec, params.values.data());

    Eigen::MatrixXd h =
        ((features * view.w_in().transpose()).rowwise() + view.b_in().transpose())
            .array()
            .tanh()
            .matrix();
    if (cache) {
        cache->x = features;
        cache->h.assign(1, h);
        cache->a.clear();
    }
    for (int k = 0; k < spec.n_residual_blocks; ++k) {
        Eigen::MatrixXd a =
            ((h * view.w1(k).transpose()).rowwise() + view.b1(k).transpose())
                .array()
                .tanh()
                .matrix();
        h = (h + a * view.w2(k).transpose()).rowwise() + view.b2(k).transpose();
        if (cache) {
            cache->a.push_back(a);
            cache->h.push_back(h);
        }
    }
    out = (h * view.w_out().transpose()).rowwise() + view.b_out().transpose();
    if (cache) cache->out = out;
}

/// Accumulates d(sum of losses)/d(params) into `grad`, given the upstream
/// gradient `dout` w.r.t. the network outputs.
inline void net_backward(const NetParams& params, const ForwardCache& cache,
                         const Eigen::MatrixXd& dout, Eigen::VectorXd& grad) {
    const auto& spec = params.spec;
    if (grad.size() != spec.param_count()) grad = Eigen::VectorXd::Zero(spec.param_count());
    detail::ConstParamView view(spec, params.values.data());
    detail::MutableParamView gview(spec, grad.data());

    gview.w_out() += dout.transpose() * cache.h.back();
    gview.b_out() += dout.colwise().sum().transpose();
    Eigen::MatrixXd dh = dout * view.w_out();

    for (int k = spec.n_residual_blocks - 1; k >= 0; --k) {
        const Eigen::MatrixXd& a = cache.a[k];
        const Eigen::MatrixXd& h_in = cache.h[k];
        gview.w2(k) += dh.transpose() * a;
        gview.b2(k) += dh.colwise().sum().transpose();
        const Eigen::MatrixXd da = dh * view.w2(k);
        const Eigen::MatrixXd dp =
            (da.array() * (1.0 - a.array().square())).matrix();
        gview.w1(k) += dp.transpose() * h_in;
        gview.b1(k) += dp.colwise().sum().transpose();
        dh += dp * view.w1(k);
    }
    const Eigen::MatrixXd dp_in =
        (dh.array() * (1.0 - cache.h.front().array().square())).matrix();
    gview.w_in() += dp_in.transpose() * cache.x;
    gview.b_in() += dp_in.colwise().sum().transpose();
}

/// Gaussian policy head evaluation: mean from column 0, std from a softplus
/// of column 1 plus the entropy floor (so sigma > 0 always).
struct PolicyEval {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
    Eigen::VectorXd raw_std;
};

inline PolicyEval policy_forward(const NetParams& params,
                                 const Eigen::MatrixXd& features,
                                 double entropy_floor,
                                 ForwardCache* cache = nullptr) {
    if (params.spec.output_dim != 2)
        throw ValidationError("policy_forward: policy nets need two output heads");
    Eigen::MatrixXd out;
    net_forward(params, features, out, cache);
    PolicyEval eval;
    eval.mean = out.col(0);
    eval.raw_std = out.col(1);
    eval.std = eval.raw_std.unaryExpr(
        [entropy_floor](double x) { return detail::softplus(x) + entropy_floor; });
    return eval;
}

/// Scalar value-net evaluation (output head of width one).
inline Eigen::VectorXd value_forward(const NetParams& params,
                                     const Eigen::MatrixXd& features,
                                     ForwardCache* cache = nullptr) {
    if (params.spec.output_dim != 1)
        throw ValidationError("value_forward: value nets need one output head");
    Eigen::MatrixXd out;
    net_forward(params, features, out, cache);
    return out.col(0);
}

inline double gaussian_log_prob(double action, double mean, double std) {
    const double z = (action - mean) / std;
    return -0.5 * z * z - std::log(std) - 0.5 * std::log(2.0 * M_PI);
}

/// Accumulates the score-function gradient with separate per-sample weights
/// for the mean and std channels (they admit different variance-reduction
/// treatments). Returns sum_i mean_weights_i log pi(a_i | features_i).
inline double weighted_log_prob_backward(const NetParams& params,
                                         const ForwardCache& cache,
                                         const PolicyEval& eval,
                                         const Eigen::VectorXd& actions,
                                         const Eigen::VectorXd& mean_weights,
                                         const Eigen::VectorXd& std_weights,
                                         Eigen::VectorXd& grad) {
    const Eigen::Index n = actions.size();
    Eigen::MatrixXd dout(n, 2);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = eval.mean[i];
        const double sd = eval.std[i];
        const double z = (actions[i] - mu) / sd;
        total += mean_weights[i] * gaussian_log_prob(actions[i], mu, sd);
        const double dmu = z / sd;
        const double dsd = (z * z - 1.0) / sd;
        dout(i, 0) = mean_weights[i] * dmu;
        dout(i, 1) = std_weights[i] * dsd * detail::sigmoid(eval.raw_std[i]);
    }
    net_backward(params, cache, dout, grad);
    return total;
}

/// Single-weight variant: both channels share the advantage.
inline double weighted_log_prob_backward(const NetParams& params,
                                         const ForwardCache& cache,
                                         const PolicyEval& eval,
                                         const Eigen::VectorXd& actions,
                                         const Eigen::VectorXd& weights,
                                         Eigen::VectorXd& grad) {
    return weighted_log_prob_backward(params, cache, eval, actions, weights, weights,
                                      grad);
}

/// Single-sample log-density and exact parameter gradient.
inline std::pair<double, Eigen::VectorXd> log_prob_and_grad(
    const NetParams& params, const Eigen::RowVectorXd& features, double action,
    double entropy_floor) {
    ForwardCache cache;
    const PolicyEval eval = policy_forward(params, features, entropy_floor, &cache);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.spec.param_count());
    Eigen::VectorXd actions(1), weights(1);
    actions << action;
    weights << 1.0;
    const double logp =
        weighted_log_prob_backward(params, cache, eval, actions, weights, grad);
    return {logp, std::move(grad)};
}

}  // namespace hedgelab

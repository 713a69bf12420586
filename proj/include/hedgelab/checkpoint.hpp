#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hedgelab/errors.hpp"
#include "hedgelab/train.hpp"

namespace hedgelab {

// Versioned JSON record of a trained model. Floats round-trip exactly
// through nlohmann's shortest-representation printing, so identical models
// serialize to identical bytes.
inline constexpr int kCheckpointSchemaVersion = 1;

inline nlohmann::json net_spec_to_json(const NetSpec& spec) {
    return {{"input_dim", spec.input_dim},
            {"hidden_width", spec.hidden_width},
            {"n_residual_blocks", spec.n_residual_blocks},
            {"output_dim", spec.output_dim}};
}

inline NetSpec net_spec_from_json(const nlohmann::json& j) {
    NetSpec spec;
    spec.input_dim = j.at("input_dim").get<int>();
    spec.hidden_width = j.at("hidden_width").get<int>();
    spec.n_residual_blocks = j.at("n_residual_blocks").get<int>();
    spec.output_dim = j.at("output_dim").get<int>();
    spec.validate();
    return spec;
}

inline nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    return {{"learning_rate", cfg.learning_rate},
            {"beta1", cfg.beta1},
            {"beta2", cfg.beta2},
            {"adam_eps", cfg.adam_eps},
            {"batches_per_epoch", cfg.batches_per_epoch},
            {"n_epochs", cfg.n_epochs},
            {"entropy_floor", cfg.entropy_floor},
            {"grad_clip_norm", cfg.grad_clip_norm},
            {"pi0_lr_scale", cfg.pi0_lr_scale},
            {"normalize_advantages", cfg.normalize_advantages},
            {"seed", cfg.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.beta1 = j.at("beta1").get<double>();
    cfg.beta2 = j.at("beta2").get<double>();
    cfg.adam_eps = j.at("adam_eps").get<double>();
    cfg.batches_per_epoch = j.at("batches_per_epoch").get<int>();
    cfg.n_epochs = j.at("n_epochs").get<int>();
    cfg.entropy_floor = j.at("entropy_floor").get<double>();
    cfg.grad_clip_norm = j.at("grad_clip_norm").get<double>();
    cfg.pi0_lr_scale = j.at("pi0_lr_scale").get<double>();
    cfg.normalize_advantages = j.at("normalize_advantages").get<bool>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.validate();
    return cfg;
}

inline void save_checkpoint(const std::filesystem::path& path,
                            const TrainedModel& model) {
    nlohmann::json j;
    j["schema_version"] = kCheckpointSchemaVersion;
    j["env"] = env_kind_name(model.kind);
    j["net_spec"] = net_spec_to_json(model.policy.spec);
    j["policy_init_seed"] = model.policy.init_seed;
    j["value_init_seed"] = model.value.init_seed;
    j["policy_params"] =
        std::vector<double>(model.policy.values.data(),
                            model.policy.values.data() + model.policy.values.size());
    j["value_params"] =
        std::vector<double>(model.value.values.data(),
                            model.value.values.data() + model.value.values.size());
    j["initial_wealth"] = model.wealth.pi0;
    j["wealth_trained"] = model.wealth.trained;
    j["train_config"] = train_config_to_json(model.cfg);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_checkpoint: cannot open " + path.string());
    out << j.dump(2) << '\n';
}

inline TrainedModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_checkpoint: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_checkpoint: bad JSON in " + path.string() + ": " + e.what());
    }
    if (j.at("schema_version").get<int>() != kCheckpointSchemaVersion)
        throw DataError("load_checkpoint: unsupported schema version");

    TrainedModel model;
    const std::string env = j.at("env").get<std::string>();
    if (env == "qlbs")
        model.kind = EnvKind::qlbs;
    else if (env == "rlop")
        model.kind = EnvKind::rlop;
    else
        throw DataError("load_checkpoint: unknown env tag " + env);

    const NetSpec spec = net_spec_from_json(j.at("net_spec"));
    model.policy.spec = spec;
    model.policy.init_seed = j.at("policy_init_seed").get<std::uint64_t>();
    const auto pv = j.at("policy_params").get<std::vector<double>>();
    model.policy.values = Eigen::Map<const Eigen::VectorXd>(pv.data(), pv.size());
    model.policy.validate();

    model.value.spec = spec;
    model.value.spec.output_dim = 1;
    model.value.init_seed = j.at("value_init_seed").get<std::uint64_t>();
    const auto vv = j.at("value_params").get<std::vector<double>>();
    model.value.values = Eigen::Map<const Eigen::VectorXd>(vv.data(), vv.size());
    model.value.validate();

    model.wealth.pi0 = j.at("initial_wealth").get<std::vector<double>>();
    model.wealth.trained = j.at("wealth_trained").get<bool>();
    model.cfg = train_config_from_json(j.at("train_config"));
    return model;
}

/// Loss-curve CSV companion artifact for a training run.
inline void save_loss_curve(const std::filesystem::path& path,
                            const std::vector<LossCurvePoint>& curve) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_loss_curve: cannot open " + path.string());
    out << "epoch,mean_return,price,hedge_error,mean_sigma,policy_grad_norm\n";
    out.precision(17);
    for (const auto& p : curve)
        out << p.epoch << ',' << p.mean_return << ',' << p.price << ','
            << p.hedge_error << ',' << p.mean_sigma << ',' << p.policy_grad_norm
            << '\n';
}

}  // namespace hedgelab

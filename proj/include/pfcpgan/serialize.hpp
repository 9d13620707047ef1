#pragma once

// JSON snapshots of configuration structs (checkpoint manifests, run metadata).

#include <nlohmann/json.hpp>

#include "pfcpgan/config.hpp"

namespace pfcpgan {

using Json = nlohmann::ordered_json;

inline Json to_json(const ImageShape& s) { return {{"height", s.height}, {"width", s.width}, {"channels", s.channels}}; }
inline ImageShape image_shape_from_json(const Json& j) {
  return {j.at("height").get<int>(), j.at("width").get<int>(), j.at("channels").get<int>()};
}

inline Json to_json(const DatasetSpec& s) {
  return {{"n_subjects", s.n_subjects},
          {"frontal_per_subject", s.frontal_per_subject},
          {"profile_per_subject", s.profile_per_subject},
          {"image_size", to_json(s.image_size)},
          {"seed", s.seed},
          {"yaw_min", s.yaw_min},
          {"yaw_max", s.yaw_max},
          {"noise_std", s.noise_std}};
}
inline DatasetSpec dataset_spec_from_json(const Json& j) {
  DatasetSpec s;
  s.n_subjects = j.at("n_subjects").get<int>();
  s.frontal_per_subject = j.at("frontal_per_subject").get<int>();
  s.profile_per_subject = j.at("profile_per_subject").get<int>();
  s.image_size = image_shape_from_json(j.at("image_size"));
  s.seed = j.at("seed").get<std::uint64_t>();
  s.yaw_min = j.at("yaw_min").get<double>();
  s.yaw_max = j.at("yaw_max").get<double>();
  s.noise_std = j.at("noise_std").get<double>();
  return s;
}

inline Json to_json(const GeneratorConfig& c) {
  return {{"image_size", to_json(c.image_size)},
          {"base_channels", c.base_channels},
          {"n_down", c.n_down},
          {"embedding_dim", c.embedding_dim}};
}
inline GeneratorConfig generator_config_from_json(const Json& j) {
  GeneratorConfig c;
  c.image_size = image_shape_from_json(j.at("image_size"));
  c.base_channels = j.at("base_channels").get<int>();
  c.n_down = j.at("n_down").get<int>();
  c.embedding_dim = j.at("embedding_dim").get<int>();
  return c;
}

inline Json to_json(const LossConfig& c) {
  return {{"margin", c.margin},
          {"lambda_1", c.lambda_1},
          {"lambda_2", c.lambda_2},
          {"lambda_3", c.lambda_3},
          {"gan_form", gan_form_name(c.gan_form)},
          {"contrastive_form", contrastive_form_name(c.contrastive_form)}};
}
inline LossConfig loss_config_from_json(const Json& j) {
  LossConfig c;
  c.margin = j.at("margin").get<double>();
  c.lambda_1 = j.at("lambda_1").get<double>();
  c.lambda_2 = j.at("lambda_2").get<double>();
  c.lambda_3 = j.at("lambda_3").get<double>();
  c.gan_form = parse_gan_form(j.at("gan_form").get<std::string>());
  c.contrastive_form = parse_contrastive_form(j.at("contrastive_form").get<std::string>());
  return c;
}

inline Json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"max_steps", c.max_steps},
          {"seed", c.seed},
          {"loss", to_json(c.loss_config)},
          {"ablation_preset", preset_name(c.ablation_preset)},
          {"checkpoint_every", c.checkpoint_every},
          {"log_every", c.log_every},
          {"grad_clip", c.grad_clip}};
}
inline TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.max_steps = j.at("max_steps").get<std::int64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.loss_config = loss_config_from_json(j.at("loss"));
  c.ablation_preset = parse_preset(j.at("ablation_preset").get<std::string>());
  c.checkpoint_every = j.at("checkpoint_every").get<std::int64_t>();
  c.log_every = j.at("log_every").get<std::int64_t>();
  c.grad_clip = j.at("grad_clip").get<double>();
  return c;
}

}  // namespace pfcpgan

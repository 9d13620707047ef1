#pragma once

// Run configuration file: INI sections [data] [model] [loss] [train] [eval] plus a
// top-level `schema = pfcpgan-config-1`. Every key is optional; unknown keys are
// rejected with their section.key path.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "pfcpgan/config.hpp"
#include "pfcpgan/error.hpp"

namespace pfcpgan {

inline constexpr const char* kConfigSchema = "pfcpgan-config-1";

namespace detail {

template <typename V>
V parse_value(const std::string& path, const std::string& text) {
  std::istringstream in(text);
  V v{};
  in >> v;
  if (!in || !(in >> std::ws).eof()) throw ConfigError(path + ": cannot parse '" + text + "'");
  return v;
}

template <>
inline bool parse_value<bool>(const std::string& path, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(path + ": expected true or false, got '" + text + "'");
}

template <typename V>
std::vector<V> parse_list(const std::string& path, const std::string& text) {
  std::vector<V> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError(path + ": empty list item");
    out.push_back(parse_value<V>(path, item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw ConfigError(path + ": empty list");
  return out;
}

template <typename V>
std::string join(const std::vector<V>& v) {
  std::ostringstream o;
  o.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) o << (i ? "," : "") << v[i];
  return o.str();
}

using Setter = std::function<void(RunConfig&, const std::string& path, const std::string& text)>;
using Getter = std::function<std::string(const RunConfig&)>;
struct Field {
  Setter set;
  Getter get;
};

template <typename V, typename Ref>
Field scalar(Ref ref) {
  return {[ref](RunConfig& c, const std::string& p, const std::string& t) { ref(c) = parse_value<V>(p, t); },
          [ref](const RunConfig& c) {
            std::ostringstream o;
            o.precision(17);
            if constexpr (std::is_same_v<V, bool>)
              o << (ref(const_cast<RunConfig&>(c)) ? "true" : "false");
            else
              o << ref(const_cast<RunConfig&>(c));
            return o.str();
          }};
}

// Section -> key -> accessor, in the order the resolved config is written.
inline const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>& schema() {
  using F = std::vector<std::pair<std::string, Field>>;
  static const std::vector<std::pair<std::string, F>> s = {
      {"data",
       {{"n_subjects", scalar<int>([](RunConfig& c) -> int& { return c.data.n_subjects; })},
        {"frontal_per_subject", scalar<int>([](RunConfig& c) -> int& { return c.data.frontal_per_subject; })},
        {"profile_per_subject", scalar<int>([](RunConfig& c) -> int& { return c.data.profile_per_subject; })},
        {"height", scalar<int>([](RunConfig& c) -> int& { return c.data.image_size.height; })},
        {"width", scalar<int>([](RunConfig& c) -> int& { return c.data.image_size.width; })},
        {"channels", scalar<int>([](RunConfig& c) -> int& { return c.data.image_size.channels; })},
        {"seed", scalar<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.data.seed; })},
        {"yaw_min", scalar<double>([](RunConfig& c) -> double& { return c.data.yaw_min; })},
        {"yaw_max", scalar<double>([](RunConfig& c) -> double& { return c.data.yaw_max; })},
        {"noise_std", scalar<double>([](RunConfig& c) -> double& { return c.data.noise_std; })}}},
      {"model",
       {{"base_channels", scalar<int>([](RunConfig& c) -> int& { return c.model.base_channels; })},
        {"n_down", scalar<int>([](RunConfig& c) -> int& { return c.model.n_down; })},
        {"embedding_dim", scalar<int>([](RunConfig& c) -> int& { return c.model.embedding_dim; })}}},
      {"loss",
       {{"margin", scalar<double>([](RunConfig& c) -> double& { return c.train.loss_config.margin; })},
        {"lambda_1", scalar<double>([](RunConfig& c) -> double& { return c.train.loss_config.lambda_1; })},
        {"lambda_2", scalar<double>([](RunConfig& c) -> double& { return c.train.loss_config.lambda_2; })},
        {"lambda_3", scalar<double>([](RunConfig& c) -> double& { return c.train.loss_config.lambda_3; })},
        {"gan_form", {[](RunConfig& c, const std::string&, const std::string& t) {
                        c.train.loss_config.gan_form = parse_gan_form(t);
                      },
                      [](const RunConfig& c) { return std::string(gan_form_name(c.train.loss_config.gan_form)); }}},
        {"contrastive_form",
         {[](RunConfig& c, const std::string&, const std::string& t) {
            c.train.loss_config.contrastive_form = parse_contrastive_form(t);
          },
          [](const RunConfig& c) { return std::string(contrastive_form_name(c.train.loss_config.contrastive_form)); }}}}},
      {"train",
       {{"batch_size", scalar<int>([](RunConfig& c) -> int& { return c.train.batch_size; })},
        {"learning_rate", scalar<double>([](RunConfig& c) -> double& { return c.train.learning_rate; })},
        {"adam_beta1", scalar<double>([](RunConfig& c) -> double& { return c.train.adam_beta1; })},
        {"adam_beta2", scalar<double>([](RunConfig& c) -> double& { return c.train.adam_beta2; })},
        {"adam_eps", scalar<double>([](RunConfig& c) -> double& { return c.train.adam_eps; })},
        {"max_steps", scalar<std::int64_t>([](RunConfig& c) -> std::int64_t& { return c.train.max_steps; })},
        {"seed", scalar<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.train.seed; })},
        {"preset", {[](RunConfig& c, const std::string&, const std::string& t) {
                      c.train.ablation_preset = parse_preset(t);
                    },
                    [](const RunConfig& c) { return std::string(preset_name(c.train.ablation_preset)); }}},
        {"checkpoint_every",
         scalar<std::int64_t>([](RunConfig& c) -> std::int64_t& { return c.train.checkpoint_every; })},
        {"log_every", scalar<std::int64_t>([](RunConfig& c) -> std::int64_t& { return c.train.log_every; })},
        {"grad_clip", scalar<double>([](RunConfig& c) -> double& { return c.train.grad_clip; })}}},
      {"eval",
       {{"n_folds", scalar<int>([](RunConfig& c) -> int& { return c.eval.folds.n_folds; })},
        {"same_pairs_per_subject", scalar<int>([](RunConfig& c) -> int& { return c.eval.folds.same_pairs_per_subject; })},
        {"diff_pairs_per_subject", scalar<int>([](RunConfig& c) -> int& { return c.eval.folds.diff_pairs_per_subject; })},
        {"fold_seed", scalar<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.eval.folds.seed; })},
        {"holdout_fold", scalar<int>([](RunConfig& c) -> int& { return c.eval.holdout_fold; })},
        {"far_targets", {[](RunConfig& c, const std::string& p, const std::string& t) {
                           c.eval.far_targets = parse_list<double>(p, t);
                         },
                         [](const RunConfig& c) { return join(c.eval.far_targets); }}},
        {"ks", {[](RunConfig& c, const std::string& p, const std::string& t) { c.eval.ks = parse_list<int>(p, t); },
                [](const RunConfig& c) { return join(c.eval.ks); }}},
        {"yaw_bins", {[](RunConfig& c, const std::string& p, const std::string& t) {
                        c.eval.yaw_bins = parse_list<double>(p, t);
                      },
                      [](const RunConfig& c) { return join(c.eval.yaw_bins); }}},
        {"scorer", {[](RunConfig& c, const std::string& p, const std::string& t) {
                      if (t == "euclidean")
                        c.eval.scorer = Scorer::kEuclidean;
                      else if (t == "cosine")
                        c.eval.scorer = Scorer::kCosine;
                      else
                        throw ConfigError(p + ": expected euclidean or cosine, got '" + t + "'");
                    },
                    [](const RunConfig& c) {
                      return std::string(c.eval.scorer == Scorer::kEuclidean ? "euclidean" : "cosine");
                    }}},
        {"zero_skips", scalar<bool>([](RunConfig& c) -> bool& { return c.eval.zero_skips; })}}},
  };
  return s;
}

}  // namespace detail

/// Parses config text; defaults fill every absent key. Validates the result.
inline RunConfig parse_run_config(const std::string& text, const std::string& origin = "<config>") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunConfig c;
  const auto& schema = detail::schema();
  for (const auto& [key, node] : tree) {
    if (node.empty()) {
      if (key != "schema") throw ConfigError(origin + ": unknown key '" + key + "'");
      if (node.data() != kConfigSchema)
        throw ConfigError(origin + ": schema '" + node.data() + "', expected '" + kConfigSchema + "'");
      continue;
    }
    auto sec = std::find_if(schema.begin(), schema.end(), [&](const auto& s) { return s.first == key; });
    if (sec == schema.end()) throw ConfigError(origin + ": unknown section '" + key + "'");
    for (const auto& [k, v] : node) {
      const std::string path = key + "." + k;
      auto f = std::find_if(sec->second.begin(), sec->second.end(), [&](const auto& p) { return p.first == k; });
      if (f == sec->second.end()) throw ConfigError(origin + ": unknown key '" + path + "'");
      try {
        f->second.set(c, path, v.data());
      } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + path + ": " + e.what());
      }
    }
  }
  c.sync();
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open config");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

/// Fully resolved config in the same format; parse_run_config(to_ini(c)) == c.
inline std::string to_ini(const RunConfig& c) {
  std::ostringstream o;
  o << "schema = " << kConfigSchema << "\n";
  for (const auto& [section, fields] : detail::schema()) {
    o << "\n[" << section << "]\n";
    for (const auto& [key, f] : fields) o << key << " = " << f.get(c) << "\n";
  }
  return o.str();
}

}  // namespace pfcpgan

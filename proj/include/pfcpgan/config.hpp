#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include "pfcpgan/data.hpp"
#include "pfcpgan/error.hpp"
#include "pfcpgan/losses.hpp"
#include "pfcpgan/networks.hpp"
#include "pfcpgan/optim.hpp"

namespace pfcpgan {

/// Which loss terms are active: coupling + L2 always; the adversarial and
/// perceptual terms are switched on progressively.
enum class AblationPreset { kCplL2, kCplL2Gan, kFull };

inline const char* preset_name(AblationPreset p) {
  switch (p) {
    case AblationPreset::kCplL2: return "cpl_l2";
    case AblationPreset::kCplL2Gan: return "cpl_l2_gan";
    case AblationPreset::kFull: return "full";
  }
  return "?";
}

inline AblationPreset parse_preset(const std::string& s) {
  std::string k;
  for (char c : s) k += c == '-' ? '_' : char(std::tolower(static_cast<unsigned char>(c)));
  if (k == "cpl_l2") return AblationPreset::kCplL2;
  if (k == "cpl_l2_gan") return AblationPreset::kCplL2Gan;
  if (k == "full") return AblationPreset::kFull;
  throw ConfigError("unknown preset '" + s + "' (expected cpl_l2, cpl_l2_gan or full)");
}

inline bool uses_gan(AblationPreset p) { return p != AblationPreset::kCplL2; }
inline bool uses_perceptual(AblationPreset p) { return p == AblationPreset::kFull; }

inline const char* gan_form_name(GanForm f) { return f == GanForm::kMinimax ? "minimax" : "non_saturating"; }
inline GanForm parse_gan_form(const std::string& s) {
  if (s == "minimax") return GanForm::kMinimax;
  if (s == "non_saturating" || s == "nonsaturating") return GanForm::kNonSaturating;
  throw ConfigError("unknown gan form '" + s + "' (expected minimax or non_saturating)");
}

inline const char* contrastive_form_name(ContrastiveForm f) {
  return f == ContrastiveForm::kSquaredHinge ? "squared_hinge" : "hinge_of_square";
}
inline ContrastiveForm parse_contrastive_form(const std::string& s) {
  if (s == "squared_hinge") return ContrastiveForm::kSquaredHinge;
  if (s == "hinge_of_square") return ContrastiveForm::kHingeOfSquare;
  throw ConfigError("unknown contrastive form '" + s + "' (expected squared_hinge or hinge_of_square)");
}

struct TrainConfig {
  int batch_size = 128;
  double learning_rate = 4e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::int64_t max_steps = 2000;
  std::uint64_t seed = 1;
  LossConfig loss_config{};
  AblationPreset ablation_preset = AblationPreset::kFull;
  std::int64_t checkpoint_every = 500;
  std::int64_t log_every = 10;
  double grad_clip = 0.0;  // global-norm clip per network; 0 disables

  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }

  void validate() const {
    if (batch_size <= 0 || batch_size % 2 != 0)
      throw ConfigError("train.batch_size must be a positive even integer, got " + std::to_string(batch_size));
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("train.adam_beta1 must be in [0, 1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("train.adam_beta2 must be in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be > 0");
    if (max_steps < 0) throw ConfigError("train.max_steps must be >= 0");
    if (checkpoint_every < 1) throw ConfigError("train.checkpoint_every must be >= 1");
    if (log_every < 1) throw ConfigError("train.log_every must be >= 1");
    if (!(grad_clip >= 0.0)) throw ConfigError("train.grad_clip must be >= 0");
    loss_config.validate();
  }

  bool operator==(const TrainConfig&) const = default;
};

enum class Scorer { kEuclidean, kCosine };

struct EvalOptions {
  FoldProtocol folds{};
  int holdout_fold = 0;
  std::vector<double> far_targets{1e-2, 1e-3};
  std::vector<int> ks{1, 5};
  std::vector<double> yaw_bins{15, 30, 45, 60, 75, 90};
  Scorer scorer = Scorer::kEuclidean;
  bool zero_skips = false;  // cross-reconstruction through the bottleneck only

  void validate() const {
    if (folds.n_folds < 1) throw ConfigError("eval.n_folds must be >= 1");
    if (holdout_fold < 0 || holdout_fold >= folds.n_folds)
      throw ConfigError("eval.holdout_fold must be in [0, n_folds)");
    for (double f : far_targets)
      if (!(f > 0.0 && f <= 1.0)) throw ConfigError("eval.far_targets must lie in (0, 1]");
    for (int k : ks)
      if (k < 1) throw ConfigError("eval.ks must be >= 1");
    if (yaw_bins.empty()) throw ConfigError("eval.yaw_bins must not be empty");
    for (std::size_t i = 0; i < yaw_bins.size(); ++i)
      if (!(yaw_bins[i] > 0.0 && yaw_bins[i] <= 90.0) || (i > 0 && yaw_bins[i] <= yaw_bins[i - 1]))
        throw ConfigError("eval.yaw_bins must be increasing and within (0, 90]");
    if (yaw_bins.back() != 90.0) throw ConfigError("eval.yaw_bins must end at 90");
  }

  bool operator==(const EvalOptions& o) const {
    return folds.n_folds == o.folds.n_folds && folds.same_pairs_per_subject == o.folds.same_pairs_per_subject &&
           folds.diff_pairs_per_subject == o.folds.diff_pairs_per_subject && folds.seed == o.folds.seed &&
           holdout_fold == o.holdout_fold && far_targets == o.far_targets && ks == o.ks && yaw_bins == o.yaw_bins &&
           scorer == o.scorer && zero_skips == o.zero_skips;
  }
};

/// Everything a run needs, one section per component.
struct RunConfig {
  DatasetSpec data{};
  GeneratorConfig model{};
  TrainConfig train{};
  EvalOptions eval{};

  /// The model input size always follows the data section.
  void sync() { model.image_size = data.image_size; }

  void validate() const {
    data.validate();
    model.validate();
    train.validate();
    eval.validate();
    if (!(model.image_size == data.image_size)) throw ConfigError("model image size differs from data image size");
  }

  bool operator==(const RunConfig&) const = default;
};

}  // namespace pfcpgan

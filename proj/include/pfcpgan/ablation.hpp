#pragma once

// Trains the three loss presets on the same split, seeds and batch order and
// evaluates each on the held-out fold.

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pfcpgan/checkpoint.hpp"
#include "pfcpgan/config.hpp"
#include "pfcpgan/evaluator.hpp"
#include "pfcpgan/trainer.hpp"

namespace pfcpgan {

inline constexpr AblationPreset kAllPresets[] = {AblationPreset::kCplL2, AblationPreset::kCplL2Gan,
                                                 AblationPreset::kFull};

/// Train subjects and test pairs of the held-out fold.
struct HoldoutSplit {
  Fold fold;
  Dataset train;  // samples of the fold's training subjects
  std::string digest;
};

inline std::string split_digest(const Fold& f) {
  std::ostringstream o;
  o << "train:";
  for (int s : f.train_subjects) o << s << ",";
  o << ";test:";
  for (int s : f.test_subjects) o << s << ",";
  o << ";pairs:";
  for (const auto& p : f.test_pairs) o << p.profile << "/" << p.frontal << "/" << p.label_y << ",";
  const std::string s = o.str();
  return "sha256:" + sha256_hex(s.data(), s.size());
}

inline HoldoutSplit make_holdout_split(std::span<const ImageSample> dataset, const EvalOptions& eval) {
  eval.validate();
  Rng rng(eval.folds.seed);
  std::vector<Fold> folds = build_folds(dataset, eval.folds, rng);
  HoldoutSplit h;
  h.fold = folds.at(std::size_t(eval.holdout_fold));
  h.train = subset_by_subjects(dataset, h.fold.train_subjects);
  h.digest = split_digest(h.fold);
  return h;
}

template <typename T>
struct AblationEntry {
  ModelState<T> state;
  EvalReport report;
  std::string split_digest;
  std::vector<TrainLogRecord> logs;
};

/// Results keyed by preset. With a non-empty out_dir each preset trains into
/// <out_dir>/<preset>/ and its ROC is written to <out_dir>/roc_<preset>.csv.
template <typename T>
std::map<AblationPreset, AblationEntry<T>> run_ablation_suite(std::span<const ImageSample> dataset,
                                                              const RunConfig& base,
                                                              const std::filesystem::path& out_dir = {}) {
  base.validate();
  const HoldoutSplit split = make_holdout_split(dataset, base.eval);
  std::map<AblationPreset, AblationEntry<T>> out;
  for (AblationPreset p : kAllPresets) {
    TrainConfig cfg = base.train;
    cfg.ablation_preset = p;
    TrainOptions opts;
    if (!out_dir.empty()) opts.out_dir = out_dir / preset_name(p);
    TrainResult<T> r = train<T>(split.train, base.model, cfg, opts);
    AblationEntry<T> e;
    e.report = evaluate_fold(r.state, dataset, split.fold, base.eval);
    e.split_digest = split.digest;
    e.logs = std::move(r.logs);
    e.state = std::move(r.state);
    if (!out_dir.empty()) write_roc(out_dir / (std::string("roc_") + preset_name(p) + ".csv"), e.report.roc);
    out.emplace(p, std::move(e));
  }
  return out;
}

/// ablation.csv: preset,eer,auc,gar@0.01 plus the split digest shared by all rows.
template <typename T>
void write_ablation_csv(const std::filesystem::path& path, const std::map<AblationPreset, AblationEntry<T>>& results) {
  std::ofstream o(path, std::ios::trunc);
  if (!o) throw IoError(path.string() + ": cannot open for writing");
  o << "preset,eer,auc,gar@0.01,split_digest\n";
  for (AblationPreset p : kAllPresets) {
    auto it = results.find(p);
    if (it == results.end()) continue;
    const EvalReport& r = it->second.report;
    o << preset_name(p) << "," << detail::num(r.eer) << "," << detail::num(r.auc) << ","
      << detail::num(gar_at_far(r.roc, 1e-2)) << "," << it->second.split_digest << "\n";
  }
  if (!o.flush()) throw IoError(path.string() + ": write failed");
}

}  // namespace pfcpgan

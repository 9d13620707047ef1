#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pfcpgan/config.hpp"
#include "pfcpgan/data.hpp"
#include "pfcpgan/metrics.hpp"
#include "pfcpgan/networks.hpp"

namespace pfcpgan {

struct ScoredPair {
  PairExample pair;
  double score = 0.0;  // higher = more similar
};

/// Bottleneck embeddings of the given samples through one generator, row-major [n][dim].
/// Images are pushed through in fixed chunks in the order given.
template <typename T>
std::vector<T> embed(const Generator<T>& g, std::span<const ImageSample* const> samples) {
  constexpr std::size_t kChunk = 64;
  std::vector<T> out;
  out.reserve(samples.size() * std::size_t(g.config.embedding_dim));
  for (std::size_t s = 0; s < samples.size(); s += kChunk) {
    const auto part = samples.subspan(s, std::min(kChunk, samples.size() - s));
    const Encoding<T> e = encode(g, to_tensor<T>(part));
    out.insert(out.end(), e.embedding.begin(), e.embedding.end());
  }
  return out;
}

template <typename T>
double similarity(std::span<const T> a, std::span<const T> b, Scorer scorer) {
  if (a.size() != b.size()) throw DimensionError("similarity: embedding lengths differ");
  if (scorer == Scorer::kEuclidean) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (double(a[i]) - double(b[i])) * (double(a[i]) - double(b[i]));
    return -std::sqrt(s);
  }
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * double(b[i]);
    aa += double(a[i]) * double(a[i]);
    bb += double(b[i]) * double(b[i]);
  }
  const double den = std::sqrt(aa) * std::sqrt(bb);
  return den > 0 ? ab / den : 0.0;
}

/// Embeddings for a set of dataset indices, each computed once in ascending index
/// order so the result does not depend on how callers list them.
template <typename T>
class EmbeddingTable {
 public:
  EmbeddingTable(const Generator<T>& g, std::span<const ImageSample> samples, const std::set<std::size_t>& indices)
      : dim_(std::size_t(g.config.embedding_dim)) {
    std::vector<const ImageSample*> ptrs;
    for (std::size_t i : indices) {
      if (i >= samples.size()) throw DataError("embedding index outside the dataset");
      row_[i] = ptrs.size();
      ptrs.push_back(&samples[i]);
    }
    values_ = embed(g, ptrs);
  }

  std::span<const T> operator[](std::size_t sample_index) const {
    return {values_.data() + row_.at(sample_index) * dim_, dim_};
  }

 private:
  std::size_t dim_;
  std::map<std::size_t, std::size_t> row_;
  std::vector<T> values_;
};

/// Profile side through the profile generator, frontal side through the frontal generator.
template <typename T>
std::vector<ScoredPair> score_pairs(const ModelState<T>& s, std::span<const ImageSample> samples,
                                    std::span<const PairExample> pairs, Scorer scorer = Scorer::kEuclidean) {
  std::set<std::size_t> pi, fi;
  for (const auto& p : pairs) {
    pi.insert(p.profile);
    fi.insert(p.frontal);
  }
  const EmbeddingTable<T> ep(s.gen_profile, samples, pi), ef(s.gen_frontal, samples, fi);
  std::vector<ScoredPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    const double score = similarity<T>(ep[p.profile], ef[p.frontal], scorer);
    if (!std::isfinite(score)) throw NumericError("score_pairs: non-finite score");
    out.push_back({p, score});
  }
  return out;
}

inline RocCurve roc_from_scored(std::span<const ScoredPair> scored) {
  std::vector<LabeledScore> v;
  v.reserve(scored.size());
  for (const auto& s : scored) v.push_back({s.score, s.pair.label_y == 0});
  return roc_from_scores(v);
}

struct EvalReport {
  double eer = 0.0;
  double auc = 0.0;
  double accuracy_at_eer = 0.0;  // 1 - EER: accuracy where FAR = FRR
  double best_accuracy = 0.0;    // best over all thresholds
  std::map<double, double> gar_at_far;
  std::map<int, double> rank_k;
  std::optional<std::map<double, double>> per_yaw_rank1;
  std::optional<int> fold_id;
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
  RocCurve roc;
};

inline EvalReport verification_report(const RocCurve& roc, std::span<const double> far_targets) {
  EvalReport r;
  r.roc = roc;
  r.eer = eer(roc);
  r.auc = auc(roc);
  r.accuracy_at_eer = 1.0 - r.eer;
  r.best_accuracy = best_accuracy(roc);
  for (double f : far_targets) r.gar_at_far[f] = gar_at_far(roc, f);
  r.n_genuine = roc.n_genuine;
  r.n_impostor = roc.n_impostor;
  return r;
}

/// Gallery = the first frontal sample (by sample_id) of each subject, ascending subject id.
inline std::vector<std::size_t> gallery_indices(std::span<const ImageSample> samples, std::span<const int> subjects) {
  const std::set<int> want(subjects.begin(), subjects.end());
  std::map<int, std::size_t> first;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& x = samples[i];
    if (x.domain != Domain::kFrontal || !want.count(x.subject_id)) continue;
    auto it = first.find(x.subject_id);
    if (it == first.end() || samples[it->second].sample_id > x.sample_id) first[x.subject_id] = i;
  }
  std::vector<std::size_t> out;
  for (const auto& [subject, i] : first) out.push_back(i);
  return out;
}

inline std::vector<std::size_t> profile_indices(std::span<const ImageSample> samples, std::span<const int> subjects) {
  const std::set<int> want(subjects.begin(), subjects.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].domain == Domain::kProfile && want.count(samples[i].subject_id)) out.push_back(i);
  return out;
}

/// Closed-set identification of profile probes against a frontal gallery.
template <typename T>
IdentificationResult identify(const ModelState<T>& s, std::span<const ImageSample> samples,
                              std::span<const std::size_t> gallery, std::span<const std::size_t> probes,
                              std::span<const int> ks, Scorer scorer = Scorer::kEuclidean) {
  for (std::size_t g : gallery)
    if (g >= samples.size() || samples[g].domain != Domain::kFrontal)
      throw ProtocolError("identify: gallery entries must be frontal samples");
  for (std::size_t p : probes)
    if (p >= samples.size() || samples[p].domain != Domain::kProfile)
      throw ProtocolError("identify: probes must be profile samples");
  IdentificationInput in;
  for (std::size_t g : gallery) in.gallery_subjects.push_back(samples[g].subject_id);
  for (std::size_t p : probes) in.probe_subjects.push_back(samples[p].subject_id);
  {
    // Validates uniqueness and coverage before any network work.
    IdentificationInput check = in;
    check.scores.assign(probes.size() * gallery.size(), 0.0);
    identify_from_scores(check, ks);
  }
  const EmbeddingTable<T> eg(s.gen_frontal, samples, std::set<std::size_t>(gallery.begin(), gallery.end()));
  const EmbeddingTable<T> ep(s.gen_profile, samples, std::set<std::size_t>(probes.begin(), probes.end()));
  for (std::size_t p : probes)
    for (std::size_t g : gallery) in.scores.push_back(similarity<T>(ep[p], eg[g], scorer));
  return identify_from_scores(in, ks);
}

/// Bin edge for a yaw: the smallest edge >= |yaw|.
inline double yaw_bin(double yaw_deg, std::span<const double> edges) {
  if (!(yaw_deg >= -90.0 && yaw_deg <= 90.0))
    throw DataError("yaw " + std::to_string(yaw_deg) + " outside [-90, 90]");
  const double a = std::abs(yaw_deg);
  for (double e : edges)
    if (a <= e) return e;
  throw ConfigError("yaw bins do not reach |yaw| = " + std::to_string(a));
}

struct YawBin {
  double rank1 = 0.0;
  std::size_t n_probes = 0;
};

/// Rank-1 per yaw bin; bins without probes are absent.
template <typename T>
std::map<double, YawBin> evaluate_by_yaw(const ModelState<T>& s, std::span<const ImageSample> samples,
                                         std::span<const std::size_t> gallery, std::span<const std::size_t> probes,
                                         std::span<const double> bin_edges, Scorer scorer = Scorer::kEuclidean) {
  std::map<double, std::vector<std::size_t>> by_bin;
  for (std::size_t p : probes) by_bin[yaw_bin(samples[p].yaw_deg, bin_edges)].push_back(p);
  const int ks[] = {1};
  const IdentificationResult all = identify(s, samples, gallery, probes, ks, scorer);
  std::map<std::size_t, int> rank_of;
  for (std::size_t i = 0; i < probes.size(); ++i) rank_of[probes[i]] = all.ranks[i];
  std::map<double, YawBin> out;
  for (const auto& [edge, members] : by_bin) {
    std::size_t hits = 0;
    for (std::size_t p : members) hits += rank_of.at(p) == 1;
    out[edge] = {double(hits) / double(members.size()), members.size()};
  }
  return out;
}

/// Verification on the fold's test pairs plus identification of the fold's
/// profile images against a gallery of its subjects.
template <typename T>
EvalReport evaluate_fold(const ModelState<T>& s, std::span<const ImageSample> samples, const Fold& fold,
                         const EvalOptions& opts) {
  const auto scored = score_pairs(s, samples, fold.test_pairs, opts.scorer);
  EvalReport r = verification_report(roc_from_scored(scored), opts.far_targets);
  r.fold_id = fold.index;
  const auto gallery = gallery_indices(samples, fold.test_subjects);
  const auto probes = profile_indices(samples, fold.test_subjects);
  if (!probes.empty()) r.rank_k = identify(s, samples, gallery, probes, opts.ks, opts.scorer).rank_k;
  return r;
}

/// Flat (metric name, value) view of a report, in a stable order.
inline std::vector<std::pair<std::string, double>> report_metrics(const EvalReport& r) {
  std::vector<std::pair<std::string, double>> m;
  m.emplace_back("eer", r.eer);
  m.emplace_back("auc", r.auc);
  m.emplace_back("accuracy_at_eer", r.accuracy_at_eer);
  m.emplace_back("accuracy_best", r.best_accuracy);
  for (const auto& [far, gar] : r.gar_at_far) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "gar@far=%g", far);
    m.emplace_back(buf, gar);
  }
  for (const auto& [k, v] : r.rank_k) m.emplace_back("rank" + std::to_string(k), v);
  if (r.per_yaw_rank1)
    for (const auto& [edge, v] : *r.per_yaw_rank1) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "rank1_yaw%g", edge);
      m.emplace_back(buf, v);
    }
  m.emplace_back("n_genuine", double(r.n_genuine));
  m.emplace_back("n_impostor", double(r.n_impostor));
  return m;
}

struct FoldSummary {
  std::vector<EvalReport> reports;
  std::vector<std::pair<std::string, MeanStd>> summary;  // per metric across folds
};

inline std::vector<std::pair<std::string, MeanStd>> summarize(std::span<const EvalReport> reports) {
  std::vector<std::pair<std::string, MeanStd>> out;
  if (reports.empty()) return out;
  const auto names = report_metrics(reports.front());
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::vector<double> v;
    for (const auto& r : reports) {
      const auto m = report_metrics(r);
      if (k < m.size() && m[k].first == names[k].first) v.push_back(m[k].second);
    }
    out.emplace_back(names[k].first, mean_std(v));
  }
  return out;
}

/// One report per fold using a single model for every fold.
template <typename T>
FoldSummary evaluate_folds(const ModelState<T>& s, std::span<const ImageSample> samples, std::span<const Fold> folds,
                           const EvalOptions& opts) {
  FoldSummary out;
  for (const auto& f : folds) out.reports.push_back(evaluate_fold(s, samples, f, opts));
  out.summary = summarize(out.reports);
  return out;
}

/// One report per fold, fold i evaluated with states[i].
template <typename T>
FoldSummary evaluate_folds(std::span<const ModelState<T>> states, std::span<const ImageSample> samples,
                           std::span<const Fold> folds, const EvalOptions& opts) {
  if (states.size() != folds.size()) throw ConfigError("evaluate_folds: one state per fold required");
  FoldSummary out;
  for (std::size_t i = 0; i < folds.size(); ++i) out.reports.push_back(evaluate_fold(states[i], samples, folds[i], opts));
  out.summary = summarize(out.reports);
  return out;
}

/// Encodes with the source domain's generator and decodes with the other
/// domain's decoder, passing the source skips along (or zeros when zero_skips).
template <typename T>
Tensor<T> cross_reconstruct(const ModelState<T>& s, const Tensor<T>& x, Domain source, bool zero_skips = false) {
  const Generator<T>& enc = s.generator(source);
  const Generator<T>& dec = s.generator(source == Domain::kProfile ? Domain::kFrontal : Domain::kProfile);
  const Encoding<T> e = encode(enc, x);
  const std::vector<Tensor<T>> none;
  return decode(dec, e.embedding, e.batch, zero_skips ? none : e.skips);
}

template <typename T>
std::vector<float> cross_reconstruct(const ModelState<T>& s, const ImageSample& image, Domain target_domain,
                                     bool zero_skips = false) {
  if (image.domain == target_domain)
    throw ProtocolError(std::string("cross_reconstruct: image is already ") + domain_name(target_domain));
  return to_pixels(cross_reconstruct(s, to_tensor<T>(image), image.domain, zero_skips), 0);
}

inline double mean_squared_error(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size() || a.empty()) throw DimensionError("mean_squared_error: size mismatch");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (double(a[i]) - double(b[i])) * (double(a[i]) - double(b[i]));
  return s / double(a.size());
}

namespace detail {
inline std::ofstream open_csv(const std::filesystem::path& p, const char* header) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw IoError(p.string() + ": cannot open for writing");
  out << header << "\n";
  return out;
}
inline void close_csv(std::ofstream& out, const std::filesystem::path& p) {
  out.flush();
  if (!out) throw IoError(p.string() + ": write failed");
}
inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}
}  // namespace detail

/// eval_report.csv: one row per (fold, metric), then mean and std rows.
inline void write_eval_report(const std::filesystem::path& p, std::span<const EvalReport> reports,
                              std::span<const std::pair<std::string, MeanStd>> summary) {
  auto out = detail::open_csv(p, "fold,metric,value");
  for (const auto& r : reports) {
    const std::string fold = r.fold_id ? std::to_string(*r.fold_id) : "all";
    for (const auto& [name, v] : report_metrics(r)) out << fold << "," << name << "," << detail::num(v) << "\n";
  }
  for (const auto& [name, ms] : summary) out << "mean," << name << "," << detail::num(ms.mean) << "\n";
  for (const auto& [name, ms] : summary) out << "std," << name << "," << detail::num(ms.std) << "\n";
  detail::close_csv(out, p);
}

inline void write_roc(const std::filesystem::path& p, const RocCurve& c) {
  auto out = detail::open_csv(p, "threshold,far,gar");
  for (const auto& pt : c.points)
    out << (std::isinf(pt.threshold) ? std::string("inf") : detail::num(pt.threshold)) << "," << detail::num(pt.far)
        << "," << detail::num(pt.gar) << "\n";
  detail::close_csv(out, p);
}

/// yaw_rank1.csv: one row per bin edge; empty bins carry an empty rank1 and n_probes 0.
inline void write_yaw_rank1(const std::filesystem::path& p, const std::map<double, YawBin>& bins,
                            std::span<const double> edges) {
  auto out = detail::open_csv(p, "bin_deg,rank1,n_probes");
  for (double e : edges) {
    auto it = bins.find(e);
    out << detail::num(e) << "," << (it == bins.end() ? std::string() : detail::num(it->second.rank1)) << ","
        << (it == bins.end() ? 0 : it->second.n_probes) << "\n";
  }
  detail::close_csv(out, p);
}

}  // namespace pfcpgan

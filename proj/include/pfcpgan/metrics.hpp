#pragma once

// Verification and identification metrics over similarity scores
// (higher score = more similar).

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pfcpgan/error.hpp"

namespace pfcpgan {

struct LabeledScore {
  double score = 0.0;
  bool genuine = false;
};

struct RocPoint {
  double threshold = 0.0;  // accept when score >= threshold
  double far = 0.0;
  double gar = 0.0;
};

/// Operating points ordered by ascending threshold: one per distinct score,
/// then a final point at +inf where nothing is accepted.
struct RocCurve {
  std::vector<RocPoint> points;
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
};

inline RocCurve roc_from_scores(std::span<const LabeledScore> scores) {
  RocCurve c;
  for (const auto& s : scores) {
    if (!std::isfinite(s.score)) throw NumericError("roc_from_scores: non-finite score");
    (s.genuine ? c.n_genuine : c.n_impostor) += 1;
  }
  if (c.n_genuine == 0 || c.n_impostor == 0)
    throw ProtocolError("roc_from_scores: need at least one genuine and one impostor score");

  std::vector<LabeledScore> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score < b.score; });
  // Walking up the thresholds, everything strictly below the current score is rejected.
  std::size_t gen_below = 0, imp_below = 0;
  const double ng = double(c.n_genuine), ni = double(c.n_impostor);
  for (std::size_t i = 0; i < sorted.size();) {
    const double t = sorted[i].score;
    c.points.push_back({t, (ni - double(imp_below)) / ni, (ng - double(gen_below)) / ng});
    while (i < sorted.size() && sorted[i].score == t) {
      (sorted[i].genuine ? gen_below : imp_below) += 1;
      ++i;
    }
  }
  c.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  return c;
}

namespace detail {
inline void require_points(const RocCurve& c, const char* where) {
  if (c.points.empty()) throw ProtocolError(std::string(where) + ": empty ROC curve");
}
}  // namespace detail

/// Equal error rate: FAR and FRR = 1 - GAR linearly interpolated between the
/// bracketing operating points where FAR - FRR changes sign.
inline double eer(const RocCurve& c) {
  detail::require_points(c, "eer");
  const auto& p = c.points;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const double d0 = p[i].far - (1.0 - p[i].gar);
    const double d1 = p[i + 1].far - (1.0 - p[i + 1].gar);
    if (d0 == 0.0) return p[i].far;
    if (d0 > 0.0 && d1 <= 0.0) {
      const double t = d0 / (d0 - d1);
      const double far = p[i].far + t * (p[i + 1].far - p[i].far);
      const double frr = (1.0 - p[i].gar) + t * (p[i].gar - p[i + 1].gar);
      return 0.5 * (far + frr);
    }
  }
  const auto& last = p.back();
  return 0.5 * (last.far + 1.0 - last.gar);
}

/// Area under the (FAR, GAR) curve by the trapezoid rule.
inline double auc(const RocCurve& c) {
  detail::require_points(c, "auc");
  double a = 0.0;
  for (std::size_t i = 0; i + 1 < c.points.size(); ++i) {
    const auto& p = c.points[i];
    const auto& q = c.points[i + 1];
    a += (p.far - q.far) * 0.5 * (p.gar + q.gar);
  }
  return a;
}

/// Largest GAR among operating points with FAR <= far_target (0 if none).
inline double gar_at_far(const RocCurve& c, double far_target) {
  detail::require_points(c, "gar_at_far");
  double best = 0.0;
  for (const auto& p : c.points)
    if (p.far <= far_target) best = std::max(best, p.gar);
  return best;
}

/// Best verification accuracy over all operating points.
inline double best_accuracy(const RocCurve& c) {
  detail::require_points(c, "best_accuracy");
  const double ng = double(c.n_genuine), ni = double(c.n_impostor);
  double best = 0.0;
  for (const auto& p : c.points) best = std::max(best, (p.gar * ng + (1.0 - p.far) * ni) / (ng + ni));
  return best;
}

/// Score matrix [probe][gallery] with the subject of every row and column.
struct IdentificationInput {
  std::vector<double> scores;
  std::vector<int> gallery_subjects;
  std::vector<int> probe_subjects;

  double at(std::size_t p, std::size_t g) const { return scores[p * gallery_subjects.size() + g]; }
};

struct IdentificationResult {
  std::vector<int> ranks;         // 1-based rank of the true subject per probe
  std::vector<double> cmc;        // cmc[k-1] = fraction of probes with rank <= k
  std::map<int, double> rank_k;   // requested ks

  double rank(int k) const {
    if (k < 1 || cmc.empty()) return 0.0;
    return cmc[std::size_t(std::min<int>(k, int(cmc.size())) - 1)];
  }
};

/// Rank of a probe = position of its true subject when the gallery is sorted by
/// descending score, ties broken by ascending subject id.
inline IdentificationResult identify_from_scores(const IdentificationInput& in, std::span<const int> ks) {
  const std::size_t ng = in.gallery_subjects.size();
  if (in.scores.size() != in.probe_subjects.size() * ng)
    throw DimensionError("identify: score matrix does not match probe x gallery");
  std::map<int, std::size_t> where;
  for (std::size_t g = 0; g < ng; ++g)
    if (!where.emplace(in.gallery_subjects[g], g).second)
      throw ProtocolError("identify: gallery subject " + std::to_string(in.gallery_subjects[g]) + " appears twice");
  std::vector<int> missing;
  for (int s : in.probe_subjects)
    if (!where.count(s)) missing.push_back(s);
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::string list;
    for (int s : missing) list += (list.empty() ? "" : ",") + std::to_string(s);
    throw ProtocolError("identify: probe subjects missing from gallery: " + list);
  }
  IdentificationResult r;
  for (std::size_t p = 0; p < in.probe_subjects.size(); ++p) {
    const int truth = in.probe_subjects[p];
    const std::size_t tg = where.at(truth);
    const double ts = in.at(p, tg);
    int rank = 1;
    for (std::size_t g = 0; g < ng; ++g) {
      if (g == tg) continue;
      const double s = in.at(p, g);
      if (s > ts || (s == ts && in.gallery_subjects[g] < truth)) ++rank;
    }
    r.ranks.push_back(rank);
  }
  r.cmc.assign(ng, 0.0);
  if (!r.ranks.empty()) {
    for (int rk : r.ranks)
      for (std::size_t k = std::size_t(rk) - 1; k < ng; ++k) r.cmc[k] += 1.0;
    for (auto& v : r.cmc) v /= double(r.ranks.size());
  }
  for (int k : ks) r.rank_k[k] = r.rank(k);
  return r;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single value
};

inline MeanStd mean_std(std::span<const double> v) {
  MeanStd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= double(v.size());
  if (v.size() > 1) {
    double s = 0;
    for (double x : v) s += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(s / double(v.size() - 1));
  }
  return r;
}

}  // namespace pfcpgan

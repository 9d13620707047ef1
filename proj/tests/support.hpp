#pragma once

// Shared fixtures and independent reference implementations used by the
// unit tests and the acceptance harness. Nothing here calls into the
// library's loss or metric code; the oracles are plain loops.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <unistd.h>
#include <vector>

#include "pfcpgan/pfcpgan.hpp"

namespace pfcpgan::test {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("pfcpgan_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Small but real synthetic dataset: 16x16 gray, 6 subjects.
inline DatasetSpec small_spec() {
  DatasetSpec s;
  s.n_subjects = 6;
  s.frontal_per_subject = 3;
  s.profile_per_subject = 2;
  s.image_size = {16, 16, 1};
  s.seed = 11;
  return s;
}

inline GeneratorConfig small_model() {
  GeneratorConfig g;
  g.image_size = {16, 16, 1};
  g.base_channels = 2;
  g.n_down = 2;
  g.embedding_dim = 8;
  return g;
}

inline TrainConfig small_train(AblationPreset p = AblationPreset::kFull) {
  TrainConfig t;
  t.batch_size = 8;
  t.max_steps = 6;
  t.seed = 5;
  t.ablation_preset = p;
  t.checkpoint_every = 3;
  t.log_every = 1;
  return t;
}

/// The 8x8x1, d = 4, base 4 model used for gradient checks.
inline GeneratorConfig tiny_model() {
  GeneratorConfig g;
  g.image_size = {8, 8, 1};
  g.base_channels = 4;
  g.n_down = 2;
  g.embedding_dim = 4;
  return g;
}

/// Random-pixel samples for models whose image size the synthetic generator rejects.
inline Dataset random_samples(const ImageShape& shape, int subjects, int per_domain, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  for (int s = 0; s < subjects; ++s)
    for (Domain dom : {Domain::kFrontal, Domain::kProfile})
      for (int k = 0; k < per_domain; ++k) {
        ImageSample x;
        x.shape = shape;
        x.subject_id = s;
        x.domain = dom;
        x.yaw_deg = dom == Domain::kProfile ? rng.uniform(-90, 90) : 0.0;
        x.sample_id = std::int64_t(d.size());
        x.pixels.resize(shape.pixel_count());
        for (auto& p : x.pixels) p = float(rng.uniform());
        d.push_back(std::move(x));
      }
  return d;
}

template <typename To, typename From>
ModelState<To> cast_model(const ModelState<From>& s) {
  ModelState<To> out = init_model<To>(s.config, s.seeds.model);
  out.step = s.step;
  std::vector<const ParamArray<From>*> src;
  for_each_model_array(s, [&](const std::string&, const ParamArray<From>& a) { src.push_back(&a); });
  std::size_t i = 0;
  for_each_model_array(out, [&](const std::string&, ParamArray<To>& a) {
    const auto& v = src[i++]->values;
    for (std::size_t j = 0; j < v.size(); ++j) a.values[j] = To(v[j]);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Loss oracles

inline double oracle_contrastive(const std::vector<double>& a, const std::vector<double>& b, int y, double m,
                                 ContrastiveForm form) {
  double sq = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
  if (y == 0) return sq / 2;
  if (form == ContrastiveForm::kSquaredHinge) {
    const double h = std::max(0.0, m - std::sqrt(sq));
    return h * h / 2;
  }
  return std::max(0.0, m - sq) / 2;
}

inline double oracle_sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
inline double oracle_log(double p) { return std::log(std::max(p, 1e-12)); }

inline double oracle_d_loss(const std::vector<double>& real, const std::vector<double>& fake) {
  double a = 0, b = 0;
  for (double v : real) a += oracle_log(oracle_sigmoid(v));
  for (double v : fake) b += oracle_log(1 - oracle_sigmoid(v));
  return -a / double(real.size()) - b / double(fake.size());
}

inline double oracle_g_loss(const std::vector<double>& fake, GanForm form) {
  double s = 0;
  for (double v : fake)
    s += form == GanForm::kMinimax ? oracle_log(1 - oracle_sigmoid(v)) : -oracle_log(oracle_sigmoid(v));
  return s / double(fake.size());
}

inline double oracle_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / double(a.size());
}

/// Direct 3x3 convolution, zero padding 1, followed by ReLU. Input and output are [c][h][w].
inline std::vector<double> oracle_conv_relu(const std::vector<double>& in, int cin, int h, int w,
                                            const std::vector<double>& weight, const std::vector<double>& bias,
                                            int cout, int stride, int& ho, int& wo, bool relu = true) {
  ho = (h - 1) / stride + 1;
  wo = (w - 1) / stride + 1;
  std::vector<double> out(std::size_t(cout) * ho * wo);
  for (int o = 0; o < cout; ++o)
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x) {
        double acc = bias[std::size_t(o)];
        for (int c = 0; c < cin; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = y * stride + ky - 1, ix = x * stride + kx - 1;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += weight[((std::size_t(o) * cin + c) * 3 + ky) * 3 + kx] * in[(std::size_t(c) * h + iy) * w + ix];
            }
        out[(std::size_t(o) * ho + y) * wo + x] = relu ? std::max(0.0, acc) : acc;
      }
  return out;
}

inline std::vector<double> oracle_perceptual_features(const PerceptualNet<double>& p, const std::vector<double>& img,
                                                      int c, int h, int w) {
  std::vector<double> cur = img;
  int ch = c;
  for (int k = 0; k < 3; ++k) {
    int ho = 0, wo = 0;
    cur = oracle_conv_relu(cur, ch, h, w, p.params[std::size_t(p.conv_w[std::size_t(k)])].values,
                           p.params[std::size_t(p.conv_b[std::size_t(k)])].values, kPerceptualWidths[k], 2, ho, wo);
    ch = kPerceptualWidths[k];
    h = ho;
    w = wo;
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Metric oracles

struct OracleRoc {
  std::vector<double> thresholds, far, gar;
};

/// Operating points by direct counting at every distinct score and at +inf.
inline OracleRoc oracle_roc(const std::vector<LabeledScore>& s) {
  std::vector<double> t;
  for (const auto& x : s) t.push_back(x.score);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  t.push_back(std::numeric_limits<double>::infinity());
  double ng = 0, ni = 0;
  for (const auto& x : s) (x.genuine ? ng : ni) += 1;
  OracleRoc r;
  for (double th : t) {
    double ga = 0, ia = 0;
    for (const auto& x : s)
      if (x.score >= th) (x.genuine ? ga : ia) += 1;
    r.thresholds.push_back(th);
    r.far.push_back(ia / ni);
    r.gar.push_back(ga / ng);
  }
  return r;
}

/// Intersection of the piecewise-linear (FAR, FRR) path with the line FAR = FRR.
inline double oracle_eer(const OracleRoc& r) {
  for (std::size_t i = 0; i + 1 < r.far.size(); ++i) {
    const double x0 = r.far[i], y0 = 1 - r.gar[i], x1 = r.far[i + 1], y1 = 1 - r.gar[i + 1];
    if (x0 == y0) return x0;
    const double den = (x1 - x0) - (y1 - y0);
    if (den == 0) continue;
    const double u = (y0 - x0) / den;
    if (u > 0 && u <= 1) return x0 + u * (x1 - x0);
  }
  return 0.5;
}

/// Probability that a genuine score beats an impostor score, ties counting one half.
inline double oracle_auc(const std::vector<LabeledScore>& s) {
  double num = 0, ng = 0, ni = 0;
  for (const auto& g : s) {
    if (!g.genuine) continue;
    ng += 1;
    for (const auto& i : s) {
      if (i.genuine) continue;
      num += g.score > i.score ? 1.0 : (g.score == i.score ? 0.5 : 0.0);
    }
  }
  for (const auto& i : s) ni += !i.genuine;
  return num / (ng * ni);
}

inline double oracle_gar_at_far(const std::vector<LabeledScore>& s, double target) {
  const OracleRoc r = oracle_roc(s);
  double best = 0;
  for (std::size_t i = 0; i < r.far.size(); ++i)
    if (r.far[i] <= target) best = std::max(best, r.gar[i]);
  return best;
}

/// Rank of the true subject after fully sorting the gallery by (-score, subject id).
inline int oracle_rank(const std::vector<double>& row, const std::vector<int>& gallery_subjects, int truth) {
  std::vector<std::size_t> order(row.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (row[a] != row[b]) return row[a] > row[b];
    return gallery_subjects[a] < gallery_subjects[b];
  });
  for (std::size_t k = 0; k < order.size(); ++k)
    if (gallery_subjects[order[k]] == truth) return int(k) + 1;
  return -1;
}

// ---------------------------------------------------------------------------
// Finite differences

struct GradCheck {
  double analytic = 0, numeric = 0, rel_error = 0;
  bool smooth = true;
};

inline double relative_error(double a, double n) {
  const double scale = std::max({std::abs(a), std::abs(n), 1e-5});
  return std::abs(a - n) / scale;
}

/// Central differences at h, h/2 and h/4 combined by Richardson extrapolation.
/// A parameter is flagged non-smooth when the two extrapolations disagree,
/// which happens when a perturbation crosses a ReLU or hinge kink.
template <typename F>
GradCheck central_difference(double& param, double analytic, F&& f, double h = 1e-3) {
  const double saved = param;
  auto diff = [&](double step) {
    param = saved + step;
    const double up = f();
    param = saved - step;
    const double down = f();
    param = saved;
    return (up - down) / (2 * step);
  };
  const double d1 = diff(h), d2 = diff(h / 2), d4 = diff(h / 4);
  const double r1 = (4 * d2 - d1) / 3, r2 = (4 * d4 - d2) / 3;
  GradCheck g;
  g.analytic = analytic;
  g.numeric = (16 * r2 - r1) / 15;
  g.smooth = std::abs(r1 - r2) <= 1e-6 * std::max(std::abs(r1), std::abs(r2)) + 1e-12;
  g.rel_error = relative_error(analytic, g.numeric);
  return g;
}

/// Gradient check of the total generator objective on the tiny model. Analytic
/// gradients are computed at precision T; the finite differences are always
/// taken in double on the same parameter values.
struct GradientSuite {
  std::vector<GradCheck> checks;
  int skipped_non_smooth = 0;
  double max_rel_error = 0;
};

template <typename T>
GradientSuite gradient_suite(int n_params, std::uint64_t seed, AblationPreset preset = AblationPreset::kFull) {
  const GeneratorConfig cfg = tiny_model();
  const ModelState<T> state = init_model<T>(cfg, seed);
  const Dataset data = random_samples(cfg.image_size, 4, 2, seed + 1);
  // Index layout of random_samples: subject s frontal at 4s, 4s+1; profile at 4s+2, 4s+3.
  const std::vector<PairExample> pairs = {{2, 0, 0}, {6, 8, 1}, {11, 9, 0}, {14, 4, 1}, {15, 13, 0}, {3, 12, 1}};
  std::vector<const ImageSample*> pp, fp;
  std::vector<int> labels;
  for (const auto& p : pairs) {
    pp.push_back(&data[p.profile]);
    fp.push_back(&data[p.frontal]);
    labels.push_back(p.label_y);
  }
  LossConfig lc;

  GeneratorGrads<T> grads{state.gen_profile.params.zeros_like(), state.gen_frontal.params.zeros_like()};
  {
    const Tensor<T> x_pr = to_tensor<T>(pp), x_fr = to_tensor<T>(fp);
    const auto f_pr = forward_domain(state.gen_profile, x_pr);
    const auto f_fr = forward_domain(state.gen_frontal, x_fr);
    generator_objective(state, x_pr, x_fr, f_pr, f_fr, labels, lc, preset, nullptr, nullptr, &grads);
  }

  ModelState<double> sd = cast_model<double>(state);
  const Tensor<double> x_pr = to_tensor<double>(pp), x_fr = to_tensor<double>(fp);
  auto objective = [&] {
    const auto f_pr = forward_domain(sd.gen_profile, x_pr);
    const auto f_fr = forward_domain(sd.gen_frontal, x_fr);
    return total_objective(generator_objective(sd, x_pr, x_fr, f_pr, f_fr, labels, lc, preset, nullptr, nullptr,
                                               static_cast<GeneratorGrads<double>*>(nullptr)),
                           lc)
        .total;
  };

  struct Slot {
    int net;
    std::size_t array, index;
  };
  std::vector<Slot> slots;
  for (int net = 0; net < 2; ++net) {
    const auto& ps = net == 0 ? sd.gen_profile.params : sd.gen_frontal.params;
    for (std::size_t a = 0; a < ps.size(); ++a)
      for (std::size_t i = 0; i < ps[a].count(); ++i) slots.push_back({net, a, i});
  }
  GradientSuite out;
  Rng rng(derive_seed(seed, {0x6772616400ULL}));
  std::size_t attempts = 0;
  while (int(out.checks.size()) < n_params && attempts < slots.size()) {
    ++attempts;
    const Slot s = slots[rng.index(slots.size())];
    auto& param = (s.net == 0 ? sd.gen_profile.params : sd.gen_frontal.params)[s.array].values[s.index];
    const double analytic = double((s.net == 0 ? grads.profile : grads.frontal)[s.array].values[s.index]);
    const GradCheck g = central_difference(param, analytic, objective);
    if (!g.smooth) {
      ++out.skipped_non_smooth;
      continue;
    }
    out.max_rel_error = std::max(out.max_rel_error, g.rel_error);
    out.checks.push_back(g);
  }
  return out;
}


/// Compares the metric code against the brute-force oracles on every labelled
/// score multiset of size <= 8 over {-2,-1,0,1}, on every unlabelled multiset
/// of that size as an identification row, and on 100 random size-20 cases.
struct MetricSuite {
  std::size_t cases = 0;
  std::size_t failures = 0;
  std::string first_failure;
};

inline void check_verification_case(const std::vector<LabeledScore>& s, MetricSuite& out) {
  auto fail = [&](const std::string& what) {
    if (out.failures++ == 0) {
      std::string list;
      for (const auto& x : s) list += (x.genuine ? "g" : "i") + std::to_string(x.score) + " ";
      out.first_failure = what + " on [" + list + "]";
    }
  };
  ++out.cases;
  const RocCurve c = roc_from_scores(s);
  const OracleRoc r = oracle_roc(s);
  if (c.points.size() != r.far.size()) return fail("roc length");
  for (std::size_t i = 0; i < r.far.size(); ++i)
    if (c.points[i].threshold != r.thresholds[i] || c.points[i].far != r.far[i] || c.points[i].gar != r.gar[i])
      return fail("roc point " + std::to_string(i));
  if (std::abs(eer(c) - oracle_eer(r)) > 1e-12) return fail("eer");
  if (std::abs(auc(c) - oracle_auc(s)) > 1e-12) return fail("auc");
  for (double t : {0.0, 0.1, 0.25, 1.0 / 3.0, 0.5, 0.75, 1.0})
    if (gar_at_far(c, t) != oracle_gar_at_far(s, t)) return fail("gar_at_far " + std::to_string(t));
}

inline void check_identification_row(const std::vector<double>& row, const std::vector<int>& ids, MetricSuite& out) {
  ++out.cases;
  IdentificationInput in;
  in.gallery_subjects = ids;
  for (std::size_t t = 0; t < row.size(); ++t) {
    in.probe_subjects.push_back(ids[t]);
    in.scores.insert(in.scores.end(), row.begin(), row.end());
  }
  std::vector<int> ks;
  for (std::size_t k = 1; k <= row.size(); ++k) ks.push_back(int(k));
  const IdentificationResult res = identify_from_scores(in, ks);
  std::vector<int> want;
  for (std::size_t t = 0; t < row.size(); ++t) want.push_back(oracle_rank(row, ids, ids[t]));
  bool ok = res.ranks == want;
  for (int k : ks) {
    double hits = 0;
    for (int r : want) hits += r <= k;
    ok = ok && res.rank_k.at(k) == hits / double(want.size());
  }
  if (!ok && out.failures++ == 0) out.first_failure = "rank-k on a row of " + std::to_string(row.size());
}

inline MetricSuite metric_oracle_suite() {
  MetricSuite out;
  const double values[4] = {-2, -1, 0, 1};
  // Labelled multisets: counts over the 8 (value, label) types.
  std::vector<int> counts(8, 0);
  std::function<void(int, int)> rec = [&](int type, int left) {
    if (type == 8) {
      std::vector<LabeledScore> s;
      int ng = 0, ni = 0;
      for (int t = 0; t < 8; ++t)
        for (int k = 0; k < counts[std::size_t(t)]; ++k) {
          s.push_back({values[t % 4], t >= 4});
          (t >= 4 ? ng : ni) += 1;
        }
      if (ng > 0 && ni > 0) check_verification_case(s, out);
      return;
    }
    for (int c = 0; c <= left; ++c) {
      counts[std::size_t(type)] = c;
      rec(type + 1, left - c);
    }
    counts[std::size_t(type)] = 0;
  };
  rec(0, 8);

  // Unlabelled multisets as gallery rows, with permuted subject ids so ties exercise the id order.
  std::vector<int> vc(4, 0);
  std::function<void(int, int)> rows = [&](int v, int left) {
    if (v == 4) {
      std::vector<double> row;
      for (int t = 0; t < 4; ++t)
        for (int k = 0; k < vc[std::size_t(t)]; ++k) row.push_back(values[t]);
      if (row.empty()) return;
      std::vector<int> ids(row.size());
      for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = int((i * 5 + 3) % 11) + int(i) * 11;
      check_identification_row(row, ids, out);
      std::reverse(ids.begin(), ids.end());
      check_identification_row(row, ids, out);
      return;
    }
    for (int c = 0; c <= left; ++c) {
      vc[std::size_t(v)] = c;
      rows(v + 1, left - c);
    }
    vc[std::size_t(v)] = 0;
  };
  rows(0, 8);

  Rng rng(0x6d6574726963ULL);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<LabeledScore> s(20);
    const bool coarse = trial % 2 == 0;
    for (auto& x : s) {
      x.score = coarse ? double(int(rng.index(7)) - 3) / 2 : rng.uniform(-3, 3);
      x.genuine = rng.index(2) == 1;
    }
    s[0].genuine = true;
    s[1].genuine = false;
    check_verification_case(s, out);
    std::vector<double> row;
    std::vector<int> ids;
    for (int i = 0; i < 20; ++i) {
      row.push_back(s[std::size_t(i)].score);
      ids.push_back(int(rng.index(1000)) * 20 + i);
    }
    check_identification_row(row, ids, out);
  }
  return out;
}

}  // namespace pfcpgan::test

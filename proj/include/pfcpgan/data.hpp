#pragma once

// Paired-domain samples, the synthetic glyph generator, balanced pair
// sampling and cross-validation fold construction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pfcpgan/error.hpp"
#include "pfcpgan/rng.hpp"

namespace pfcpgan {

enum class Domain { kProfile, kFrontal };

inline const char* domain_name(Domain d) { return d == Domain::kProfile ? "profile" : "frontal"; }

struct ImageShape {
  int height = 64;
  int width = 64;
  int channels = 1;

  std::size_t pixel_count() const { return std::size_t(height) * width * channels; }
  bool operator==(const ImageShape&) const = default;
};

/// One image. Pixels are stored row-major H x W x C with values in [0, 1].
struct ImageSample {
  ImageShape shape;
  std::vector<float> pixels;
  int subject_id = 0;
  Domain domain = Domain::kFrontal;
  double yaw_deg = 0.0;
  std::int64_t sample_id = 0;

  float pixel(int y, int x, int c) const { return pixels[(std::size_t(y) * shape.width + x) * shape.channels + c]; }
};

using Dataset = std::vector<ImageSample>;

/// A (profile, frontal) pair referring into a Dataset by index.
/// label_y is 0 for a genuine pair (same subject) and 1 for an impostor pair.
struct PairExample {
  std::size_t profile = 0;
  std::size_t frontal = 0;
  int label_y = 0;

  bool operator==(const PairExample&) const = default;
};

struct DatasetSpec {
  int n_subjects = 50;
  int frontal_per_subject = 10;
  int profile_per_subject = 4;
  ImageShape image_size{};
  std::uint64_t seed = 1;
  double yaw_min = -90.0;
  double yaw_max = 90.0;
  double noise_std = 0.05;

  void validate() const {
    auto pow2 = [](int v) { return v >= 16 && (v & (v - 1)) == 0; };
    if (n_subjects < 1) throw ConfigError("data.n_subjects must be >= 1");
    if (frontal_per_subject < 1) throw ConfigError("data.frontal_per_subject must be >= 1");
    if (profile_per_subject < 0) throw ConfigError("data.profile_per_subject must be >= 0");
    if (!pow2(image_size.height) || !pow2(image_size.width))
      throw ConfigError("data image height/width must be powers of two >= 16");
    if (image_size.channels != 1 && image_size.channels != 3) throw ConfigError("data.channels must be 1 or 3");
    if (!(yaw_min >= -90.0 && yaw_max <= 90.0 && yaw_min <= yaw_max))
      throw ConfigError("data yaw range must satisfy -90 <= yaw_min <= yaw_max <= 90");
    if (!(noise_std >= 0.0)) throw ConfigError("data.noise_std must be >= 0");
  }

  bool operator==(const DatasetSpec&) const = default;
};

/// Parameters of one synthetic identity: a fixed arrangement of anisotropic Gaussian blobs.
struct Glyph {
  struct Blob {
    double cx, cy;        // normalized coordinates in [-1, 1]
    double sx, sy;        // axis standard deviations
    double cos_t, sin_t;  // orientation
    double amp[3];        // per-channel amplitude
  };
  std::vector<Blob> blobs;
};

namespace synth {

inline constexpr double kShear = 0.45;        // horizontal shear at |yaw| = 90
inline constexpr double kPerspective = 0.30;  // projective foreshortening at |yaw| = 90

inline Glyph make_glyph(std::uint64_t seed, int subject, int channels) {
  Rng rng(derive_seed(seed, {0x61797068ULL, std::uint64_t(subject)}));
  Glyph g;
  const int n = 5 + int(rng.index(5));
  for (int i = 0; i < n; ++i) {
    Glyph::Blob b{};
    b.cx = rng.uniform(-0.65, 0.65);
    b.cy = rng.uniform(-0.65, 0.65);
    b.sx = rng.uniform(0.07, 0.20);
    b.sy = rng.uniform(0.07, 0.20);
    const double t = rng.uniform(0.0, std::numbers::pi);
    b.cos_t = std::cos(t);
    b.sin_t = std::sin(t);
    const double a = rng.uniform(0.45, 1.0);
    for (int c = 0; c < 3; ++c) b.amp[c] = channels == 1 ? a : a * rng.uniform(0.35, 1.0);
    g.blobs.push_back(b);
  }
  return g;
}

/// Renders the glyph seen under the given yaw. yaw = 0 is the unwarped frontal view;
/// otherwise a projective shear whose strength is |yaw|/90 and whose sign follows yaw.
inline std::vector<float> render(const Glyph& g, const ImageShape& shape, double yaw_deg) {
  const double t = yaw_deg / 90.0;
  std::vector<float> px(shape.pixel_count());
  for (int y = 0; y < shape.height; ++y) {
    const double v = 2.0 * (y + 0.5) / shape.height - 1.0;
    for (int x = 0; x < shape.width; ++x) {
      const double u = 2.0 * (x + 0.5) / shape.width - 1.0;
      const double den = 1.0 + kPerspective * t * u;
      const double gu = (u + kShear * t * v) / den;
      const double gv = v / den;
      double acc[3] = {0.0, 0.0, 0.0};
      for (const auto& b : g.blobs) {
        const double dx = gu - b.cx, dy = gv - b.cy;
        const double r1 = dx * b.cos_t + dy * b.sin_t;
        const double r2 = -dx * b.sin_t + dy * b.cos_t;
        const double e = std::exp(-0.5 * (r1 * r1 / (b.sx * b.sx) + r2 * r2 / (b.sy * b.sy)));
        for (int c = 0; c < shape.channels; ++c) acc[c] += b.amp[c] * e;
      }
      for (int c = 0; c < shape.channels; ++c)
        px[(std::size_t(y) * shape.width + x) * shape.channels + c] = float(std::clamp(acc[c], 0.0, 1.0));
    }
  }
  return px;
}

}  // namespace synth

/// Deterministic synthetic dataset. Glyphs and per-sample draws come from
/// independent streams keyed by (seed, subject, domain, index), so enlarging the
/// per-subject counts keeps the existing samples unchanged. Samples are ordered
/// by subject, then frontal before profile; sample_id is the position.
inline Dataset generate_synthetic_dataset(const DatasetSpec& spec) {
  spec.validate();
  Dataset out;
  out.reserve(std::size_t(spec.n_subjects) * (spec.frontal_per_subject + spec.profile_per_subject));
  for (int s = 0; s < spec.n_subjects; ++s) {
    const Glyph glyph = synth::make_glyph(spec.seed, s, spec.image_size.channels);
    auto emit = [&](Domain d, int k) {
      Rng rng(derive_seed(spec.seed, {0x73616d70ULL, std::uint64_t(s), std::uint64_t(d), std::uint64_t(k)}));
      ImageSample smp;
      smp.shape = spec.image_size;
      smp.subject_id = s;
      smp.domain = d;
      smp.yaw_deg = d == Domain::kProfile ? rng.uniform(spec.yaw_min, spec.yaw_max) : 0.0;
      smp.pixels = synth::render(glyph, spec.image_size, smp.yaw_deg);
      if (spec.noise_std > 0.0)
        for (auto& p : smp.pixels) p = float(std::clamp(double(p) + spec.noise_std * rng.normal(), 0.0, 1.0));
      smp.sample_id = std::int64_t(out.size());
      out.push_back(std::move(smp));
    };
    for (int k = 0; k < spec.frontal_per_subject; ++k) emit(Domain::kFrontal, k);
    for (int k = 0; k < spec.profile_per_subject; ++k) emit(Domain::kProfile, k);
  }
  return out;
}

/// Sorted distinct subject ids.
inline std::vector<int> subjects_of(std::span<const ImageSample> samples) {
  std::set<int> s;
  for (const auto& x : samples) s.insert(x.subject_id);
  return {s.begin(), s.end()};
}

/// Samples whose subject is in the given set, order preserved.
inline Dataset subset_by_subjects(std::span<const ImageSample> samples, const std::vector<int>& subjects) {
  const std::set<int> keep(subjects.begin(), subjects.end());
  Dataset out;
  for (const auto& x : samples)
    if (keep.count(x.subject_id)) out.push_back(x);
  return out;
}

/// Per-subject index of a dataset, used to draw balanced genuine/impostor pairs.
class PairSampler {
 public:
  explicit PairSampler(std::span<const ImageSample> samples) {
    std::map<int, Entry> by_subject;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      auto& e = by_subject[samples[i].subject_id];
      (samples[i].domain == Domain::kProfile ? e.profiles : e.frontals).push_back(i);
    }
    for (auto& [id, e] : by_subject) {
      if (!e.profiles.empty() && !e.frontals.empty()) genuine_.push_back(id);
      if (!e.profiles.empty()) with_profile_.push_back(id);
      if (!e.frontals.empty()) with_frontal_.push_back(id);
    }
    entries_ = std::move(by_subject);
    if (genuine_.empty()) throw DataError("pair sampling needs a subject with both a profile and a frontal sample");
    const bool impostor_possible =
        !with_profile_.empty() && !with_frontal_.empty() &&
        !(with_profile_.size() == 1 && with_frontal_.size() == 1 && with_profile_[0] == with_frontal_[0]);
    if (!impostor_possible) throw DataError("pair sampling needs at least two distinct subjects");
  }

  /// Exactly batch_size/2 genuine and batch_size/2 impostor pairs, interleaved.
  std::vector<PairExample> sample(int batch_size, Rng& rng) const {
    if (batch_size <= 0 || batch_size % 2 != 0)
      throw ConfigError("batch_size must be a positive even integer, got " + std::to_string(batch_size));
    std::vector<PairExample> out;
    out.reserve(std::size_t(batch_size));
    for (int i = 0; i < batch_size / 2; ++i) {
      const auto& g = entries_.at(genuine_[rng.index(genuine_.size())]);
      const std::size_t p = g.profiles[rng.index(g.profiles.size())];
      const std::size_t f = g.frontals[rng.index(g.frontals.size())];
      out.push_back({p, f, 0});

      int sp, sf;
      do {
        sp = with_profile_[rng.index(with_profile_.size())];
        sf = with_frontal_[rng.index(with_frontal_.size())];
      } while (sp == sf);
      const auto& ep = entries_.at(sp);
      const auto& ef = entries_.at(sf);
      out.push_back({ep.profiles[rng.index(ep.profiles.size())], ef.frontals[rng.index(ef.frontals.size())], 1});
    }
    return out;
  }

 private:
  struct Entry {
    std::vector<std::size_t> profiles, frontals;
  };
  std::map<int, Entry> entries_;
  std::vector<int> genuine_, with_profile_, with_frontal_;
};

inline std::vector<PairExample> sample_pair_batch(std::span<const ImageSample> samples, int batch_size, Rng& rng) {
  if (batch_size <= 0 || batch_size % 2 != 0)
    throw ConfigError("batch_size must be a positive even integer, got " + std::to_string(batch_size));
  return PairSampler(samples).sample(batch_size, rng);
}

struct FoldProtocol {
  int n_folds = 10;
  int same_pairs_per_subject = 7;
  int diff_pairs_per_subject = 7;
  std::uint64_t seed = 7;
};

struct Fold {
  int index = 0;
  std::vector<int> train_subjects;
  std::vector<int> test_subjects;
  std::vector<PairExample> test_pairs;
};

namespace detail {

// k distinct draws from [0, n) by partial Fisher-Yates; with replacement once k > n.
inline std::vector<std::size_t> draw_indices(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> out;
  if (n == 0) return out;
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  while (out.size() < k) {
    const std::size_t take = std::min(n, k - out.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(perm[i], perm[i + rng.index(n - i)]);
      out.push_back(perm[i]);
    }
  }
  return out;
}

}  // namespace detail

/// Partitions subjects into n_folds disjoint groups (sizes differ by at most one)
/// and builds each fold's genuine/impostor test pairs from its own subjects only.
inline std::vector<Fold> build_folds(std::span<const ImageSample> samples, const FoldProtocol& protocol, Rng& rng) {
  if (protocol.n_folds < 1) throw ConfigError("eval.n_folds must be >= 1");
  if (protocol.same_pairs_per_subject < 0 || protocol.diff_pairs_per_subject < 0)
    throw ConfigError("pairs per subject must be >= 0");
  std::vector<int> subjects = subjects_of(samples);
  if (int(subjects.size()) < protocol.n_folds)
    throw ConfigError("fewer subjects (" + std::to_string(subjects.size()) + ") than folds (" +
                      std::to_string(protocol.n_folds) + ")");
  for (std::size_t i = subjects.size(); i > 1; --i) std::swap(subjects[i - 1], subjects[rng.index(i)]);

  std::map<int, std::vector<std::size_t>> profiles, frontals;
  for (std::size_t i = 0; i < samples.size(); ++i)
    (samples[i].domain == Domain::kProfile ? profiles : frontals)[samples[i].subject_id].push_back(i);

  const std::size_t nf = std::size_t(protocol.n_folds);
  const std::size_t base = subjects.size() / nf, extra = subjects.size() % nf;
  std::vector<std::vector<int>> groups(nf);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < nf; ++f) {
    const std::size_t take = base + (f < extra ? 1 : 0);
    groups[f].assign(subjects.begin() + std::ptrdiff_t(pos), subjects.begin() + std::ptrdiff_t(pos + take));
    std::sort(groups[f].begin(), groups[f].end());
    pos += take;
  }

  std::vector<Fold> folds(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    Fold& fold = folds[f];
    fold.index = int(f);
    fold.test_subjects = groups[f];
    for (std::size_t g = 0; g < nf; ++g)
      if (g != f) fold.train_subjects.insert(fold.train_subjects.end(), groups[g].begin(), groups[g].end());
    std::sort(fold.train_subjects.begin(), fold.train_subjects.end());

    if (protocol.diff_pairs_per_subject > 0 && fold.test_subjects.size() < 2)
      throw ConfigError("fold " + std::to_string(f) + " has a single subject; impostor pairs need two");
    for (int s : fold.test_subjects) {
      const auto& ps = profiles[s];
      const auto& fs = frontals[s];
      if (ps.empty() || fs.empty())
        throw DataError("subject " + std::to_string(s) + " lacks a profile or frontal sample");
      for (std::size_t c : detail::draw_indices(ps.size() * fs.size(), std::size_t(protocol.same_pairs_per_subject), rng))
        fold.test_pairs.push_back({ps[c / fs.size()], fs[c % fs.size()], 0});

      std::vector<std::size_t> others;
      for (int t : fold.test_subjects)
        if (t != s) others.insert(others.end(), frontals[t].begin(), frontals[t].end());
      if (protocol.diff_pairs_per_subject > 0 && others.empty())
        throw DataError("no impostor frontal samples available for subject " + std::to_string(s));
      for (std::size_t c :
           detail::draw_indices(ps.size() * others.size(), std::size_t(protocol.diff_pairs_per_subject), rng))
        fold.test_pairs.push_back({ps[c / others.size()], others[c % others.size()], 1});
    }
  }
  return folds;
}

}  // namespace pfcpgan

#pragma once

// Loss terms of the coupled objective. Every function is pure; the *_grad
// variants return the value together with gradients w.r.t. their direct inputs.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pfcpgan/error.hpp"
#include "pfcpgan/layers.hpp"
#include "pfcpgan/networks.hpp"

namespace pfcpgan {

enum class GanForm { kMinimax, kNonSaturating };
enum class ContrastiveForm { kSquaredHinge, kHingeOfSquare };

inline constexpr double kLogClamp = 1e-12;

struct LossConfig {
  double margin = 1.0;
  double lambda_1 = 1.0;   // adversarial
  double lambda_2 = 0.25;  // perceptual
  double lambda_3 = 0.25;  // L2 reconstruction
  GanForm gan_form = GanForm::kNonSaturating;
  ContrastiveForm contrastive_form = ContrastiveForm::kSquaredHinge;

  void validate() const {
    if (!(margin > 0.0)) throw ConfigError("loss.margin must be > 0");
    if (!(lambda_1 >= 0.0 && lambda_2 >= 0.0 && lambda_3 >= 0.0)) throw ConfigError("loss lambdas must be >= 0");
  }
  bool operator==(const LossConfig&) const = default;
};

struct LossBreakdown {
  double l_cpl = 0.0;
  double l_gan_profile = 0.0;
  double l_gan_frontal = 0.0;
  double l_l2 = 0.0;
  double l_perceptual = 0.0;
  double total = 0.0;
  double d_loss_profile = 0.0;
  double d_loss_frontal = 0.0;
  double l_l2_unnormalized = 0.0;  // diagnostics: per-image squared norm, batch mean

  bool finite() const {
    for (double v : {l_cpl, l_gan_profile, l_gan_frontal, l_l2, l_perceptual, total, d_loss_profile, d_loss_frontal})
      if (!std::isfinite(v)) return false;
    return true;
  }
  bool operator==(const LossBreakdown&) const = default;
};

template <typename T>
T embedding_distance(std::span<const T> z1, std::span<const T> z2) {
  if (z1.size() != z2.size())
    throw DimensionError("embedding_distance: lengths " + std::to_string(z1.size()) + " and " +
                         std::to_string(z2.size()));
  T s = 0;
  for (std::size_t i = 0; i < z1.size(); ++i) {
    const T d = z1[i] - z2[i];
    s += d * d;
  }
  return std::sqrt(s);
}

namespace detail {

inline void check_label(int y) {
  if (y != 0 && y != 1) throw ConfigError("contrastive label must be 0 or 1, got " + std::to_string(y));
}

// Loss as a function of the distance D, and dL/dD.
template <typename T>
std::pair<T, T> contrastive_of_distance(T dist, int label, T margin, ContrastiveForm form) {
  if (label == 0) return {T(0.5) * dist * dist, dist};
  if (form == ContrastiveForm::kSquaredHinge) {
    const T h = margin - dist;
    return h > T(0) ? std::pair<T, T>{T(0.5) * h * h, -h} : std::pair<T, T>{T(0), T(0)};
  }
  const T h = margin - dist * dist;
  return h > T(0) ? std::pair<T, T>{T(0.5) * h, -dist} : std::pair<T, T>{T(0), T(0)};
}

}  // namespace detail

/// label_y = 0 (genuine): D^2/2. label_y = 1 (impostor): max(0, m - D)^2 / 2 under
/// kSquaredHinge, max(0, m - D^2) / 2 under kHingeOfSquare.
template <typename T>
T contrastive_loss(std::span<const T> z1, std::span<const T> z2, int label_y, T margin, ContrastiveForm form) {
  detail::check_label(label_y);
  return detail::contrastive_of_distance(embedding_distance(z1, z2), label_y, margin, form).first;
}

/// Value plus d/dz1 (d/dz2 is its negation). At D = 0 the gradient is zero.
template <typename T>
T contrastive_loss_grad(std::span<const T> z1, std::span<const T> z2, int label_y, T margin, ContrastiveForm form,
                        std::span<T> d_z1) {
  detail::check_label(label_y);
  const T dist = embedding_distance(z1, z2);
  const auto [value, d_dist] = detail::contrastive_of_distance(dist, label_y, margin, form);
  // genuine: d(D^2/2)/dz1 = z1 - z2 directly, which avoids the 0/0 at D = 0.
  const T scale = label_y == 0 ? T(1) : (dist > T(0) ? d_dist / dist : T(0));
  for (std::size_t i = 0; i < z1.size(); ++i) d_z1[i] = scale * (z1[i] - z2[i]);
  return value;
}

/// Mean contrastive loss over a batch of embedding pairs stored row-major [n][dim].
/// When d_z1/d_z2 are non-empty they receive the gradient of the mean.
template <typename T>
T coupling_loss(std::span<const T> z1, std::span<const T> z2, std::span<const int> labels, int dim, T margin,
                ContrastiveForm form, std::span<T> d_z1 = {}, std::span<T> d_z2 = {}) {
  const std::size_t n = labels.size();
  if (n == 0) throw DataError("coupling_loss: empty batch");
  if (z1.size() != n * std::size_t(dim) || z2.size() != n * std::size_t(dim))
    throw DimensionError("coupling_loss: embedding arrays do not match batch*dim");
  const bool want_grad = !d_z1.empty();
  std::vector<T> g(static_cast<std::size_t>(dim));
  T sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto a = z1.subspan(i * dim, std::size_t(dim));
    auto b = z2.subspan(i * dim, std::size_t(dim));
    if (want_grad) {
      sum += contrastive_loss_grad<T>(a, b, labels[i], margin, form, g);
      for (int k = 0; k < dim; ++k) {
        d_z1[i * dim + std::size_t(k)] = g[std::size_t(k)] / T(n);
        if (!d_z2.empty()) d_z2[i * dim + std::size_t(k)] = -g[std::size_t(k)] / T(n);
      }
    } else {
      sum += contrastive_loss<T>(a, b, labels[i], margin, form);
    }
  }
  return sum / T(n);
}

struct AdversarialLosses {
  double d_loss = 0.0;
  double g_loss = 0.0;
};

namespace detail {

template <typename T>
void check_finite(std::span<const T> v, const char* where) {
  for (T x : v)
    if (!std::isfinite(double(x))) throw NumericError(std::string(where) + ": non-finite logit");
}

inline double clamped_log(double p) { return std::log(std::max(p, kLogClamp)); }

}  // namespace detail

/// d_loss = -mean log s(real) - mean log(1 - s(fake)); g_loss is mean log(1 - s(fake))
/// (minimax) or -mean log s(fake) (non-saturating). s is the logistic map; log arguments
/// are clamped below at 1e-12.
template <typename T>
AdversarialLosses adversarial_losses(std::span<const T> real_logits, std::span<const T> fake_logits, GanForm form) {
  detail::check_finite(real_logits, "adversarial_losses(real)");
  detail::check_finite(fake_logits, "adversarial_losses(fake)");
  if (real_logits.empty() || fake_logits.empty()) throw DimensionError("adversarial_losses: empty logit grid");
  double lr = 0, lf = 0, lg = 0;
  for (T v : real_logits) lr += detail::clamped_log(layers::sigmoid(double(v)));
  for (T v : fake_logits) {
    const double p = layers::sigmoid(double(v));
    lf += detail::clamped_log(1.0 - p);
    lg += form == GanForm::kMinimax ? detail::clamped_log(1.0 - p) : -detail::clamped_log(p);
  }
  const double nr = double(real_logits.size()), nf = double(fake_logits.size());
  return {-lr / nr - lf / nf, lg / nf};
}

/// The g_loss half of adversarial_losses alone.
template <typename T>
double generator_adversarial_loss(std::span<const T> fake_logits, GanForm form) {
  detail::check_finite(fake_logits, "generator_adversarial_loss");
  if (fake_logits.empty()) throw DimensionError("generator_adversarial_loss: empty logit grid");
  double lg = 0;
  for (T v : fake_logits) {
    const double p = layers::sigmoid(double(v));
    lg += form == GanForm::kMinimax ? detail::clamped_log(1.0 - p) : -detail::clamped_log(p);
  }
  return lg / double(fake_logits.size());
}

namespace detail {

// d/dv of log(max(s(v), eps)) and log(max(1 - s(v), eps)); zero where the clamp is active.
inline double dlog_sigmoid(double v) {
  const double p = layers::sigmoid(v);
  return p > kLogClamp ? 1.0 - p : 0.0;
}
inline double dlog_one_minus_sigmoid(double v) {
  const double p = layers::sigmoid(v);
  return 1.0 - p > kLogClamp ? -p : 0.0;
}

}  // namespace detail

/// Gradient of d_loss w.r.t. both logit grids.
template <typename T>
void discriminator_loss_grad(std::span<const T> real_logits, std::span<const T> fake_logits, std::span<T> d_real,
                             std::span<T> d_fake) {
  const double nr = double(real_logits.size()), nf = double(fake_logits.size());
  for (std::size_t i = 0; i < real_logits.size(); ++i)
    d_real[i] = T(-detail::dlog_sigmoid(double(real_logits[i])) / nr);
  for (std::size_t i = 0; i < fake_logits.size(); ++i)
    d_fake[i] = T(-detail::dlog_one_minus_sigmoid(double(fake_logits[i])) / nf);
}

/// Gradient of g_loss w.r.t. the fake logits.
template <typename T>
void generator_loss_grad(std::span<const T> fake_logits, GanForm form, std::span<T> d_fake) {
  const double nf = double(fake_logits.size());
  for (std::size_t i = 0; i < fake_logits.size(); ++i) {
    const double v = double(fake_logits[i]);
    d_fake[i] = T(form == GanForm::kMinimax ? detail::dlog_one_minus_sigmoid(v) / nf : -detail::dlog_sigmoid(v) / nf);
  }
}

/// Squared Euclidean norm of the difference divided by the element count.
template <typename T>
T l2_reconstruction_loss(std::span<const T> output, std::span<const T> target, std::span<T> d_output = {}) {
  if (output.size() != target.size())
    throw DimensionError("l2_reconstruction_loss: sizes " + std::to_string(output.size()) + " and " +
                         std::to_string(target.size()));
  if (output.empty()) throw DimensionError("l2_reconstruction_loss: empty image");
  const T n = T(output.size());
  T s = 0;
  for (std::size_t i = 0; i < output.size(); ++i) {
    const T d = output[i] - target[i];
    s += d * d;
    if (!d_output.empty()) d_output[i] = T(2) * d / n;
  }
  return s / n;
}

/// Batch form: mean over images of the per-image loss.
template <typename T>
T l2_reconstruction_loss(const Tensor<T>& output, const Tensor<T>& target, Tensor<T>* d_output = nullptr) {
  require_same_shape(output, target, "l2_reconstruction_loss");
  const std::size_t per = output.sample_size();
  T sum = 0;
  for (int i = 0; i < output.n(); ++i) {
    std::span<T> g = d_output ? std::span<T>(d_output->sample(i), per) : std::span<T>();
    sum += l2_reconstruction_loss<T>(std::span<const T>(output.sample(i), per), std::span<const T>(target.sample(i), per),
                                     g);
  }
  if (d_output)
    for (auto& v : d_output->values()) v /= T(output.n());
  return sum / T(output.n());
}

/// Mean absolute difference of two feature grids, per image, averaged over the batch.
/// The gradient at equal features uses the subgradient 0.
template <typename T>
T feature_l1(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>* d_a = nullptr) {
  require_same_shape(a, b, "feature_l1");
  const T per = T(a.sample_size());
  const T scale = T(1) / (per * T(a.n()));
  T sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T d = a.data()[i] - b.data()[i];
    sum += std::abs(d);
    if (d_a) d_a->data()[i] = d > T(0) ? scale : (d < T(0) ? -scale : T(0));
  }
  return sum * scale;
}

/// L1 distance between perceptual features of output and target, normalized by the
/// feature grid size and averaged over the batch.
template <typename T>
T perceptual_loss(const PerceptualNet<T>& perc, const Tensor<T>& output, const Tensor<T>& target) {
  require_same_shape(output, target, "perceptual_loss");
  return feature_l1(perceptual_features(perc, output), perceptual_features(perc, target));
}

/// Per-term values fed into the weighted total.
struct LossTerms {
  double l_cpl = 0.0;
  double l_gan_profile = 0.0;
  double l_gan_frontal = 0.0;
  double l_perceptual = 0.0;
  double l_l2 = 0.0;
};

inline LossBreakdown total_objective(const LossTerms& t, const LossConfig& c) {
  for (double v : {t.l_cpl, t.l_gan_profile, t.l_gan_frontal, t.l_perceptual, t.l_l2})
    if (!std::isfinite(v)) throw NumericError("total_objective: non-finite loss term");
  LossBreakdown b;
  b.l_cpl = t.l_cpl;
  b.l_gan_profile = t.l_gan_profile;
  b.l_gan_frontal = t.l_gan_frontal;
  b.l_perceptual = t.l_perceptual;
  b.l_l2 = t.l_l2;
  b.total = t.l_cpl + c.lambda_1 * (t.l_gan_profile + t.l_gan_frontal) + c.lambda_2 * t.l_perceptual +
            c.lambda_3 * t.l_l2;
  return b;
}

}  // namespace pfcpgan

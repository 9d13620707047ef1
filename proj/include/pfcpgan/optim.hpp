#pragma once

#include <cmath>
#include <cstdint>

#include "pfcpgan/tensor.hpp"

namespace pfcpgan {

struct AdamConfig {
  double learning_rate = 4e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates for one ParamSet.
template <typename T>
struct AdamState {
  ParamSet<T> m;
  ParamSet<T> v;
  std::uint64_t t = 0;

  static AdamState like(const ParamSet<T>& params) { return {params.zeros_like(), params.zeros_like(), 0}; }
  bool operator==(const AdamState&) const = default;
};

template <typename T>
double global_norm(const ParamSet<T>& grads) {
  double s = 0;
  for (const auto& a : grads)
    for (T g : a.values) s += double(g) * double(g);
  return std::sqrt(s);
}

/// Rescales grads so their global L2 norm is at most max_norm (no-op for max_norm <= 0).
template <typename T>
void clip_global_norm(ParamSet<T>& grads, double max_norm) {
  if (max_norm <= 0) return;
  const double n = global_norm(grads);
  if (n <= max_norm) return;
  const T s = T(max_norm / n);
  for (auto& a : grads)
    for (auto& g : a.values) g *= s;
}

/// One bias-corrected Adam update.
template <typename T>
void adam_step(ParamSet<T>& params, const ParamSet<T>& grads, AdamState<T>& state, const AdamConfig& cfg) {
  state.t += 1;
  const T b1 = T(cfg.beta1), b2 = T(cfg.beta2);
  const T c1 = T(1.0 - std::pow(cfg.beta1, double(state.t)));
  const T c2 = T(1.0 - std::pow(cfg.beta2, double(state.t)));
  const T lr = T(cfg.learning_rate), eps = T(cfg.eps);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k].values;
    const auto& g = grads[k].values;
    auto& m = state.m[k].values;
    auto& v = state.v[k].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      const T mh = m[i] / c1;
      const T vh = v[i] / c2;
      p[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
}

}  // namespace pfcpgan

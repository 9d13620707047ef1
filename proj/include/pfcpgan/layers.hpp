#pragma once

// Differentiable building blocks with hand-written backward passes.
// Convolutions are 3x3 with zero padding 1, evaluated as per-tap GEMMs.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <type_traits>
#include <vector>

#include "pfcpgan/tensor.hpp"

namespace pfcpgan::layers {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

inline constexpr int kKernel = 3;
inline constexpr int kTaps = kKernel * kKernel;

inline int conv_out_extent(int in, int stride) { return (in + 2 - kKernel) / stride + 1; }

namespace detail {

// A 3x3/pad-1 convolution is evaluated as nine GEMMs, one per kernel tap, each
// reading a column-shifted view of a zero-padded input buffer. Stride 2 uses the
// four polyphase components of the padded input so every tap is again a shift.
// Rows of a buffer are channels; columns run over the padded grids of the samples
// in the current chunk (grid_h x grid_w each) followed by a zero margin.
struct ShiftPlan {
  int stride, ho, wo;
  int grid_h, grid_w;  // per-sample grid of each phase
  int phases;
  int phase_of[kTaps];
  int offset_of[kTaps];
  int margin;

  ShiftPlan(int h, int w, int s) : stride(s) {
    ho = conv_out_extent(h, s);
    wo = conv_out_extent(w, s);
    if (s == 1) {
      grid_h = h + 2;
      grid_w = w + 2;
      phases = 1;
    } else {
      grid_h = (h + 3) / 2;
      grid_w = (w + 3) / 2;
      phases = 4;
    }
    margin = 0;
    for (int ky = 0; ky < kKernel; ++ky)
      for (int kx = 0; kx < kKernel; ++kx) {
        const int t = ky * kKernel + kx;
        if (s == 1) {
          phase_of[t] = 0;
          offset_of[t] = ky * grid_w + kx;
        } else {
          phase_of[t] = (ky % 2) * 2 + (kx % 2);
          offset_of[t] = (ky / 2) * grid_w + (kx / 2);
        }
        margin = std::max(margin, offset_of[t]);
      }
  }
  std::size_t grid() const { return std::size_t(grid_h) * grid_w; }
  std::size_t span(int count) const { return std::size_t(count) * grid(); }
  std::size_t buffer_cols(int count) const { return span(count) + std::size_t(margin); }
};

// Scatters samples [n0, n0+count) of x into phase buffers (each channels x buffer_cols).
template <typename T>
void fill_phases(const Tensor<T>& x, int n0, int count, const ShiftPlan& plan, std::vector<T>& buf) {
  const int c = x.c(), h = x.h(), w = x.w();
  const std::size_t cols = plan.buffer_cols(count);
  buf.assign(std::size_t(plan.phases) * c * cols, T(0));
  for (int s = 0; s < count; ++s)
    for (int ch = 0; ch < c; ++ch) {
      const T* src = x.sample(n0 + s) + std::size_t(ch) * h * w;
      for (int y = 0; y < h; ++y) {
        const int py = y + 1;
        const T* row = src + std::size_t(y) * w;
        if (plan.stride == 1) {
          T* dst = buf.data() + std::size_t(ch) * cols + std::size_t(s) * plan.grid() + std::size_t(py) * plan.grid_w + 1;
          std::copy_n(row, w, dst);
        } else {
          for (int x0 = 0; x0 < w; ++x0) {
            const int px = x0 + 1;
            const int phase = (py % 2) * 2 + (px % 2);
            buf[(std::size_t(phase) * c + ch) * cols + std::size_t(s) * plan.grid() +
                std::size_t(py / 2) * plan.grid_w + std::size_t(px / 2)] = row[x0];
          }
        }
      }
    }
}

// Adds phase-buffer gradients back onto the unpadded input gradient.
template <typename T>
void gather_phases_add(const std::vector<T>& buf, int n0, int count, const ShiftPlan& plan, Tensor<T>& dx) {
  const int c = dx.c(), h = dx.h(), w = dx.w();
  const std::size_t cols = plan.buffer_cols(count);
  for (int s = 0; s < count; ++s)
    for (int ch = 0; ch < c; ++ch) {
      T* dst = dx.sample(n0 + s) + std::size_t(ch) * h * w;
      for (int y = 0; y < h; ++y) {
        const int py = y + 1;
        T* row = dst + std::size_t(y) * w;
        if (plan.stride == 1) {
          const T* src = buf.data() + std::size_t(ch) * cols + std::size_t(s) * plan.grid() + std::size_t(py) * plan.grid_w + 1;
          for (int x0 = 0; x0 < w; ++x0) row[x0] += src[x0];
        } else {
          for (int x0 = 0; x0 < w; ++x0) {
            const int px = x0 + 1;
            const int phase = (py % 2) * 2 + (px % 2);
            row[x0] += buf[(std::size_t(phase) * c + ch) * cols + std::size_t(s) * plan.grid() +
                           std::size_t(py / 2) * plan.grid_w + std::size_t(px / 2)];
          }
        }
      }
    }
}

// Weight [out][in][3][3] regrouped as nine contiguous [out][in] tap matrices.
template <typename T>
std::vector<T> split_taps(const T* weight, int out_ch, int in_ch) {
  std::vector<T> taps(std::size_t(kTaps) * out_ch * in_ch);
  for (int o = 0; o < out_ch; ++o)
    for (int i = 0; i < in_ch; ++i)
      for (int t = 0; t < kTaps; ++t)
        taps[(std::size_t(t) * out_ch + o) * in_ch + i] = weight[(std::size_t(o) * in_ch + i) * kTaps + t];
  return taps;
}

// Upper bound on buffer elements per chunk of samples.
inline constexpr std::size_t kChunkBudget = std::size_t(1) << 18;

inline int chunk_size(int n, std::size_t per_sample) {
  const std::size_t c = std::max<std::size_t>(1, kChunkBudget / std::max<std::size_t>(1, per_sample));
  return int(std::min<std::size_t>(std::size_t(n), c));
}

template <typename T>
using StridedMap = Eigen::Map<const RowMatrix<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using MutableStridedMap = Eigen::Map<RowMatrix<T>, 0, Eigen::OuterStride<>>;

}  // namespace detail

/// y = conv3x3(x; weight[out_ch][in_ch][3][3], bias[out_ch]) with the given stride.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const T* weight, const T* bias, int out_ch, int stride) {
  const detail::ShiftPlan plan(x.h(), x.w(), stride);
  const int cin = x.c();
  Tensor<T> y(x.n(), out_ch, plan.ho, plan.wo);
  const std::vector<T> taps = detail::split_taps(weight, out_ch, cin);
  const int chunk = detail::chunk_size(x.n(), std::size_t(plan.phases) * cin * plan.grid() + std::size_t(out_ch) * plan.grid());
  std::vector<T> buf;
  RowMatrix<T> acc;
  for (int n0 = 0; n0 < x.n(); n0 += chunk) {
    const int count = std::min(chunk, x.n() - n0);
    detail::fill_phases(x, n0, count, plan, buf);
    const std::size_t cols = plan.buffer_cols(count);
    const Eigen::Index span = Eigen::Index(plan.span(count));
    acc.setZero(out_ch, span);
    for (int t = 0; t < kTaps; ++t) {
      ConstMatrixMap<T> wt(taps.data() + std::size_t(t) * out_ch * cin, out_ch, cin);
      detail::StridedMap<T> xv(buf.data() + std::size_t(plan.phase_of[t]) * cin * cols + plan.offset_of[t], cin, span,
                               Eigen::OuterStride<>(Eigen::Index(cols)));
      acc.noalias() += wt * xv;
    }
    for (int s = 0; s < count; ++s)
      for (int o = 0; o < out_ch; ++o) {
        const T b = bias ? bias[o] : T(0);
        const T* src = acc.data() + std::size_t(o) * span + std::size_t(s) * plan.grid();
        T* dst = y.sample(n0 + s) + std::size_t(o) * plan.ho * plan.wo;
        for (int yy = 0; yy < plan.ho; ++yy)
          for (int xx = 0; xx < plan.wo; ++xx) dst[yy * plan.wo + xx] = src[yy * plan.grid_w + xx] + b;
      }
  }
  return y;
}

/// Accumulates weight/bias gradients into dweight/dbias (either may be null)
/// and, when dx is non-null, adds the input gradient into *dx.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const T* weight, int out_ch, int stride, const Tensor<T>& dy,
                     std::type_identity_t<T>* dweight, std::type_identity_t<T>* dbias,
                     std::type_identity_t<Tensor<T>>* dx) {
  const detail::ShiftPlan plan(x.h(), x.w(), stride);
  const int cin = x.c();
  const std::vector<T> taps = dx ? detail::split_taps(weight, out_ch, cin) : std::vector<T>();
  std::vector<T> dtaps(dweight ? std::size_t(kTaps) * out_ch * cin : 0, T(0));
  const int chunk =
      detail::chunk_size(x.n(), 2 * std::size_t(plan.phases) * cin * plan.grid() + std::size_t(out_ch) * plan.grid());
  std::vector<T> buf, dbuf;
  RowMatrix<T> g;
  for (int n0 = 0; n0 < x.n(); n0 += chunk) {
    const int count = std::min(chunk, x.n() - n0);
    const std::size_t cols = plan.buffer_cols(count);
    const Eigen::Index span = Eigen::Index(plan.span(count));
    g.setZero(out_ch, span);
    for (int s = 0; s < count; ++s)
      for (int o = 0; o < out_ch; ++o) {
        const T* src = dy.sample(n0 + s) + std::size_t(o) * plan.ho * plan.wo;
        T* dst = g.data() + std::size_t(o) * span + std::size_t(s) * plan.grid();
        for (int yy = 0; yy < plan.ho; ++yy)
          for (int xx = 0; xx < plan.wo; ++xx) dst[yy * plan.grid_w + xx] = src[yy * plan.wo + xx];
      }
    if (dbias)
      for (int o = 0; o < out_ch; ++o) dbias[o] += g.row(o).sum();
    if (dweight) {
      detail::fill_phases(x, n0, count, plan, buf);
      for (int t = 0; t < kTaps; ++t) {
        MatrixMap<T> dwt(dtaps.data() + std::size_t(t) * out_ch * cin, out_ch, cin);
        detail::StridedMap<T> xv(buf.data() + std::size_t(plan.phase_of[t]) * cin * cols + plan.offset_of[t], cin,
                                 span, Eigen::OuterStride<>(Eigen::Index(cols)));
        dwt.noalias() += g * xv.transpose();
      }
    }
    if (dx) {
      dbuf.assign(std::size_t(plan.phases) * cin * cols, T(0));
      for (int t = 0; t < kTaps; ++t) {
        ConstMatrixMap<T> wt(taps.data() + std::size_t(t) * out_ch * cin, out_ch, cin);
        detail::MutableStridedMap<T> dv(dbuf.data() + std::size_t(plan.phase_of[t]) * cin * cols + plan.offset_of[t],
                                        cin, span, Eigen::OuterStride<>(Eigen::Index(cols)));
        dv.noalias() += wt.transpose() * g;
      }
      detail::gather_phases_add(dbuf, n0, count, plan, *dx);
    }
  }
  if (dweight)
    for (int o = 0; o < out_ch; ++o)
      for (int i = 0; i < cin; ++i)
        for (int t = 0; t < kTaps; ++t)
          dweight[(std::size_t(o) * cin + i) * kTaps + t] += dtaps[(std::size_t(t) * out_ch + o) * cin + i];
}

template <typename T>
void relu_inplace(Tensor<T>& x) {
  for (auto& v : x.values()) v = v > T(0) ? v : T(0);
}

template <typename T>
void leaky_relu_inplace(Tensor<T>& x, T slope) {
  for (auto& v : x.values()) v = v > T(0) ? v : slope * v;
}

/// dy *= relu'(.) given the activation output y.
template <typename T>
void relu_backward_inplace(const Tensor<T>& y, Tensor<T>& dy) {
  const T* a = y.data();
  T* g = dy.data();
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (!(a[i] > T(0))) g[i] = T(0);
}

/// Leaky rectifier backward; positive slope preserves the sign so the output decides the branch.
template <typename T>
void leaky_relu_backward_inplace(const Tensor<T>& y, Tensor<T>& dy, T slope) {
  const T* a = y.data();
  T* g = dy.data();
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (!(a[i] > T(0))) g[i] *= slope;
}

template <typename T>
T sigmoid(T v) {
  return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
}

template <typename T>
void sigmoid_inplace(Tensor<T>& x) {
  for (auto& v : x.values()) v = sigmoid(v);
}

template <typename T>
void sigmoid_backward_inplace(const Tensor<T>& y, Tensor<T>& dy) {
  const T* a = y.data();
  T* g = dy.data();
  for (std::size_t i = 0; i < dy.size(); ++i) g[i] *= a[i] * (T(1) - a[i]);
}

/// Nearest-neighbour 2x upsampling.
template <typename T>
Tensor<T> upsample2_forward(const Tensor<T>& x) {
  Tensor<T> y(x.n(), x.c(), x.h() * 2, x.w() * 2);
  const int w = x.w(), wo = y.w();
  const std::size_t planes = std::size_t(x.n()) * x.c();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = x.data() + p * x.plane();
    T* dst = y.data() + p * y.plane();
    for (int r = 0; r < x.h(); ++r) {
      T* d0 = dst + std::size_t(2 * r) * wo;
      const T* s0 = src + std::size_t(r) * w;
      for (int c = 0; c < w; ++c) d0[2 * c] = d0[2 * c + 1] = s0[c];
      std::copy_n(d0, wo, d0 + wo);
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& dy) {
  Tensor<T> dx(dy.n(), dy.c(), dy.h() / 2, dy.w() / 2);
  const int w = dx.w(), wi = dy.w();
  const std::size_t planes = std::size_t(dy.n()) * dy.c();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = dy.data() + p * dy.plane();
    T* dst = dx.data() + p * dx.plane();
    for (int r = 0; r < dx.h(); ++r) {
      const T* s0 = src + std::size_t(2 * r) * wi;
      const T* s1 = s0 + wi;
      T* d = dst + std::size_t(r) * w;
      for (int c = 0; c < w; ++c) d[c] = (s0[2 * c] + s0[2 * c + 1]) + (s1[2 * c] + s1[2 * c + 1]);
    }
  }
  return dx;
}

/// Channel concatenation [a ; b].
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
    throw DimensionError("concat_channels: " + a.shape_string() + " vs " + b.shape_string());
  Tensor<T> y(a.n(), a.c() + b.c(), a.h(), a.w());
  for (int i = 0; i < a.n(); ++i) {
    std::copy_n(a.sample(i), a.sample_size(), y.sample(i));
    std::copy_n(b.sample(i), b.sample_size(), y.sample(i) + a.sample_size());
  }
  return y;
}

/// Splits a concatenation gradient; the second part is added into *db when non-null.
template <typename T>
Tensor<T> split_channels(const Tensor<T>& dy, int first_channels, Tensor<T>* db) {
  Tensor<T> da(dy.n(), first_channels, dy.h(), dy.w());
  const std::size_t na = da.sample_size();
  for (int i = 0; i < dy.n(); ++i) {
    std::copy_n(dy.sample(i), na, da.sample(i));
    if (db) {
      const T* src = dy.sample(i) + na;
      T* dst = db->sample(i);
      for (std::size_t j = 0; j < db->sample_size(); ++j) dst[j] += src[j];
    }
  }
  return da;
}

/// Fully connected map on row-major [n][in] inputs: out = in * W^T + b, W is [out][in].
template <typename T>
std::vector<T> linear_forward(const std::vector<T>& in, int n, int in_dim, const T* weight, const T* bias, int out_dim) {
  std::vector<T> out(std::size_t(n) * out_dim);
  ConstMatrixMap<T> x(in.data(), n, in_dim);
  ConstMatrixMap<T> w(weight, out_dim, in_dim);
  MatrixMap<T> y(out.data(), n, out_dim);
  y.noalias() = x * w.transpose();
  for (int i = 0; i < n; ++i)
    for (int o = 0; o < out_dim; ++o) y(i, o) += bias[o];
  return out;
}

/// Accumulates parameter gradients; returns the input gradient.
template <typename T>
std::vector<T> linear_backward(const std::vector<T>& in, int n, int in_dim, const T* weight, int out_dim,
                               const std::vector<T>& dout, T* dweight, T* dbias) {
  ConstMatrixMap<T> x(in.data(), n, in_dim);
  ConstMatrixMap<T> g(dout.data(), n, out_dim);
  ConstMatrixMap<T> w(weight, out_dim, in_dim);
  if (dweight) {
    MatrixMap<T> dw(dweight, out_dim, in_dim);
    dw.noalias() += g.transpose() * x;
  }
  if (dbias)
    for (int o = 0; o < out_dim; ++o) dbias[o] += g.col(o).sum();
  std::vector<T> din(std::size_t(n) * in_dim);
  MatrixMap<T> dx(din.data(), n, in_dim);
  dx.noalias() = g * w;
  return din;
}

/// Global spatial average pooling to [n][c].
template <typename T>
std::vector<T> avgpool_forward(const Tensor<T>& x) {
  std::vector<T> out(std::size_t(x.n()) * x.c());
  const std::size_t p = x.plane();
  for (int i = 0; i < x.n(); ++i)
    for (int c = 0; c < x.c(); ++c) {
      const T* src = x.sample(i) + std::size_t(c) * p;
      T s = 0;
      for (std::size_t j = 0; j < p; ++j) s += src[j];
      out[std::size_t(i) * x.c() + c] = s / T(p);
    }
  return out;
}

/// Adds the pooling gradient into dx.
template <typename T>
void avgpool_backward(const std::vector<T>& dout, Tensor<T>& dx) {
  const std::size_t p = dx.plane();
  for (int i = 0; i < dx.n(); ++i)
    for (int c = 0; c < dx.c(); ++c) {
      const T g = dout[std::size_t(i) * dx.c() + c] / T(p);
      T* dst = dx.sample(i) + std::size_t(c) * p;
      for (std::size_t j = 0; j < p; ++j) dst[j] += g;
    }
}

}  // namespace pfcpgan::layers

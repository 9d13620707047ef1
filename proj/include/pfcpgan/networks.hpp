#pragma once

// U-Net generators, conditional patch discriminators and the frozen
// perceptual feature stack, each with an explicit backward pass.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <type_traits>
#include <vector>

#include "pfcpgan/data.hpp"
#include "pfcpgan/error.hpp"
#include "pfcpgan/layers.hpp"
#include "pfcpgan/rng.hpp"
#include "pfcpgan/tensor.hpp"

namespace pfcpgan {

inline constexpr double kDiscriminatorSlope = 0.3;
inline constexpr int kDiscriminatorBlocks = 3;
inline constexpr int kPerceptualWidths[3] = {16, 32, 64};

struct GeneratorConfig {
  ImageShape image_size{};
  int base_channels = 32;
  int n_down = 4;
  int embedding_dim = 256;

  int bottleneck_height() const { return image_size.height >> n_down; }
  int bottleneck_width() const { return image_size.width >> n_down; }
  /// Encoder stage k output width; stage k runs at resolution H / 2^(k+1).
  int stage_channels(int k) const { return base_channels << k; }

  void validate() const {
    if (image_size.height < 1 || image_size.width < 1 || image_size.channels < 1)
      throw ConfigError("model image size must be positive");
    if (base_channels < 1) throw ConfigError("model.base_channels must be >= 1");
    if (n_down < 1) throw ConfigError("model.n_down must be >= 1");
    if (embedding_dim < 2) throw ConfigError("model.embedding_dim must be >= 2");
    if ((image_size.height % (1 << n_down)) != 0 || (image_size.width % (1 << n_down)) != 0 ||
        bottleneck_height() < 2 || bottleneck_width() < 2)
      throw ConfigError("model: H/2^n_down and W/2^n_down must be integers >= 2");
  }

  bool operator==(const GeneratorConfig&) const = default;
};

/// Parameter arrays of one U-Net generator. Layer indices refer into `params`.
template <typename T>
struct Generator {
  GeneratorConfig config;
  ParamSet<T> params;
  std::vector<int> enc_w, enc_b, dec_w, dec_b;
  int embed_w = -1, embed_b = -1, expand_w = -1, expand_b = -1, head_w = -1, head_b = -1;

  /// Input channel count of decoder stage i: upsampled signal plus the matching encoder skip.
  int decoder_in_channels(int i) const {
    const int n = config.n_down;
    const int up = i == 0 ? config.stage_channels(n - 1) : config.stage_channels(n - i);
    return up + config.stage_channels(n - 1 - i);
  }
  int decoder_out_channels(int i) const { return config.stage_channels(config.n_down - 1 - i); }
};

template <typename T>
Generator<T> make_generator(const GeneratorConfig& cfg) {
  cfg.validate();
  Generator<T> g;
  g.config = cfg;
  const int n = cfg.n_down;
  int in = cfg.image_size.channels;
  for (int k = 0; k < n; ++k) {
    const int out = cfg.stage_channels(k);
    g.enc_w.push_back(g.params.add("enc" + std::to_string(k) + ".weight", {out, in, 3, 3}));
    g.enc_b.push_back(g.params.add("enc" + std::to_string(k) + ".bias", {out}));
    in = out;
  }
  const int last = cfg.stage_channels(n - 1);
  const int grid = last * cfg.bottleneck_height() * cfg.bottleneck_width();
  g.embed_w = g.params.add("embed.weight", {cfg.embedding_dim, last});
  g.embed_b = g.params.add("embed.bias", {cfg.embedding_dim});
  g.expand_w = g.params.add("expand.weight", {grid, cfg.embedding_dim});
  g.expand_b = g.params.add("expand.bias", {grid});
  for (int i = 0; i < n; ++i) {
    g.dec_w.push_back(g.params.add("dec" + std::to_string(i) + ".weight",
                                   {g.decoder_out_channels(i), g.decoder_in_channels(i), 3, 3}));
    g.dec_b.push_back(g.params.add("dec" + std::to_string(i) + ".bias", {g.decoder_out_channels(i)}));
  }
  g.head_w = g.params.add("head.weight", {cfg.image_size.channels, cfg.stage_channels(0), 3, 3});
  g.head_b = g.params.add("head.bias", {cfg.image_size.channels});
  return g;
}

/// Closed-form parameter count of one generator.
inline std::size_t generator_parameter_count(const GeneratorConfig& c) {
  std::size_t total = 0;
  std::size_t in = std::size_t(c.image_size.channels);
  for (int k = 0; k < c.n_down; ++k) {
    const std::size_t out = std::size_t(c.stage_channels(k));
    total += out * in * 9 + out;
    in = out;
  }
  const std::size_t last = std::size_t(c.stage_channels(c.n_down - 1));
  const std::size_t grid = last * std::size_t(c.bottleneck_height()) * std::size_t(c.bottleneck_width());
  const std::size_t d = std::size_t(c.embedding_dim);
  total += d * last + d + grid * d + grid;
  for (int i = 0; i < c.n_down; ++i) {
    const std::size_t up = std::size_t(i == 0 ? c.stage_channels(c.n_down - 1) : c.stage_channels(c.n_down - i));
    const std::size_t skip = std::size_t(c.stage_channels(c.n_down - 1 - i));
    total += skip * (up + skip) * 9 + skip;
  }
  total += std::size_t(c.image_size.channels) * std::size_t(c.base_channels) * 9 + std::size_t(c.image_size.channels);
  return total;
}

/// Output of the encoder half.
template <typename T>
struct Encoding {
  int batch = 0;
  int dim = 0;
  std::vector<T> embedding;        // [batch][dim]
  std::vector<Tensor<T>> skips;    // encoder activations, coarse-to-fine
  std::vector<T> pooled;           // pooled coarsest activation, kept for backward

  const T* row(int i) const { return embedding.data() + std::size_t(i) * dim; }
};

template <typename T>
void check_image_tensor(const Tensor<T>& x, const ImageShape& s, const char* where) {
  if (x.c() != s.channels || x.h() != s.height || x.w() != s.width)
    throw DimensionError(std::string(where) + ": expected (" + std::to_string(s.channels) + "," +
                         std::to_string(s.height) + "," + std::to_string(s.width) + ") images, got " +
                         x.shape_string());
}

template <typename T>
Encoding<T> encode(const Generator<T>& g, const Tensor<T>& x) {
  check_image_tensor(x, g.config.image_size, "encode");
  const int n = g.config.n_down;
  Encoding<T> e;
  e.batch = x.n();
  e.dim = g.config.embedding_dim;
  std::vector<Tensor<T>> fine_to_coarse;
  const Tensor<T>* cur = &x;
  for (int k = 0; k < n; ++k) {
    Tensor<T> y = layers::conv2d_forward(*cur, g.params.data(g.enc_w[k]), g.params.data(g.enc_b[k]),
                                         g.config.stage_channels(k), 2);
    layers::relu_inplace(y);
    fine_to_coarse.push_back(std::move(y));
    cur = &fine_to_coarse.back();
  }
  const int last = g.config.stage_channels(n - 1);
  e.pooled = layers::avgpool_forward(fine_to_coarse.back());
  e.embedding = layers::linear_forward(e.pooled, x.n(), last, g.params.data(g.embed_w), g.params.data(g.embed_b),
                                       e.dim);
  e.skips.assign(std::make_move_iterator(fine_to_coarse.rbegin()), std::make_move_iterator(fine_to_coarse.rend()));
  return e;
}

/// Intermediates of one decoder pass.
template <typename T>
struct DecoderTape {
  std::vector<T> embedding;
  std::vector<T> expanded;                 // post-rectifier fully-connected output
  std::vector<Tensor<T>> stage_inputs;     // concatenations
  std::vector<Tensor<T>> stage_outputs;
  Tensor<T> head_input;
  Tensor<T> output;
};

/// Decodes [batch][dim] embeddings. `skips` holds coarse-to-fine encoder activations;
/// an empty vector substitutes zero grids for every skip input.
template <typename T>
Tensor<T> decode(const Generator<T>& g, const std::vector<T>& embedding, int batch,
                 const std::vector<Tensor<T>>& skips, DecoderTape<T>* tape = nullptr) {
  const auto& c = g.config;
  const int n = c.n_down;
  if (embedding.size() != std::size_t(batch) * c.embedding_dim)
    throw DimensionError("decode: embedding length " + std::to_string(embedding.size()) + " != batch*dim " +
                         std::to_string(std::size_t(batch) * c.embedding_dim));
  if (!skips.empty()) {
    if (int(skips.size()) != n) throw DimensionError("decode: expected " + std::to_string(n) + " skip grids");
    for (int i = 0; i < n; ++i) {
      const int k = n - 1 - i;
      const auto& s = skips[std::size_t(i)];
      if (s.n() != batch || s.c() != c.stage_channels(k) || s.h() != (c.image_size.height >> (k + 1)) ||
          s.w() != (c.image_size.width >> (k + 1)))
        throw DimensionError("decode: skip " + std::to_string(i) + " has shape " + s.shape_string());
    }
  }
  DecoderTape<T> local;
  DecoderTape<T>& t = tape ? *tape : local;
  t.stage_inputs.clear();
  t.stage_outputs.clear();
  t.embedding = embedding;

  const int last = c.stage_channels(n - 1);
  const int hb = c.bottleneck_height(), wb = c.bottleneck_width();
  const int grid = last * hb * wb;
  t.expanded = layers::linear_forward(embedding, batch, c.embedding_dim, g.params.data(g.expand_w),
                                      g.params.data(g.expand_b), grid);
  for (auto& v : t.expanded) v = v > T(0) ? v : T(0);
  Tensor<T> up(batch, last, hb, wb);
  std::copy(t.expanded.begin(), t.expanded.end(), up.data());

  for (int i = 0; i < n; ++i) {
    const int k = n - 1 - i;
    if (i > 0) up = layers::upsample2_forward(t.stage_outputs.back());
    Tensor<T> in = skips.empty()
                       ? layers::concat_channels(up, Tensor<T>(batch, c.stage_channels(k), up.h(), up.w()))
                       : layers::concat_channels(up, skips[std::size_t(i)]);
    Tensor<T> y = layers::conv2d_forward(in, g.params.data(g.dec_w[i]), g.params.data(g.dec_b[i]),
                                         g.decoder_out_channels(i), 1);
    layers::relu_inplace(y);
    t.stage_inputs.push_back(std::move(in));
    t.stage_outputs.push_back(std::move(y));
  }
  t.head_input = layers::upsample2_forward(t.stage_outputs.back());
  t.output = layers::conv2d_forward(t.head_input, g.params.data(g.head_w), g.params.data(g.head_b),
                                    c.image_size.channels, 1);
  layers::sigmoid_inplace(t.output);
  return t.output;
}

template <typename T>
Tensor<T> generate(const Generator<T>& g, const Tensor<T>& x) {
  const Encoding<T> e = encode(g, x);
  return decode(g, e.embedding, e.batch, e.skips);
}

/// Backward through the decoder. Accumulates parameter gradients into `grads`
/// (may be null) and returns d(embedding); d(skips) is written when non-null.
template <typename T>
std::vector<T> decode_backward(const Generator<T>& g, const DecoderTape<T>& t, const Tensor<T>& d_output,
                               std::type_identity_t<ParamSet<T>>* grads, std::vector<Tensor<T>>* d_skips) {
  const auto& c = g.config;
  const int n = c.n_down;
  const int batch = d_output.n();
  auto gw = [&](int idx) { return grads ? grads->data(idx) : nullptr; };

  Tensor<T> d = d_output;
  layers::sigmoid_backward_inplace(t.output, d);
  Tensor<T> d_head_in(t.head_input.n(), t.head_input.c(), t.head_input.h(), t.head_input.w());
  layers::conv2d_backward(t.head_input, g.params.data(g.head_w), c.image_size.channels, 1, d, gw(g.head_w),
                          gw(g.head_b), &d_head_in);
  Tensor<T> d_stage = layers::upsample2_backward(d_head_in);

  if (d_skips) d_skips->assign(std::size_t(n), Tensor<T>());
  for (int i = n - 1; i >= 0; --i) {
    layers::relu_backward_inplace(t.stage_outputs[std::size_t(i)], d_stage);
    const Tensor<T>& in = t.stage_inputs[std::size_t(i)];
    Tensor<T> d_in(in.n(), in.c(), in.h(), in.w());
    layers::conv2d_backward(in, g.params.data(g.dec_w[i]), g.decoder_out_channels(i), 1, d_stage, gw(g.dec_w[i]),
                            gw(g.dec_b[i]), &d_in);
    const int up_ch = g.decoder_in_channels(i) - c.stage_channels(n - 1 - i);
    Tensor<T> d_skip(batch, c.stage_channels(n - 1 - i), in.h(), in.w());
    Tensor<T> d_up = layers::split_channels(d_in, up_ch, &d_skip);
    if (d_skips) (*d_skips)[std::size_t(i)] = std::move(d_skip);
    d_stage = i > 0 ? layers::upsample2_backward(d_up) : std::move(d_up);
  }
  std::vector<T> d_expanded(d_stage.values());
  for (std::size_t j = 0; j < d_expanded.size(); ++j)
    if (!(t.expanded[j] > T(0))) d_expanded[j] = T(0);
  const int grid = int(d_expanded.size() / std::size_t(batch));
  return layers::linear_backward(t.embedding, batch, c.embedding_dim, g.params.data(g.expand_w), grid, d_expanded,
                                 gw(g.expand_w), gw(g.expand_b));
}

/// Backward through the encoder given gradients w.r.t. the embedding and the
/// (coarse-to-fine) skips; either gradient list may be empty. Returns d(input) when requested.
template <typename T>
void encode_backward(const Generator<T>& g, const Tensor<T>& x, const Encoding<T>& e, const std::vector<T>& d_embedding,
                     const std::vector<Tensor<T>>& d_skips, std::type_identity_t<ParamSet<T>>* grads,
                     std::type_identity_t<Tensor<T>>* dx = nullptr) {
  const auto& c = g.config;
  const int n = c.n_down;
  auto gw = [&](int idx) { return grads ? grads->data(idx) : nullptr; };
  const int last = c.stage_channels(n - 1);

  const Tensor<T>& coarsest = e.skips.front();
  Tensor<T> d_act(coarsest.n(), coarsest.c(), coarsest.h(), coarsest.w());
  if (!d_embedding.empty()) {
    std::vector<T> d_pooled = layers::linear_backward(e.pooled, e.batch, last, g.params.data(g.embed_w), e.dim,
                                                      d_embedding, gw(g.embed_w), gw(g.embed_b));
    layers::avgpool_backward(d_pooled, d_act);
  }
  for (int k = n - 1; k >= 0; --k) {
    const std::size_t skip_idx = std::size_t(n - 1 - k);
    if (!d_skips.empty() && !d_skips[skip_idx].empty()) {
      const auto& ds = d_skips[skip_idx];
      for (std::size_t j = 0; j < ds.size(); ++j) d_act.data()[j] += ds.data()[j];
    }
    const Tensor<T>& y = e.skips[skip_idx];
    layers::relu_backward_inplace(y, d_act);
    const Tensor<T>& in = k > 0 ? e.skips[skip_idx + 1] : x;
    const bool need_dx = k > 0 || dx != nullptr;
    Tensor<T> d_in = need_dx ? Tensor<T>(in.n(), in.c(), in.h(), in.w()) : Tensor<T>();
    layers::conv2d_backward(in, g.params.data(g.enc_w[k]), c.stage_channels(k), 2, d_act, gw(g.enc_w[k]),
                            gw(g.enc_b[k]), need_dx ? &d_in : nullptr);
    if (k > 0) {
      d_act = std::move(d_in);
    } else if (dx) {
      *dx = std::move(d_in);
    }
  }
}

/// Conditional patch discriminator over the channel concatenation (condition, candidate).
template <typename T>
struct Discriminator {
  ImageShape image_size;
  int base_channels = 32;
  ParamSet<T> params;
  std::vector<int> conv_w, conv_b;
  int out_w = -1, out_b = -1;

  int block_channels(int k) const { return base_channels << k; }
};

template <typename T>
Discriminator<T> make_discriminator(const GeneratorConfig& cfg) {
  Discriminator<T> d;
  d.image_size = cfg.image_size;
  d.base_channels = cfg.base_channels;
  int in = 2 * cfg.image_size.channels;
  for (int k = 0; k < kDiscriminatorBlocks; ++k) {
    d.conv_w.push_back(d.params.add("conv" + std::to_string(k) + ".weight", {d.block_channels(k), in, 3, 3}));
    d.conv_b.push_back(d.params.add("conv" + std::to_string(k) + ".bias", {d.block_channels(k)}));
    in = d.block_channels(k);
  }
  d.out_w = d.params.add("out.weight", {1, in, 3, 3});
  d.out_b = d.params.add("out.bias", {1});
  return d;
}

template <typename T>
struct DiscriminatorTape {
  Tensor<T> input;
  std::vector<Tensor<T>> acts;
};

/// Patch logits of shape (batch, 1, H/8, W/8).
template <typename T>
Tensor<T> discriminate(const Discriminator<T>& d, const Tensor<T>& condition, const Tensor<T>& candidate,
                       DiscriminatorTape<T>* tape = nullptr) {
  check_image_tensor(condition, d.image_size, "discriminate(condition)");
  check_image_tensor(candidate, d.image_size, "discriminate(candidate)");
  require_same_shape(condition, candidate, "discriminate");
  DiscriminatorTape<T> local;
  DiscriminatorTape<T>& t = tape ? *tape : local;
  t.acts.clear();
  t.input = layers::concat_channels(condition, candidate);
  const Tensor<T>* cur = &t.input;
  for (int k = 0; k < kDiscriminatorBlocks; ++k) {
    Tensor<T> y = layers::conv2d_forward(*cur, d.params.data(d.conv_w[k]), d.params.data(d.conv_b[k]),
                                         d.block_channels(k), 2);
    layers::leaky_relu_inplace(y, T(kDiscriminatorSlope));
    t.acts.push_back(std::move(y));
    cur = &t.acts.back();
  }
  return layers::conv2d_forward(*cur, d.params.data(d.out_w), d.params.data(d.out_b), 1, 1);
}

/// Accumulates parameter gradients (grads may be null); writes d(candidate) when requested.
template <typename T>
void discriminate_backward(const Discriminator<T>& d, const DiscriminatorTape<T>& t, const Tensor<T>& d_logits,
                           std::type_identity_t<ParamSet<T>>* grads, std::type_identity_t<Tensor<T>>* d_candidate) {
  auto gw = [&](int idx) { return grads ? grads->data(idx) : nullptr; };
  const Tensor<T>& top = t.acts.back();
  Tensor<T> g(top.n(), top.c(), top.h(), top.w());
  layers::conv2d_backward(top, d.params.data(d.out_w), 1, 1, d_logits, gw(d.out_w), gw(d.out_b), &g);
  for (int k = kDiscriminatorBlocks - 1; k >= 0; --k) {
    layers::leaky_relu_backward_inplace(t.acts[std::size_t(k)], g, T(kDiscriminatorSlope));
    const Tensor<T>& in = k > 0 ? t.acts[std::size_t(k - 1)] : t.input;
    const bool need_dx = k > 0 || d_candidate != nullptr;
    Tensor<T> d_in = need_dx ? Tensor<T>(in.n(), in.c(), in.h(), in.w()) : Tensor<T>();
    layers::conv2d_backward(in, d.params.data(d.conv_w[k]), d.block_channels(k), 2, g, gw(d.conv_w[k]),
                            gw(d.conv_b[k]), need_dx ? &d_in : nullptr);
    if (k > 0) {
      g = std::move(d_in);
    } else if (d_candidate) {
      Tensor<T> dc(d_in.n(), d_in.c() / 2, d_in.h(), d_in.w());
      layers::split_channels(d_in, d_in.c() / 2, &dc);
      *d_candidate = std::move(dc);
    }
  }
}

/// Frozen feature stack used by the perceptual loss. Its weights are never updated.
template <typename T>
struct PerceptualNet {
  ImageShape image_size;
  ParamSet<T> params;
  std::vector<int> conv_w, conv_b;

  int feature_channels() const { return kPerceptualWidths[2]; }
  int feature_height() const { return image_size.height >> 3; }
  int feature_width() const { return image_size.width >> 3; }
};

template <typename T>
PerceptualNet<T> make_perceptual(const ImageShape& shape) {
  PerceptualNet<T> p;
  p.image_size = shape;
  int in = shape.channels;
  for (int k = 0; k < 3; ++k) {
    p.conv_w.push_back(p.params.add("conv" + std::to_string(k) + ".weight", {kPerceptualWidths[k], in, 3, 3}));
    p.conv_b.push_back(p.params.add("conv" + std::to_string(k) + ".bias", {kPerceptualWidths[k]}));
    in = kPerceptualWidths[k];
  }
  return p;
}

template <typename T>
struct PerceptualTape {
  Tensor<T> input;
  std::vector<Tensor<T>> acts;
};

/// Feature grid (batch, 64, H/8, W/8).
template <typename T>
Tensor<T> perceptual_features(const PerceptualNet<T>& p, const Tensor<T>& x, PerceptualTape<T>* tape = nullptr) {
  check_image_tensor(x, p.image_size, "perceptual_features");
  PerceptualTape<T> local;
  PerceptualTape<T>& t = tape ? *tape : local;
  t.acts.clear();
  if (tape) t.input = x;
  const Tensor<T>* cur = &x;
  for (int k = 0; k < 3; ++k) {
    Tensor<T> y = layers::conv2d_forward(*cur, p.params.data(p.conv_w[k]), p.params.data(p.conv_b[k]),
                                         kPerceptualWidths[k], 2);
    layers::relu_inplace(y);
    t.acts.push_back(std::move(y));
    cur = &t.acts.back();
  }
  return t.acts.back();
}

/// Gradient w.r.t. the input image only; the frozen weights get nothing.
template <typename T>
Tensor<T> perceptual_backward(const PerceptualNet<T>& p, const PerceptualTape<T>& t, const Tensor<T>& d_features) {
  Tensor<T> g = d_features;
  for (int k = 2; k >= 0; --k) {
    layers::relu_backward_inplace(t.acts[std::size_t(k)], g);
    const Tensor<T>& in = k > 0 ? t.acts[std::size_t(k - 1)] : t.input;
    Tensor<T> d_in(in.n(), in.c(), in.h(), in.w());
    layers::conv2d_backward(in, p.params.data(p.conv_w[k]), kPerceptualWidths[k], 2, g, static_cast<T*>(nullptr),
                            static_cast<T*>(nullptr), &d_in);
    g = std::move(d_in);
  }
  return g;
}

/// Seeds recorded alongside a model so it can be rebuilt bit-exactly.
struct ModelSeeds {
  std::uint64_t model = 1;
};

template <typename T>
struct ModelState {
  GeneratorConfig config;
  ModelSeeds seeds;
  Generator<T> gen_profile;
  Generator<T> gen_frontal;
  Discriminator<T> disc_profile;
  Discriminator<T> disc_frontal;
  PerceptualNet<T> perceptual;
  std::uint64_t step = 0;

  const Generator<T>& generator(Domain d) const { return d == Domain::kProfile ? gen_profile : gen_frontal; }
};

/// Visits every named parameter array of the model, in a fixed order.
template <typename State, typename Fn>
void for_each_model_array(State& s, Fn&& fn) {
  auto visit = [&](const char* prefix, auto& set) {
    for (auto& a : set) fn(std::string(prefix) + "/" + a.name, a);
  };
  visit("gen_profile", s.gen_profile.params);
  visit("gen_frontal", s.gen_frontal.params);
  visit("disc_profile", s.disc_profile.params);
  visit("disc_frontal", s.disc_frontal.params);
  visit("perceptual", s.perceptual.params);
}

namespace detail {

// Weights of a layer are Gaussian with variance gain/fan_in; biases start at zero.
template <typename T>
void fill_fan_in(ParamArray<T>& a, double gain, Rng& rng) {
  if (a.shape.size() < 2) return;
  std::size_t fan_in = 1;
  for (std::size_t i = 1; i < a.shape.size(); ++i) fan_in *= std::size_t(a.shape[i]);
  const double sd = std::sqrt(gain / double(fan_in));
  for (auto& v : a.values) v = T(sd * rng.normal());
}

}  // namespace detail

template <typename T>
ModelState<T> init_model(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  ModelState<T> s;
  s.config = config;
  s.seeds.model = seed;
  s.gen_profile = make_generator<T>(config);
  s.gen_frontal = make_generator<T>(config);
  s.disc_profile = make_discriminator<T>(config);
  s.disc_frontal = make_discriminator<T>(config);
  s.perceptual = make_perceptual<T>(config.image_size);

  auto init_gen = [](Generator<T>& g, Rng rng) {
    for (std::size_t i = 0; i < g.params.size(); ++i) {
      const bool linear_out = int(i) == g.embed_w || int(i) == g.head_w;
      detail::fill_fan_in(g.params[i], linear_out ? 1.0 : 2.0, rng);
    }
  };
  auto init_disc = [](Discriminator<T>& d, Rng rng) {
    for (std::size_t i = 0; i < d.params.size(); ++i) {
      const double slope = kDiscriminatorSlope;
      const double gain = int(i) == d.out_w ? 1.0 : 2.0 / (1.0 + slope * slope);
      detail::fill_fan_in(d.params[i], gain, rng);
    }
  };
  init_gen(s.gen_profile, Rng(derive_seed(seed, {1})));
  init_gen(s.gen_frontal, Rng(derive_seed(seed, {2})));
  init_disc(s.disc_profile, Rng(derive_seed(seed, {3})));
  init_disc(s.disc_frontal, Rng(derive_seed(seed, {4})));
  Rng prng(derive_seed(seed, {5}));
  for (auto& a : s.perceptual.params) detail::fill_fan_in(a, 2.0, prng);
  return s;
}

/// Packs samples (H x W x C, float) into an NCHW tensor.
template <typename T>
Tensor<T> to_tensor(std::span<const ImageSample* const> samples) {
  if (samples.empty()) return {};
  const ImageShape s = samples.front()->shape;
  Tensor<T> x(int(samples.size()), s.channels, s.height, s.width);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ImageSample& smp = *samples[i];
    if (!(smp.shape == s)) throw DimensionError("to_tensor: mixed image shapes in batch");
    for (int c = 0; c < s.channels; ++c)
      for (int y = 0; y < s.height; ++y)
        for (int xx = 0; xx < s.width; ++xx) x.at(int(i), c, y, xx) = T(smp.pixel(y, xx, c));
  }
  return x;
}

template <typename T>
Tensor<T> to_tensor(const ImageSample& sample) {
  const ImageSample* p = &sample;
  return to_tensor<T>(std::span<const ImageSample* const>(&p, 1));
}

/// Converts sample i of an NCHW tensor back to H x W x C float pixels.
template <typename T>
std::vector<float> to_pixels(const Tensor<T>& x, int i) {
  std::vector<float> px(std::size_t(x.c()) * x.h() * x.w());
  for (int c = 0; c < x.c(); ++c)
    for (int y = 0; y < x.h(); ++y)
      for (int xx = 0; xx < x.w(); ++xx) px[(std::size_t(y) * x.w() + xx) * x.c() + c] = float(x.at(i, c, y, xx));
  return px;
}

}  // namespace pfcpgan

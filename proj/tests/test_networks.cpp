#include <gtest/gtest.h>

#include "support.hpp"

using namespace pfcpgan;
using namespace pfcpgan::test;

namespace {

Tensor<double> random_images(int n, const ImageShape& s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> t(n, s.channels, s.height, s.width);
  for (auto& v : t.values()) v = rng.uniform();
  return t;
}

}  // namespace

TEST(Generator, ParameterCountMatchesClosedForm) {
  for (int base : {2, 4, 8})
    for (int n_down : {1, 2, 3})
      for (int ch : {1, 3}) {
        GeneratorConfig c;
        c.image_size = {32, 64, ch};
        c.base_channels = base;
        c.n_down = n_down;
        c.embedding_dim = 16;
        EXPECT_EQ(make_generator<float>(c).params.scalar_count(), generator_parameter_count(c));
      }
}

TEST(Generator, ConfigValidation) {
  GeneratorConfig c = tiny_model();
  c.n_down = 3;  // 8 / 2^3 = 1 < 2
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_model();
  c.embedding_dim = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_model();
  c.base_channels = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Generator, ShapesAndOutputRange) {
  GeneratorConfig c = small_model();
  c.image_size = {32, 16, 3};
  const ModelState<double> s = init_model<double>(c, 7);
  const auto x = random_images(3, c.image_size, 1);
  const Encoding<double> e = encode(s.gen_profile, x);
  EXPECT_EQ(e.embedding.size(), std::size_t(3 * c.embedding_dim));
  ASSERT_EQ(int(e.skips.size()), c.n_down);
  EXPECT_EQ(e.skips.front().h(), 32 >> c.n_down);
  EXPECT_EQ(e.skips.back().h(), 16);
  const Tensor<double> y = generate(s.gen_profile, x);
  EXPECT_TRUE(y.same_shape(x));
  for (double v : y.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_THROW(encode(s.gen_profile, random_images(1, {16, 16, 3}, 2)), DimensionError);
}

TEST(Generator, ZeroSkipsStillDecode) {
  const ModelState<double> s = init_model<double>(small_model(), 7);
  const auto x = random_images(2, small_model().image_size, 3);
  const auto e = encode(s.gen_frontal, x);
  const auto with = decode(s.gen_frontal, e.embedding, 2, e.skips);
  const auto without = decode(s.gen_frontal, e.embedding, 2, {});
  EXPECT_TRUE(with.same_shape(without));
  EXPECT_NE(with.values(), without.values());
  EXPECT_THROW(decode(s.gen_frontal, e.embedding, 3, e.skips), DimensionError);
}

TEST(Generator, EmbeddingIsPerSample) {
  // Each image's embedding must not depend on what else is in the batch.
  const ModelState<double> s = init_model<double>(small_model(), 9);
  const auto x = random_images(4, small_model().image_size, 4);
  const auto all = encode(s.gen_profile, x).embedding;
  for (int i = 0; i < 4; ++i) {
    Tensor<double> one(1, 1, 16, 16);
    std::copy_n(x.sample(i), x.sample_size(), one.data());
    const auto e = encode(s.gen_profile, one).embedding;
    for (int k = 0; k < 8; ++k) EXPECT_NEAR(e[std::size_t(k)], all[std::size_t(i) * 8 + k], 1e-12);
  }
}

TEST(Discriminator, PatchGridShapeAndConditioning) {
  const ModelState<double> s = init_model<double>(small_model(), 2);
  const auto x = random_images(2, small_model().image_size, 5);
  const auto y = random_images(2, small_model().image_size, 6);
  const auto logits = discriminate(s.disc_profile, x, y);
  EXPECT_EQ(logits.n(), 2);
  EXPECT_EQ(logits.c(), 1);
  EXPECT_EQ(logits.h(), 2);
  EXPECT_EQ(logits.w(), 2);
  EXPECT_NE(discriminate(s.disc_profile, y, y).values(), logits.values());
}

TEST(Discriminator, LossGradientMatchesFiniteDifferences) {
  ModelState<double> s = init_model<double>(tiny_model(), 4);
  const auto x = random_images(3, tiny_model().image_size, 7);
  const auto fake = random_images(3, tiny_model().image_size, 8);
  ParamSet<double> g = s.disc_frontal.params.zeros_like();
  discriminator_objective(s.disc_frontal, x, fake, GanForm::kNonSaturating, &g);
  auto f = [&] { return discriminator_objective(s.disc_frontal, x, fake, GanForm::kNonSaturating, nullptr); };
  Rng rng(1);
  int checked = 0;
  for (int k = 0; k < 60; ++k) {
    const std::size_t a = rng.index(g.size());
    const std::size_t i = rng.index(g[a].count());
    const auto r = central_difference(s.disc_frontal.params[a].values[i], g[a].values[i], f);
    if (!r.smooth) continue;
    EXPECT_LT(r.rel_error, 1e-6) << g[a].name << "[" << i << "]";
    ++checked;
  }
  EXPECT_GT(checked, 40);
}

TEST(Generator, TotalObjectiveGradientDouble) {
  for (auto preset : {AblationPreset::kCplL2, AblationPreset::kCplL2Gan, AblationPreset::kFull}) {
    const GradientSuite r = gradient_suite<double>(32, 21, preset);
    ASSERT_EQ(r.checks.size(), 32u) << preset_name(preset);
    EXPECT_LE(r.max_rel_error, 1e-6) << preset_name(preset);
  }
}

TEST(Generator, TotalObjectiveGradientFloat) {
  const GradientSuite r = gradient_suite<float>(32, 22);
  ASSERT_EQ(r.checks.size(), 32u);
  EXPECT_LE(r.max_rel_error, 1e-3);
}

TEST(Perceptual, InputGradientMatchesFiniteDifferences) {
  const ModelState<double> s = init_model<double>(small_model(), 5);
  auto x = random_images(1, small_model().image_size, 9);
  PerceptualTape<double> tape;
  const auto feat = perceptual_features(s.perceptual, x, &tape);
  Rng rng(2);
  Tensor<double> r(feat.n(), feat.c(), feat.h(), feat.w());
  for (auto& v : r.values()) v = rng.uniform(-1, 1);
  const auto dx = perceptual_backward(s.perceptual, tape, r);
  auto f = [&] {
    const auto y = perceptual_features(s.perceptual, x);
    double acc = 0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += y.data()[i] * r.data()[i];
    return acc;
  };
  int checked = 0;
  for (std::size_t i = 0; i < x.size(); i += 3) {
    const auto c = central_difference(x.data()[i], dx.data()[i], f);
    if (!c.smooth) continue;
    EXPECT_LT(c.rel_error, 1e-6);
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(Model, InitIsSeededAndDistinctPerNetwork) {
  const auto a = init_model<float>(small_model(), 3), b = init_model<float>(small_model(), 3);
  const auto c = init_model<float>(small_model(), 4);
  EXPECT_TRUE(a.gen_profile.params == b.gen_profile.params);
  EXPECT_TRUE(a.perceptual.params == b.perceptual.params);
  EXPECT_FALSE(a.gen_profile.params == c.gen_profile.params);
  EXPECT_FALSE(a.gen_profile.params == a.gen_frontal.params);
}

TEST(Model, TensorPixelRoundTrip) {
  DatasetSpec spec = small_spec();
  spec.image_size = {16, 32, 3};
  const Dataset d = generate_synthetic_dataset(spec);
  const auto t = to_tensor<double>(d[3]);
  EXPECT_EQ(t.c(), 3);
  EXPECT_EQ(t.h(), 16);
  EXPECT_EQ(t.w(), 32);
  EXPECT_EQ(to_pixels(t, 0), d[3].pixels);
  EXPECT_FLOAT_EQ(float(t.at(0, 2, 5, 7)), d[3].pixel(5, 7, 2));
}

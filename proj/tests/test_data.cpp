#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace pfcpgan;
using namespace pfcpgan::test;

TEST(Synthetic, CountsOrderAndIds) {
  const DatasetSpec spec = small_spec();
  const Dataset d = generate_synthetic_dataset(spec);
  ASSERT_EQ(d.size(), std::size_t(spec.n_subjects * (spec.frontal_per_subject + spec.profile_per_subject)));
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(d[i].sample_id, std::int64_t(i));
    EXPECT_EQ(d[i].pixels.size(), spec.image_size.pixel_count());
    const std::size_t k = i % 5;
    EXPECT_EQ(d[i].subject_id, int(i / 5));
    EXPECT_EQ(d[i].domain, k < 3 ? Domain::kFrontal : Domain::kProfile);
    if (d[i].domain == Domain::kFrontal) {
      EXPECT_EQ(d[i].yaw_deg, 0.0);
    }
    for (float p : d[i].pixels) {
      EXPECT_GE(p, 0.0f);
      EXPECT_LE(p, 1.0f);
    }
  }
}

TEST(Synthetic, DeterministicPerSeed) {
  const DatasetSpec spec = small_spec();
  const Dataset a = generate_synthetic_dataset(spec), b = generate_synthetic_dataset(spec);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].pixels, b[i].pixels);
  DatasetSpec other = spec;
  other.seed = spec.seed + 1;
  EXPECT_NE(generate_synthetic_dataset(other)[0].pixels, a[0].pixels);
}

TEST(Synthetic, EnlargingCountsKeepsExistingSamples) {
  DatasetSpec spec = small_spec();
  const Dataset a = generate_synthetic_dataset(spec);
  spec.profile_per_subject = 7;
  const Dataset b = generate_synthetic_dataset(spec);
  // Subject 0: 3 frontal + 2 profile in a, 3 frontal + 7 profile in b.
  for (int k = 0; k < 5; ++k) EXPECT_EQ(a[std::size_t(k)].pixels, b[std::size_t(k)].pixels);
  EXPECT_EQ(a[4].yaw_deg, b[4].yaw_deg);
}

TEST(Synthetic, YawWithinRange) {
  DatasetSpec spec = small_spec();
  spec.yaw_min = 30;
  spec.yaw_max = 60;
  for (const auto& s : generate_synthetic_dataset(spec))
    if (s.domain == Domain::kProfile) {
      EXPECT_GE(s.yaw_deg, 30.0);
      EXPECT_LE(s.yaw_deg, 60.0);
    }
}

TEST(Synthetic, NoiselessFrontalsIdenticalWithinSubject) {
  DatasetSpec spec = small_spec();
  spec.noise_std = 0;
  const Dataset d = generate_synthetic_dataset(spec);
  EXPECT_EQ(d[0].pixels, d[1].pixels);
  EXPECT_NE(d[0].pixels, d[5].pixels);
}

TEST(Synthetic, IdentitiesSeparableWithoutNoise) {
  // Nearest-frontal-neighbour on raw pixels must recover the subject of a
  // mildly rotated view; identity has to survive pose.
  DatasetSpec spec = small_spec();
  spec.n_subjects = 10;
  spec.noise_std = 0;
  spec.yaw_min = -20;
  spec.yaw_max = 20;
  spec.image_size = {32, 32, 1};
  const Dataset d = generate_synthetic_dataset(spec);
  int hits = 0, total = 0;
  for (const auto& p : d) {
    if (p.domain != Domain::kProfile) continue;
    double best = 1e300;
    int who = -1;
    for (const auto& f : d) {
      if (f.domain != Domain::kFrontal) continue;
      double s = 0;
      for (std::size_t i = 0; i < f.pixels.size(); ++i) s += (f.pixels[i] - p.pixels[i]) * (f.pixels[i] - p.pixels[i]);
      if (s < best) best = s, who = f.subject_id;
    }
    hits += who == p.subject_id;
    ++total;
  }
  EXPECT_GE(double(hits) / total, 0.9);
}

TEST(Synthetic, LargerYawMovesFurtherFromFrontal) {
  const Glyph g = synth::make_glyph(3, 0, 1);
  const ImageShape s{32, 32, 1};
  const auto f = synth::render(g, s, 0);
  auto dist = [&](double yaw) {
    const auto p = synth::render(g, s, yaw);
    double acc = 0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - f[i]) * (p[i] - f[i]);
    return acc;
  };
  EXPECT_LT(dist(15), dist(45));
  EXPECT_LT(dist(45), dist(90));
  EXPECT_LT(dist(-15), dist(-90));
}

TEST(Synthetic, SpecValidation) {
  auto bad = [](auto mutate) {
    DatasetSpec s = small_spec();
    mutate(s);
    EXPECT_THROW(s.validate(), ConfigError);
  };
  bad([](DatasetSpec& s) { s.n_subjects = 0; });
  bad([](DatasetSpec& s) { s.frontal_per_subject = 0; });
  bad([](DatasetSpec& s) { s.image_size.height = 24; });
  bad([](DatasetSpec& s) { s.image_size.width = 8; });
  bad([](DatasetSpec& s) { s.image_size.channels = 2; });
  bad([](DatasetSpec& s) { s.yaw_min = -100; });
  bad([](DatasetSpec& s) { s.yaw_min = 10, s.yaw_max = 5; });
  bad([](DatasetSpec& s) { s.noise_std = -1; });
}

TEST(Pairs, BalancedAndCorrectlyLabelled) {
  const Dataset d = generate_synthetic_dataset(small_spec());
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto batch = sample_pair_batch(d, 16, rng);
    ASSERT_EQ(batch.size(), 16u);
    int genuine = 0;
    for (const auto& p : batch) {
      EXPECT_EQ(d[p.profile].domain, Domain::kProfile);
      EXPECT_EQ(d[p.frontal].domain, Domain::kFrontal);
      EXPECT_EQ(p.label_y, d[p.profile].subject_id == d[p.frontal].subject_id ? 0 : 1);
      genuine += p.label_y == 0;
    }
    EXPECT_EQ(genuine, 8);
  }
}

TEST(Pairs, SeededDraws) {
  const Dataset d = generate_synthetic_dataset(small_spec());
  Rng a(9), b(9);
  EXPECT_EQ(sample_pair_batch(d, 32, a), sample_pair_batch(d, 32, b));
}

TEST(Pairs, Preconditions) {
  const Dataset d = generate_synthetic_dataset(small_spec());
  Rng rng(1);
  EXPECT_THROW(sample_pair_batch(d, 7, rng), ConfigError);
  EXPECT_THROW(sample_pair_batch(d, 0, rng), ConfigError);
  const Dataset one = subset_by_subjects(d, {2});
  EXPECT_THROW(PairSampler{one}, DataError);
  Dataset frontal_only;
  for (const auto& s : d)
    if (s.domain == Domain::kFrontal) frontal_only.push_back(s);
  EXPECT_THROW(PairSampler{frontal_only}, DataError);
}

TEST(Folds, DisjointCoverageAndWithinFoldPairs) {
  DatasetSpec spec = small_spec();
  spec.n_subjects = 23;
  const Dataset d = generate_synthetic_dataset(spec);
  FoldProtocol p;
  p.n_folds = 5;
  Rng rng(p.seed);
  const auto folds = build_folds(d, p, rng);
  ASSERT_EQ(folds.size(), 5u);
  std::multiset<int> seen;
  for (const auto& f : folds) {
    EXPECT_TRUE(f.test_subjects.size() == 4 || f.test_subjects.size() == 5);
    seen.insert(f.test_subjects.begin(), f.test_subjects.end());
    std::set<int> test(f.test_subjects.begin(), f.test_subjects.end());
    for (int s : f.train_subjects) EXPECT_FALSE(test.count(s));
    EXPECT_EQ(f.train_subjects.size() + f.test_subjects.size(), 23u);
    int genuine = 0, impostor = 0;
    for (const auto& pr : f.test_pairs) {
      EXPECT_TRUE(test.count(d[pr.profile].subject_id));
      EXPECT_TRUE(test.count(d[pr.frontal].subject_id));
      EXPECT_EQ(pr.label_y, d[pr.profile].subject_id == d[pr.frontal].subject_id ? 0 : 1);
      (pr.label_y == 0 ? genuine : impostor) += 1;
    }
    EXPECT_EQ(genuine, int(f.test_subjects.size()) * p.same_pairs_per_subject);
    EXPECT_EQ(impostor, int(f.test_subjects.size()) * p.diff_pairs_per_subject);
  }
  EXPECT_EQ(seen.size(), 23u);
  EXPECT_EQ(std::set<int>(seen.begin(), seen.end()).size(), 23u);
}

TEST(Folds, GenuinePairsDistinctWhenEnoughCombinations) {
  const Dataset d = generate_synthetic_dataset(small_spec());  // 2 x 3 = 6 combinations per subject
  FoldProtocol p;
  p.n_folds = 2;
  p.same_pairs_per_subject = 6;
  Rng rng(1);
  for (const auto& f : build_folds(d, p, rng)) {
    std::set<std::pair<std::size_t, std::size_t>> g;
    for (const auto& pr : f.test_pairs)
      if (pr.label_y == 0) {
        EXPECT_TRUE(g.insert({pr.profile, pr.frontal}).second);
      }
  }
}

TEST(Folds, Preconditions) {
  const Dataset d = generate_synthetic_dataset(small_spec());
  FoldProtocol p;
  p.n_folds = 7;  // more folds than the 6 subjects
  Rng rng(1);
  EXPECT_THROW(build_folds(d, p, rng), ConfigError);
  p.n_folds = 6;  // singleton folds cannot form impostor pairs
  EXPECT_THROW(build_folds(d, p, rng), ConfigError);
  p.diff_pairs_per_subject = 0;
  EXPECT_NO_THROW(build_folds(d, p, rng));
}

TEST(Folds, SeededAndIndependentOfCallOrder) {
  const Dataset d = generate_synthetic_dataset(small_spec());
  FoldProtocol p;
  p.n_folds = 3;
  Rng a(4), b(4);
  const auto f1 = build_folds(d, p, a), f2 = build_folds(d, p, b);
  for (std::size_t i = 0; i < f1.size(); ++i) {
    EXPECT_EQ(f1[i].test_subjects, f2[i].test_subjects);
    EXPECT_EQ(f1[i].test_pairs, f2[i].test_pairs);
  }
}

TEST(Rng, DeriveSeedSeparatesStreams) {
  EXPECT_NE(derive_seed(1, {2}), derive_seed(1, {3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_EQ(derive_seed(5, {7}), derive_seed(5, {7}));
  Rng r(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(r.index(7), 7u);
  }
}

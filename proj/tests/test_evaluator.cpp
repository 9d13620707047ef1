#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"

using namespace pfcpgan;
using namespace pfcpgan::test;

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

struct Fixture {
  Dataset data = generate_synthetic_dataset(small_spec());
  ModelState<double> state = init_model<double>(small_model(), 4);
};

}  // namespace

TEST(Similarity, EuclideanAndCosine) {
  const std::vector<double> a = {3, 4}, o = {0, 0}, b = {6, 8}, c = {-4, 3};
  EXPECT_DOUBLE_EQ(similarity<double>(a, o, Scorer::kEuclidean), -5.0);
  EXPECT_DOUBLE_EQ(similarity<double>(a, b, Scorer::kCosine), 1.0);
  EXPECT_DOUBLE_EQ(similarity<double>(a, c, Scorer::kCosine), 0.0);
  EXPECT_DOUBLE_EQ(similarity<double>(a, o, Scorer::kCosine), 0.0);
  EXPECT_THROW(similarity<double>(a, std::vector<double>{1}, Scorer::kEuclidean), DimensionError);
}

TEST(ScorePairs, MatchesDirectEmbeddingAndIsOrderInvariant) {
  Fixture f;
  FoldProtocol p;
  p.n_folds = 2;
  Rng rng(1);
  const auto folds = build_folds(f.data, p, rng);
  const auto pairs = folds[0].test_pairs;
  const auto scored = score_pairs(f.state, std::span<const ImageSample>(f.data), std::span<const PairExample>(pairs));
  ASSERT_EQ(scored.size(), pairs.size());
  for (std::size_t i = 0; i < pairs.size(); i += 4) {
    const auto zp = encode(f.state.gen_profile, to_tensor<double>(f.data[pairs[i].profile])).embedding;
    const auto zf = encode(f.state.gen_frontal, to_tensor<double>(f.data[pairs[i].frontal])).embedding;
    EXPECT_NEAR(scored[i].score, similarity<double>(zp, zf, Scorer::kEuclidean), 1e-12);
  }
  auto shuffled = pairs;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto again =
      score_pairs(f.state, std::span<const ImageSample>(f.data), std::span<const PairExample>(shuffled));
  for (std::size_t i = 0; i < pairs.size(); ++i) EXPECT_EQ(scored[i].score, again[pairs.size() - 1 - i].score);
}

TEST(Identify, GalleryAndProbeSelection) {
  Fixture f;
  const std::vector<int> subjects = {1, 4};
  const auto g = gallery_indices(f.data, subjects);
  EXPECT_EQ(g, (std::vector<std::size_t>{5, 20}));
  const auto p = profile_indices(f.data, subjects);
  EXPECT_EQ(p, (std::vector<std::size_t>{8, 9, 23, 24}));
  const int ks[] = {1, 2};
  const auto r = identify(f.state, std::span<const ImageSample>(f.data), g, p, ks);
  EXPECT_EQ(r.ranks.size(), 4u);
  EXPECT_DOUBLE_EQ(r.rank_k.at(2), 1.0);
  EXPECT_THROW(identify(f.state, std::span<const ImageSample>(f.data), p, p, ks), ProtocolError);
  const std::vector<std::size_t> partial = {5};
  EXPECT_THROW(identify(f.state, std::span<const ImageSample>(f.data), partial, p, ks), ProtocolError);
}

TEST(Yaw, Binning) {
  const std::vector<double> edges = {15, 30, 45, 60, 75, 90};
  EXPECT_EQ(yaw_bin(0, edges), 15);
  EXPECT_EQ(yaw_bin(-15, edges), 15);
  EXPECT_EQ(yaw_bin(15.01, edges), 30);
  EXPECT_EQ(yaw_bin(-89.9, edges), 90);
  EXPECT_EQ(yaw_bin(90, edges), 90);
  EXPECT_THROW(yaw_bin(90.5, edges), DataError);
  EXPECT_THROW(yaw_bin(-120, edges), DataError);
}

TEST(Yaw, PerBinRankOneAndCsv) {
  Fixture f;
  DatasetSpec spec = small_spec();
  spec.profile_per_subject = 12;
  const Dataset d = generate_synthetic_dataset(spec);
  const auto subjects = subjects_of(d);
  const auto g = gallery_indices(d, subjects);
  const auto p = profile_indices(d, subjects);
  const std::vector<double> edges = {15, 30, 45, 60, 75, 90};
  const auto bins = evaluate_by_yaw(f.state, std::span<const ImageSample>(d), g, p, edges);
  std::size_t n = 0;
  for (const auto& [e, b] : bins) {
    EXPECT_GE(b.rank1, 0.0);
    EXPECT_LE(b.rank1, 1.0);
    n += b.n_probes;
  }
  EXPECT_EQ(n, p.size());
  const auto dir = scratch_dir("yaw_csv");
  write_yaw_rank1(dir / "yaw_rank1.csv", bins, edges);
  const auto lines = read_lines(dir / "yaw_rank1.csv");
  ASSERT_EQ(lines.size(), edges.size() + 1);
  EXPECT_EQ(lines[0], "bin_deg,rank1,n_probes");
  std::filesystem::remove_all(dir);
}

TEST(Folds, ReportPerFoldAndSummary) {
  Fixture f;
  FoldProtocol p;
  p.n_folds = 3;
  Rng rng(2);
  const auto folds = build_folds(f.data, p, rng);
  EvalOptions opts;
  opts.folds = p;
  const auto out = evaluate_folds(f.state, std::span<const ImageSample>(f.data), std::span<const Fold>(folds), opts);
  ASSERT_EQ(out.reports.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(out.reports[i].fold_id, int(i));
    EXPECT_EQ(out.reports[i].n_genuine, 2u * 7u);
    EXPECT_NEAR(out.reports[i].accuracy_at_eer, 1 - out.reports[i].eer, 1e-15);
    EXPECT_TRUE(out.reports[i].gar_at_far.count(1e-2));
    EXPECT_TRUE(out.reports[i].rank_k.count(5));
  }
  double mean = 0;
  for (const auto& r : out.reports) mean += r.eer / 3;
  ASSERT_EQ(out.summary[0].first, "eer");
  EXPECT_NEAR(out.summary[0].second.mean, mean, 1e-15);

  const auto dir = scratch_dir("eval_csv");
  write_eval_report(dir / "eval_report.csv", out.reports, out.summary);
  write_roc(dir / "roc.csv", out.reports[0].roc);
  const auto rep = read_lines(dir / "eval_report.csv");
  EXPECT_EQ(rep[0], "fold,metric,value");
  EXPECT_EQ(rep[1].rfind("0,eer,", 0), 0u);
  EXPECT_EQ(rep.back().rfind("std,", 0), 0u);
  const auto roc = read_lines(dir / "roc.csv");
  EXPECT_EQ(roc[0], "threshold,far,gar");
  EXPECT_EQ(roc.back(), "inf,0,0");
  std::filesystem::remove_all(dir);

  std::vector<ModelState<double>> states(2, f.state);
  EXPECT_THROW(evaluate_folds(std::span<const ModelState<double>>(states), std::span<const ImageSample>(f.data),
                              std::span<const Fold>(folds), opts),
               ConfigError);
}

TEST(CrossReconstruction, ShapeRangeAndProtocol) {
  Fixture f;
  const ImageSample& prof = f.data[3];
  const auto out = cross_reconstruct(f.state, prof, Domain::kFrontal);
  EXPECT_EQ(out.size(), prof.pixels.size());
  for (float v : out) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  EXPECT_NE(cross_reconstruct(f.state, prof, Domain::kFrontal, true), out);
  EXPECT_THROW(cross_reconstruct(f.state, prof, Domain::kProfile), ProtocolError);
  EXPECT_GE(mean_squared_error(out, f.data[0].pixels), 0.0);
  EXPECT_DOUBLE_EQ(mean_squared_error(out, out), 0.0);
}

TEST(Evaluation, TrainingImprovesHeldOutVerification) {
  // A short coupling-only run must already pull genuine pairs together on unseen subjects.
  RunConfig rc;
  rc.data.n_subjects = 30;
  rc.model.base_channels = 4;
  rc.eval.folds.n_folds = 5;
  rc.sync();
  const Dataset d = generate_synthetic_dataset(rc.data);
  const HoldoutSplit split = make_holdout_split(d, rc.eval);
  TrainConfig cfg = small_train(AblationPreset::kCplL2);
  cfg.batch_size = 32;
  cfg.max_steps = 300;
  cfg.learning_rate = 1e-3;
  const auto r = train<float>(split.train, rc.model, cfg);
  const double before = evaluate_fold(init_model<float>(rc.model, cfg.seed), d, split.fold, rc.eval).auc;
  const double after = evaluate_fold(r.state, d, split.fold, rc.eval).auc;
  EXPECT_GT(after, before + 0.1);
}

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semprobe/dimension_analysis.hpp"
#include "semprobe/errors.hpp"
#include "test_support.hpp"

using namespace semprobe;

TEST(ClassifyDimensions, LargestGapSplits) {
  const auto useful = classify_dimensions(std::vector<double>{4.1, 4.0, 3.9, 0.2, 0.1});
  EXPECT_EQ(useful, (std::vector<bool>{true, true, true, false, false}));
  EXPECT_NEAR(largest_entropy_gap(std::vector<double>{4.1, 4.0, 3.9, 0.2, 0.1}), 3.7, 1e-12);
}

TEST(ClassifyDimensions, NoQualifyingGap) {
  EXPECT_EQ(classify_dimensions(std::vector<double>{2.0, 2.0, 2.0}), (std::vector<bool>(3, true)));
  EXPECT_EQ(classify_dimensions(std::vector<double>{2.0, 1.6, 1.2}), (std::vector<bool>(3, true)));
  EXPECT_EQ(classify_dimensions(std::vector<double>{1.0}), (std::vector<bool>{true}));
}

TEST(ClassifyDimensions, GapExactlyAtThresholdSplits) {
  EXPECT_EQ(classify_dimensions(std::vector<double>{1.5, 1.0}, 0.5), (std::vector<bool>{true, false}));
}

TEST(ClassifyDimensions, PermutationInvariant) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> hi(4.0, 4.4), lo(0.0, 0.6);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> e;
    const std::size_t a = 1 + rng() % 10, b = rng() % 10;
    for (std::size_t i = 0; i < a; ++i) e.push_back(hi(rng));
    for (std::size_t i = 0; i < b; ++i) e.push_back(lo(rng));
    const auto useful = classify_dimensions(e);
    std::vector<std::size_t> perm(e.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> shuffled(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) shuffled[i] = e[perm[i]];
    const auto again = classify_dimensions(shuffled);
    std::size_t count = 0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      EXPECT_EQ(again[i], useful[perm[i]]);
      count += useful[i];
    }
    EXPECT_EQ(count, a);
  }
}

TEST(Profiles, UniformAndConstantDimensions) {
  CodeBatch codes;
  codes.mean = Matrix(160, 2);
  codes.log_variance = Matrix(160, 2);
  for (std::size_t i = 0; i < 160; ++i) {
    codes.mean(i, 0) = -4.0 + 0.05 * static_cast<double>(i) + 0.025;
    codes.mean(i, 1) = 0.0;
    codes.log_variance(i, 0) = std::log(0.01);
  }
  const auto p = profiles_from_codes(codes);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_NEAR(p[0].entropy, std::log(160.0), 1e-12);
  EXPECT_NEAR(p[0].entropy, 5.08, 5e-3);
  EXPECT_EQ(p[1].entropy, 0.0);
  EXPECT_EQ(p[1].mean_min, 0.0);
  EXPECT_EQ(p[1].mean_max, 0.0);
  EXPECT_TRUE(p[0].useful);
  EXPECT_FALSE(p[1].useful);
  EXPECT_NEAR(*p[0].avg_sigma, 0.1, 1e-12);
  EXPECT_NEAR(*p[1].avg_sigma, 1.0, 1e-12);
  EXPECT_LE(p[0].mean_min, p[0].q1);
  EXPECT_LE(p[0].q1, p[0].median);
  EXPECT_LE(p[0].median, p[0].q3);
  EXPECT_LE(p[0].q3, p[0].mean_max);
  EXPECT_EQ(useful_dimensions(p), (std::vector<std::size_t>{0}));
  EXPECT_EQ(deprecated_dimensions(p), (std::vector<std::size_t>{1}));
}

TEST(Profiles, AeHasNoSigma) {
  std::mt19937_64 rng(2);
  const auto table = fixture::random_table(50, 4, rng);
  const auto ckpt = fixture::identity_ae(4);
  const auto p = dimension_profiles(ckpt, table);
  for (const auto& d : p) EXPECT_FALSE(d.avg_sigma.has_value());
  EXPECT_EQ(useful_dimensions(p).size() + deprecated_dimensions(p).size(), 4u);
}

TEST(Profiles, ShapeMismatch) {
  std::mt19937_64 rng(2);
  const auto table = fixture::random_table(10, 5, rng);
  EXPECT_THROW(dimension_profiles(fixture::identity_ae(4), table), Error);
}

TEST(EpochMetrics, FreshModelKeepsEveryDimension) {
  std::mt19937_64 rng(3);
  const auto table = fixture::random_table(500, 20, rng);
  TrainConfig c;
  c.input_dim = 20;
  c.latent_dim = 10;
  c.hidden = {32};
  const auto ckpt = ModelCheckpoint::initialize(c);
  const auto r = epoch_metrics(ckpt, table, {});
  EXPECT_EQ(r.useful_dims, 10u);
  EXPECT_GT(r.kl_loss, 0.0);
  EXPECT_GT(r.recon_loss, 0.0);
  EXPECT_FALSE(r.semeval.has_value());
  EXPECT_FALSE(r.analogy.has_value());
}

TEST(EpochMetrics, AeRecordsZeroKlAndExactReconstruction) {
  std::mt19937_64 rng(4);
  const auto table = fixture::random_table(30, 3, rng);
  EvalBundle bundle;
  bundle.similarity = SimilarityPairset{{"w0", "w1", 0.1}, {"w2", "w3", 0.5}, {"w4", "w5", 0.9}};
  bundle.analogy = AnalogySet{{{"s", {{"w0", "w1", "w2", "w3"}}}}};
  const auto r = epoch_metrics(fixture::identity_ae(3), table, bundle);
  EXPECT_EQ(r.kl_loss, 0.0);
  EXPECT_NEAR(r.recon_loss, 0.0, 1e-20);
  EXPECT_TRUE(r.semeval.has_value());
  EXPECT_TRUE(r.analogy.has_value());
}

TEST(EpochMetrics, EvaluationFailureLeavesMetricEmpty) {
  std::mt19937_64 rng(5);
  const auto table = fixture::random_table(30, 3, rng);
  EvalBundle bundle;
  bundle.similarity = SimilarityPairset{{"w0", "w1", 0.1}, {"nope", "w3", 0.5}};
  const auto r = epoch_metrics(fixture::identity_ae(3), table, bundle);
  EXPECT_FALSE(r.semeval.has_value());
  EXPECT_EQ(r.useful_dims, 3u);
}

TEST(TelemetryHook, ReplacesTrainingLosses) {
  std::mt19937_64 rng(6);
  const auto table = fixture::random_table(40, 3, rng);
  TrainConfig c;
  c.kind = ModelKind::BVAE;
  c.input_dim = 3;
  c.latent_dim = 2;
  c.hidden = {4};
  c.epochs = 2;
  TrainOptions o;
  o.on_epoch = telemetry_hook(table, {});
  const auto result = train(table, c, std::move(o));
  ASSERT_EQ(result.trace.records.size(), 2u);
  const auto direct = epoch_metrics(result.checkpoint, table, {});
  EXPECT_EQ(result.trace.records.back().recon_loss, direct.recon_loss);
  EXPECT_EQ(result.trace.records.back().useful_dims, direct.useful_dims);
}

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "semprobe/errors.hpp"
#include "semprobe/probe.hpp"
#include "test_support.hpp"

using namespace semprobe;

namespace {

template <class R>
Vector to_vec(const R& r) {
  return Vector(r.begin(), r.end());
}

EmbeddingTable toy_table() {
  return fixture::table_of({{"a", {0, 0, 0}}, {"b", {1, 0, 0}}, {"lo", {-1, -1, -1}}, {"hi", {2, 2, 2}}});
}

double folded_angle(const Vector& u, const Vector& v) {
  const double c = std::abs(dot(u, v)) / (norm(u) * norm(v));
  return std::acos(std::min(1.0, c)) * 180.0 / std::numbers::pi;
}

double grid_variance(double lo, double hi, std::size_t p) {
  double mean = 0.0;
  for (std::size_t i = 0; i < p; ++i) mean += lo + (hi - lo) * i / (p - 1.0);
  mean /= p;
  double ss = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const double d = lo + (hi - lo) * i / (p - 1.0) - mean;
    ss += d * d;
  }
  return ss / (p - 1.0);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

}  // namespace

TEST(EvenGrid, EndpointsAndSpacing) {
  const auto g = even_grid(-1.0, 2.0, 4);
  EXPECT_EQ(g, (std::vector<double>{-1.0, 0.0, 1.0, 2.0}));
  EXPECT_EQ(even_grid(3.0, 5.0, 1), (std::vector<double>{3.0}));
}

TEST(Probe, IdentityDecoderLevels) {
  const auto table = toy_table();
  const auto ckpt = fixture::identity_ae(3);
  const auto r0 = probe_dimension(ckpt, table, "a", "b", 0);
  EXPECT_NEAR(r0.encoding_level, 0.0, 1e-6);
  EXPECT_NEAR(r0.theta, 0.0, 1e-6);
  EXPECT_NEAR(r0.phi, 0.0, 1e-6);
  EXPECT_FALSE(r0.degenerate);
  EXPECT_NEAR(r0.extent_w1, grid_variance(-1.0, 2.0, 700), 1e-9);
  EXPECT_DOUBLE_EQ(r0.pair_diff, 1.0);
  EXPECT_EQ(r0.range_lo, -1.0);
  EXPECT_EQ(r0.range_hi, 2.0);
  const auto r1 = probe_dimension(ckpt, table, "a", "b", 1);
  EXPECT_NEAR(r1.encoding_level, 90.0, 1e-6);

  const auto summary = probe_all(ckpt, table, dimension_profiles(ckpt, table), "a", "b",
                                 std::vector<std::size_t>{0, 1, 2});
  ASSERT_EQ(summary.reports.size(), 3u);
  EXPECT_NEAR(summary.reports[0].encoding_level, 0.0, 1e-6);
  EXPECT_NEAR(summary.reports[1].encoding_level, 90.0, 1e-6);
  EXPECT_NEAR(summary.reports[2].encoding_level, 90.0, 1e-6);
}

TEST(Probe, SwapInvariance) {
  std::mt19937_64 rng(1);
  const auto table = fixture::random_table(40, 5, rng);
  TrainConfig c;
  c.input_dim = 5;
  c.latent_dim = 3;
  c.hidden = {8};
  const auto ckpt = ModelCheckpoint::initialize(c);
  const auto profiles = dimension_profiles(ckpt, table);
  for (std::size_t d = 0; d < 3; ++d) {
    const auto ab = probe_dimension(ckpt, table, profiles, "w1", "w7", d);
    const auto ba = probe_dimension(ckpt, table, profiles, "w7", "w1", d);
    EXPECT_NEAR(ab.theta, ba.phi, 1e-9);
    EXPECT_NEAR(ab.phi, ba.theta, 1e-9);
    EXPECT_NEAR(ab.encoding_level, ba.encoding_level, 1e-9);
    EXPECT_GE(ab.encoding_level, 0.0);
    EXPECT_LE(ab.encoding_level, 90.0);
  }
}

TEST(Probe, LinearDecoderMatchesColumnAngles) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5, m = 3;
    const auto table = fixture::random_table(40, n, rng);
    const Matrix enc = fixture::random_matrix(m, n, rng);
    const Matrix dec = fixture::random_matrix(n, m, rng);
    const Vector bias = to_vec(fixture::random_matrix(1, n, rng).row(0));
    const auto ckpt = fixture::linear_model(ModelKind::AE, enc, Vector(m, 0.0), dec, bias);
    const auto profiles = dimension_profiles(ckpt, table);
    const Vector mu1 = encode(ckpt, table.row(table.index_of("w3"))).mean;
    const Vector mu2 = encode(ckpt, table.row(table.index_of("w9"))).mean;
    Vector dmu(m);
    for (std::size_t j = 0; j < m; ++j) dmu[j] = mu2[j] - mu1[j];
    Vector semantic(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) semantic[i] += dec(i, j) * dmu[j];
    for (std::size_t d = 0; d < m; ++d) {
      Vector column(n);
      double col_sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        column[i] = dec(i, d);
        col_sq += column[i] * column[i];
      }
      const auto r = probe_dimension(ckpt, table, profiles, "w3", "w9", d);
      const double expected = folded_angle(column, semantic);
      EXPECT_NEAR(r.theta, expected, 0.1);
      EXPECT_NEAR(r.phi, expected, 0.1);
      const double var = col_sq * grid_variance(profiles[d].mean_min, profiles[d].mean_max, 700);
      EXPECT_NEAR(r.extent_w1, var, 1e-6 * var);
      EXPECT_NEAR(r.extent_w2, var, 1e-6 * var);
    }
  }
}

TEST(Probe, CollapsedDimensionIsDegenerate) {
  const auto table = toy_table();
  Matrix dec = fixture::identity(3);
  dec(2, 2) = 0.0;
  const auto ckpt = fixture::linear_model(ModelKind::AE, fixture::identity(3), Vector(3, 0.0), dec,
                                          Vector{1, 1, 1});
  const auto r = probe_dimension(ckpt, table, "a", "b", 2);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.encoding_level, 90.0);
  EXPECT_EQ(r.extent_w1, 0.0);
  EXPECT_TRUE(r.regressed_dir_w1.empty());
}

TEST(Probe, Errors) {
  const auto table = fixture::table_of({{"a", {0, 0}}, {"b", {1, 0}}, {"c", {1, 0}}, {"d", {0, 1}}});
  const auto ckpt = fixture::identity_ae(2);
  EXPECT_EQ(code_of([&] { probe_dimension(ckpt, table, "a", "b", 2); }), ErrorCode::DimensionOutOfRange);
  EXPECT_EQ(code_of([&] { probe_dimension(ckpt, table, "b", "c", 0); }), ErrorCode::ZeroSemanticDirection);
  EXPECT_THROW(probe_dimension(ckpt, table, "a", "zz", 0), UnknownWordError);
}

TEST(AngleHistogram, BinsAndNormalisation) {
  const std::vector<double> levels{0.0, 2.5, 90.0, 90.0, 47.0};
  const auto h = angle_histogram(levels);
  EXPECT_DOUBLE_EQ(h.density[0], 2.0 / (5 * 5.0));
  EXPECT_DOUBLE_EQ(h.density[17], 2.0 / (5 * 5.0));
  EXPECT_DOUBLE_EQ(h.density[9], 1.0 / (5 * 5.0));
  double total = 0.0;
  for (double d : h.density) total += d * AngleHistogram::kBinWidth;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(ProbeAll, MatchesIndividualProbes) {
  std::mt19937_64 rng(3);
  const auto table = fixture::random_table(30, 4, rng);
  TrainConfig c;
  c.kind = ModelKind::BVAE;
  c.input_dim = 4;
  c.latent_dim = 3;
  c.hidden = {6};
  const auto ckpt = ModelCheckpoint::initialize(c);
  const auto profiles = dimension_profiles(ckpt, table);
  const auto summary = probe_all(ckpt, table, profiles, "w0", "w5");
  const auto useful = useful_dimensions(profiles);
  ASSERT_EQ(summary.reports.size(), useful.size());
  for (std::size_t i = 0; i < useful.size(); ++i) {
    const auto r = probe_dimension(ckpt, table, profiles, "w0", "w5", useful[i]);
    EXPECT_EQ(summary.reports[i].dim, useful[i]);
    EXPECT_EQ(summary.reports[i].encoding_level, r.encoding_level);
  }
}

TEST(ProjectionScene, IdentityDecoderGeometry) {
  const auto table = fixture::table_of({{"a", {0.2, -0.3, 0}},
                                        {"b", {1, 1, 0}},
                                        {"c", {2, 0.5, 0}},
                                        {"d", {-1, 2, 0}},
                                        {"e", {0.5, -1, 0}}});
  const auto ckpt = fixture::identity_ae(3);
  const auto profiles = dimension_profiles(ckpt, table);
  SceneOptions o;
  o.interpolation_samples = 11;
  o.neighbors = 3;
  o.probe.samples = 15;
  const auto scene = projection_scene(ckpt, table, profiles, "a", "b", 0, o);
  EXPECT_EQ(scene.points.size(), 2u + 11u + 6u + 30u);

  std::vector<const ScenePoint*> interp;
  const ScenePoint* anchor0 = nullptr;
  for (const auto& p : scene.points) {
    if (p.role == SceneRole::Interpolation) interp.push_back(&p);
    if (p.role == SceneRole::Anchor && p.owner == 0) anchor0 = &p;
  }
  ASSERT_EQ(interp.size(), 11u);
  ASSERT_NE(anchor0, nullptr);
  EXPECT_EQ(interp.front()->t, 0.0);
  EXPECT_NEAR(interp.front()->xy[0], anchor0->xy[0], 1e-12);
  EXPECT_NEAR(interp.front()->xy[1], anchor0->xy[1], 1e-12);
  const auto& p0 = interp.front()->xy;
  const auto& p1 = interp.back()->xy;
  for (const auto* p : interp) {
    const double cross = (p1[0] - p0[0]) * (p->xy[1] - p0[1]) - (p1[1] - p0[1]) * (p->xy[0] - p0[0]);
    EXPECT_NEAR(cross, 0.0, 1e-6);
  }
}

TEST(ProjectionScene, RankTwoDistancesPreserved) {
  std::mt19937_64 rng(4);
  std::vector<std::pair<std::string, Vector>> rows;
  std::normal_distribution<double> g;
  for (int i = 0; i < 20; ++i) rows.push_back({"w" + std::to_string(i), {g(rng), g(rng), 0.0}});
  const auto table = fixture::table_of(rows);
  const auto ckpt = fixture::identity_ae(3);
  SceneOptions o;
  o.interpolation_samples = 10;
  o.neighbors = 5;
  o.probe.samples = 10;
  const auto scene = projection_scene(ckpt, table, dimension_profiles(ckpt, table), "w0", "w1", 1, o);

  // rebuild the high-dimensional points in scene order
  std::vector<Vector> hd;
  const Vector a = to_vec(table.row(0));
  const Vector b = to_vec(table.row(1));
  const auto profiles = dimension_profiles(ckpt, table);
  for (const auto& p : scene.points) {
    switch (p.role) {
      case SceneRole::Anchor:
        hd.push_back(p.owner == 0 ? a : b);
        break;
      case SceneRole::Interpolation: {
        Vector v(3);
        for (int i = 0; i < 3; ++i) v[i] = a[i] + p.t * (b[i] - a[i]);
        hd.push_back(v);
        break;
      }
      case SceneRole::Neighbor:
        hd.push_back(to_vec(table.row(table.index_of(p.label))));
        break;
      case SceneRole::Perturbation: {
        Vector v = p.owner == 0 ? a : b;
        v[1] = p.t;
        hd.push_back(v);
        break;
      }
    }
  }
  std::vector<double> dh, dl;
  for (std::size_t i = 0; i < hd.size(); ++i)
    for (std::size_t j = i + 1; j < hd.size(); ++j) {
      dh.push_back(norm(subtract(hd[i], hd[j])));
      dl.push_back(std::hypot(scene.points[i].xy[0] - scene.points[j].xy[0],
                              scene.points[i].xy[1] - scene.points[j].xy[1]));
    }
  EXPECT_GE(spearman_rho(dh, dl), 0.9);
  for (std::size_t i = 0; i < dh.size(); ++i) EXPECT_NEAR(dh[i], dl[i], 1e-6);
}

namespace {

EmbeddingTable fan_table() {
  const std::vector<std::pair<std::string, double>> angles{{"a", 0},   {"q", 20},  {"b", 40}, {"c", 90},
                                                           {"d", 100}, {"e", 110}, {"f", 180}};
  std::vector<std::pair<std::string, Vector>> rows;
  for (const auto& [w, deg] : angles) {
    const double r = deg * std::numbers::pi / 180.0;
    rows.push_back({w, {std::cos(r), std::sin(r)}});
  }
  return fixture::table_of(rows);
}

Matrix samples_at(const std::vector<double>& degrees) {
  Matrix s(degrees.size(), 2);
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    const double r = degrees[i] * std::numbers::pi / 180.0;
    s(i, 0) = std::cos(r);
    s(i, 1) = std::sin(r);
  }
  return s;
}

const WordCloudEntry* find(const WordCloud& c, const std::string& token) {
  for (const auto& e : c.entries)
    if (e.token == token) return &e;
  return nullptr;
}

}  // namespace

TEST(WordCloud, InverseRankWorkedExample) {
  const auto table = fan_table();
  // q is rank 2 for the first sample, rank 1 for the second, absent from the rest
  const auto cloud = score_word_cloud(table, samples_at({5, 22, 98, 175}), 3);
  const auto* q = find(cloud, "q");
  ASSERT_NE(q, nullptr);
  EXPECT_EQ(q->frequency, 3u);
  EXPECT_NEAR(q->min_distance, 1.0 - std::cos(2.0 * std::numbers::pi / 180.0), 1e-12);
  EXPECT_EQ(find(cloud, "a")->frequency, 2u + 0u);
  for (const auto& e : cloud.entries) {
    EXPECT_GE(e.frequency, 1u);
    EXPECT_GE(e.min_distance, 0.0);
    EXPECT_LE(e.min_distance, 2.0);
  }
  for (std::size_t i = 1; i < cloud.entries.size(); ++i) {
    const auto& x = cloud.entries[i - 1];
    const auto& y = cloud.entries[i];
    EXPECT_TRUE(x.frequency > y.frequency || (x.frequency == y.frequency && x.token < y.token));
  }
}

TEST(WordCloud, PermutationInvariant) {
  const auto table = fan_table();
  std::vector<double> deg{5, 22, 98, 175, 60, 130};
  const auto base = score_word_cloud(table, samples_at(deg), 3);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(deg.begin(), deg.end(), rng);
    const auto other = score_word_cloud(table, samples_at(deg), 3);
    ASSERT_EQ(other.entries.size(), base.entries.size());
    EXPECT_EQ(other.diversity, base.diversity);
    for (std::size_t i = 0; i < base.entries.size(); ++i) {
      EXPECT_EQ(other.entries[i].token, base.entries[i].token);
      EXPECT_EQ(other.entries[i].frequency, base.entries[i].frequency);
      EXPECT_EQ(other.entries[i].min_distance, base.entries[i].min_distance);
    }
  }
}

TEST(WordCloud, IdenticalSamplesGiveKTokens) {
  const auto table = fan_table();
  const auto cloud = score_word_cloud(table, samples_at({33, 33, 33, 33}), 4);
  EXPECT_EQ(cloud.diversity, 4u);
}

TEST(WordCloud, SampledCloudProperties) {
  std::mt19937_64 rng(6);
  const auto table = fixture::random_table(200, 6, rng);
  TrainConfig c;
  c.kind = ModelKind::BVAE;
  c.input_dim = 6;
  c.latent_dim = 3;
  c.hidden = {10};
  const auto ckpt = ModelCheckpoint::initialize(c);
  const auto profiles = dimension_profiles(ckpt, table);
  WordCloudOptions o;
  o.samples_per_word = 20;
  o.neighbors = 5;
  o.seed = 11;
  const double lo = profiles[1].mean_min, hi = profiles[1].mean_max;
  const auto cloud = word_cloud(ckpt, table, profiles, "w2", "w3", 1, lo, hi, o);
  EXPECT_FALSE(cloud.clamped);
  EXPECT_EQ(cloud.seed, 11u);
  EXPECT_GE(cloud.diversity, cloud.entries.size());
  for (const auto& e : cloud.entries) EXPECT_LE(e.frequency, 2 * o.samples_per_word * (o.neighbors - 1));

  const auto again = word_cloud(ckpt, table, profiles, "w2", "w3", 1, lo, hi, o);
  ASSERT_EQ(again.entries.size(), cloud.entries.size());
  for (std::size_t i = 0; i < cloud.entries.size(); ++i) {
    EXPECT_EQ(again.entries[i].token, cloud.entries[i].token);
    EXPECT_EQ(again.entries[i].frequency, cloud.entries[i].frequency);
  }

  const auto wide = word_cloud(ckpt, table, profiles, "w2", "w3", 1, lo - 5.0, hi + 5.0, o);
  EXPECT_TRUE(wide.clamped);
  EXPECT_EQ(wide.range_lo, lo);
  EXPECT_EQ(wide.range_hi, hi);

  EXPECT_EQ(code_of([&] { word_cloud(ckpt, table, profiles, "w2", "w3", 1, hi + 1.0, hi + 2.0, o); }),
            ErrorCode::EmptyRange);
  EXPECT_EQ(code_of([&] { word_cloud(ckpt, table, profiles, "w2", "w3", 1, 1.0, 0.0, o); }),
            ErrorCode::EmptyRange);
}

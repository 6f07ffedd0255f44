#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semprobe/dimension_analysis.hpp"
#include "semprobe/embedding_table.hpp"
#include "semprobe/latent_model.hpp"
#include "semprobe/stats.hpp"

namespace semprobe {

struct ProbeOptions {
  std::size_t samples = 700;
  /// A perturbation set whose largest distance from its centroid is below
  /// this fraction of the centroid norm is treated as collapsed.
  double degenerate_tolerance = 1e-2;
  PcaOptions pca;
};

struct ProbeReport {
  std::size_t dim = 0;
  double theta = 90.0;  // degrees, at word 1
  double phi = 90.0;    // degrees, at word 2
  double encoding_level = 90.0;  // (theta + phi) / 2
  double extent_w1 = 0.0;
  double extent_w2 = 0.0;
  Vector regressed_dir_w1;  // empty when degenerate
  Vector regressed_dir_w2;
  bool degenerate = false;
  double pair_diff = 0.0;  // |mu_dim(w1) - mu_dim(w2)|
  double range_lo = 0.0;
  double range_hi = 0.0;
};

/// P evenly spaced values over [lo, hi], inclusive of both ends.
std::vector<double> even_grid(double lo, double hi, std::size_t count);

/// Decodes `mean` with coordinate `dim` replaced by each of `values`.
Matrix decode_perturbations(const ModelCheckpoint& ckpt, std::span<const double> mean,
                            std::size_t dim, std::span<const double> values);

/// Perturbs `dim` of each word's latent mean across the dimension's observed
/// range, regresses the decoded trajectory with its first principal
/// component, and measures the angle to decode(mu(w2)) - decode(mu(w1)).
/// Throws UnknownWordError, Error{DimensionOutOfRange, ZeroSemanticDirection}.
ProbeReport probe_dimension(const ModelCheckpoint& ckpt, const EmbeddingTable& table,
                            std::span<const DimensionProfile> profiles, const std::string& w1,
                            const std::string& w2, std::size_t dim,
                            const ProbeOptions& options = {});

/// Convenience overload that profiles the table first.
ProbeReport probe_dimension(const ModelCheckpoint& ckpt, const EmbeddingTable& table,
                            const std::string& w1, const std::string& w2, std::size_t dim,
                            const ProbeOptions& options = {});

/// Encoding-level density over [0, 90] degrees in 18 bins of 5 degrees,
/// normalised so that sum(density) * 5 = 1. The last bin is closed.
struct AngleHistogram {
  static constexpr std::size_t kBins = 18;
  static constexpr double kBinWidth = 5.0;
  std::array<double, kBins> density{};
};

AngleHistogram angle_histogram(std::span<const double> levels);

struct ProbeSummary {
  std::vector<ProbeReport> reports;
  AngleHistogram histogram;
};

/// Probes every listed dimension, or every useful one when `dims` is empty.
ProbeSummary probe_all(const ModelCheckpoint& ckpt, const EmbeddingTable& table,
                       std::span<const DimensionProfile> profiles, const std::string& w1,
                       const std::string& w2,
                       const std::optional<std::vector<std::size_t>>& dims = std::nullopt,
                       const ProbeOptions& options = {});

enum class SceneRole { Anchor, Interpolation, Neighbor, Perturbation };
std::string_view scene_role_name(SceneRole role);

struct ScenePoint {
  SceneRole role = SceneRole::Anchor;
  std::string label;   // word for anchors and neighbors
  int owner = -1;      // 0 for word 1, 1 for word 2, -1 for interpolation
  double t = 0.0;      // interpolation parameter or perturbation value
  std::size_t rank = 0;  // neighbor rank
  double distance = 0.0;  // neighbor cosine distance
  std::array<double, 2> xy{};
};

struct ProjectionScene {
  std::size_t dim = 0;
  std::vector<ScenePoint> points;
  double theta = 90.0;
  double phi = 90.0;
  bool degenerate = false;
};

struct SceneOptions {
  std::size_t interpolation_samples = 50;
  std::size_t neighbors = 10;
  ProbeOptions probe;
};

/// 2D PCA scene of the two reconstructed anchors, the decoded latent
/// interpolation between them, their nearest vocabulary neighbors and the
/// decoded perturbations of `dim` around each word.
ProjectionScene projection_scene(const ModelCheckpoint& ckpt, const EmbeddingTable& table,
                                 std::span<const DimensionProfile> profiles,
                                 const std::string& w1, const std::string& w2, std::size_t dim,
                                 const SceneOptions& options = {});

struct WordCloudEntry {
  std::string token;
  std::size_t frequency = 0;  // sum of (k - rank) over samples
  double min_distance = 0.0;  // cosine distance to the closest sample
};

struct WordCloud {
  std::vector<WordCloudEntry> entries;  // frequency desc, then token
  std::size_t diversity = 0;            // unique neighbor tokens over all samples
  double range_lo = 0.0;
  double range_hi = 0.0;
  bool clamped = false;
  std::uint64_t seed = 0;
};

struct WordCloudOptions {
  std::size_t samples_per_word = 50;
  std::size_t neighbors = 10;
  std::uint64_t seed = 0;
};

/// Scores decoded samples (rows) against the vocabulary. Independent of row
/// order.
WordCloud score_word_cloud(const EmbeddingTable& table, const Matrix& samples, std::size_t k);

/// Draws n uniform values in [lo, hi] per word, substitutes them at `dim`,
/// decodes, and scores the union of the samples' k-nearest neighbors.
/// The range is clamped to the dimension's observed range.
/// Throws Error{EmptyRange} if nothing remains after clamping.
WordCloud word_cloud(const ModelCheckpoint& ckpt, const EmbeddingTable& table,
                     std::span<const DimensionProfile> profiles, const std::string& w1,
                     const std::string& w2, std::size_t dim, double lo, double hi,
                     const WordCloudOptions& options = {});

}  // namespace semprobe

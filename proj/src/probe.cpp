#include "semprobe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <unordered_set>

#include "semprobe/errors.hpp"

namespace semprobe {

namespace {

void check_dim(const ModelCheckpoint& ckpt, std::span<const DimensionProfile> profiles,
               std::size_t dim) {
  if (dim >= ckpt.latent_dim())
    throw Error(ErrorCode::DimensionOutOfRange,
                "dimension " + std::to_string(dim) + " is out of range [0, " +
                    std::to_string(ckpt.latent_dim()) + ")");
  if (profiles.size() != ckpt.latent_dim())
    throw Error(ErrorCode::ShapeMismatch, "dimension profiles do not match the checkpoint");
}

struct Regression {
  bool degenerate = true;
  Vector direction;
  double extent = 0.0;
};

Regression regress(const Matrix& recon, const ProbeOptions& options) {
  Regression out;
  Vector centroid(recon.cols(), 0.0);
  for (std::size_t r = 0; r < recon.rows(); ++r) axpy(1.0, recon.row(r), centroid);
  for (double& v : centroid) v /= static_cast<double>(recon.rows());
  double spread = 0.0;
  for (std::size_t r = 0; r < recon.rows(); ++r)
    spread = std::max(spread, norm(subtract(recon.row(r), centroid)));
  if (spread < options.degenerate_tolerance * std::max(norm(centroid), 1e-12)) return out;
  try {
    PcaResult pca = pca_first_component(recon, options.pca);
    out.degenerate = false;
    out.direction = std::move(pca.component);
    out.extent = pca.explained_variance;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegeneratePoints) throw;
  }
  return out;
}

}  // namespace

std::vector<double> even_grid(double lo, double hi, std::size_t count) {
  std::vector<double> out(count, lo);
  if (count < 2) return out;
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

Matrix decode_perturbations(const ModelCheckpoint& ckpt, std::span<const double> mean,
                            std::size_t dim, std::span<const double> values) {
  Matrix latents(values.size(), mean.size());
  for (std::size_t p = 0; p < values.size(); ++p) {
    auto row = latents.row(p);
    std::copy(mean.begin(), mean.end(), row.begin());
    row[dim] = values[p];
  }
  return decode_batch(ckpt, latents);
}

ProbeReport probe_dimension(const ModelCheckpoint& ckpt, const EmbeddingTable& table,
                            std::span<const DimensionProfile> profiles, const std::string& w1,
                            const std::string& w2, std::size_t dim, const ProbeOptions& options) {
  const auto r1 = table.index_of(w1);
  const auto r2 = table.index_of(w2);
  check_dim(ckpt, profiles, dim);
  if (options.samples < 2) throw Error(ErrorCode::ConfigInvalid, "probing needs at least two samples");

  const Vector mu1 = encode(ckpt, table.row(r1)).mean;
  const Vector mu2 = encode(ckpt, table.row(r2)).mean;
  const Vector semantic = subtract(decode(ckpt, mu2), decode(ckpt, mu1));
  if (!(norm(semantic) >= 1e-12))
    throw Error(ErrorCode::ZeroSemanticDirection,
                "'" + w1 + "' and '" + w2 + "' reconstruct to the same point");

  ProbeReport report;
  report.dim = dim;
  report.pair_diff = std::abs(mu1[dim] - mu2[dim]);
  report.range_lo = profiles[dim].mean_min;
  report.range_hi = profiles[dim].mean_max;
  const auto grid = even_grid(report.range_lo, report.range_hi, options.samples);

  const Regression g1 = regress(decode_perturbations(ckpt, mu1, dim, grid), options);
  const Regression g2 = regress(decode_perturbations(ckpt, mu2, dim, grid), options);
  if (g1.degenerate || g2.degenerate) {
    report.degenerate = true;
    return report;
  }
  report.regressed_dir_w1 = g1.direction;
  report.regressed_dir_w2 = g2.direction;
  report.extent_w1 = g1.extent;
  report.extent_w2 = g2.extent;
  report.theta = absolute_angle(g1.direction, semantic);
  report.phi = absolute_angle(g2.direction, semantic);
  report.encoding_level = (report.theta + report.phi) / 2.0;
  return report;
}

ProbeReport probe_dimension(const ModelCheckpoint& ckpt, const EmbeddingTable& table,
                            const std::string& w1, const std::string& w2, std::size_t dim,
                            const ProbeOptions& options) {
  const auto profiles = dimension_profiles(ckpt, table);
  return probe_dimension(ckpt, table, profiles, w1, w2, dim, options);
}

AngleHistogram angle_histogram(std::span<const double> levels) {
  AngleHistogram h;
  if (levels.empty()) return h;
  for (double level : levels) {
    auto bin = static_cast<std::size_t>(std::clamp(level, 0.0, 90.0) / AngleHistogram::kBinWidth);
    h.density[std::min(bin, AngleHistogram::kBins - 1)] += 1.0;
  }
  const double norm = static_cast<double>(levels.size()) * AngleHistogram::kBinWidth;
  for (double& d : h.density) d /= norm;
  return h;
}

ProbeSummary probe_all(const ModelCheckpoint& ckpt, const EmbeddingTable& table,
                       std::span<const DimensionProfile> profiles, const std::string& w1,
                       const std::string& w2, const std::optional<std::vector<std::size_t>>& dims,
                       const ProbeOptions& options) {
  const std::vector<std::size_t> targets = dims ? *dims : useful_dimensions(profiles);
  ProbeSummary summary;
  summary.reports.reserve(targets.size());
  std::vector<double> levels;
  for (std::size_t d : targets) {
    summary.reports.push_back(probe_dimension(ckpt, table, profiles, w1, w2, d, options));
    levels.push_back(summary.reports.back().encoding_level);
  }
  summary.histogram = angle_histogram(levels);
  return summary;
}

std::string_view scene_role_name(SceneRole role) {
  switch (role) {
    case SceneRole::Anchor: return "anchor";
    case SceneRole::Interpolation: return "interpolation";
    case SceneRole::Neighbor: return "neighbor";
    case SceneRole::Perturbation: return "perturbation";
  }
  return "unknown";
}

ProjectionScene projection_scene(const ModelCheckpoint& ckpt, const EmbeddingTable& table,
                                 std::span<const DimensionProfile> profiles,
                                 const std::string& w1, const std::string& w2, std::size_t dim,
                                 const SceneOptions& options) {
  const ProbeReport probe = probe_dimension(ckpt, table, profiles, w1, w2, dim, options.probe);
  const std::size_t T = options.interpolation_samples;
  if (T < 2) throw Error(ErrorCode::ConfigInvalid, "interpolation needs at least two samples");

  const std::array<Vector, 2> mu = {encode(ckpt, table.vector_of(w1)).mean,
                                    encode(ckpt, table.vector_of(w2)).mean};
  const std::array<std::string, 2> words = {w1, w2};
  const std::size_t n = table.dim();
  const std::size_t m = ckpt.latent_dim();

  std::vector<ScenePoint> points;
  std::vector<Vector> hd;

  Matrix path(T, m);
  const auto ts = even_grid(0.0, 1.0, T);
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t j = 0; j < m; ++j) path(i, j) = (1.0 - ts[i]) * mu[0][j] + ts[i] * mu[1][j];
  const Matrix decoded_path = decode_batch(ckpt, path);

  for (int w = 0; w < 2; ++w) {
    ScenePoint p;
    p.role = SceneRole::Anchor;
    p.label = words[w];
    p.owner = w;
    p.t = w;
    points.push_back(p);
    const auto row = decoded_path.row(w == 0 ? 0 : T - 1);
    hd.emplace_back(row.begin(), row.end());
  }
  for (std::size_t i = 0; i < T; ++i) {
    ScenePoint p;
    p.role = SceneRole::Interpolation;
    p.t = ts[i];
    points.push_back(p);
    hd.emplace_back(decoded_path.row(i).begin(), decoded_path.row(i).end());
  }
  for (int w = 0; w < 2; ++w) {
    const Vector anchor = hd[static_cast<std::size_t>(w)];
    for (const auto& nb : table.nearest_neighbors(anchor, std::min(options.neighbors, table.size()))) {
      ScenePoint p;
      p.role = SceneRole::Neighbor;
      p.label = nb.token;
      p.owner = w;
      p.rank = nb.rank;
      p.distance = nb.distance;
      points.push_back(p);
      hd.emplace_back(table.row(nb.row).begin(), table.row(nb.row).end());
    }
  }
  const auto grid = even_grid(probe.range_lo, probe.range_hi, options.probe.samples);
  for (int w = 0; w < 2; ++w) {
    const Matrix recon = decode_perturbations(ckpt, mu[static_cast<std::size_t>(w)], dim, grid);
    for (std::size_t i = 0; i < recon.rows(); ++i) {
      ScenePoint p;
      p.role = SceneRole::Perturbation;
      p.label = words[w];
      p.owner = w;
      p.t = grid[i];
      points.push_back(p);
      hd.emplace_back(recon.row(i).begin(), recon.row(i).end());
    }
  }

  Matrix all(hd.size(), n);
  for (std::size_t i = 0; i < hd.size(); ++i) std::copy(hd[i].begin(), hd[i].end(), all.row(i).begin());
  const Projection2d proj = project_2d(all, all, options.probe.pca);
  for (std::size_t i = 0; i < points.size(); ++i) points[i].xy = proj.coords[i];

  ProjectionScene scene;
  scene.dim = dim;
  scene.points = std::move(points);
  scene.theta = probe.theta;
  scene.phi = probe.phi;
  scene.degenerate = probe.degenerate;
  return scene;
}

WordCloud score_word_cloud(const EmbeddingTable& table, const Matrix& samples, std::size_t k) {
  if (samples.cols() != table.dim())
    throw Error(ErrorCode::ShapeMismatch, "word cloud samples do not match table dimensionality");
  std::map<std::size_t, std::size_t> frequency;  // row -> sum of inverse ranks
  for (std::size_t s = 0; s < samples.rows(); ++s)
    for (const auto& nb : table.nearest_neighbors(samples.row(s), k))
      frequency[nb.row] += k - nb.rank;

  WordCloud cloud;
  cloud.diversity = frequency.size();
  for (const auto& [row, freq] : frequency) {
    if (freq == 0) continue;
    double best = 2.0;
    const double rn = table.row_norm(row);
    for (std::size_t s = 0; s < samples.rows(); ++s) {
      const double sn = norm(samples.row(s));
      const double cos = (rn > 0.0 && sn > 0.0) ? dot(table.row(row), samples.row(s)) / (rn * sn) : 0.0;
      best = std::min(best, std::clamp(1.0 - cos, 0.0, 2.0));
    }
    cloud.entries.push_back({table.word(row), freq, best});
  }
  std::sort(cloud.entries.begin(), cloud.entries.end(), [](const auto& a, const auto& b) {
    return a.frequency != b.frequency ? a.frequency > b.frequency : a.token < b.token;
  });
  return cloud;
}

WordCloud word_cloud(const ModelCheckpoint& ckpt, const EmbeddingTable& table,
                     std::span<const DimensionProfile> profiles, const std::string& w1,
                     const std::string& w2, std::size_t dim, double lo, double hi,
                     const WordCloudOptions& options) {
  const auto r1 = table.index_of(w1);
  const auto r2 = table.index_of(w2);
  check_dim(ckpt, profiles, dim);
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw Error(ErrorCode::BadRange, "word cloud range must be finite");

  const double clamped_lo = std::max(lo, profiles[dim].mean_min);
  const double clamped_hi = std::min(hi, profiles[dim].mean_max);
  if (!(clamped_lo < clamped_hi))
    throw Error(ErrorCode::EmptyRange, "word cloud range is empty after clamping to [" +
                                           std::to_string(profiles[dim].mean_min) + ", " +
                                           std::to_string(profiles[dim].mean_max) + "]");

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> uniform(clamped_lo, clamped_hi);
  const std::size_t n = options.samples_per_word;
  Matrix samples(0, table.dim());
  std::vector<Vector> decoded;
  for (std::size_t r : {r1, r2}) {
    const Vector mu = encode(ckpt, table.row(r)).mean;
    std::vector<double> values(n);
    for (double& v : values) v = uniform(rng);
    const Matrix recon = decode_perturbations(ckpt, mu, dim, values);
    for (std::size_t i = 0; i < recon.rows(); ++i) decoded.emplace_back(recon.row(i).begin(), recon.row(i).end());
  }
  samples = decoded.empty() ? Matrix(0, table.dim()) : Matrix::from_rows(decoded);

  WordCloud cloud = score_word_cloud(table, samples, options.neighbors);
  cloud.range_lo = clamped_lo;
  cloud.range_hi = clamped_hi;
  cloud.clamped = clamped_lo != lo || clamped_hi != hi;
  cloud.seed = options.seed;
  return cloud;
}

}  // namespace semprobe

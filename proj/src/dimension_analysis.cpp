#include "semprobe/dimension_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semprobe/stats.hpp"

namespace semprobe {

namespace {

std::vector<std::size_t> descending_order(std::span<const double> entropies) {
  std::vector<std::size_t> order(entropies.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return entropies[a] > entropies[b]; });
  return order;
}

}  // namespace

double largest_entropy_gap(std::span<const double> entropies) {
  const auto order = descending_order(entropies);
  double best = 0.0;
  for (std::size_t i = 0; i + 1 < order.size(); ++i)
    best = std::max(best, entropies[order[i]] - entropies[order[i + 1]]);
  return best;
}

std::vector<bool> classify_dimensions(std::span<const double> entropies, double min_gap) {
  std::vector<bool> useful(entropies.size(), true);
  if (entropies.size() < 2) return useful;
  const auto order = descending_order(entropies);
  double best = -1.0;
  std::size_t split = 0;  // dims order[0..split] are useful
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    const double gap = entropies[order[i]] - entropies[order[i + 1]];
    if (gap > best) {
      best = gap;
      split = i;
    }
  }
  if (best < min_gap) return useful;
  for (std::size_t i = split + 1; i < order.size(); ++i) useful[order[i]] = false;
  return useful;
}

std::vector<DimensionProfile> profiles_from_codes(const CodeBatch& codes,
                                                  const ProfileOptions& options) {
  const std::size_t words = codes.mean.rows();
  const std::size_t m = codes.mean.cols();
  const bool has_sigma = !codes.log_variance.empty();
  std::vector<DimensionProfile> profiles(m);
  std::vector<double> column(words);
  std::vector<double> entropies(m);
  for (std::size_t d = 0; d < m; ++d) {
    for (std::size_t w = 0; w < words; ++w) column[w] = codes.mean(w, d);
    auto& p = profiles[d];
    p.index = d;
    p.entropy = histogram_entropy(column, options.bin_width);
    const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
    p.mean_min = *lo;
    p.mean_max = *hi;
    p.q1 = quantile(column, 0.25);
    p.median = quantile(column, 0.5);
    p.q3 = quantile(column, 0.75);
    if (has_sigma) {
      double sum = 0.0;
      for (std::size_t w = 0; w < words; ++w) sum += std::exp(0.5 * codes.log_variance(w, d));
      p.avg_sigma = sum / static_cast<double>(words);
    }
    entropies[d] = p.entropy;
  }
  const auto useful = classify_dimensions(entropies, options.min_gap);
  for (std::size_t d = 0; d < m; ++d) profiles[d].useful = useful[d];
  return profiles;
}

std::vector<DimensionProfile> dimension_profiles(const ModelCheckpoint& ckpt,
                                                 const EmbeddingTable& table,
                                                 const ProfileOptions& options) {
  if (table.dim() != ckpt.input_dim())
    throw Error(ErrorCode::ShapeMismatch, "table dimensionality does not match checkpoint input");
  return profiles_from_codes(encode_batch(ckpt, table.vectors()), options);
}

std::vector<std::size_t> useful_dimensions(std::span<const DimensionProfile> profiles) {
  std::vector<std::size_t> out;
  for (const auto& p : profiles)
    if (p.useful) out.push_back(p.index);
  return out;
}

std::vector<std::size_t> deprecated_dimensions(std::span<const DimensionProfile> profiles) {
  std::vector<std::size_t> out;
  for (const auto& p : profiles)
    if (!p.useful) out.push_back(p.index);
  return out;
}

TraceRecord epoch_metrics(const ModelCheckpoint& ckpt, const EmbeddingTable& table,
                          const EvalBundle& bundle) {
  if (table.dim() != ckpt.input_dim())
    throw Error(ErrorCode::ShapeMismatch, "table dimensionality does not match checkpoint input");
  TraceRecord record;
  record.epoch = ckpt.epoch;

  const CodeBatch codes = encode_batch(ckpt, table.vectors());
  const Matrix recon = decode_batch(ckpt, codes.mean);
  double sse = 0.0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const double d = table.vectors().data()[i] - recon.data()[i];
    sse += d * d;
  }
  const double words = static_cast<double>(table.size());
  record.recon_loss = sse / words;
  if (!codes.log_variance.empty()) {
    double kl = 0.0;
    for (std::size_t i = 0; i < codes.mean.size(); ++i)
      kl += gaussian_kl(codes.mean.data()[i], codes.log_variance.data()[i]);
    record.kl_loss = kl / words;
  }

  const auto profiles = profiles_from_codes(codes);
  const auto useful = useful_dimensions(profiles);
  record.useful_dims = useful.size();

  if (useful.empty() || (!bundle.similarity && !bundle.analogy)) return record;
  std::vector<std::string> words_copy = table.words();
  Matrix restricted(table.size(), useful.size());
  for (std::size_t w = 0; w < table.size(); ++w)
    for (std::size_t j = 0; j < useful.size(); ++j) restricted(w, j) = codes.mean(w, useful[j]);
  const EmbeddingTable view(std::move(words_copy), std::move(restricted));

  if (bundle.similarity) {
    try {
      record.semeval = semantic_similarity_score(view, *bundle.similarity).rho;
    } catch (const Error&) {
      // metric stays empty
    }
  }
  if (bundle.analogy) {
    record.analogy = analogy_accuracy(view, *bundle.analogy, bundle.analogy_candidate_limit).accuracy;
  }
  return record;
}

EpochHook telemetry_hook(const EmbeddingTable& table, EvalBundle bundle) {
  return [&table, bundle = std::move(bundle)](const ModelCheckpoint& ckpt, TraceRecord& record) {
    record = epoch_metrics(ckpt, table, bundle);
  };
}

}  // namespace semprobe

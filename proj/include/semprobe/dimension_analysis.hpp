#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "semprobe/embedding_table.hpp"
#include "semprobe/evaluation.hpp"
#include "semprobe/latent_model.hpp"
#include "semprobe/trainer.hpp"
#include "semprobe/training_trace.hpp"

namespace semprobe {

struct DimensionProfile {
  std::size_t index = 0;
  double entropy = 0.0;  // nats, of the per-word latent means
  double mean_min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double mean_max = 0.0;
  std::optional<double> avg_sigma;  // βVAE only
  bool useful = true;
};

struct ProfileOptions {
  double bin_width = 0.05;
  double min_gap = 0.5;
};

/// Useful/deprecated split by the largest gap in descending entropy order.
/// If that gap is below `min_gap` every dimension is useful. Returns one
/// flag per input entropy, in input order.
std::vector<bool> classify_dimensions(std::span<const double> entropies, double min_gap = 0.5);

/// Largest consecutive gap in descending entropy order (0 for m < 2).
double largest_entropy_gap(std::span<const double> entropies);

/// Per-dimension statistics of an already-encoded vocabulary.
std::vector<DimensionProfile> profiles_from_codes(const CodeBatch& codes,
                                                  const ProfileOptions& options = {});

/// Encodes every word of `table` and profiles each latent dimension.
std::vector<DimensionProfile> dimension_profiles(const ModelCheckpoint& ckpt,
                                                 const EmbeddingTable& table,
                                                 const ProfileOptions& options = {});

std::vector<std::size_t> useful_dimensions(std::span<const DimensionProfile> profiles);
std::vector<std::size_t> deprecated_dimensions(std::span<const DimensionProfile> profiles);

/// Datasets used for per-epoch telemetry. Either may be absent.
struct EvalBundle {
  std::optional<SimilarityPairset> similarity;
  std::optional<AnalogySet> analogy;
  std::optional<std::size_t> analogy_candidate_limit;

  /// Default telemetry subsample: full similarity set, 2000 analogies.
  static constexpr std::size_t kTelemetryAnalogies = 2000;
};

/// Deterministic per-epoch statistics: reconstruction and KL losses with
/// z = mu over the whole table, useful-dimension count, and similarity and
/// analogy scores on useful-dimension latent means. Evaluation failures
/// leave the corresponding metric empty.
TraceRecord epoch_metrics(const ModelCheckpoint& ckpt, const EmbeddingTable& table,
                          const EvalBundle& bundle);

/// Hook for `train` that records epoch_metrics after every epoch.
EpochHook telemetry_hook(const EmbeddingTable& table, EvalBundle bundle);

}  // namespace semprobe

#pragma once

#include <functional>
#include <optional>

#include "semprobe/embedding_table.hpp"
#include "semprobe/errors.hpp"
#include "semprobe/latent_model.hpp"
#include "semprobe/training_trace.hpp"

namespace semprobe {

/// Called after every epoch with the current parameters. The record arrives
/// filled with the epoch's mean training losses; hooks may overwrite or
/// extend it before it is appended to the trace.
using EpochHook = std::function<void(const ModelCheckpoint&, TraceRecord&)>;

struct TrainOptions {
  EpochHook on_epoch;
  /// Start from these parameters instead of a fresh seeded initialisation.
  std::optional<ModelCheckpoint> initial;
};

struct TrainResult {
  ModelCheckpoint checkpoint;
  TrainingTrace trace;
};

/// Thrown when a minibatch loss becomes NaN or infinite. Holds the parameters
/// from the end of the last completed epoch.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(ModelCheckpoint last_finite, TrainingTrace trace, std::size_t epoch)
      : Error(ErrorCode::NonFiniteLoss,
              "non-finite loss during epoch " + std::to_string(epoch)),
        last_finite_(std::move(last_finite)),
        trace_(std::move(trace)) {}

  const ModelCheckpoint& last_finite() const noexcept { return last_finite_; }
  const TrainingTrace& trace() const noexcept { return trace_; }

 private:
  ModelCheckpoint last_finite_;
  TrainingTrace trace_;
};

/// Shuffled minibatch Adam on the rows of `data`. Deterministic for a fixed
/// config seed.
TrainResult train(const Matrix& data, const TrainConfig& config, TrainOptions options = {});
TrainResult train(const EmbeddingTable& table, const TrainConfig& config,
                  TrainOptions options = {});

}  // namespace semprobe

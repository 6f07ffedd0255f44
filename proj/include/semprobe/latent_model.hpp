#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "semprobe/dense_net.hpp"
#include "semprobe/linalg.hpp"

namespace semprobe {

enum class ModelKind { AE, BVAE };

std::string_view model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(std::string_view name);

struct TrainConfig {
  ModelKind kind = ModelKind::BVAE;
  std::size_t input_dim = 300;
  std::size_t latent_dim = 350;
  std::vector<std::size_t> hidden = {400};
  double beta = 1e-5;  // KL weight; ignored for AE
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  std::uint64_t seed = 1;
  double learning_rate = 1e-3;  // Adam step size

  /// The KL weight actually applied: 0 for AE.
  double effective_beta() const { return kind == ModelKind::AE ? 0.0 : beta; }
  /// Throws Error{ConfigInvalid}.
  void validate() const;
};

/// Per-word latent Gaussian. AE codes carry no log-variance.
struct GaussianCode {
  Vector mean;
  std::optional<Vector> log_variance;
};

/// Batched codes; `log_variance` is empty for AE.
struct CodeBatch {
  Matrix mean;
  Matrix log_variance;
};

struct ModelCheckpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  TrainConfig config;
  DenseNet encoder;  // n -> hidden -> m (AE) or 2m (mean and log-variance heads)
  DenseNet decoder;  // m -> hidden -> n
  std::size_t epoch = 0;

  /// Freshly initialised parameters drawn from `rng`.
  static ModelCheckpoint initialize(const TrainConfig& config, std::mt19937_64& rng);
  static ModelCheckpoint initialize(const TrainConfig& config);

  ModelKind kind() const { return config.kind; }
  std::size_t input_dim() const { return config.input_dim; }
  std::size_t latent_dim() const { return config.latent_dim; }

  /// Checks head widths and layer chaining against the config.
  void validate() const;
};

GaussianCode encode(const ModelCheckpoint& ckpt, std::span<const double> x);
CodeBatch encode_batch(const ModelCheckpoint& ckpt, const Matrix& inputs);
Vector decode(const ModelCheckpoint& ckpt, std::span<const double> z);
Matrix decode_batch(const ModelCheckpoint& ckpt, const Matrix& latents);

struct LossTerms {
  // Sums over the batch.
  double total = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
  std::size_t batch = 0;

  double mean_total() const { return batch ? total / static_cast<double>(batch) : 0.0; }
  double mean_reconstruction() const {
    return batch ? reconstruction / static_cast<double>(batch) : 0.0;
  }
  double mean_kl() const { return batch ? kl / static_cast<double>(batch) : 0.0; }
};

/// KL( N(mu, exp(log_variance)) || N(0, 1) ) for a single latent coordinate.
double gaussian_kl(double mu, double log_variance);

/// Reconstruction SSE plus beta-weighted KL, with the latent sample
/// z = mu + sigma * noise. `noise` is batch x m and ignored for AE.
LossTerms loss(const ModelCheckpoint& ckpt, const Matrix& inputs, double beta,
               const Matrix& noise);

struct LossGradients {
  LossTerms terms;
  NetGradients encoder;
  NetGradients decoder;
};

/// Loss terms plus exact gradients of `terms.total` (the batch sum) with
/// respect to every encoder and decoder parameter.
LossGradients loss_gradients(const ModelCheckpoint& ckpt, const Matrix& inputs, double beta,
                             const Matrix& noise);

}  // namespace semprobe

#include "semprobe/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace semprobe {

TrainResult train(const Matrix& data, const TrainConfig& config, TrainOptions options) {
  config.validate();
  if (data.cols() != config.input_dim)
    throw Error(ErrorCode::ConfigInvalid, "data dimensionality " + std::to_string(data.cols()) +
                                              " != config input_dim " +
                                              std::to_string(config.input_dim));
  if (data.rows() == 0) throw Error(ErrorCode::ConfigInvalid, "no training rows");

  std::mt19937_64 rng(config.seed);
  TrainResult result;
  if (options.initial) {
    result.checkpoint = std::move(*options.initial);
    result.checkpoint.config = config;
    result.checkpoint.validate();
  } else {
    result.checkpoint = ModelCheckpoint::initialize(config, rng);
  }
  ModelCheckpoint& ckpt = result.checkpoint;

  auto enc_params = ckpt.encoder.parameter_views();
  auto dec_params = ckpt.decoder.parameter_views();
  std::vector<std::span<double>> params = enc_params;
  params.insert(params.end(), dec_params.begin(), dec_params.end());
  AdamState adam(AdamConfig{.learning_rate = config.learning_rate}, params);

  const bool variational = config.kind == ModelKind::BVAE;
  const double beta = config.effective_beta();
  const std::size_t m = config.latent_dim;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), 0);

  ModelCheckpoint last_finite = ckpt;
  const std::size_t first_epoch = ckpt.epoch + 1;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const std::size_t epoch = first_epoch + e;
    std::shuffle(order.begin(), order.end(), rng);
    double recon_sum = 0.0, kl_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      Matrix batch(count, data.cols());
      for (std::size_t i = 0; i < count; ++i) {
        const auto src = data.row(order[start + i]);
        std::copy(src.begin(), src.end(), batch.row(i).begin());
      }
      Matrix noise(variational ? count : 0, variational ? m : 0);
      for (double& x : noise.flat()) x = gauss(rng);

      LossGradients g = loss_gradients(ckpt, batch, beta, noise);
      if (!std::isfinite(g.terms.total))
        throw NonFiniteLossError(std::move(last_finite), std::move(result.trace), epoch);
      recon_sum += g.terms.reconstruction;
      kl_sum += g.terms.kl;

      // Optimise the batch mean.
      const double inv = 1.0 / static_cast<double>(count);
      g.encoder.scale(inv);
      g.decoder.scale(inv);
      auto grads = DenseNet::gradient_views(g.encoder);
      auto dec_grads = DenseNet::gradient_views(g.decoder);
      grads.insert(grads.end(), dec_grads.begin(), dec_grads.end());
      adam.step(params, grads);
    }
    if (!ckpt.encoder.all_finite() || !ckpt.decoder.all_finite())
      throw NonFiniteLossError(std::move(last_finite), std::move(result.trace), epoch);

    ckpt.epoch = epoch;
    TraceRecord record;
    record.epoch = epoch;
    record.recon_loss = recon_sum / static_cast<double>(data.rows());
    record.kl_loss = variational ? kl_sum / static_cast<double>(data.rows()) : 0.0;
    if (options.on_epoch) options.on_epoch(ckpt, record);
    result.trace.append(record);
    last_finite = ckpt;
  }
  return result;
}

TrainResult train(const EmbeddingTable& table, const TrainConfig& config, TrainOptions options) {
  return train(table.vectors(), config, std::move(options));
}

}  // namespace semprobe

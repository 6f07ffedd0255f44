#include "semprobe/latent_model.hpp"

#include <cmath>
#include <string>

#include "semprobe/errors.hpp"

namespace semprobe {

std::string_view model_kind_name(ModelKind kind) { return kind == ModelKind::AE ? "ae" : "bvae"; }

ModelKind model_kind_from_name(std::string_view name) {
  if (name == "ae") return ModelKind::AE;
  if (name == "bvae") return ModelKind::BVAE;
  throw Error(ErrorCode::ConfigInvalid, "model kind must be 'ae' or 'bvae', got '" +
                                            std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (input_dim == 0) throw Error(ErrorCode::ConfigInvalid, "input_dim must be >= 1");
  if (latent_dim == 0) throw Error(ErrorCode::ConfigInvalid, "latent_dim must be >= 1");
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw Error(ErrorCode::ConfigInvalid, "beta must be a finite non-negative number");
  if (batch_size == 0) throw Error(ErrorCode::ConfigInvalid, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::ConfigInvalid, "learning rate must be positive");
  for (std::size_t h : hidden)
    if (h == 0) throw Error(ErrorCode::ConfigInvalid, "hidden widths must be positive");
}

namespace {

std::size_t head_width(const TrainConfig& c) {
  return c.kind == ModelKind::AE ? c.latent_dim : 2 * c.latent_dim;
}

void require_width(const Matrix& m, std::size_t width, const char* what) {
  if (m.cols() != width)
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + " width " + std::to_string(m.cols()) +
                                              " != expected " + std::to_string(width));
}

}  // namespace

ModelCheckpoint ModelCheckpoint::initialize(const TrainConfig& config, std::mt19937_64& rng) {
  config.validate();
  ModelCheckpoint ckpt;
  ckpt.config = config;
  std::vector<std::size_t> enc{config.input_dim};
  enc.insert(enc.end(), config.hidden.begin(), config.hidden.end());
  enc.push_back(head_width(config));
  std::vector<std::size_t> dec{config.latent_dim};
  dec.insert(dec.end(), config.hidden.rbegin(), config.hidden.rend());
  dec.push_back(config.input_dim);
  ckpt.encoder = DenseNet::make_mlp(enc, rng);
  ckpt.decoder = DenseNet::make_mlp(dec, rng);
  return ckpt;
}

ModelCheckpoint ModelCheckpoint::initialize(const TrainConfig& config) {
  std::mt19937_64 rng(config.seed);
  return initialize(config, rng);
}

void ModelCheckpoint::validate() const {
  config.validate();
  encoder.validate();
  decoder.validate();
  if (encoder.in_dim() != config.input_dim || encoder.out_dim() != head_width(config))
    throw Error(ErrorCode::ShapeMismatch, "encoder shape does not match config");
  if (decoder.in_dim() != config.latent_dim || decoder.out_dim() != config.input_dim)
    throw Error(ErrorCode::ShapeMismatch, "decoder shape does not match config");
}

GaussianCode encode(const ModelCheckpoint& ckpt, std::span<const double> x) {
  if (x.size() != ckpt.input_dim())
    throw Error(ErrorCode::ShapeMismatch, "encode: input length does not match model");
  Vector out = ckpt.encoder.forward(x);
  const std::size_t m = ckpt.latent_dim();
  GaussianCode code;
  code.mean.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(m));
  if (ckpt.kind() == ModelKind::BVAE)
    code.log_variance = Vector(out.begin() + static_cast<std::ptrdiff_t>(m), out.end());
  return code;
}

CodeBatch encode_batch(const ModelCheckpoint& ckpt, const Matrix& inputs) {
  require_width(inputs, ckpt.input_dim(), "encode input");
  const Matrix out = ckpt.encoder.forward(inputs);
  const std::size_t m = ckpt.latent_dim();
  CodeBatch codes;
  if (ckpt.kind() == ModelKind::AE) {
    codes.mean = out;
    return codes;
  }
  codes.mean = Matrix(out.rows(), m);
  codes.log_variance = Matrix(out.rows(), m);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const auto row = out.row(r);
    std::copy(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(m), codes.mean.row(r).begin());
    std::copy(row.begin() + static_cast<std::ptrdiff_t>(m), row.end(), codes.log_variance.row(r).begin());
  }
  return codes;
}

Vector decode(const ModelCheckpoint& ckpt, std::span<const double> z) {
  if (z.size() != ckpt.latent_dim())
    throw Error(ErrorCode::ShapeMismatch, "decode: latent length does not match model");
  return ckpt.decoder.forward(z);
}

Matrix decode_batch(const ModelCheckpoint& ckpt, const Matrix& latents) {
  require_width(latents, ckpt.latent_dim(), "decode input");
  return ckpt.decoder.forward(latents);
}

double gaussian_kl(double mu, double log_variance) {
  return 0.5 * (mu * mu + std::exp(log_variance) - log_variance - 1.0);
}

namespace {

struct ForwardState {
  Tape encoder_tape;
  Tape decoder_tape;
  Matrix encoder_out;
  Matrix latent;
  Matrix reconstruction;
  LossTerms terms;
};

ForwardState run_forward(const ModelCheckpoint& ckpt, const Matrix& inputs, double beta,
                         const Matrix& noise, bool record) {
  require_width(inputs, ckpt.input_dim(), "loss input");
  const bool variational = ckpt.kind() == ModelKind::BVAE;
  const std::size_t m = ckpt.latent_dim();
  const std::size_t batch = inputs.rows();
  if (variational && (noise.rows() != batch || noise.cols() != m))
    throw Error(ErrorCode::ShapeMismatch, "noise must be batch x latent_dim");

  ForwardState s;
  s.encoder_out = ckpt.encoder.forward(inputs, record ? &s.encoder_tape : nullptr);
  s.latent = Matrix(batch, m);
  double kl = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto head = s.encoder_out.row(b);
    auto z = s.latent.row(b);
    for (std::size_t i = 0; i < m; ++i) {
      if (variational) {
        const double mu = head[i], lv = head[m + i];
        z[i] = mu + std::exp(0.5 * lv) * noise(b, i);
        kl += gaussian_kl(mu, lv);
      } else {
        z[i] = head[i];
      }
    }
  }
  s.reconstruction = ckpt.decoder.forward(s.latent, record ? &s.decoder_tape : nullptr);
  double recon = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const double d = inputs.data()[i] - s.reconstruction.data()[i];
    recon += d * d;
  }
  const double effective_beta = variational ? beta : 0.0;
  s.terms.reconstruction = recon;
  s.terms.kl = variational ? kl : 0.0;
  s.terms.total = recon + effective_beta * s.terms.kl;
  s.terms.batch = batch;
  return s;
}

}  // namespace

LossTerms loss(const ModelCheckpoint& ckpt, const Matrix& inputs, double beta, const Matrix& noise) {
  return run_forward(ckpt, inputs, beta, noise, false).terms;
}

LossGradients loss_gradients(const ModelCheckpoint& ckpt, const Matrix& inputs, double beta,
                             const Matrix& noise) {
  ForwardState s = run_forward(ckpt, inputs, beta, noise, true);
  const bool variational = ckpt.kind() == ModelKind::BVAE;
  const double effective_beta = variational ? beta : 0.0;
  const std::size_t m = ckpt.latent_dim();
  const std::size_t batch = inputs.rows();

  Matrix d_recon(batch, ckpt.input_dim());
  for (std::size_t i = 0; i < inputs.size(); ++i)
    d_recon.data()[i] = -2.0 * (inputs.data()[i] - s.reconstruction.data()[i]);

  LossGradients out;
  out.terms = s.terms;
  out.decoder = ckpt.decoder.backward(s.decoder_tape, d_recon);
  const Matrix& d_latent = out.decoder.input;

  Matrix d_head(batch, ckpt.encoder.out_dim());
  for (std::size_t b = 0; b < batch; ++b) {
    const auto head = s.encoder_out.row(b);
    const auto dz = d_latent.row(b);
    auto dh = d_head.row(b);
    for (std::size_t i = 0; i < m; ++i) {
      if (variational) {
        const double mu = head[i], lv = head[m + i];
        const double sigma = std::exp(0.5 * lv);
        dh[i] = dz[i] + effective_beta * mu;
        dh[m + i] = dz[i] * noise(b, i) * 0.5 * sigma + effective_beta * 0.5 * (sigma * sigma - 1.0);
      } else {
        dh[i] = dz[i];
      }
    }
  }
  out.encoder = ckpt.encoder.backward(s.encoder_tape, d_head);
  return out;
}

}  // namespace semprobe

#pragma once

#include <random>
#include <string>
#include <vector>

#include "semprobe/embedding_table.hpp"
#include "semprobe/latent_model.hpp"
#include "semprobe/linalg.hpp"

namespace semprobe::fixture {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.flat()) v = n(rng);
  return m;
}

inline Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

// Single linear layer each way. `enc` is (m or 2m) x n, `dec` is n x m.
inline ModelCheckpoint linear_model(ModelKind kind, Matrix enc, Vector enc_bias, Matrix dec,
                                    Vector dec_bias) {
  ModelCheckpoint ckpt;
  ckpt.config.kind = kind;
  ckpt.config.input_dim = enc.cols();
  ckpt.config.latent_dim = dec.cols();
  ckpt.config.hidden = {};
  ckpt.encoder = DenseNet({DenseLayer{std::move(enc), std::move(enc_bias), Activation::Linear}});
  ckpt.decoder = DenseNet({DenseLayer{std::move(dec), std::move(dec_bias), Activation::Linear}});
  ckpt.validate();
  return ckpt;
}

inline ModelCheckpoint identity_ae(std::size_t n) {
  return linear_model(ModelKind::AE, identity(n), Vector(n, 0.0), identity(n), Vector(n, 0.0));
}

inline EmbeddingTable table_of(const std::vector<std::pair<std::string, Vector>>& rows) {
  std::vector<std::string> words;
  std::vector<Vector> vecs;
  for (const auto& [w, v] : rows) {
    words.push_back(w);
    vecs.push_back(v);
  }
  return EmbeddingTable(std::move(words), Matrix::from_rows(vecs));
}

inline EmbeddingTable random_table(std::size_t v, std::size_t n, std::mt19937_64& rng) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < v; ++i) words.push_back("w" + std::to_string(i));
  return EmbeddingTable(std::move(words), random_matrix(v, n, rng));
}

}  // namespace semprobe::fixture

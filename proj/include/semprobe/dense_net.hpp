#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "semprobe/linalg.hpp"

namespace semprobe {

enum class Activation { Linear, LeakyRelu };

std::string_view activation_name(Activation a);
Activation activation_from_name(std::string_view name);

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::Linear;

  std::size_t in_dim() const { return weights.cols(); }
  std::size_t out_dim() const { return weights.rows(); }
};

/// Cached per-layer inputs and pre-activations of a batched forward pass.
struct Tape {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;
};

/// Gradients with the same layout as the network's layers.
struct NetGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> bias;
  Matrix input;  // d loss / d input, batch x in_dim

  void scale(double factor);
};

/// Feed-forward stack of affine layers. Rows of every batch matrix are
/// samples. Evaluation is const and may be shared across threads.
class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<DenseLayer> layers, double leaky_slope = 0.01);

  /// Hidden layers use leaky ReLU, the output layer is linear. Weights are
  /// drawn from U(-sqrt(6/(in+out)), +sqrt(6/(in+out))), biases are zero.
  static DenseNet make_mlp(const std::vector<std::size_t>& widths, std::mt19937_64& rng,
                           double leaky_slope = 0.01);

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& mutable_layers() noexcept { return layers_; }
  double leaky_slope() const noexcept { return leaky_slope_; }
  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::size_t parameter_count() const;

  Matrix forward(const Matrix& input, Tape* tape = nullptr) const;
  Vector forward(std::span<const double> input) const;

  /// Reverse-mode gradients for the batch recorded on `tape` given
  /// d loss / d output. Throws StaleTape if the tape does not match.
  NetGradients backward(const Tape& tape, const Matrix& output_gradient) const;

  /// Flat views over all parameters, layer by layer (weights then bias).
  std::vector<std::span<double>> parameter_views();
  static std::vector<std::span<double>> gradient_views(NetGradients& grads);

  bool all_finite() const;
  /// Checks shape chaining. Throws ShapeMismatch.
  void validate() const;

 private:
  double activate(double x, Activation a) const {
    return a == Activation::LeakyRelu && x < 0.0 ? leaky_slope_ * x : x;
  }

  std::vector<DenseLayer> layers_;
  double leaky_slope_ = 0.01;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam moment accumulators for an ordered list of parameter tensors.
class AdamState {
 public:
  AdamState() = default;
  AdamState(AdamConfig config, const std::vector<std::span<double>>& params);

  /// params -= lr * m_hat / (sqrt(v_hat) + eps) with bias-corrected moments.
  void step(const std::vector<std::span<double>>& params,
            const std::vector<std::span<double>>& grads);

  std::uint64_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return config_; }

 private:
  AdamConfig config_;
  std::vector<Vector> first_;
  std::vector<Vector> second_;
  std::uint64_t t_ = 0;
};

}  // namespace semprobe

#include "semprobe/dense_net.hpp"

#include <cmath>
#include <string>

#include "semprobe/errors.hpp"

namespace semprobe {

std::string_view activation_name(Activation a) {
  return a == Activation::LeakyRelu ? "leaky_relu" : "linear";
}

Activation activation_from_name(std::string_view name) {
  if (name == "leaky_relu") return Activation::LeakyRelu;
  if (name == "linear") return Activation::Linear;
  throw Error(ErrorCode::CorruptTensor, "unknown activation '" + std::string(name) + "'");
}

void NetGradients::scale(double factor) {
  for (auto& w : weights)
    for (double& x : w.flat()) x *= factor;
  for (auto& b : bias)
    for (double& x : b) x *= factor;
}

DenseNet::DenseNet(std::vector<DenseLayer> layers, double leaky_slope)
    : layers_(std::move(layers)), leaky_slope_(leaky_slope) {
  validate();
}

DenseNet DenseNet::make_mlp(const std::vector<std::size_t>& widths, std::mt19937_64& rng,
                            double leaky_slope) {
  if (widths.size() < 2) throw Error(ErrorCode::ConfigInvalid, "an MLP needs at least two widths");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l], out = widths[l + 1];
    if (in == 0 || out == 0) throw Error(ErrorCode::ConfigInvalid, "layer widths must be positive");
    DenseLayer layer;
    layer.weights = Matrix(out, in);
    layer.bias.assign(out, 0.0);
    layer.activation = l + 2 == widths.size() ? Activation::Linear : Activation::LeakyRelu;
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : layer.weights.flat()) w = dist(rng);
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers), leaky_slope);
}

std::size_t DenseNet::in_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
std::size_t DenseNet::out_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

void DenseNet::validate() const {
  if (layers_.empty()) throw Error(ErrorCode::ShapeMismatch, "network has no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weights.empty() || layer.bias.size() != layer.out_dim())
      throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(l) + " has inconsistent shapes");
    if (l > 0 && layers_[l - 1].out_dim() != layer.in_dim())
      throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(l) + " does not chain");
  }
}

bool DenseNet::all_finite() const {
  for (const auto& l : layers_) {
    for (double w : l.weights.flat())
      if (!std::isfinite(w)) return false;
    for (double b : l.bias)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

Matrix DenseNet::forward(const Matrix& input, Tape* tape) const {
  if (input.cols() != in_dim())
    throw Error(ErrorCode::ShapeMismatch, "input width " + std::to_string(input.cols()) +
                                              " does not match network input " +
                                              std::to_string(in_dim()));
  if (tape) {
    tape->inputs.clear();
    tape->pre_activations.clear();
  }
  Matrix current = input;
  for (const auto& layer : layers_) {
    Matrix pre;
    affine_rows(current, layer.weights.transposed(), layer.bias, pre);
    Matrix post = pre;
    if (layer.activation != Activation::Linear)
      for (double& x : post.flat()) x = activate(x, layer.activation);
    if (tape) {
      tape->inputs.push_back(std::move(current));
      tape->pre_activations.push_back(std::move(pre));
    }
    current = std::move(post);
  }
  return current;
}

Vector DenseNet::forward(std::span<const double> input) const {
  if (input.size() != in_dim())
    throw Error(ErrorCode::ShapeMismatch, "input length does not match network input");
  Vector current(input.begin(), input.end());
  for (const auto& layer : layers_) {
    Vector next(layer.out_dim());
    for (std::size_t j = 0; j < next.size(); ++j)
      next[j] = activate(dot(layer.weights.row(j), current) + layer.bias[j], layer.activation);
    current = std::move(next);
  }
  return current;
}

NetGradients DenseNet::backward(const Tape& tape, const Matrix& output_gradient) const {
  if (tape.inputs.size() != layers_.size() || tape.pre_activations.size() != layers_.size())
    throw Error(ErrorCode::StaleTape, "tape does not match network depth");
  const std::size_t batch = output_gradient.rows();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (tape.inputs[l].cols() != layers_[l].in_dim() ||
        tape.pre_activations[l].cols() != layers_[l].out_dim() ||
        tape.inputs[l].rows() != batch || tape.pre_activations[l].rows() != batch)
      throw Error(ErrorCode::StaleTape, "tape shapes do not match layer " + std::to_string(l));
  }
  if (output_gradient.cols() != out_dim())
    throw Error(ErrorCode::ShapeMismatch, "output gradient width does not match network output");

  NetGradients grads;
  grads.weights.resize(layers_.size());
  grads.bias.resize(layers_.size());

  Matrix upstream = output_gradient;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    const Matrix& x = tape.inputs[l];
    const Matrix& pre = tape.pre_activations[l];
    if (layer.activation == Activation::LeakyRelu) {
      for (std::size_t i = 0; i < upstream.size(); ++i)
        if (pre.data()[i] < 0.0) upstream.data()[i] *= leaky_slope_;
    }
    Matrix dw(layer.out_dim(), layer.in_dim());
    Vector db(layer.out_dim(), 0.0);
    Matrix dx(batch, layer.in_dim());
    for (std::size_t b = 0; b < batch; ++b) {
      const auto g = upstream.row(b);
      const auto xb = x.row(b);
      auto dxb = dx.row(b);
      for (std::size_t j = 0; j < layer.out_dim(); ++j) {
        const double gj = g[j];
        db[j] += gj;
        axpy(gj, xb, dw.row(j));
        axpy(gj, layer.weights.row(j), dxb);
      }
    }
    grads.weights[l] = std::move(dw);
    grads.bias[l] = std::move(db);
    upstream = std::move(dx);
  }
  grads.input = std::move(upstream);
  return grads;
}

std::vector<std::span<double>> DenseNet::parameter_views() {
  std::vector<std::span<double>> views;
  for (auto& l : layers_) {
    views.emplace_back(l.weights.flat());
    views.emplace_back(l.bias);
  }
  return views;
}

std::vector<std::span<double>> DenseNet::gradient_views(NetGradients& grads) {
  std::vector<std::span<double>> views;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    views.emplace_back(grads.weights[l].flat());
    views.emplace_back(grads.bias[l]);
  }
  return views;
}

AdamState::AdamState(AdamConfig config, const std::vector<std::span<double>>& params)
    : config_(config) {
  for (const auto& p : params) {
    first_.emplace_back(p.size(), 0.0);
    second_.emplace_back(p.size(), 0.0);
  }
}

void AdamState::step(const std::vector<std::span<double>>& params,
                     const std::vector<std::span<double>>& grads) {
  if (params.size() != first_.size() || grads.size() != first_.size())
    throw Error(ErrorCode::ShapeMismatch, "adam: parameter list does not match state");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].size() != first_[i].size() || grads[i].size() != first_[i].size())
      throw Error(ErrorCode::ShapeMismatch, "adam: tensor " + std::to_string(i) + " changed shape");

  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    const auto g = grads[i];
    auto& m = first_[i];
    auto& v = second_[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace semprobe

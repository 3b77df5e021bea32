#include "lpvmpc/mlp.hpp"

#include <cmath>

namespace lpvmpc {

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::Linear: return "linear";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
  }
  return "linear";
}

Activation activation_from_string(const std::string& name) {
  if (name == "linear") return Activation::Linear;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw SchemaError("unknown activation '" + name + "'");
}

double activate(Activation activation, double a) {
  switch (activation) {
    case Activation::Linear: return a;
    case Activation::Tanh: return std::tanh(a);
    case Activation::Relu: return a > 0.0 ? a : 0.0;
  }
  return a;
}

double activation_derivative(Activation activation, double a) {
  switch (activation) {
    case Activation::Linear: return 1.0;
    case Activation::Tanh: {
      const double t = std::tanh(a);
      return 1.0 - t * t;
    }
    case Activation::Relu:
      if (a > 0.0) return 1.0;
      if (a < 0.0) return 0.0;
      return 0.5;
  }
  return 1.0;
}

namespace {

void apply_activation(Activation activation, Matrix& values) {
  switch (activation) {
    case Activation::Linear: return;
    case Activation::Tanh: values = values.array().tanh().matrix(); return;
    case Activation::Relu: values = values.cwiseMax(0.0); return;
  }
}

Matrix activation_slopes(Activation activation, const Matrix& pre) {
  switch (activation) {
    case Activation::Linear: return Matrix::Ones(pre.rows(), pre.cols());
    case Activation::Tanh: return (1.0 - pre.array().tanh().square()).matrix();
    case Activation::Relu:
      return pre.unaryExpr([](double a) { return activation_derivative(Activation::Relu, a); });
  }
  return Matrix::Ones(pre.rows(), pre.cols());
}

}  // namespace

Mlp::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

void Mlp::validate() const {
  if (layers_.empty()) throw ArgumentError("Mlp needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    if (layer.weights.rows() != layer.bias.size())
      throw ArgumentError("Mlp layer " + std::to_string(i) + ": weight rows != bias length");
    if (layer.weights.rows() == 0 || layer.weights.cols() == 0)
      throw ArgumentError("Mlp layer " + std::to_string(i) + " is empty");
    if (i > 0 && layers_[i - 1].weights.rows() != layer.weights.cols())
      throw ArgumentError("Mlp layer " + std::to_string(i) + ": input width does not chain");
    if (!layer.weights.allFinite() || !layer.bias.allFinite())
      throw ArgumentError("Mlp layer " + std::to_string(i) + " has non-finite parameters");
  }
  if (layers_.back().activation != Activation::Linear)
    throw ArgumentError("Mlp output layer must be linear");
}

Mlp Mlp::random(std::span<const Index> widths, Activation hidden, std::mt19937_64& rng) {
  require(widths.size() >= 2, "Mlp::random needs at least input and output widths");
  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths[i]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer layer;
    layer.weights.resize(widths[i + 1], widths[i]);
    layer.bias.resize(widths[i + 1]);
    for (Index r = 0; r < layer.weights.rows(); ++r)
      for (Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = dist(rng);
    for (Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = dist(rng);
    layer.activation = (i + 2 == widths.size()) ? Activation::Linear : hidden;
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

Mlp Mlp::linear(const Matrix& weights, const Vector& bias) {
  return Mlp({Layer{weights, bias, Activation::Linear}});
}

Vector Mlp::forward(const Vector& z) const {
  if (z.size() != input_width())
    throw ArgumentError("Mlp::forward: input has " + std::to_string(z.size()) + " entries, expected " +
                        std::to_string(input_width()));
  Vector value = z;
  for (const Layer& layer : layers_) {
    Vector pre = layer.weights * value + layer.bias;
    for (Index i = 0; i < pre.size(); ++i) pre(i) = activate(layer.activation, pre(i));
    value = std::move(pre);
  }
  return value;
}

// Forward-mode accumulation: the running Jacobian of the latent value with
// respect to the input is pushed through each layer.
Matrix Mlp::jacobian(const Vector& z) const {
  if (z.size() != input_width())
    throw ArgumentError("Mlp::jacobian: input has " + std::to_string(z.size()) + " entries, expected " +
                        std::to_string(input_width()));
  Vector value = z;
  Matrix tangent = Matrix::Identity(z.size(), z.size());
  for (const Layer& layer : layers_) {
    Vector pre = layer.weights * value + layer.bias;
    tangent = layer.weights * tangent;
    if (layer.activation != Activation::Linear) {
      for (Index i = 0; i < pre.size(); ++i) {
        tangent.row(i) *= activation_derivative(layer.activation, pre(i));
        pre(i) = activate(layer.activation, pre(i));
      }
    }
    value = std::move(pre);
  }
  return tangent;
}

Matrix Mlp::forward_batch(const Matrix& z) const {
  if (z.rows() != input_width()) throw ArgumentError("Mlp::forward_batch: input width mismatch");
  Matrix value = z;
  for (const Layer& layer : layers_) {
    Matrix pre = layer.weights * value;
    pre.colwise() += layer.bias;
    apply_activation(layer.activation, pre);
    value = std::move(pre);
  }
  return value;
}

Matrix Mlp::forward_batch(const Matrix& z, MlpCache& cache) const {
  if (z.rows() != input_width()) throw ArgumentError("Mlp::forward_batch: input width mismatch");
  cache.inputs.resize(layers_.size());
  cache.preactivations.resize(layers_.size());
  Matrix value = z;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    cache.inputs[i] = value;
    Matrix pre = layer.weights * value;
    pre.colwise() += layer.bias;
    cache.preactivations[i] = pre;
    apply_activation(layer.activation, pre);
    value = std::move(pre);
  }
  return value;
}

Matrix Mlp::backward_batch(const MlpCache& cache, const Matrix& d_output, std::span<double> grad) const {
  if (static_cast<Index>(grad.size()) != parameter_count())
    throw ArgumentError("Mlp::backward_batch: gradient buffer has wrong size");

  // Offsets of each layer's parameter block in the flat layout.
  std::vector<Index> offsets(layers_.size());
  Index offset = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    offsets[i] = offset;
    offset += layers_[i].weights.size() + layers_[i].bias.size();
  }

  Matrix delta = d_output;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& layer = layers_[li];
    if (layer.activation != Activation::Linear)
      delta = delta.cwiseProduct(activation_slopes(layer.activation, cache.preactivations[li]));

    const Index rows = layer.weights.rows();
    const Index cols = layer.weights.cols();
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> d_weights(
        grad.data() + offsets[li], rows, cols);
    Eigen::Map<Vector> d_bias(grad.data() + offsets[li] + rows * cols, rows);
    d_weights.noalias() += delta * cache.inputs[li].transpose();
    d_bias.noalias() += delta.rowwise().sum();

    delta = layer.weights.transpose() * delta;
  }
  return delta;
}

Index Mlp::parameter_count() const {
  Index count = 0;
  for (const Layer& layer : layers_) count += layer.weights.size() + layer.bias.size();
  return count;
}

Vector Mlp::parameters() const {
  Vector out(parameter_count());
  Index k = 0;
  for (const Layer& layer : layers_) {
    for (Index r = 0; r < layer.weights.rows(); ++r)
      for (Index c = 0; c < layer.weights.cols(); ++c) out(k++) = layer.weights(r, c);
    for (Index r = 0; r < layer.bias.size(); ++r) out(k++) = layer.bias(r);
  }
  return out;
}

void Mlp::set_parameters(std::span<const double> values) {
  if (static_cast<Index>(values.size()) != parameter_count())
    throw ArgumentError("Mlp::set_parameters: wrong parameter count");
  std::size_t k = 0;
  for (Layer& layer : layers_) {
    for (Index r = 0; r < layer.weights.rows(); ++r)
      for (Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = values[k++];
    for (Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = values[k++];
  }
}

}  // namespace lpvmpc

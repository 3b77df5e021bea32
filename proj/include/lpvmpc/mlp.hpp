#pragma once

#include "lpvmpc/common.hpp"

#include <random>
#include <span>
#include <string>
#include <vector>

namespace lpvmpc {

enum class Activation { Linear, Tanh, Relu };

std::string to_string(Activation activation);
Activation activation_from_string(const std::string& name);

double activate(Activation activation, double a);

/// Derivative of the activation. For Relu the kink at 0 returns 0.5, the
/// midpoint of the one-sided limits.
double activation_derivative(Activation activation, double a);

struct Layer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::Linear;
};

/// Intermediate values of a batched forward pass, kept for backpropagation.
/// inputs[i] is the input of layer i, preactivations[i] its affine output.
struct MlpCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> preactivations;
};

/// Feedforward network: affine layers, each followed by its activation. The
/// output layer is always linear.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<Layer> layers);

  /// Layer widths {in, hidden..., out}, hidden layers use `hidden`. Weights and
  /// biases are drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static Mlp random(std::span<const Index> widths, Activation hidden, std::mt19937_64& rng);

  /// Single affine layer y = W z + b.
  static Mlp linear(const Matrix& weights, const Vector& bias);

  Index input_width() const { return layers_.front().weights.cols(); }
  Index output_width() const { return layers_.back().bias.size(); }
  const std::vector<Layer>& layers() const { return layers_; }
  bool empty() const { return layers_.empty(); }

  Vector forward(const Vector& z) const;
  Matrix jacobian(const Vector& z) const;

  /// Column-batched evaluation; each column of `z` is one input.
  Matrix forward_batch(const Matrix& z) const;
  Matrix forward_batch(const Matrix& z, MlpCache& cache) const;

  /// Reverse pass for a batch. Accumulates parameter gradients into
  /// `grad` (layout of parameters()) and returns d(loss)/d(input).
  Matrix backward_batch(const MlpCache& cache, const Matrix& d_output, std::span<double> grad) const;

  Index parameter_count() const;
  /// Flattened parameters: per layer, weights row-major followed by bias.
  Vector parameters() const;
  void set_parameters(std::span<const double> values);

 private:
  void validate() const;

  std::vector<Layer> layers_;
};

}  // namespace lpvmpc

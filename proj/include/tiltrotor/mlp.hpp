#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace tiltrotor {

/// Fully connected network with tanh hidden layers and a linear output layer.
/// All weights and biases live in one flat vector, layer by layer (W then b),
/// with W stored row-major [out x in].
class Mlp {
 public:
  /// Per-batch activations kept for the backward pass.
  struct Workspace {
    std::size_t batch = 0;
    std::vector<std::vector<double>> activations;  ///< [0] = input, back() = output
    std::vector<double> delta_a;
    std::vector<double> delta_b;

    std::span<const double> output() const { return activations.back(); }
  };

  Mlp() = default;
  explicit Mlp(std::vector<std::size_t> layer_sizes);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  /// Orthogonal weights (gain sqrt(2) on hidden layers, output_gain on the last
  /// layer), zero biases.
  void initialize(std::mt19937_64& rng, double output_gain);

  std::span<double> bias(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<const double> bias(std::size_t layer) const;

  void forward(std::span<const double> input, std::size_t batch, Workspace& ws) const;
  /// Accumulates d(loss)/d(params) into grad given d(loss)/d(output).
  void backward(Workspace& ws, std::span<const double> d_output, std::span<double> grad) const;

  bool finite() const;

 private:
  std::size_t layer_count() const { return sizes_.size() - 1; }

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;  ///< start of W for each layer
  std::vector<double> params_;
};

}  // namespace tiltrotor

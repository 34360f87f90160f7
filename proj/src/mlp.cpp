#include "tiltrotor/mlp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "tiltrotor/kernels.hpp"

namespace tiltrotor {

Mlp::Mlp(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

std::span<const double> Mlp::weights(std::size_t layer) const {
  return std::span<const double>(params_).subspan(offsets_[layer], sizes_[layer + 1] * sizes_[layer]);
}

std::span<const double> Mlp::bias(std::size_t layer) const {
  return std::span<const double>(params_).subspan(offsets_[layer] + sizes_[layer + 1] * sizes_[layer],
                                                  sizes_[layer + 1]);
}

std::span<double> Mlp::bias(std::size_t layer) {
  return std::span<double>(params_).subspan(offsets_[layer] + sizes_[layer + 1] * sizes_[layer],
                                            sizes_[layer + 1]);
}

void Mlp::initialize(std::mt19937_64& rng, double output_gain) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const auto rows = static_cast<Eigen::Index>(sizes_[l + 1]);
    const auto cols = static_cast<Eigen::Index>(sizes_[l]);
    const Eigen::Index n = std::max(rows, cols);
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) a(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    // Sign fix so the distribution is uniform over orthogonal matrices.
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j)
      if (r(j, j) < 0.0) q.col(j) *= -1.0;

    const double gain = (l + 1 == layer_count()) ? output_gain : std::sqrt(2.0);
    double* w = params_.data() + offsets_[l];
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) w[i * cols + j] = gain * q(i, j);
    for (double& b : bias(l)) b = 0.0;
  }
}

void Mlp::forward(std::span<const double> input, std::size_t batch, Workspace& ws) const {
  if (input.size() != batch * input_size()) throw std::invalid_argument("Mlp::forward: bad input size");
  ws.batch = batch;
  ws.activations.resize(sizes_.size());
  ws.activations[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const kernels::AffineShape shape{batch, sizes_[l], sizes_[l + 1]};
    auto& out = ws.activations[l + 1];
    out.resize(batch * sizes_[l + 1]);
    kernels::affine_forward(ws.activations[l], weights(l), bias(l), out, shape);
    if (l + 1 < layer_count()) {
      for (double& v : out) v = std::tanh(v);
    }
  }
}

void Mlp::backward(Workspace& ws, std::span<const double> d_output, std::span<double> grad) const {
  const std::size_t batch = ws.batch;
  if (d_output.size() != batch * output_size() || grad.size() != params_.size()) {
    throw std::invalid_argument("Mlp::backward: bad gradient size");
  }
  ws.delta_a.assign(d_output.begin(), d_output.end());
  for (std::size_t l = layer_count(); l-- > 0;) {
    const kernels::AffineShape shape{batch, sizes_[l], sizes_[l + 1]};
    const std::size_t w_size = sizes_[l + 1] * sizes_[l];
    auto dw = grad.subspan(offsets_[l], w_size);
    auto db = grad.subspan(offsets_[l] + w_size, sizes_[l + 1]);
    kernels::affine_backward_params(ws.delta_a, ws.activations[l], dw, db, shape);
    if (l == 0) break;
    ws.delta_b.resize(batch * sizes_[l]);
    kernels::affine_backward_input(ws.delta_a, weights(l), ws.delta_b, shape);
    // Through tanh of the previous layer: d/dz tanh(z) = 1 - a^2.
    const auto& a = ws.activations[l];
    for (std::size_t i = 0; i < ws.delta_b.size(); ++i) ws.delta_b[i] *= 1.0 - a[i] * a[i];
    std::swap(ws.delta_a, ws.delta_b);
  }
}

bool Mlp::finite() const {
  for (const double v : params_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace tiltrotor

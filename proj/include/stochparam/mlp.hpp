#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "stochparam/rng.hpp"

namespace stochparam {

/// Fully connected tanh network with a linear output layer.
///
/// Parameters live in one flat vector in layer order: for each layer the
/// weight matrix (row-major, fan_out x fan_in) followed by its bias vector.
/// Batches are column-major: one sample per column.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t output_dim);

  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t n_layers() const { return sizes_.size() - 1; }
  std::size_t n_params() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  /// Offset of layer l's weight block in the flat vector; its bias follows it.
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + sizes_[layer] * sizes_[layer + 1];
  }

  /// Gaussian weights with variance gain^2 / fan_in for hidden layers and
  /// head_gain^2 / fan_in for the output layer; zero biases.
  void init_random(RngStream& rng, double gain = 1.0, double head_gain = 0.1);

  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // activations[0] is the input batch
  };

  /// outputs = f(inputs); fills `cache` when non-null for a later backward pass.
  void forward(const Eigen::MatrixXd& inputs, Eigen::MatrixXd& outputs, Cache* cache = nullptr) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;

  /// Accumulates d(loss)/d(params) into grad given d(loss)/d(outputs).
  void backward(const Cache& cache, const Eigen::MatrixXd& grad_outputs, std::span<double> grad) const;

 private:
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> weight(std::size_t l) const;
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const;

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// Adaptive-moment optimiser over a flat parameter vector.
class Adam {
 public:
  explicit Adam(std::size_t n_params, double step = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void update(std::span<double> params, std::span<const double> grad);

 private:
  double step_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace stochparam

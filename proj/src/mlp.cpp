#include "stochparam/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace stochparam {

Mlp::Mlp(std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t output_dim) {
  if (input_dim == 0 || output_dim == 0) throw std::invalid_argument("Mlp: dimensions must be positive");
  sizes_.push_back(input_dim);
  for (auto h : hidden) {
    if (h == 0) throw std::invalid_argument("Mlp: hidden layer of width 0");
    sizes_.push_back(h);
  }
  sizes_.push_back(output_dim);
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

void Mlp::init_random(RngStream& rng, double gain, double head_gain) {
  for (std::size_t l = 0; l < n_layers(); ++l) {
    const double g = (l + 1 == n_layers()) ? head_gain : gain;
    const double sd = g / std::sqrt(static_cast<double>(sizes_[l]));
    const std::size_t w0 = weight_offset(l), b0 = bias_offset(l);
    for (std::size_t i = w0; i < b0; ++i) params_[i] = sd * rng.normal();
    for (std::size_t i = b0; i < b0 + sizes_[l + 1]; ++i) params_[i] = 0.0;
  }
}

Eigen::Map<const Mlp::RowMajor> Mlp::weight(std::size_t l) const {
  return {params_.data() + weight_offset(l), static_cast<Eigen::Index>(sizes_[l + 1]),
          static_cast<Eigen::Index>(sizes_[l])};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t l) const {
  return {params_.data() + bias_offset(l), static_cast<Eigen::Index>(sizes_[l + 1])};
}

void Mlp::forward(const Eigen::MatrixXd& inputs, Eigen::MatrixXd& outputs, Cache* cache) const {
  if (static_cast<std::size_t>(inputs.rows()) != input_dim()) {
    throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  }
  if (cache) {
    cache->activations.resize(n_layers());
    cache->activations[0] = inputs;
  }
  Eigen::MatrixXd current = inputs;
  for (std::size_t l = 0; l < n_layers(); ++l) {
    Eigen::MatrixXd next = weight(l) * current;
    next.colwise() += bias(l);
    if (l + 1 < n_layers()) {
      // tanh through the vectorised exp
      next = 1.0 - 2.0 / ((2.0 * next.array()).exp() + 1.0);
      if (cache) cache->activations[l + 1] = next;
    }
    current = std::move(next);
  }
  outputs = std::move(current);
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
  Eigen::MatrixXd out;
  forward(Eigen::MatrixXd(input), out);
  return out.col(0);
}

void Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_outputs, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw std::invalid_argument("Mlp::backward: gradient size mismatch");
  Eigen::MatrixXd delta = grad_outputs;
  for (std::size_t l = n_layers(); l-- > 0;) {
    const Eigen::MatrixXd& a = cache.activations[l];
    Eigen::Map<RowMajor> gw(grad.data() + weight_offset(l), static_cast<Eigen::Index>(sizes_[l + 1]),
                            static_cast<Eigen::Index>(sizes_[l]));
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + bias_offset(l), static_cast<Eigen::Index>(sizes_[l + 1]));
    gw.noalias() += delta * a.transpose();
    gb += delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = weight(l).transpose() * delta;
      // tanh'(u) = 1 - tanh(u)^2, with tanh(u) the cached activation.
      delta = back.array() * (1.0 - a.array().square());
    }
  }
}

Adam::Adam(std::size_t n_params, double step, double beta1, double beta2, double eps)
    : step_(step), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n_params, 0.0), v_(n_params, 0.0) {}

void Adam::update(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("Adam::update: size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= step_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

}  // namespace stochparam

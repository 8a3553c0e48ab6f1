#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stochparam/dataset.hpp"
#include "stochparam/mlp.hpp"
#include "stochparam/rng.hpp"

namespace stochparam {

/// Covariance structure of the conditional mixture.
///  - Nonlocal: full covariance per component (dense lower-triangular factor).
///  - WeaklyLocal: diagonal covariance, conditioned on the full state.
///  - StronglyLocal: one scalar model per site, shared across sites.
enum class Locality { Nonlocal, WeaklyLocal, StronglyLocal };

std::string to_string(Locality mode);
Locality parse_locality(const std::string& name);

/// Gaussian mixture with per-component lower-triangular covariance factors
/// (Sigma_k = L_k L_k^T). Factors are stored densely, row-major, d x d each.
struct MixtureParams {
  std::size_t components = 0;
  std::size_t dim = 0;
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> factors;

  void resize(std::size_t k, std::size_t d);
  std::span<const double> mean(std::size_t k) const { return {means.data() + k * dim, dim}; }
  std::span<const double> factor(std::size_t k) const { return {factors.data() + k * dim * dim, dim * dim}; }
  /// Throws std::invalid_argument unless weights are a strict simplex and factors
  /// are lower-triangular with positive diagonals, all finite.
  void validate(double tol = 1e-9) const;
};

/// log sum_k w_k N(m; mu_k, L_k L_k^T), evaluated with a max-shifted log-sum-exp.
double log_likelihood(const MixtureParams& params, std::span<const double> m);

/// Draws a component by weight, then mu_k + L_k z with z standard normal.
void sample_mixture(const MixtureParams& params, RngStream& rng, std::span<double> out);
std::vector<double> sample_mixture(const MixtureParams& params, RngStream& rng);

/// Mean of the mixture, sum_k w_k mu_k.
std::vector<double> mixture_mean(const MixtureParams& params);

/// Per-coordinate affine standardisation.
struct Standardiser {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardiser identity(std::size_t dim);
  /// Fits to the rows of a row-major (n x dim) array selected by `rows` (all when empty).
  static Standardiser fit(std::span<const double> data, std::size_t dim, std::span<const std::size_t> rows = {});
  std::size_t dim() const { return mean.size(); }
};

struct MdnArchitecture {
  std::size_t input_dim = 8;
  std::size_t target_dim = 8;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t components = 8;
  Locality mode = Locality::Nonlocal;
  /// Lower bound added to every diagonal factor entry (standardised units).
  double min_scale = 1e-6;
};

/// Number of raw network outputs needed to parameterise the mixture.
std::size_t mdn_head_size(Locality mode, std::size_t target_dim, std::size_t components);

struct TrainConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t batch_size = 1024;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  /// Optional cap on the number of pairs used (0 = all), drawn uniformly at random.
  std::size_t max_pairs = 0;

  void validate() const;
};

struct TrainingHistory {
  double initial_validation = 0.0;
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::size_t best_epoch = 0;
  double best_validation = 0.0;
};

/// Raised when the training loss becomes non-finite.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t epoch, const std::string& what);
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

/// Mixture density network: MLP trunk with a Gaussian-mixture head, plus the
/// input and target standardisation it was trained with.
class MdnModel {
 public:
  MdnModel() = default;
  MdnModel(MdnArchitecture arch, RngStream& init_rng);

  const MdnArchitecture& arch() const { return arch_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  std::size_t head_size() const { return net_.output_dim(); }

  Standardiser input_standardiser;
  Standardiser target_standardiser;
  TrainingHistory history;
  std::uint64_t training_seed = 0;

  /// Mixture parameters of M | x in raw (de-standardised) units.
  MixtureParams forward(std::span<const double> x) const;
  /// Batched forward: one raw input per column; fills out[j] for column j.
  void forward_batch(const Eigen::MatrixXd& inputs, std::vector<MixtureParams>& out) const;

  /// Decodes standardised-space mixture parameters from one column of raw head outputs.
  void decode_head(std::span<const double> raw, MixtureParams& out) const;

  /// scale * mean NLL over a standardised batch (columns); adds gradients into grad when non-empty.
  double loss_and_grad(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, std::span<double> grad,
                       double scale = 1.0) const;

 private:
  void init_head_biases(RngStream& rng);

  MdnArchitecture arch_;
  Mlp net_;
};

/// Trains on generic regression pairs; the architecture's dims must match the data.
MdnModel train_mdn(const RegressionData& data, const TrainConfig& config, MdnArchitecture arch);
/// Trains on a pair dataset: full state for nonlocal/weakly local, pooled sites for strongly local.
MdnModel train_mdn(const PairDataset& data, const TrainConfig& config, Locality mode,
                   std::vector<std::size_t> hidden = {64, 64}, std::size_t components = 8);

/// Maximum relative error between analytic and central-difference gradients of
/// the mean NLL on a standardised batch.
double gradient_check(const MdnModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                      double step = 1e-5);

/// Point-estimate network with the MDN trunk, trained on mean squared error.
class DeterministicModel {
 public:
  DeterministicModel() = default;
  DeterministicModel(std::size_t input_dim, std::size_t target_dim, std::vector<std::size_t> hidden,
                     RngStream& init_rng);

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  Standardiser input_standardiser;
  Standardiser target_standardiser;
  TrainingHistory history;
  std::uint64_t training_seed = 0;

  std::vector<double> predict(std::span<const double> x) const;
  /// scale * mean squared error (standardised units) over a batch; adds gradients when non-empty.
  double loss_and_grad(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, std::span<double> grad,
                       double scale = 1.0) const;

 private:
  Mlp net_;
};

DeterministicModel train_deterministic(const RegressionData& data, const TrainConfig& config,
                                       std::vector<std::size_t> hidden = {64, 64});

}  // namespace stochparam

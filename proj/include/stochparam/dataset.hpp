#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace stochparam {

/// Provenance carried with a dataset.
struct DatasetMetadata {
  std::string system;
  std::uint64_t seed = 0;
  double spinup = 0.0;
};

/// Aligned pairs (X_n, M_n) with M_n = X_{n+1} - Psi0(X_n), stored row-major.
struct PairDataset {
  std::size_t dim = 0;
  double dt = 0.0;
  std::vector<double> x;
  std::vector<double> m;
  DatasetMetadata meta;

  std::size_t size() const { return dim == 0 ? 0 : x.size() / dim; }
  std::span<const double> state(std::size_t n) const { return {x.data() + n * dim, dim}; }
  std::span<const double> error(std::size_t n) const { return {m.data() + n * dim, dim}; }
  /// Component i of every X_n.
  std::vector<double> x_component(std::size_t i) const;
};

/// Plain regression pairs (inputs -> targets), row-major.
struct RegressionData {
  std::size_t input_dim = 0;
  std::size_t target_dim = 0;
  std::vector<double> inputs;
  std::vector<double> targets;

  std::size_t size() const { return input_dim == 0 ? 0 : inputs.size() / input_dim; }
};

/// Full-state pairs (X_n -> M_n).
RegressionData full_state_pairs(const PairDataset& data);
/// Per-site scalar pairs (X_{n,i} -> M_{n,i}) pooled over sites.
RegressionData pooled_site_pairs(const PairDataset& data);

}  // namespace stochparam

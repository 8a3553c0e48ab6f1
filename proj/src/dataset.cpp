#include "stochparam/dataset.hpp"

#include <stdexcept>

namespace stochparam {

std::vector<double> PairDataset::x_component(std::size_t i) const {
  if (i >= dim) throw std::out_of_range("PairDataset::x_component");
  std::vector<double> out(size());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = x[n * dim + i];
  return out;
}

RegressionData full_state_pairs(const PairDataset& data) {
  return {data.dim, data.dim, data.x, data.m};
}

RegressionData pooled_site_pairs(const PairDataset& data) {
  RegressionData out{1, 1, {}, {}};
  const std::size_t n = data.size();
  out.inputs.reserve(n * data.dim);
  out.targets.reserve(n * data.dim);
  for (std::size_t i = 0; i < data.dim; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      out.inputs.push_back(data.x[k * data.dim + i]);
      out.targets.push_back(data.m[k * data.dim + i]);
    }
  }
  return out;
}

}  // namespace stochparam

#include "stochparam/mdn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace stochparam {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double log_sum_exp(std::span<const double> a) {
  const double mx = *std::max_element(a.begin(), a.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : a) s += std::exp(v - mx);
  return mx + std::log(s);
}

// z = L^{-1} r for dense row-major lower-triangular L.
void forward_substitute(const double* L, const double* r, double* z, std::size_t d) {
  for (std::size_t i = 0; i < d; ++i) {
    double acc = r[i];
    for (std::size_t j = 0; j < i; ++j) acc -= L[i * d + j] * z[j];
    z[i] = acc / L[i * d + i];
  }
}

// v = L^{-T} z.
void back_substitute_transpose(const double* L, const double* z, double* v, std::size_t d) {
  for (std::size_t i = d; i-- > 0;) {
    double acc = z[i];
    for (std::size_t j = i + 1; j < d; ++j) acc -= L[j * d + i] * v[j];
    v[i] = acc / L[i * d + i];
  }
}

std::size_t scale_block(Locality mode, std::size_t d) {
  return mode == Locality::Nonlocal ? d * (d + 1) / 2 : d;
}

struct HeadWorkspace {
  std::vector<double> log_w, a, L, z, v, r, exp_s;
  void resize(std::size_t k, std::size_t d) {
    log_w.resize(k);
    a.resize(k);
    L.assign(k * d * d, 0.0);
    z.resize(k * d);
    v.resize(d);
    r.resize(d);
    exp_s.resize(k * d * d);
  }
};

// Negative log-likelihood of one standardised target under the head outputs
// `raw`; writes d(nll)/d(raw) into grad when non-null.
double head_nll(const double* raw, const double* target, Locality mode, std::size_t d, std::size_t K,
                double min_scale, double* grad, HeadWorkspace& ws) {
  ws.resize(K, d);
  const std::size_t ns = scale_block(mode, d);
  const double* logits = raw;
  const double* means = raw + K;
  const double* scales = raw + K + K * d;
  const double lse_logits = log_sum_exp({logits, K});
  for (std::size_t k = 0; k < K; ++k) ws.log_w[k] = logits[k] - lse_logits;

  for (std::size_t k = 0; k < K; ++k) {
    double* L = ws.L.data() + k * d * d;
    double* es = ws.exp_s.data() + k * d * d;
    const double* s = scales + k * ns;
    if (mode == Locality::Nonlocal) {
      std::size_t t = 0;
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j, ++t) {
          if (i == j) {
            es[i * d + i] = std::exp(s[t]);
            L[i * d + i] = es[i * d + i] + min_scale;
          } else {
            L[i * d + j] = s[t];
          }
        }
      }
    } else {
      for (std::size_t i = 0; i < d; ++i) {
        es[i * d + i] = std::exp(s[i]);
        L[i * d + i] = es[i * d + i] + min_scale;
      }
    }
    for (std::size_t i = 0; i < d; ++i) ws.r[i] = target[i] - means[k * d + i];
    double* z = ws.z.data() + k * d;
    forward_substitute(L, ws.r.data(), z, d);
    double quad = 0.0, logdet = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      quad += z[i] * z[i];
      logdet += std::log(L[i * d + i]);
    }
    ws.a[k] = ws.log_w[k] - 0.5 * static_cast<double>(d) * kLog2Pi - logdet - 0.5 * quad;
  }
  const double lp = log_sum_exp(ws.a);
  if (grad) {
    double* g_logits = grad;
    double* g_means = grad + K;
    double* g_scales = grad + K + K * d;
    for (std::size_t k = 0; k < K; ++k) {
      const double gamma = std::exp(ws.a[k] - lp);
      g_logits[k] = std::exp(ws.log_w[k]) - gamma;
      const double* L = ws.L.data() + k * d * d;
      const double* es = ws.exp_s.data() + k * d * d;
      const double* z = ws.z.data() + k * d;
      back_substitute_transpose(L, z, ws.v.data(), d);
      for (std::size_t i = 0; i < d; ++i) g_means[k * d + i] = -gamma * ws.v[i];
      double* gs = g_scales + k * ns;
      if (mode == Locality::Nonlocal) {
        std::size_t t = 0;
        for (std::size_t i = 0; i < d; ++i) {
          for (std::size_t j = 0; j <= i; ++j, ++t) {
            if (i == j) {
              gs[t] = -gamma * (ws.v[i] * z[i] - 1.0 / L[i * d + i]) * es[i * d + i];
            } else {
              gs[t] = -gamma * ws.v[i] * z[j];
            }
          }
        }
      } else {
        for (std::size_t i = 0; i < d; ++i) {
          gs[i] = -gamma * (ws.v[i] * z[i] - 1.0 / L[i * d + i]) * es[i * d + i];
        }
      }
    }
  }
  return -lp;
}

Eigen::MatrixXd standardise_columns(std::span<const double> rows, std::size_t dim,
                                    std::span<const std::size_t> idx, const Standardiser& st) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) {
    const double* row = rows.data() + idx[c] * dim;
    for (std::size_t i = 0; i < dim; ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = (row[i] - st.mean[i]) / st.scale[i];
    }
  }
  return out;
}

// Shared mini-batch Adam loop with validation-based early stopping.
template <typename Model>
void fit_network(Model& model, const RegressionData& data, const TrainConfig& config) {
  config.validate();
  const std::size_t n_all = data.size();
  if (n_all < 4) throw std::invalid_argument("training: need at least 4 pairs");
  RngStream rng(config.seed, StreamComponent::Training);

  std::vector<std::size_t> perm(n_all);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n_all; i-- > 1;) std::swap(perm[i], perm[rng.bits() % (i + 1)]);
  if (config.max_pairs > 0 && config.max_pairs < n_all) perm.resize(config.max_pairs);
  const std::size_t n = perm.size();
  const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(config.validation_fraction * static_cast<double>(n)));
  std::span<const std::size_t> val_idx(perm.data(), n_val);
  std::span<const std::size_t> train_idx(perm.data() + n_val, n - n_val);

  model.input_standardiser = Standardiser::fit(data.inputs, data.input_dim, train_idx);
  model.target_standardiser = Standardiser::fit(data.targets, data.target_dim, train_idx);
  const Eigen::MatrixXd x_train = standardise_columns(data.inputs, data.input_dim, train_idx, model.input_standardiser);
  const Eigen::MatrixXd y_train = standardise_columns(data.targets, data.target_dim, train_idx, model.target_standardiser);
  const Eigen::MatrixXd x_val = standardise_columns(data.inputs, data.input_dim, val_idx, model.input_standardiser);
  const Eigen::MatrixXd y_val = standardise_columns(data.targets, data.target_dim, val_idx, model.target_standardiser);

  auto validation_loss = [&]() {
    const Eigen::Index chunk = 8192;
    double total = 0.0;
    for (Eigen::Index c0 = 0; c0 < x_val.cols(); c0 += chunk) {
      const Eigen::Index w = std::min(chunk, x_val.cols() - c0);
      total += model.loss_and_grad(x_val.middleCols(c0, w), y_val.middleCols(c0, w), {}) * static_cast<double>(w);
    }
    return total / static_cast<double>(x_val.cols());
  };

  auto& history = model.history;
  history = TrainingHistory{};
  history.initial_validation = validation_loss();
  history.best_validation = history.initial_validation;
  model.training_seed = config.seed;

  std::span<double> params = model.net().params();
  std::vector<double> best(params.begin(), params.end());
  std::vector<double> grad(params.size());
  Adam adam(params.size(), config.step_size, config.beta1, config.beta2);
  const std::size_t n_train = train_idx.size();
  std::vector<Eigen::Index> order(n_train);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::MatrixXd xb, yb;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    for (std::size_t i = n_train; i-- > 1;) std::swap(order[i], order[rng.bits() % (i + 1)]);
    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < n_train; b0 += config.batch_size) {
      const std::size_t bs = std::min(config.batch_size, n_train - b0);
      xb.resize(x_train.rows(), static_cast<Eigen::Index>(bs));
      yb.resize(y_train.rows(), static_cast<Eigen::Index>(bs));
      for (std::size_t c = 0; c < bs; ++c) {
        xb.col(static_cast<Eigen::Index>(c)) = x_train.col(order[b0 + c]);
        yb.col(static_cast<Eigen::Index>(c)) = y_train.col(order[b0 + c]);
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = model.loss_and_grad(xb, yb, grad);
      if (!std::isfinite(loss)) throw TrainingError(epoch, "training loss became non-finite");
      epoch_loss += loss * static_cast<double>(bs);
      adam.update(params, grad);
    }
    history.train_loss.push_back(epoch_loss / static_cast<double>(n_train));
    const double val = validation_loss();
    if (!std::isfinite(val)) throw TrainingError(epoch, "validation loss became non-finite");
    history.validation_loss.push_back(val);
    if (val < history.best_validation) {
      history.best_validation = val;
      history.best_epoch = epoch + 1;
      std::copy(params.begin(), params.end(), best.begin());
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  std::copy(best.begin(), best.end(), params.begin());
}

}  // namespace

std::string to_string(Locality mode) {
  switch (mode) {
    case Locality::Nonlocal: return "nonlocal";
    case Locality::WeaklyLocal: return "weak";
    case Locality::StronglyLocal: return "strong";
  }
  return "unknown";
}

Locality parse_locality(const std::string& name) {
  if (name == "nonlocal") return Locality::Nonlocal;
  if (name == "weak" || name == "weakly-local") return Locality::WeaklyLocal;
  if (name == "strong" || name == "strongly-local") return Locality::StronglyLocal;
  throw std::invalid_argument("unknown locality mode '" + name + "'");
}

void MixtureParams::resize(std::size_t k, std::size_t d) {
  components = k;
  dim = d;
  weights.resize(k);
  means.resize(k * d);
  factors.assign(k * d * d, 0.0);
}

void MixtureParams::validate(double tol) const {
  if (components == 0 || dim == 0 || weights.size() != components || means.size() != components * dim ||
      factors.size() != components * dim * dim) {
    throw std::invalid_argument("MixtureParams: inconsistent sizes");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("MixtureParams: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > tol) throw std::invalid_argument("MixtureParams: weights do not sum to 1");
  for (double v : means) {
    if (!std::isfinite(v)) throw std::invalid_argument("MixtureParams: non-finite mean");
  }
  for (std::size_t k = 0; k < components; ++k) {
    const auto L = factor(k);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!(L[i * dim + i] > 0.0)) throw std::invalid_argument("MixtureParams: non-positive factor diagonal");
      for (std::size_t j = 0; j < dim; ++j) {
        if (!std::isfinite(L[i * dim + j])) throw std::invalid_argument("MixtureParams: non-finite factor");
        if (j > i && L[i * dim + j] != 0.0) throw std::invalid_argument("MixtureParams: factor not lower-triangular");
      }
    }
  }
}

double log_likelihood(const MixtureParams& params, std::span<const double> m) {
  const std::size_t d = params.dim;
  if (m.size() != d) throw std::invalid_argument("log_likelihood: dimension mismatch");
  std::vector<double> a(params.components), z(d), r(d);
  for (std::size_t k = 0; k < params.components; ++k) {
    const double* L = params.factors.data() + k * d * d;
    double logdet = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      if (!(L[i * d + i] > 0.0)) throw std::logic_error("log_likelihood: factor is not positive-definite");
      logdet += std::log(L[i * d + i]);
      r[i] = m[i] - params.means[k * d + i];
    }
    forward_substitute(L, r.data(), z.data(), d);
    double quad = 0.0;
    for (double v : z) quad += v * v;
    a[k] = std::log(params.weights[k]) - 0.5 * static_cast<double>(d) * kLog2Pi - logdet - 0.5 * quad;
  }
  return log_sum_exp(a);
}

void sample_mixture(const MixtureParams& params, RngStream& rng, std::span<double> out) {
  const std::size_t d = params.dim;
  if (out.size() != d) throw std::invalid_argument("sample_mixture: dimension mismatch");
  const double u = rng.uniform();
  std::size_t k = 0;
  double cum = params.weights[0];
  while (u >= cum && k + 1 < params.components) cum += params.weights[++k];
  double zbuf[16];
  std::vector<double> zvec;
  double* z = zbuf;
  if (d > 16) {
    zvec.resize(d);
    z = zvec.data();
  }
  for (std::size_t i = 0; i < d; ++i) z[i] = rng.normal();
  const double* L = params.factors.data() + k * d * d;
  for (std::size_t i = 0; i < d; ++i) {
    double acc = params.means[k * d + i];
    for (std::size_t j = 0; j <= i; ++j) acc += L[i * d + j] * z[j];
    out[i] = acc;
  }
}

std::vector<double> sample_mixture(const MixtureParams& params, RngStream& rng) {
  std::vector<double> out(params.dim);
  sample_mixture(params, rng, out);
  return out;
}

std::vector<double> mixture_mean(const MixtureParams& params) {
  std::vector<double> out(params.dim, 0.0);
  for (std::size_t k = 0; k < params.components; ++k) {
    for (std::size_t i = 0; i < params.dim; ++i) out[i] += params.weights[k] * params.means[k * params.dim + i];
  }
  return out;
}

Standardiser Standardiser::identity(std::size_t dim) {
  return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

Standardiser Standardiser::fit(std::span<const double> data, std::size_t dim, std::span<const std::size_t> rows) {
  if (dim == 0 || data.size() % dim != 0) throw std::invalid_argument("Standardiser::fit: bad shape");
  const std::size_t n_rows = rows.empty() ? data.size() / dim : rows.size();
  if (n_rows == 0) throw std::invalid_argument("Standardiser::fit: no rows");
  auto row = [&](std::size_t r) { return data.data() + (rows.empty() ? r : rows[r]) * dim; };
  Standardiser st{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  for (std::size_t r = 0; r < n_rows; ++r) {
    for (std::size_t i = 0; i < dim; ++i) st.mean[i] += row(r)[i];
  }
  for (auto& v : st.mean) v /= static_cast<double>(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) {
    for (std::size_t i = 0; i < dim; ++i) st.scale[i] += (row(r)[i] - st.mean[i]) * (row(r)[i] - st.mean[i]);
  }
  for (auto& v : st.scale) {
    v = std::sqrt(v / static_cast<double>(n_rows));
    // Constant coordinates keep unit scale.
    if (!(v > 1e-300)) v = 1.0;
  }
  return st;
}

std::size_t mdn_head_size(Locality mode, std::size_t target_dim, std::size_t components) {
  return components * (1 + target_dim + scale_block(mode, target_dim));
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction <= 0.5)) {
    throw std::invalid_argument("TrainConfig: validation_fraction must lie in (0, 0.5]");
  }
  if (!(step_size > 0.0)) throw std::invalid_argument("TrainConfig: step_size must be positive");
}

TrainingError::TrainingError(std::size_t epoch, const std::string& what)
    : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}

MdnModel::MdnModel(MdnArchitecture arch, RngStream& init_rng) : arch_(std::move(arch)) {
  if (arch_.mode == Locality::StronglyLocal && (arch_.input_dim != 1 || arch_.target_dim != 1)) {
    throw std::invalid_argument("MdnModel: strongly local models are scalar (input_dim = target_dim = 1)");
  }
  if (arch_.components == 0) throw std::invalid_argument("MdnModel: need at least one component");
  net_ = Mlp(arch_.input_dim, arch_.hidden, mdn_head_size(arch_.mode, arch_.target_dim, arch_.components));
  net_.init_random(init_rng);
  init_head_biases(init_rng);
  input_standardiser = Standardiser::identity(arch_.input_dim);
  target_standardiser = Standardiser::identity(arch_.target_dim);
}

void MdnModel::init_head_biases(RngStream& rng) {
  // Uniform weights, unit scales, means spread slightly around zero.
  const std::size_t K = arch_.components, d = arch_.target_dim;
  const std::size_t b0 = net_.bias_offset(net_.n_layers() - 1);
  auto p = net_.params();
  for (std::size_t k = 0; k < K; ++k) p[b0 + k] = 0.0;
  for (std::size_t i = 0; i < K * d; ++i) p[b0 + K + i] = 0.1 * rng.normal();
}

void MdnModel::decode_head(std::span<const double> raw, MixtureParams& out) const {
  const std::size_t K = arch_.components, d = arch_.target_dim;
  const std::size_t ns = scale_block(arch_.mode, d);
  out.resize(K, d);
  const double lse = log_sum_exp(raw.subspan(0, K));
  for (std::size_t k = 0; k < K; ++k) out.weights[k] = std::exp(raw[k] - lse);
  std::copy(raw.begin() + static_cast<std::ptrdiff_t>(K), raw.begin() + static_cast<std::ptrdiff_t>(K + K * d),
            out.means.begin());
  for (std::size_t k = 0; k < K; ++k) {
    const double* s = raw.data() + K + K * d + k * ns;
    double* L = out.factors.data() + k * d * d;
    if (arch_.mode == Locality::Nonlocal) {
      std::size_t t = 0;
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j, ++t) L[i * d + j] = (i == j) ? std::exp(s[t]) + arch_.min_scale : s[t];
      }
    } else {
      for (std::size_t i = 0; i < d; ++i) L[i * d + i] = std::exp(s[i]) + arch_.min_scale;
    }
  }
}

void MdnModel::forward_batch(const Eigen::MatrixXd& inputs, std::vector<MixtureParams>& out) const {
  const std::size_t d_in = arch_.input_dim, d = arch_.target_dim;
  if (static_cast<std::size_t>(inputs.rows()) != d_in) throw std::invalid_argument("MdnModel::forward: input dimension mismatch");
  Eigen::MatrixXd xs(inputs.rows(), inputs.cols());
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    for (std::size_t i = 0; i < d_in; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      xs(ii, c) = (inputs(ii, c) - input_standardiser.mean[i]) / input_standardiser.scale[i];
    }
  }
  Eigen::MatrixXd raw;
  net_.forward(xs, raw);
  if (!raw.allFinite()) throw std::runtime_error("MdnModel::forward: non-finite activations");
  out.resize(static_cast<std::size_t>(inputs.cols()));
  const auto& tm = target_standardiser.mean;
  const auto& ts = target_standardiser.scale;
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    auto& p = out[static_cast<std::size_t>(c)];
    decode_head({raw.col(c).data(), static_cast<std::size_t>(raw.rows())}, p);
    for (std::size_t k = 0; k < p.components; ++k) {
      for (std::size_t i = 0; i < d; ++i) {
        p.means[k * d + i] = tm[i] + ts[i] * p.means[k * d + i];
        for (std::size_t j = 0; j <= i; ++j) p.factors[k * d * d + i * d + j] *= ts[i];
      }
    }
  }
}

MixtureParams MdnModel::forward(std::span<const double> x) const {
  Eigen::MatrixXd in(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) in(static_cast<Eigen::Index>(i), 0) = x[i];
  std::vector<MixtureParams> out;
  forward_batch(in, out);
  return std::move(out[0]);
}

double MdnModel::loss_and_grad(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                               std::span<double> grad, double scale) const {
  const std::size_t K = arch_.components, d = arch_.target_dim;
  const auto B = inputs.cols();
  Mlp::Cache cache;
  Eigen::MatrixXd raw;
  net_.forward(inputs, raw, grad.empty() ? nullptr : &cache);
  Eigen::MatrixXd g_raw;
  if (!grad.empty()) g_raw.resize(raw.rows(), B);
  HeadWorkspace ws;
  double total = 0.0;
  for (Eigen::Index c = 0; c < B; ++c) {
    total += head_nll(raw.col(c).data(), targets.col(c).data(), arch_.mode, d, K, arch_.min_scale,
                      grad.empty() ? nullptr : g_raw.col(c).data(), ws);
  }
  const double factor = scale / static_cast<double>(B);
  if (!grad.empty()) {
    g_raw *= factor;
    net_.backward(cache, g_raw, grad);
  }
  return total * factor;
}

MdnModel train_mdn(const RegressionData& data, const TrainConfig& config, MdnArchitecture arch) {
  if (arch.input_dim != data.input_dim || arch.target_dim != data.target_dim) {
    throw std::invalid_argument("train_mdn: architecture does not match data dimensions");
  }
  RngStream init(config.seed, StreamComponent::Initialisation);
  MdnModel model(std::move(arch), init);
  fit_network(model, data, config);
  return model;
}

MdnModel train_mdn(const PairDataset& data, const TrainConfig& config, Locality mode,
                   std::vector<std::size_t> hidden, std::size_t components) {
  MdnArchitecture arch;
  arch.hidden = std::move(hidden);
  arch.components = components;
  arch.mode = mode;
  if (mode == Locality::StronglyLocal) {
    arch.input_dim = arch.target_dim = 1;
    return train_mdn(pooled_site_pairs(data), config, arch);
  }
  arch.input_dim = arch.target_dim = data.dim;
  return train_mdn(full_state_pairs(data), config, arch);
}

double gradient_check(const MdnModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                      double step) {
  std::vector<double> analytic(model.net().n_params(), 0.0);
  model.loss_and_grad(inputs, targets, analytic);
  MdnModel probe = model;
  auto p = probe.net().params();
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + step;
    const double up = probe.loss_and_grad(inputs, targets, {});
    p[i] = orig - step;
    const double down = probe.loss_and_grad(inputs, targets, {});
    p[i] = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

DeterministicModel::DeterministicModel(std::size_t input_dim, std::size_t target_dim,
                                       std::vector<std::size_t> hidden, RngStream& init_rng)
    : net_(input_dim, std::move(hidden), target_dim) {
  net_.init_random(init_rng);
  input_standardiser = Standardiser::identity(input_dim);
  target_standardiser = Standardiser::identity(target_dim);
}

std::vector<double> DeterministicModel::predict(std::span<const double> x) const {
  const std::size_t d_in = net_.input_dim(), d = net_.output_dim();
  if (x.size() != d_in) throw std::invalid_argument("DeterministicModel::predict: input dimension mismatch");
  Eigen::VectorXd xs(static_cast<Eigen::Index>(d_in));
  for (std::size_t i = 0; i < d_in; ++i) {
    xs(static_cast<Eigen::Index>(i)) = (x[i] - input_standardiser.mean[i]) / input_standardiser.scale[i];
  }
  const Eigen::VectorXd y = net_.forward(xs);
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = target_standardiser.mean[i] + target_standardiser.scale[i] * y(static_cast<Eigen::Index>(i));
  }
  return out;
}

double DeterministicModel::loss_and_grad(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                                         std::span<double> grad, double scale) const {
  Mlp::Cache cache;
  Eigen::MatrixXd out;
  net_.forward(inputs, out, grad.empty() ? nullptr : &cache);
  const Eigen::MatrixXd diff = out - targets;
  const double factor = scale / static_cast<double>(inputs.cols());
  if (!grad.empty()) net_.backward(cache, (2.0 * factor) * diff, grad);
  return factor * diff.squaredNorm();
}

DeterministicModel train_deterministic(const RegressionData& data, const TrainConfig& config,
                                       std::vector<std::size_t> hidden) {
  RngStream init(config.seed, StreamComponent::Initialisation);
  DeterministicModel model(data.input_dim, data.target_dim, std::move(hidden), init);
  fit_network(model, data, config);
  return model;
}

}  // namespace stochparam

#pragma once

// Fully connected network used as the mitigator: sigmoid hidden layers, an
// affine output layer, mean-square loss and Adam.
//
// Batches are stored column-wise: a d x B matrix holds B samples.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "qem/common.hpp"

namespace qem {

struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is dims[l+1] x dims[l]
  std::vector<Eigen::VectorXd> biases;

  std::vector<int> layer_dims() const {
    std::vector<int> dims;
    if (weights.empty()) return dims;
    dims.push_back(static_cast<int>(weights.front().cols()));
    for (const auto& w : weights) dims.push_back(static_cast<int>(w.rows()));
    return dims;
  }
  int input_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }
  int output_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.back().rows()); }
  std::size_t num_layers() const { return weights.size(); }

  std::size_t parameter_count() const {
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) k += weights[l].size() + biases[l].size();
    return k;
  }
};

inline std::vector<int> default_layer_dims(int d) { return {d, 100, 100, 100, d}; }

inline MlpParams zeros_like(const MlpParams& p) {
  MlpParams z;
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    z.weights.push_back(Eigen::MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
    z.biases.push_back(Eigen::VectorXd::Zero(p.biases[l].size()));
  }
  return z;
}

inline void check_layer_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw ConfigError("network needs at least an input and an output layer");
  for (int d : dims) {
    if (d < 1) throw ConfigError("layer widths must be positive");
  }
}

/// Uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
inline MlpParams init_mlp(const std::vector<int>& dims, std::uint64_t seed) {
  check_layer_dims(dims);
  Rng rng = make_stream(seed, 0x1417);
  MlpParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l], fan_out = dims[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return p;
}

inline double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

inline Eigen::MatrixXd forward_batch(const MlpParams& p, const Eigen::MatrixXd& x) {
  if (p.weights.empty()) throw DimensionError("empty network");
  if (x.rows() != p.input_dim()) {
    throw DimensionError("input dimension " + std::to_string(x.rows()) + " does not match network input " +
                         std::to_string(p.input_dim()));
  }
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    Eigen::MatrixXd u = p.weights[l] * a;
    u.colwise() += p.biases[l];
    if (l + 1 < p.num_layers()) u = u.unaryExpr([](double v) { return sigmoid(v); });
    a = std::move(u);
  }
  return a;
}

inline Eigen::VectorXd forward(const MlpParams& p, const Eigen::VectorXd& x) { return forward_batch(p, x); }

inline double mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw DimensionError("mse: shape mismatch");
  if (pred.size() == 0) throw DimensionError("mse: empty input");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

struct LossAndGradient {
  double loss = 0.0;
  MlpParams grad;
};

/// Batch-mean MSE and its exact gradient by backpropagation.
inline LossAndGradient backward(const MlpParams& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.cols() == 0) throw DimensionError("backward needs a non-empty batch");
  if (x.cols() != y.cols() || y.rows() != p.output_dim()) throw DimensionError("backward: batch shape mismatch");
  const std::size_t L = p.num_layers();
  std::vector<Eigen::MatrixXd> acts;  // acts[l] is the input of layer l
  acts.reserve(L + 1);
  acts.push_back(x);
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd u = p.weights[l] * acts.back();
    u.colwise() += p.biases[l];
    if (l + 1 < L) u = u.unaryExpr([](double v) { return sigmoid(v); });
    acts.push_back(std::move(u));
  }
  LossAndGradient out;
  const Eigen::MatrixXd diff = acts.back() - y;
  const double scale = 1.0 / static_cast<double>(diff.size());
  out.loss = diff.squaredNorm() * scale;
  out.grad = zeros_like(p);
  Eigen::MatrixXd delta = 2.0 * scale * diff;  // dLoss / d(pre-activation) of the current layer
  for (std::size_t l = L; l-- > 0;) {
    out.grad.weights[l].noalias() = delta * acts[l].transpose();
    out.grad.biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    const Eigen::MatrixXd& s = acts[l];  // sigmoid output of layer l-1
    Eigen::MatrixXd back = p.weights[l].transpose() * delta;
    delta = back.array() * s.array() * (1.0 - s.array());
  }
  return out;
}

struct AdamState {
  MlpParams m, v;
  std::uint64_t step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

inline AdamState make_adam_state(const MlpParams& p) { return {zeros_like(p), zeros_like(p), 0}; }

inline void adam_step(MlpParams& p, const MlpParams& g, AdamState& s, double lr) {
  if (s.m.num_layers() != p.num_layers() || g.num_layers() != p.num_layers()) {
    throw DimensionError("adam_step: shape mismatch");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(s.step));
  const auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
    v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEpsilon);
  };
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    update(p.weights[l], g.weights[l], s.m.weights[l], s.v.weights[l]);
    update(p.biases[l], g.biases[l], s.m.biases[l], s.v.biases[l]);
  }
}

struct TrainConfig {
  std::vector<int> hidden = {100, 100, 100};
  double learning_rate = 1e-3;
  int batch_size = 64;
  int max_epochs = 2000;
  int patience = 100;
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
};

inline void validate_train_config(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (c.max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
  if (c.patience < 1) throw ConfigError("patience must be >= 1");
  if (!(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
  for (int h : c.hidden) {
    if (h < 1) throw ConfigError("hidden widths must be positive");
  }
}

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double validation_mse = 0.0;
};

struct TrainResult {
  MlpParams params;  // from the best validation epoch
  std::vector<EpochRecord> history;  // epoch 0 is the untrained network
  int best_epoch = 0;
  double best_validation_mse = 0.0;
  std::size_t train_count = 0;
  std::size_t validation_count = 0;
};

/// Fisher-Yates with the library's own integer sampler, so the order is the
/// same on every standard library.
inline void deterministic_shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

inline Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& m, const std::vector<std::size_t>& idx, std::size_t begin,
                                      std::size_t end) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t k = begin; k < end; ++k) out.col(static_cast<Eigen::Index>(k - begin)) = m.col(static_cast<Eigen::Index>(idx[k]));
  return out;
}

/// Mini-batch Adam on (x, y) columns with early stopping on a held-out split.
/// When the split is empty the training loss drives model selection.
inline TrainResult train(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const TrainConfig& cfg) {
  validate_train_config(cfg);
  if (x.cols() == 0) throw ConfigError("cannot train on an empty dataset");
  if (x.cols() != y.cols()) throw DimensionError("inputs and labels disagree on sample count");
  const std::size_t count = static_cast<std::size_t>(x.cols());

  Rng rng = make_stream(cfg.seed, 0x7241);
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  deterministic_shuffle(order, rng);
  std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(count)));
  if (n_val >= count) n_val = count - 1;
  const std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  const Eigen::MatrixXd x_train = gather_columns(x, train_idx, 0, train_idx.size());
  const Eigen::MatrixXd y_train = gather_columns(y, train_idx, 0, train_idx.size());
  const Eigen::MatrixXd x_val = gather_columns(x, val_idx, 0, val_idx.size());
  const Eigen::MatrixXd y_val = gather_columns(y, val_idx, 0, val_idx.size());

  std::vector<int> dims{static_cast<int>(x.rows())};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(static_cast<int>(y.rows()));

  TrainResult result;
  result.train_count = train_idx.size();
  result.validation_count = n_val;
  MlpParams params = init_mlp(dims, cfg.seed);
  AdamState adam = make_adam_state(params);

  const auto score = [&](const MlpParams& p, double& train_mse, double& val_mse) {
    train_mse = mse(forward_batch(p, x_train), y_train);
    val_mse = n_val > 0 ? mse(forward_batch(p, x_val), y_val) : train_mse;
  };
  double tr0 = 0.0, va0 = 0.0;
  score(params, tr0, va0);
  result.history.push_back({0, tr0, va0});
  result.params = params;
  result.best_validation_mse = va0;
  result.best_epoch = 0;

  std::vector<std::size_t> batch_order(train_idx.size());
  std::iota(batch_order.begin(), batch_order.end(), std::size_t{0});
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    deterministic_shuffle(batch_order, rng);
    for (std::size_t start = 0; start < batch_order.size(); start += bs) {
      const std::size_t end = std::min(batch_order.size(), start + bs);
      const Eigen::MatrixXd xb = gather_columns(x_train, batch_order, start, end);
      const Eigen::MatrixXd yb = gather_columns(y_train, batch_order, start, end);
      const LossAndGradient lg = backward(params, xb, yb);
      if (!std::isfinite(lg.loss)) {
        throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                             " (learning_rate " + std::to_string(cfg.learning_rate) + ")");
      }
      adam_step(params, lg.grad, adam, cfg.learning_rate);
    }
    double tr = 0.0, va = 0.0;
    score(params, tr, va);
    if (!std::isfinite(tr) || !std::isfinite(va)) {
      throw NumericalError("training diverged: non-finite epoch loss at epoch " + std::to_string(epoch));
    }
    result.history.push_back({epoch, tr, va});
    if (va < result.best_validation_mse) {
      result.best_validation_mse = va;
      result.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints: JSON with weights stored row by row.

inline constexpr int kCheckpointFormatVersion = 1;

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"hidden", c.hidden},         {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs}, {"patience", c.patience},           {"validation_fraction", c.validation_fraction},
          {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.seed = j.value("seed", c.seed);
  validate_train_config(c);
  return c;
}

inline nlohmann::json checkpoint_to_json(const MlpParams& p, const TrainConfig& cfg, const std::string& fingerprint) {
  nlohmann::json weights = nlohmann::json::array(), biases = nlohmann::json::array();
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < p.weights[l].rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(p.weights[l].cols()));
      for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c) row[static_cast<std::size_t>(c)] = p.weights[l](r, c);
      rows.push_back(row);
    }
    weights.push_back(std::move(rows));
    biases.push_back(std::vector<double>(p.biases[l].data(), p.biases[l].data() + p.biases[l].size()));
  }
  return {{"format_version", kCheckpointFormatVersion},
          {"layer_dims", p.layer_dims()},
          {"weights", weights},
          {"biases", biases},
          {"train_config", train_config_to_json(cfg)},
          {"dataset_fingerprint", fingerprint}};
}

struct Checkpoint {
  MlpParams params;
  TrainConfig config;
  std::string dataset_fingerprint;
};

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format_version", -1) != kCheckpointFormatVersion) throw ConfigError("unsupported checkpoint version");
  const auto dims = j.at("layer_dims").get<std::vector<int>>();
  check_layer_dims(dims);
  const auto& weights = j.at("weights");
  const auto& biases = j.at("biases");
  if (weights.size() + 1 != dims.size() || biases.size() + 1 != dims.size()) {
    throw DimensionError("checkpoint layer count does not match layer_dims");
  }
  Checkpoint ck;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto& rows = weights[l];
    if (rows.size() != static_cast<std::size_t>(dims[l + 1])) throw DimensionError("checkpoint weight rows mismatch");
    Eigen::MatrixXd w(dims[l + 1], dims[l]);
    for (int r = 0; r < dims[l + 1]; ++r) {
      const auto row = rows[static_cast<std::size_t>(r)].get<std::vector<double>>();
      if (row.size() != static_cast<std::size_t>(dims[l])) throw DimensionError("checkpoint weight columns mismatch");
      for (int c = 0; c < dims[l]; ++c) w(r, c) = row[static_cast<std::size_t>(c)];
    }
    const auto b = biases[l].get<std::vector<double>>();
    if (b.size() != static_cast<std::size_t>(dims[l + 1])) throw DimensionError("checkpoint bias length mismatch");
    ck.params.weights.push_back(std::move(w));
    ck.params.biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size())));
  }
  ck.config = train_config_from_json(j.at("train_config"));
  ck.dataset_fingerprint = j.value("dataset_fingerprint", "");
  return ck;
}

}  // namespace qem

#pragma once

// Linear softmax classifier over a flat parameter vector, local SGD, and the
// real <-> complex packing used for analog transmission.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "otafl/error.hpp"
#include "otafl/rng.hpp"

namespace otafl {

/// Real parameter vector of length 2N.
using ModelVector = Eigen::VectorXd;
/// Complex transmission signal of length N.
using ComplexUpdate = Eigen::VectorXcd;

/// Labelled samples, one row of `features` per sample.
struct Dataset {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  int num_classes = 0;

  Dataset() = default;
  Dataset(Eigen::MatrixXd x, std::vector<int> y, int classes)
      : features(std::move(x)), labels(std::move(y)), num_classes(classes) {
    validate();
  }

  std::size_t size() const noexcept { return labels.size(); }
  int num_features() const noexcept { return static_cast<int>(features.cols()); }
  bool empty() const noexcept { return labels.empty(); }

  void validate() const {
    if (num_classes < 1) throw ConfigError("dataset: num_classes must be positive");
    if (static_cast<std::size_t>(features.rows()) != labels.size())
      throw ConfigError("dataset: feature rows and label count differ");
    for (int y : labels)
      if (y < 0 || y >= num_classes) throw ConfigError("dataset: label out of range");
  }
};

using LocalDataset = Dataset;

/// Parameter layout: class c owns entries [c*(F+1), (c+1)*(F+1)), bias last.
/// Odd parameter counts get one trailing zero pad so the vector splits into
/// real and imaginary halves.
struct ModelShape {
  int num_features = 0;
  int num_classes = 0;

  int param_count() const noexcept { return (num_features + 1) * num_classes; }
  int half_dim() const noexcept { return (param_count() + 1) / 2; }
  int full_dim() const noexcept { return 2 * half_dim(); }

  ModelVector zeros() const { return ModelVector::Zero(full_dim()); }
};

inline ModelShape shape_of(const Dataset& d) { return {d.num_features(), d.num_classes}; }

namespace detail {

inline void check_dims(const ModelVector& model, const Dataset& data) {
  const ModelShape s = shape_of(data);
  if (model.size() != s.full_dim())
    throw ConfigError("model dimension " + std::to_string(model.size()) +
                      " does not match dataset (expected " + std::to_string(s.full_dim()) + ")");
  if (data.empty()) throw ConfigError("empty dataset");
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMajor> weights(const ModelVector& model, const ModelShape& s) {
  return {model.data(), s.num_classes, s.num_features + 1};
}

/// n x C matrix of class probabilities.
inline Eigen::MatrixXd softmax_probs(const ModelVector& model, const Dataset& data) {
  const ModelShape s = shape_of(data);
  const auto w = weights(model, s);
  Eigen::MatrixXd z = data.features * w.leftCols(s.num_features).transpose();
  z.rowwise() += w.col(s.num_features).transpose();
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - mx).exp();
    z.row(i) /= z.row(i).sum();
  }
  return z;
}

}  // namespace detail

/// Mean softmax cross-entropy plus (l2/2)*||theta||^2 over the non-pad entries.
inline double loss(const ModelVector& model, const Dataset& data, double l2 = 0.0) {
  detail::check_dims(model, data);
  const ModelShape s = shape_of(data);
  const auto w = detail::weights(model, s);
  Eigen::MatrixXd z = data.features * w.leftCols(s.num_features).transpose();
  z.rowwise() += w.col(s.num_features).transpose();
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    const double lse = mx + std::log((z.row(i).array() - mx).exp().sum());
    total += lse - z(i, data.labels[static_cast<std::size_t>(i)]);
  }
  double value = total / static_cast<double>(data.size());
  if (l2 != 0.0) value += 0.5 * l2 * model.head(s.param_count()).squaredNorm();
  return value;
}

/// Exact gradient of `loss`; pad entries are zero.
inline ModelVector gradient(const ModelVector& model, const Dataset& batch, double l2 = 0.0) {
  detail::check_dims(model, batch);
  const ModelShape s = shape_of(batch);
  Eigen::MatrixXd p = detail::softmax_probs(model, batch);
  for (std::size_t i = 0; i < batch.size(); ++i) p(static_cast<Eigen::Index>(i), batch.labels[i]) -= 1.0;
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  ModelVector g = ModelVector::Zero(model.size());
  Eigen::Map<detail::RowMajor> gw(g.data(), s.num_classes, s.num_features + 1);
  gw.leftCols(s.num_features) = inv_n * (p.transpose() * batch.features);
  gw.col(s.num_features) = inv_n * p.colwise().sum().transpose();
  if (l2 != 0.0) g.head(s.param_count()) += l2 * model.head(s.param_count());
  return g;
}

/// Exact Hessian-vector product of `loss` at `model`.
inline ModelVector hessian_vector_product(const ModelVector& model, const Dataset& data,
                                          const ModelVector& v, double l2 = 0.0) {
  detail::check_dims(model, data);
  const ModelShape s = shape_of(data);
  const Eigen::MatrixXd p = detail::softmax_probs(model, data);
  const auto vw = detail::weights(v, s);
  Eigen::MatrixXd r = data.features * vw.leftCols(s.num_features).transpose();
  r.rowwise() += vw.col(s.num_features).transpose();
  // r_i <- diag(p_i) r_i - p_i (p_i . r_i)
  const Eigen::VectorXd dots = (p.array() * r.array()).rowwise().sum();
  r = (p.array() * r.array()).matrix() - (p.array().colwise() * dots.array()).matrix();

  const double inv_n = 1.0 / static_cast<double>(data.size());
  ModelVector h = ModelVector::Zero(model.size());
  Eigen::Map<detail::RowMajor> hw(h.data(), s.num_classes, s.num_features + 1);
  hw.leftCols(s.num_features) = inv_n * (r.transpose() * data.features);
  hw.col(s.num_features) = inv_n * r.colwise().sum().transpose();
  if (l2 != 0.0) h.head(s.param_count()) += l2 * v.head(s.param_count());
  return h;
}

/// Rows of `data` at `indices`, in the given order.
inline Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.num_classes = data.num_classes;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), data.features.cols());
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) =
        data.features.row(static_cast<Eigen::Index>(indices[r]));
    out.labels.push_back(data.labels[indices[r]]);
  }
  return out;
}

struct TrainingConfig {
  int tau = 5;
  double eta = 0.05;
  int batch_size = 100;
  /// Step decay: eta(t) = eta * lr_decay^floor(t / lr_step). lr_step = 0 keeps eta constant.
  double lr_decay = 1.0;
  int lr_step = 0;
  /// Ridge coefficient added to every local objective.
  double l2 = 0.0;

  double eta_at(int t) const {
    if (lr_step <= 0 || lr_decay == 1.0) return eta;
    return eta * std::pow(lr_decay, std::floor(static_cast<double>(t) / lr_step));
  }

  void validate(std::size_t dataset_size) const {
    if (tau < 1) throw ConfigError("training: tau must be >= 1");
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("training: eta must be finite and >= 0");
    if (batch_size < 1) throw ConfigError("training: batch_size must be >= 1");
    if (static_cast<std::size_t>(batch_size) > dataset_size)
      throw ConfigError("training: batch_size exceeds local dataset size");
    if (!(lr_decay > 0.0)) throw ConfigError("training: lr_decay must be positive");
    if (l2 < 0.0) throw ConfigError("training: l2 must be non-negative");
  }
};

/// Epoch-based sampling without replacement. Each batch is returned in
/// ascending index order so a full batch reproduces the dataset order.
class MinibatchSampler {
 public:
  MinibatchSampler(std::size_t n, std::uint64_t seed) : rng_(seed), perm_(n) {
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    reshuffle();
  }

  std::vector<std::size_t> next(std::size_t batch) {
    if (cursor_ + batch > perm_.size()) reshuffle();
    std::vector<std::size_t> out(perm_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 perm_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch));
    cursor_ += batch;
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  void reshuffle() {
    std::shuffle(perm_.begin(), perm_.end(), rng_);
    cursor_ = 0;
  }

  Rng rng_;
  std::vector<std::size_t> perm_;
  std::size_t cursor_ = 0;
};

/// tau SGD steps from `model` at global iteration `t`.
inline ModelVector local_train(const ModelVector& model, const Dataset& data,
                               const TrainingConfig& cfg, std::uint64_t seed, int t = 0) {
  cfg.validate(data.size());
  detail::check_dims(model, data);
  const double eta = cfg.eta_at(t);
  ModelVector theta = model;
  MinibatchSampler sampler(data.size(), seed);
  const auto b = static_cast<std::size_t>(cfg.batch_size);
  for (int step = 0; step < cfg.tau; ++step) {
    if (b == data.size()) {
      theta -= eta * gradient(theta, data, cfg.l2);
    } else {
      theta -= eta * gradient(theta, subset(data, sampler.next(b)), cfg.l2);
    }
  }
  if (!theta.allFinite()) throw ConfigError("local_train diverged (non-finite parameters)");
  return theta;
}

inline ModelVector compute_update(const ModelVector& before, const ModelVector& after) {
  if (before.size() != after.size()) throw ConfigError("compute_update: dimension mismatch");
  return after - before;
}

/// Entry n becomes update[n] + j*update[n+N].
inline ComplexUpdate pack_complex(const ModelVector& update) {
  if (update.size() % 2 != 0) throw ConfigError("pack_complex: odd-length vector");
  const Eigen::Index n = update.size() / 2;
  ComplexUpdate out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = {update[i], update[i + n]};
  return out;
}

inline ModelVector unpack_complex(const ComplexUpdate& signal) {
  const Eigen::Index n = signal.size();
  ModelVector out(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = signal[i].real();
    out[i + n] = signal[i].imag();
  }
  return out;
}

/// Argmax accuracy of `model` on `data` (ties go to the lowest class).
inline double accuracy(const ModelVector& model, const Dataset& data) {
  detail::check_dims(model, data);
  const Eigen::MatrixXd p = detail::softmax_probs(model, data);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Eigen::Index best = 0;
    p.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    if (best == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace otafl

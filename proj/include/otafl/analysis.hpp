#pragma once

// Convergence-bound tooling: heterogeneity gap, gradient approximation error,
// the per-round contraction A(i) and additive error B(i), the resulting
// distance trajectory, and empirical estimates of mu, L and G^2 for the
// linear softmax model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "otafl/error.hpp"
#include "otafl/model.hpp"
#include "otafl/rng.hpp"

namespace otafl {

struct BoundParams {
  double mu = 0.1;
  double L = 1.0;
  double G2 = 1.0;
  double Gamma = 0.0;
  int tau = 1;
  std::function<double(int)> eta = [](int) { return 0.05; };
  int K = 200;
  int N = 1;
  double sigma_z2 = 0.1;
  double sigma_h2 = 1.0;
  std::function<double(int)> alpha = [](int) { return 1.0; };
  std::function<int(int)> S_size = [](int) { return 1; };
  std::function<double(int)> epsilon = [](int) { return 0.0; };
  double c = 0.0;

  /// Largest admissible learning rate, min(1, 1/(mu tau)).
  double eta_max() const { return std::min(1.0, 1.0 / (mu * tau)); }

  void validate_at(int i) const {
    if (!(mu > 0.0) || !(L > 0.0) || !(G2 > 0.0)) throw ConfigError("bound: mu, L and G2 must be positive");
    if (!(Gamma >= 0.0) || !std::isfinite(Gamma)) throw ConfigError("bound: Gamma must be finite and >= 0");
    if (tau < 1 || K < 1 || N < 1) throw ConfigError("bound: tau, K and N must be positive");
    if (!(c >= 0.0)) throw ConfigError("bound: c must be >= 0");
    const double e = eta(i);
    if (!(e > 0.0) || e > eta_max() * (1.0 + 1e-12))
      throw ConfigError("bound: eta(" + std::to_string(i) + ") = " + std::to_string(e) +
                        " violates 0 < eta <= min(1, 1/(mu tau))");
    if (!(alpha(i) > 0.0)) throw ConfigError("bound: alpha must be positive");
    if (S_size(i) < 1) throw ConfigError("bound: |S| must be >= 1");
    if (!(epsilon(i) >= 0.0)) throw ConfigError("bound: epsilon must be >= 0");
  }
};

inline double bound_A(int i, const BoundParams& p) {
  p.validate_at(i);
  const double e = p.eta(i);
  return 1.0 - p.mu * e * (p.tau - e * (p.tau - 1));
}

/// The six additive contributions to B(i).
struct BoundTerms {
  double transmission = 0.0;   // eta^2 tau^2 G^2 / K
  double noise = 0.0;          // sigma_z^2 N / (alpha^2 K |S| sigma_h^2)
  double local_drift = 0.0;    // (1 + mu(1 - eta)) eta^2 G^2 tau(tau-1)(2tau-1)/6
  double averaging = 0.0;      // eta^2 (tau^2 + tau - 1) G^2 + 2 eta (tau - 1) Gamma
  double partial_sq = 0.0;     // (eta^2 tau(tau-1) L G + eta tau eps)^2
  double partial_cross = 0.0;  // (eta^2 tau(tau-1) L G + eta tau eps) c

  double total() const {
    return transmission + noise + local_drift + averaging + partial_sq + partial_cross;
  }
};

inline BoundTerms bound_B(int i, const BoundParams& p) {
  p.validate_at(i);
  const double e = p.eta(i);
  const double t = p.tau;
  const double g = std::sqrt(p.G2);
  const double a = p.alpha(i);
  BoundTerms b;
  b.transmission = e * e * t * t * p.G2 / p.K;
  b.noise = p.sigma_z2 * p.N / (a * a * p.K * p.S_size(i) * p.sigma_h2);
  b.local_drift = (1.0 + p.mu * (1.0 - e)) * e * e * p.G2 * t * (t - 1) * (2 * t - 1) / 6.0;
  b.averaging = e * e * (t * t + t - 1) * p.G2 + 2.0 * e * (t - 1) * p.Gamma;
  const double partial = e * e * t * (t - 1) * p.L * g + e * t * p.epsilon(i);
  b.partial_sq = partial * partial;
  b.partial_cross = partial * p.c;
  return b;
}

/// Bound on E||theta(t) - theta*||^2 for t = 1..horizon, via
/// U(t+1) = A(t) U(t) + B(t), U(0) = initial_dist2.
inline std::vector<double> bound_trajectory(double initial_dist2, int horizon, const BoundParams& p) {
  if (!(initial_dist2 >= 0.0)) throw ConfigError("bound_trajectory: initial distance must be >= 0");
  if (horizon < 0) throw ConfigError("bound_trajectory: negative horizon");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(horizon));
  double u = initial_dist2;
  for (int t = 0; t < horizon; ++t) {
    u = bound_A(t, p) * u + bound_B(t, p).total();
    out.push_back(u);
  }
  return out;
}

/// Default for the Lemma-4 constant: 2 sqrt(2 Gamma / mu) + 2 G tau eta(0).
inline double default_c(const BoundParams& p) {
  return 2.0 * std::sqrt(2.0 * p.Gamma / p.mu) + 2.0 * std::sqrt(p.G2) * p.tau * p.eta(0);
}

/// Gamma = F* - sum_m w_m F_m*, clamped at zero against round-off.
inline double compute_gamma(double global_opt_loss, const std::vector<double>& local_opt_losses,
                            const std::vector<double>& weights) {
  if (local_opt_losses.size() != weights.size()) throw ConfigError("compute_gamma: length mismatch");
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(wsum - 1.0) > 1e-9) throw ConfigError("compute_gamma: weights must sum to 1");
  double local = 0.0;
  for (std::size_t m = 0; m < weights.size(); ++m) local += weights[m] * local_opt_losses[m];
  const double gamma = global_opt_loss - local;
  if (gamma < 0.0 && gamma >= -1e-9) return 0.0;
  return gamma;
}

/// || mean over all users - mean over the scheduled users ||_2.
inline double compute_epsilon(const std::vector<ModelVector>& full_gradients, const std::vector<int>& scheduled) {
  if (scheduled.empty()) throw ConfigError("compute_epsilon: empty schedule");
  if (full_gradients.empty()) throw ConfigError("compute_epsilon: no gradients");
  std::vector<bool> seen(full_gradients.size(), false);
  for (int m : scheduled) {
    if (m < 0 || static_cast<std::size_t>(m) >= full_gradients.size() || seen[static_cast<std::size_t>(m)])
      throw ConfigError("compute_epsilon: scheduled users must be distinct valid indices");
    seen[static_cast<std::size_t>(m)] = true;
  }
  ModelVector all = ModelVector::Zero(full_gradients.front().size());
  for (const auto& g : full_gradients) all += g;
  all /= static_cast<double>(full_gradients.size());
  if (scheduled.size() == full_gradients.size()) return 0.0;
  ModelVector part = ModelVector::Zero(all.size());
  for (int m : scheduled) part += full_gradients[static_cast<std::size_t>(m)];
  part /= static_cast<double>(scheduled.size());
  return (all - part).norm();
}

/// Largest Hessian eigenvalue at `point` by power iteration on central
/// finite-difference Hessian-vector products of `grad`.
inline double max_hessian_eigenvalue(const std::function<ModelVector(const ModelVector&)>& grad,
                                     const ModelVector& point, std::uint64_t seed,
                                     int max_iter = 200, double rel_tol = 1e-7) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ModelVector v(point.size());
  for (auto& x : v) x = normal(rng);
  v.normalize();
  const double h = 1e-4 * std::max(1.0, point.norm()) / std::sqrt(static_cast<double>(point.size()));
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const ModelVector hv = (grad(point + h * v) - grad(point - h * v)) / (2.0 * h);
    const double next = v.dot(hv);
    const double norm = hv.norm();
    if (norm == 0.0) return 0.0;
    v = hv / norm;
    if (it > 0 && std::abs(next - lambda) <= rel_tol * std::abs(next)) return next;
    lambda = next;
  }
  throw EstimationError("power iteration did not converge in " + std::to_string(max_iter) + " steps");
}

struct ConstantsProbe {
  double l2 = 0.1;
  int batch_size = 100;
  double eta = 0.05;
  int steps = 50;
  std::uint64_t seed = 0;
};

struct ProblemConstants {
  double mu = 0.0;
  double L = 0.0;
  double G2 = 0.0;
};

/// mu is the ridge coefficient; L is the largest Hessian eigenvalue seen at the
/// zero model and at the end of each user's probe run; G^2 is 1.5 x the largest
/// squared mini-batch gradient norm met along the probe runs.
inline ProblemConstants estimate_constants(const std::vector<Dataset>& datasets, const ConstantsProbe& probe) {
  if (datasets.empty()) throw ConfigError("estimate_constants: no datasets");
  ProblemConstants out;
  out.mu = probe.l2;
  for (std::size_t m = 0; m < datasets.size(); ++m) {
    const Dataset& d = datasets[m];
    const auto grad = [&](const ModelVector& th) { return gradient(th, d, probe.l2); };
    ModelVector theta = shape_of(d).zeros();
    out.L = std::max(out.L, max_hessian_eigenvalue(grad, theta, derive_seed(probe.seed, {m, 1})));

    const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(probe.batch_size), d.size());
    MinibatchSampler sampler(d.size(), derive_seed(probe.seed, {m, 2}));
    for (int s = 0; s < probe.steps; ++s) {
      const ModelVector g = gradient(theta, subset(d, sampler.next(b)), probe.l2);
      out.G2 = std::max(out.G2, g.squaredNorm());
      theta -= probe.eta * g;
    }
    out.L = std::max(out.L, max_hessian_eigenvalue(grad, theta, derive_seed(probe.seed, {m, 3})));
  }
  out.G2 *= 1.5;
  return out;
}

struct MinimizeResult {
  ModelVector theta;
  double loss = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
};

/// Deterministic Newton-CG minimisation of loss(., data, l2) from zero.
/// Used to obtain theta*, F* and F_m* to high accuracy.
inline MinimizeResult reference_minimize(const Dataset& data, double l2, double grad_tol = 1e-9,
                                         int max_iter = 100) {
  MinimizeResult res;
  res.theta = shape_of(data).zeros();
  const int dim = shape_of(data).param_count();
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    const ModelVector g = gradient(res.theta, data, l2);
    res.grad_norm = g.norm();
    if (res.grad_norm <= grad_tol) break;

    // Truncated CG on H d = -g.
    ModelVector d = ModelVector::Zero(g.size());
    ModelVector r = -g;
    ModelVector p = r;
    double rr = r.squaredNorm();
    const double cg_tol = std::min(0.5, std::sqrt(res.grad_norm)) * res.grad_norm;
    for (int j = 0; j < 2 * dim + 10; ++j) {
      const ModelVector hp = hessian_vector_product(res.theta, data, p, l2);
      const double curv = p.dot(hp);
      if (curv <= 0.0) {
        if (j == 0) d = -g;
        break;
      }
      const double step = rr / curv;
      d += step * p;
      r -= step * hp;
      const double rr_next = r.squaredNorm();
      if (std::sqrt(rr_next) <= cg_tol) break;
      p = r + (rr_next / rr) * p;
      rr = rr_next;
    }

    const double f0 = loss(res.theta, data, l2);
    const double slope = g.dot(d);
    double s = 1.0;
    bool accepted = false;
    for (int k = 0; k < 40; ++k, s *= 0.5) {
      if (loss(res.theta + s * d, data, l2) <= f0 + 1e-4 * s * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Loss differences are below round-off; fall back on the gradient norm.
      const ModelVector trial = res.theta + d;
      if (gradient(trial, data, l2).norm() < res.grad_norm) {
        res.theta = trial;
        continue;
      }
      break;
    }
    res.theta += s * d;
  }
  res.loss = loss(res.theta, data, l2);
  res.grad_norm = gradient(res.theta, data, l2).norm();
  return res;
}

}  // namespace otafl

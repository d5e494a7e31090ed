#pragma once

// Fading multiple-access channel with K receive antennas and blind
// transmitters. Users send alpha * (packed update) simultaneously; the server
// combines antennas with the conjugate of the summed channel gains and
// rescales the result into an estimate of the average update.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "otafl/error.hpp"
#include "otafl/model.hpp"
#include "otafl/rng.hpp"

namespace otafl {

using cplx = std::complex<double>;

struct ChannelConfig {
  int K = 200;
  double sigma_h2 = 1.0;
  double sigma_z2 = 0.1;
  double alpha = 1.0;

  void validate() const {
    if (K < 1) throw ConfigError("channel: K must be >= 1");
    if (!(sigma_h2 > 0.0)) throw ConfigError("channel: sigma_h2 must be > 0");
    if (!(sigma_z2 >= 0.0)) throw ConfigError("channel: sigma_z2 must be >= 0");
    if (!(alpha > 0.0)) throw ConfigError("channel: alpha must be > 0");
  }
};

/// Gains h[m][k][n] for every scheduled user, antenna and symbol; noise z[k][n].
class ChannelRealization {
 public:
  ChannelRealization(int num_users, int K, int N)
      : num_users_(num_users), K_(K), N_(N),
        gains_(static_cast<std::size_t>(num_users) * K * N),
        noise_(static_cast<std::size_t>(K) * N) {
    if (num_users < 0 || K < 1 || N < 0) throw ConfigError("channel realization: bad dimensions");
  }

  int num_users() const noexcept { return num_users_; }
  int antennas() const noexcept { return K_; }
  int symbols() const noexcept { return N_; }

  cplx& gain(int m, int k, int n) { return gains_[index(m, k, n)]; }
  const cplx& gain(int m, int k, int n) const { return gains_[index(m, k, n)]; }
  cplx& noise(int k, int n) { return noise_[static_cast<std::size_t>(k) * N_ + n]; }
  const cplx& noise(int k, int n) const { return noise_[static_cast<std::size_t>(k) * N_ + n]; }

  /// Every gain equal to `value`, zero noise.
  static ChannelRealization constant(int num_users, int K, int N, cplx value = 1.0) {
    ChannelRealization r(num_users, K, N);
    std::fill(r.gains_.begin(), r.gains_.end(), value);
    return r;
  }

  /// User m reaches only antenna m, with gain sqrt(K * sigma_h2); zero noise.
  /// The combiner then returns sigma_h2 * sum_m x_m exactly, so the
  /// aggregate estimate is the exact average. Requires K >= num_users.
  static ChannelRealization orthogonal(int num_users, int N, const ChannelConfig& cfg) {
    if (cfg.K < num_users) throw ConfigError("orthogonal channel needs K >= number of users");
    ChannelRealization r(num_users, cfg.K, N);
    const double g = std::sqrt(cfg.K * cfg.sigma_h2);
    for (int m = 0; m < num_users; ++m)
      for (int n = 0; n < N; ++n) r.gain(m, m, n) = g;
    return r;
  }

 private:
  std::size_t index(int m, int k, int n) const {
    return (static_cast<std::size_t>(m) * K_ + k) * N_ + n;
  }

  int num_users_, K_, N_;
  std::vector<cplx> gains_;
  std::vector<cplx> noise_;
};

namespace detail {

/// Circularly symmetric CN(0, variance) sampler.
class ComplexGaussian {
 public:
  explicit ComplexGaussian(double variance) : scale_(std::sqrt(variance / 2.0)) {}
  cplx operator()(Rng& rng) {
    const double re = normal_(rng);
    const double im = normal_(rng);
    return {scale_ * re, scale_ * im};
  }

 private:
  double scale_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline void check_updates(std::span<const ComplexUpdate> updates, int num_users, int N) {
  if (static_cast<int>(updates.size()) != num_users)
    throw ConfigError("channel: number of updates does not match realization users");
  for (const auto& u : updates)
    if (u.size() != N) throw ConfigError("channel: update length does not match realization");
}

}  // namespace detail

/// Draw order is symbol-major: for each n, for each antenna k, the gains of
/// users 0..M-1 followed by the noise sample. `over_the_air` relies on it.
inline ChannelRealization draw_channel(int num_users, int N, const ChannelConfig& cfg,
                                       std::uint64_t seed) {
  cfg.validate();
  ChannelRealization r(num_users, cfg.K, N);
  Rng rng(seed);
  detail::ComplexGaussian h(cfg.sigma_h2);
  detail::ComplexGaussian z(cfg.sigma_z2);
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < cfg.K; ++k) {
      for (int m = 0; m < num_users; ++m) r.gain(m, k, n) = h(rng);
      r.noise(k, n) = cfg.sigma_z2 > 0.0 ? z(rng) : cplx{};
    }
  }
  return r;
}

/// Per-antenna superposition plus noise, then
/// y[n] = (1/K) sum_k conj(sum_m h[m][k][n]) * y_k[n].
inline ComplexUpdate transmit_and_combine(std::span<const ComplexUpdate> updates,
                                          const ChannelRealization& r, const ChannelConfig& cfg) {
  const int M = r.num_users(), K = r.antennas(), N = r.symbols();
  detail::check_updates(updates, M, N);
  ComplexUpdate y = ComplexUpdate::Zero(N);
  for (int n = 0; n < N; ++n) {
    cplx acc{};
    for (int k = 0; k < K; ++k) {
      cplx hsum{}, yk{};
      for (int m = 0; m < M; ++m) {
        const cplx h = r.gain(m, k, n);
        hsum += h;
        yk += h * (cfg.alpha * updates[static_cast<std::size_t>(m)][n]);
      }
      yk = r.noise(k, n) + yk;
      acc += std::conj(hsum) * yk;
    }
    y[n] = acc / static_cast<double>(K);
  }
  return y;
}

/// Same result as draw_channel followed by transmit_and_combine, without
/// materialising the gain tensor.
inline ComplexUpdate over_the_air(std::span<const ComplexUpdate> updates, int N,
                                  const ChannelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int M = static_cast<int>(updates.size());
  detail::check_updates(updates, M, N);
  Rng rng(seed);
  detail::ComplexGaussian hdist(cfg.sigma_h2);
  detail::ComplexGaussian zdist(cfg.sigma_z2);
  ComplexUpdate y = ComplexUpdate::Zero(N);
  for (int n = 0; n < N; ++n) {
    cplx acc{};
    for (int k = 0; k < cfg.K; ++k) {
      cplx hsum{}, yk{};
      for (int m = 0; m < M; ++m) {
        const cplx h = hdist(rng);
        hsum += h;
        yk += h * (cfg.alpha * updates[static_cast<std::size_t>(m)][n]);
      }
      if (cfg.sigma_z2 > 0.0) yk = zdist(rng) + yk;
      acc += std::conj(hsum) * yk;
    }
    y[n] = acc / static_cast<double>(cfg.K);
  }
  return y;
}

struct SignalDecomposition {
  ComplexUpdate signal;
  ComplexUpdate interference;
  ComplexUpdate noise;

  ComplexUpdate sum() const { return signal + interference + noise; }
};

/// Splits the combined output into the fading-weighted own-signal term,
/// cross-user interference and combined noise.
inline SignalDecomposition decompose(std::span<const ComplexUpdate> updates,
                                     const ChannelRealization& r, const ChannelConfig& cfg) {
  const int M = r.num_users(), K = r.antennas(), N = r.symbols();
  detail::check_updates(updates, M, N);
  SignalDecomposition out{ComplexUpdate::Zero(N), ComplexUpdate::Zero(N), ComplexUpdate::Zero(N)};
  const double invK = 1.0 / K;
  for (int n = 0; n < N; ++n) {
    cplx sig{}, inter{}, noise{};
    for (int m = 0; m < M; ++m) {
      double power = 0.0;
      for (int k = 0; k < K; ++k) power += std::norm(r.gain(m, k, n));
      sig += (power * invK) * (cfg.alpha * updates[static_cast<std::size_t>(m)][n]);
      for (int mp = 0; mp < M; ++mp) {
        if (mp == m) continue;
        cplx cross{};
        for (int k = 0; k < K; ++k) cross += std::conj(r.gain(m, k, n)) * r.gain(mp, k, n);
        inter += cross * (cfg.alpha * updates[static_cast<std::size_t>(mp)][n]);
      }
      for (int k = 0; k < K; ++k) noise += std::conj(r.gain(m, k, n)) * r.noise(k, n);
    }
    out.signal[n] = sig;
    out.interference[n] = inter * invK;
    out.noise[n] = noise * invK;
  }
  return out;
}

/// Real/imaginary split of y scaled by 1 / (|S| sigma_h2 alpha).
inline ModelVector estimate_aggregate(const ComplexUpdate& y, int num_scheduled,
                                      const ChannelConfig& cfg) {
  if (num_scheduled < 1) throw ConfigError("estimate_aggregate: no scheduled users");
  return unpack_complex(y) / (num_scheduled * cfg.sigma_h2 * cfg.alpha);
}

}  // namespace otafl

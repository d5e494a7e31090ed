#pragma once

// Unit-battery harvest-store-use dynamics with Bernoulli energy arrivals.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "otafl/error.hpp"
#include "otafl/rng.hpp"

namespace otafl {

/// Sorted list of user indices.
using UserSet = std::vector<int>;

struct EnergyState {
  std::vector<std::uint8_t> battery;  // 0 = empty, 1 = one stored unit
  std::vector<double> p_e;            // per-user arrival probability

  EnergyState() = default;
  EnergyState(std::vector<std::uint8_t> b, std::vector<double> p) : battery(std::move(b)), p_e(std::move(p)) {
    validate();
  }

  static EnergyState empty(int num_users, double p) {
    return {std::vector<std::uint8_t>(static_cast<std::size_t>(num_users), 0),
            std::vector<double>(static_cast<std::size_t>(num_users), p)};
  }

  int num_users() const noexcept { return static_cast<int>(battery.size()); }

  int full_count() const noexcept {
    int n = 0;
    for (auto b : battery) n += b;
    return n;
  }

  void validate() const {
    if (battery.size() != p_e.size()) throw ConfigError("energy: battery and p_e lengths differ");
    for (auto b : battery)
      if (b > 1) throw ConfigError("energy: battery level must be 0 or 1");
    for (double p : p_e)
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("energy: p_e must lie in [0, 1]");
  }
};

/// One Bernoulli(p_e[m]) arrival per user; a full battery drops the surplus.
inline EnergyState harvest(const EnergyState& state, std::uint64_t seed) {
  EnergyState next = state;
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t m = 0; m < next.battery.size(); ++m) {
    const bool arrival = u(rng) < state.p_e[m];
    if (arrival) next.battery[m] = 1;
  }
  return next;
}

inline UserSet feasible_users(const EnergyState& state) {
  UserSet out;
  for (std::size_t m = 0; m < state.battery.size(); ++m)
    if (state.battery[m] == 1) out.push_back(static_cast<int>(m));
  return out;
}

inline EnergyState consume(const EnergyState& state, const UserSet& scheduled) {
  EnergyState next = state;
  for (int m : scheduled) {
    if (m < 0 || m >= state.num_users())
      throw ContractViolation("consume: user index " + std::to_string(m) + " out of range");
    if (next.battery[static_cast<std::size_t>(m)] == 0)
      throw ContractViolation("consume: user " + std::to_string(m) + " has no stored energy");
    next.battery[static_cast<std::size_t>(m)] = 0;
  }
  return next;
}

}  // namespace otafl

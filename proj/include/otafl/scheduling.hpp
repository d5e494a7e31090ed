#pragma once

// User scheduling policies: schedule everyone with energy, entropy-maximising
// subset selection over known label distributions, and least-squares
// estimation of per-user representative updates followed by cosine
// clustering and one-user-per-cluster scheduling.

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "otafl/data.hpp"
#include "otafl/energy.hpp"
#include "otafl/error.hpp"
#include "otafl/model.hpp"
#include "otafl/rng.hpp"

namespace otafl {

inline UserSet schedule_all(const UserSet& feasible) { return feasible; }

namespace detail {

inline double entropy_bits(const std::vector<double>& mass, double total) {
  double h = 0.0;
  for (double c : mass) {
    if (c <= 0.0) continue;
    const double p = c / total;
    h -= p * std::log2(p);
  }
  return h;
}

}  // namespace detail

/// Shannon entropy (bits) of the sample-weighted mixture of the members' label
/// distributions. `labels` and `weights` are indexed by user.
inline double subset_entropy(const UserSet& subset, const std::vector<LabelDistribution>& labels,
                             const std::vector<double>& weights) {
  if (subset.empty()) throw ConfigError("subset_entropy: empty subset");
  const std::size_t nc = labels.at(static_cast<std::size_t>(subset.front())).probs.size();
  std::vector<double> mass(nc, 0.0);
  double total = 0.0;
  for (int m : subset) {
    const auto& l = labels.at(static_cast<std::size_t>(m)).probs;
    const double w = weights.at(static_cast<std::size_t>(m));
    for (std::size_t c = 0; c < nc; ++c) mass[c] += w * l[c];
    total += w;
  }
  return detail::entropy_bits(mass, total);
}

inline constexpr std::size_t kExhaustiveEntropyLimit = 15;
inline constexpr double kEntropyTieTolerance = 1e-12;

namespace detail {

struct EntropyProblem {
  std::size_t nc = 0;
  std::vector<std::vector<double>> mass;  // weighted label mass per feasible user
  std::vector<double> w;
};

inline EntropyProblem entropy_problem(const UserSet& feasible, const std::vector<LabelDistribution>& labels,
                                      const std::vector<double>& weights) {
  EntropyProblem p;
  p.nc = labels.at(static_cast<std::size_t>(feasible.front())).probs.size();
  p.mass.assign(feasible.size(), std::vector<double>(p.nc));
  p.w.resize(feasible.size());
  for (std::size_t i = 0; i < feasible.size(); ++i) {
    const auto u = static_cast<std::size_t>(feasible[i]);
    p.w[i] = weights.at(u);
    for (std::size_t c = 0; c < p.nc; ++c) p.mass[i][c] = p.w[i] * labels.at(u).probs[c];
  }
  return p;
}

}  // namespace detail

/// Enumerates every non-empty subset of `feasible` (at most 15 users) with at
/// most `max_subset` members. Ties go to the smallest bitmask over the sorted
/// feasible list, i.e. the lowest indices.
inline UserSet schedule_entropy_exhaustive(const UserSet& feasible, const std::vector<LabelDistribution>& labels,
                                           const std::vector<double>& weights, int max_subset = INT_MAX) {
  if (feasible.empty()) return {};
  if (max_subset < 1) throw ConfigError("schedule_entropy: max_subset must be positive");
  const std::size_t f = feasible.size();
  if (f > kExhaustiveEntropyLimit) throw ConfigError("schedule_entropy_exhaustive: too many feasible users");
  const auto prob = detail::entropy_problem(feasible, labels, weights);
  const std::size_t nc = prob.nc;

  const std::uint32_t count = 1u << f;
  // Subset sums built incrementally: sums(mask) = sums(mask without lowest bit) + lowest member.
  std::vector<double> sums(static_cast<std::size_t>(count) * nc, 0.0);
  std::vector<double> totals(count, 0.0);
  std::vector<int> sizes(count, 0);
  std::vector<double> mix(nc);
  double best = -1.0;
  std::uint32_t best_mask = 0;
  for (std::uint32_t mask = 1; mask < count; ++mask) {
    const auto low = static_cast<std::size_t>(__builtin_ctz(mask));
    const std::uint32_t rest = mask & (mask - 1);
    double* dst = &sums[mask * nc];
    const double* src = &sums[rest * nc];
    for (std::size_t c = 0; c < nc; ++c) dst[c] = src[c] + prob.mass[low][c];
    totals[mask] = totals[rest] + prob.w[low];
    sizes[mask] = sizes[rest] + 1;
    if (sizes[mask] > max_subset) continue;
    mix.assign(dst, dst + nc);
    const double h = detail::entropy_bits(mix, totals[mask]);
    if (h > best + kEntropyTieTolerance) {
      best = h;
      best_mask = mask;
    }
  }
  UserSet out;
  for (std::size_t i = 0; i < f; ++i)
    if (best_mask & (1u << i)) out.push_back(feasible[i]);
  return out;
}

/// Greedy forward selection: add the user that maximises the mixture entropy
/// (lowest index on ties) until no addition raises it or max_subset is hit.
inline UserSet schedule_entropy_greedy(const UserSet& feasible, const std::vector<LabelDistribution>& labels,
                                       const std::vector<double>& weights, int max_subset = INT_MAX) {
  if (feasible.empty()) return {};
  if (max_subset < 1) throw ConfigError("schedule_entropy: max_subset must be positive");
  const std::size_t f = feasible.size();
  const auto prob = detail::entropy_problem(feasible, labels, weights);
  const std::size_t nc = prob.nc;

  std::vector<bool> chosen(f, false);
  std::vector<double> cur(nc, 0.0), trial(nc);
  double cur_total = 0.0, cur_h = 0.0;
  int size = 0;
  while (size < max_subset) {
    double best = -1.0;
    std::size_t pick = f;
    for (std::size_t i = 0; i < f; ++i) {
      if (chosen[i]) continue;
      for (std::size_t c = 0; c < nc; ++c) trial[c] = cur[c] + prob.mass[i][c];
      const double h = detail::entropy_bits(trial, cur_total + prob.w[i]);
      if (h > best + kEntropyTieTolerance) {
        best = h;
        pick = i;
      }
    }
    if (pick == f) break;
    if (size > 0 && !(best > cur_h + kEntropyTieTolerance)) break;
    chosen[pick] = true;
    for (std::size_t c = 0; c < nc; ++c) cur[c] += prob.mass[pick][c];
    cur_total += prob.w[pick];
    cur_h = best;
    ++size;
  }
  UserSet out;
  for (std::size_t i = 0; i < f; ++i)
    if (chosen[i]) out.push_back(feasible[i]);
  return out;
}

/// Exhaustive search up to 15 feasible users, greedy beyond.
inline UserSet schedule_entropy(const UserSet& feasible, const std::vector<LabelDistribution>& labels,
                                const std::vector<double>& weights, int max_subset = INT_MAX) {
  if (feasible.size() <= kExhaustiveEntropyLimit) return schedule_entropy_exhaustive(feasible, labels, weights, max_subset);
  return schedule_entropy_greedy(feasible, labels, weights, max_subset);
}

/// Participation masks (rows of A) and matching sum-form aggregate rows.
struct ParticipationRecord {
  int num_users = 0;
  std::vector<std::vector<std::uint8_t>> masks;
  std::vector<ModelVector> rows;

  std::size_t size() const noexcept { return rows.size(); }
};

inline std::vector<std::uint8_t> mask_of(const UserSet& users, int num_users) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(num_users), 0);
  for (int m : users) mask.at(static_cast<std::size_t>(m)) = 1;
  return mask;
}

/// Appends one estimation-phase observation. `aggregate` is the averaged
/// server estimate; it is stored multiplied by `num_scheduled` so that each
/// row models mask * Theta.
inline ParticipationRecord accumulate_estimation_round(ParticipationRecord record,
                                                       const std::vector<std::uint8_t>& mask,
                                                       const ModelVector& aggregate, int num_scheduled) {
  if (record.num_users == 0) record.num_users = static_cast<int>(mask.size());
  if (static_cast<int>(mask.size()) != record.num_users)
    throw ConfigError("accumulate_estimation_round: mask length does not match user count");
  const int ones = static_cast<int>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  if (ones == 0) throw ConfigError("accumulate_estimation_round: all-zero participation mask");
  if (ones != num_scheduled)
    throw ConfigError("accumulate_estimation_round: num_scheduled does not match the mask");
  if (!record.rows.empty() && record.rows.front().size() != aggregate.size())
    throw ConfigError("accumulate_estimation_round: aggregate length changed");
  record.masks.push_back(mask);
  record.rows.push_back(aggregate * static_cast<double>(num_scheduled));
  return record;
}

struct RepresentationMatrix {
  Eigen::MatrixXd reps;            // num_users x 2N
  std::vector<bool> identifiable;  // false for users absent from every row

  int num_users() const noexcept { return static_cast<int>(reps.rows()); }
};

namespace detail {

inline Eigen::MatrixXd participation_matrix(const ParticipationRecord& record) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(record.size()), record.num_users);
  for (std::size_t j = 0; j < record.size(); ++j)
    for (int m = 0; m < record.num_users; ++m)
      a(static_cast<Eigen::Index>(j), m) = record.masks[j][static_cast<std::size_t>(m)];
  return a;
}

inline Eigen::MatrixXd observation_matrix(const ParticipationRecord& record) {
  Eigen::MatrixXd y(static_cast<Eigen::Index>(record.size()), record.rows.front().size());
  for (std::size_t j = 0; j < record.size(); ++j) y.row(static_cast<Eigen::Index>(j)) = record.rows[j].transpose();
  return y;
}

inline std::string join_users(const std::vector<int>& users) {
  std::string s;
  for (std::size_t i = 0; i < users.size(); ++i) s += (i ? ", " : "") + std::to_string(users[i]);
  return s;
}

}  // namespace detail

/// 1e-6 * trace(A^T A) / M.
inline double default_ridge(const ParticipationRecord& record) {
  double participations = 0.0;
  for (const auto& mask : record.masks)
    participations += static_cast<double>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  return record.num_users > 0 ? 1e-6 * participations / record.num_users : 0.0;
}

/// Solves (A^T A + ridge I) Theta = A^T Y.
inline RepresentationMatrix estimate_representations(const ParticipationRecord& record, double ridge) {
  if (record.size() == 0) throw ConfigError("estimate_representations: empty participation record");
  if (ridge < 0.0) throw ConfigError("estimate_representations: ridge must be non-negative");
  const Eigen::MatrixXd a = detail::participation_matrix(record);
  const Eigen::MatrixXd y = detail::observation_matrix(record);
  const int M = record.num_users;

  RepresentationMatrix out;
  out.identifiable.assign(static_cast<std::size_t>(M), true);
  std::vector<int> absent;
  for (int m = 0; m < M; ++m) {
    if (a.col(m).sum() == 0.0) {
      out.identifiable[static_cast<std::size_t>(m)] = false;
      absent.push_back(m);
    }
  }

  Eigen::MatrixXd gram = a.transpose() * a;
  if (ridge == 0.0) {
    if (!absent.empty())
      throw RankDeficiencyError("unidentifiable users (never observed): " + detail::join_users(absent), absent);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (lu.rank() < M) {
      const Eigen::MatrixXd kernel = lu.kernel();
      std::vector<int> tied;
      for (int m = 0; m < M; ++m)
        if (kernel.row(m).cwiseAbs().maxCoeff() > 1e-9) tied.push_back(m);
      throw RankDeficiencyError("participation matrix is rank deficient; unidentifiable users: " +
                                    detail::join_users(tied), tied);
    }
  }
  gram.diagonal().array() += ridge;
  out.reps = gram.ldlt().solve(a.transpose() * y);
  if (!out.reps.allFinite()) throw RankDeficiencyError("estimate_representations: non-finite solution", absent);
  return out;
}

struct Clustering {
  std::vector<int> assignment;  // cluster id per user, -1 for unidentifiable users
  int num_clusters = 0;
  std::string warning;

  std::vector<std::vector<int>> members() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(num_clusters));
    for (std::size_t m = 0; m < assignment.size(); ++m)
      if (assignment[m] >= 0) out[static_cast<std::size_t>(assignment[m])].push_back(static_cast<int>(m));
    return out;
  }
};

inline double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - a.dot(b) / (na * nb);
}

/// Average-linkage agglomerative clustering on cosine distance between rows.
/// Cluster ids are ordered by their smallest member.
inline Clustering cluster_users(const RepresentationMatrix& reps, int num_clusters) {
  if (num_clusters < 1) throw ConfigError("cluster_users: num_clusters must be positive");
  std::vector<int> users;
  for (int m = 0; m < reps.num_users(); ++m)
    if (reps.identifiable.empty() || reps.identifiable[static_cast<std::size_t>(m)]) users.push_back(m);

  Clustering out;
  out.assignment.assign(static_cast<std::size_t>(reps.num_users()), -1);
  int target = num_clusters;
  if (static_cast<int>(users.size()) < num_clusters) {
    target = static_cast<int>(users.size());
    out.warning = "only " + std::to_string(users.size()) + " identifiable users; reducing cluster count from " +
                  std::to_string(num_clusters) + " to " + std::to_string(target);
  }
  if (users.empty()) return out;

  const std::size_t n = users.size();
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      dist[i][j] = dist[j][i] =
          cosine_distance(reps.reps.row(users[i]).transpose(), reps.reps.row(users[j]).transpose());

  // Active clusters stay sorted by smallest member, so scanning (i < j) in
  // order breaks ties by the smallest index pair.
  std::vector<std::vector<std::size_t>> clusters(n);
  for (std::size_t i = 0; i < n; ++i) clusters[i] = {i};
  while (static_cast<int>(clusters.size()) > target) {
    double best = INFINITY;
    std::size_t bi = 0, bj = 1;
    for (std::size_t i = 0; i < clusters.size(); ++i)
      for (std::size_t j = i + 1; j < clusters.size(); ++j)
        if (dist[i][j] < best) {
          best = dist[i][j];
          bi = i;
          bj = j;
        }
    const double ni = static_cast<double>(clusters[bi].size());
    const double nj = static_cast<double>(clusters[bj].size());
    for (std::size_t k = 0; k < clusters.size(); ++k) {
      if (k == bi || k == bj) continue;
      dist[bi][k] = dist[k][bi] = (ni * dist[bi][k] + nj * dist[bj][k]) / (ni + nj);
    }
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    dist.erase(dist.begin() + static_cast<std::ptrdiff_t>(bj));
    for (auto& row : dist) row.erase(row.begin() + static_cast<std::ptrdiff_t>(bj));
  }

  out.num_clusters = static_cast<int>(clusters.size());
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (std::size_t i : clusters[c]) out.assignment[static_cast<std::size_t>(users[i])] = static_cast<int>(c);
  return out;
}

/// One uniformly chosen feasible member per cluster.
inline UserSet schedule_clustered(const UserSet& feasible, const Clustering& clustering, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<int>> candidates(static_cast<std::size_t>(clustering.num_clusters));
  for (int m : feasible) {
    if (m < 0 || static_cast<std::size_t>(m) >= clustering.assignment.size()) continue;
    const int c = clustering.assignment[static_cast<std::size_t>(m)];
    if (c >= 0) candidates[static_cast<std::size_t>(c)].push_back(m);
  }
  UserSet out;
  for (const auto& group : candidates) {
    if (group.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, group.size() - 1);
    out.push_back(group[pick(rng)]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Chance-corrected agreement between two labelings of the same items.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ConfigError("adjusted_rand_index: label vectors differ in length");
  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [k, v] : joint) index += pairs(v);
  for (const auto& [k, v] : ra) sa += pairs(v);
  for (const auto& [k, v] : rb) sb += pairs(v);
  const double expected = sa * sb / pairs(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sa + sb);
  if (max_index - expected == 0.0) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace otafl

#pragma once

// End-to-end simulation: energy arrivals, scheduling, local training,
// over-the-air aggregation and global updates, plus metrics persistence.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "otafl/analysis.hpp"
#include "otafl/channel.hpp"
#include "otafl/data.hpp"
#include "otafl/energy.hpp"
#include "otafl/error.hpp"
#include "otafl/model.hpp"
#include "otafl/rng.hpp"
#include "otafl/scheduling.hpp"

namespace otafl {

enum class DatasetKind { Synthetic, Mnist, Fmnist };
enum class PolicyKind { None, Entropy, Lse };
enum class ChannelModel { Fading, Orthogonal };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::Synthetic;
  // synthetic
  int num_classes = 10;
  int num_features = 20;
  int train_per_class = 800;
  int test_per_class = 200;
  std::optional<std::uint64_t> seed;  // defaults to a stream of the experiment seed
  // IDX corpora
  std::string train_images, train_labels, test_images, test_labels;
};

struct EnergyConfig {
  std::vector<double> p_e{0.25};  // one entry for all users, or one per user
  bool start_full = false;
};

struct PolicyConfig {
  PolicyKind kind = PolicyKind::None;
  int max_subset = 0;  // entropy: 0 = unlimited
  int estimation_rounds = 100;
  int num_clusters = 10;
  std::optional<double> ridge;  // lse: defaults to default_ridge(record)
};

struct ExperimentConfig {
  DatasetConfig dataset;
  PartitionSpec partition;
  bool partition_seed_set = false;
  TrainingConfig training;
  ChannelConfig channel;
  ChannelModel channel_model = ChannelModel::Fading;
  EnergyConfig energy;
  PolicyConfig policy;
  int rounds = 300;
  std::uint64_t seed = 1;
  int eval_every = 10;
  bool track_epsilon = true;

  void validate() const {
    if (rounds < 0) throw ConfigError("rounds must be >= 0");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
    channel.validate();
    if (energy.p_e.size() != 1 && energy.p_e.size() != static_cast<std::size_t>(partition.num_users))
      throw ConfigError("energy.p_e must have 1 or num_users entries");
    for (double p : energy.p_e)
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("energy.p_e entries must lie in [0, 1]");
    if (training.tau < 1 || training.batch_size < 1 || !(training.eta >= 0.0))
      throw ConfigError("training: invalid tau, eta or batch_size");
    if (training.batch_size > partition.samples_per_user)
      throw ConfigError("training.batch_size exceeds partition.samples_per_user");
    if (policy.kind == PolicyKind::Lse) {
      if (policy.estimation_rounds < 1 || policy.estimation_rounds >= rounds)
        throw ConfigError("lse policy requires 1 <= estimation_rounds < rounds");
      if (policy.num_clusters < 1) throw ConfigError("lse policy requires num_clusters >= 1");
      if (policy.ridge && *policy.ridge < 0.0) throw ConfigError("lse ridge must be >= 0");
    }
    if (policy.max_subset < 0) throw ConfigError("entropy max_subset must be >= 0");
    if (channel_model == ChannelModel::Orthogonal && channel.K < partition.num_users)
      throw ConfigError("orthogonal channel model needs K >= num_users");
  }
};

struct ExperimentData {
  std::vector<Dataset> users;
  Dataset test;
};

namespace stream {
inline constexpr std::uint64_t kData = 1, kPartition = 2, kHarvest = 3, kTrain = 4, kChannel = 5,
                               kSchedule = 6;
}

inline ExperimentData prepare_data(const ExperimentConfig& cfg) {
  ExperimentData out;
  Dataset train;
  const DatasetConfig& d = cfg.dataset;
  if (d.kind == DatasetKind::Synthetic) {
    const std::uint64_t seed = d.seed.value_or(derive_seed(cfg.seed, {stream::kData}));
    auto full = synth_dataset(d.num_classes, d.num_features, d.train_per_class + d.test_per_class, seed);
    std::tie(train, out.test) = split_per_class(full, d.test_per_class);
  } else {
    train = load_idx(d.train_images, d.train_labels);
    out.test = load_idx(d.test_images, d.test_labels);
  }
  PartitionSpec spec = cfg.partition;
  if (!cfg.partition_seed_set) spec.seed = derive_seed(cfg.seed, {stream::kPartition});
  out.users = partition(train, spec);
  return out;
}

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

inline Evaluation evaluate(const ModelVector& model, const Dataset& test) {
  if (test.empty()) throw ConfigError("evaluate: empty test set");
  return {accuracy(model, test), loss(model, test)};
}

struct MetricsRow {
  int t = 0;
  int num_scheduled = 0;
  double test_accuracy = 0.0;
  double test_loss = 0.0;
  double epsilon = std::numeric_limits<double>::quiet_NaN();
  int battery_full_count = 0;
  std::string phase;

  bool operator==(const MetricsRow& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return t == o.t && num_scheduled == o.num_scheduled && same(test_accuracy, o.test_accuracy) &&
           same(test_loss, o.test_loss) && same(epsilon, o.epsilon) &&
           battery_full_count == o.battery_full_count && phase == o.phase;
  }
};

struct MetricsRecord {
  std::vector<MetricsRow> rows;
  bool operator==(const MetricsRecord&) const = default;
};

/// One simulation run, advanced a round at a time.
class Simulation {
 public:
  Simulation(ExperimentConfig cfg, ExperimentData data) : cfg_(std::move(cfg)), data_(std::move(data)) {
    cfg_.validate();
    if (static_cast<int>(data_.users.size()) != cfg_.partition.num_users)
      throw ConfigError("simulation: user dataset count does not match num_users");
    const ModelShape shape = shape_of(data_.users.front());
    model_ = shape.zeros();
    half_dim_ = shape.half_dim();

    const auto M = static_cast<std::size_t>(cfg_.partition.num_users);
    std::vector<double> p = cfg_.energy.p_e.size() == 1 ? std::vector<double>(M, cfg_.energy.p_e[0])
                                                        : cfg_.energy.p_e;
    energy_ = EnergyState(std::vector<std::uint8_t>(M, cfg_.energy.start_full ? 1 : 0), std::move(p));
    initial_energy_ = energy_.full_count();

    for (const auto& u : data_.users) {
      labels_.push_back(label_distribution(u, u.num_classes));
      weights_.push_back(static_cast<double>(u.size()));
    }
    record_.num_users = cfg_.partition.num_users;
  }

  int round() const noexcept { return t_; }
  bool done() const noexcept { return t_ >= cfg_.rounds; }
  const ModelVector& model() const noexcept { return model_; }
  const MetricsRecord& metrics() const noexcept { return metrics_; }
  const EnergyState& energy() const noexcept { return energy_; }
  const ExperimentData& data() const noexcept { return data_; }
  const ExperimentConfig& config() const noexcept { return cfg_; }
  const UserSet& last_scheduled() const noexcept { return last_scheduled_; }
  const std::optional<Clustering>& clustering() const noexcept { return clustering_; }
  const ParticipationRecord& participation() const noexcept { return record_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  long long energy_harvested() const noexcept { return harvested_; }
  long long energy_consumed() const noexcept { return consumed_; }
  int initial_energy() const noexcept { return initial_energy_; }

  std::string phase() const {
    if (cfg_.policy.kind != PolicyKind::Lse) return "train";
    return t_ < cfg_.policy.estimation_rounds ? "estimation" : "scheduled";
  }

  /// Full local gradients of every user at the current global model.
  std::vector<ModelVector> full_gradients() const {
    std::vector<ModelVector> g;
    g.reserve(data_.users.size());
    for (const auto& u : data_.users) g.push_back(gradient(model_, u, cfg_.training.l2));
    return g;
  }

  void step() {
    if (done()) return;
    const int t = t_;
    const std::uint64_t seed = cfg_.seed;

    const EnergyState before = energy_;
    energy_ = harvest(energy_, derive_seed(seed, {stream::kHarvest, static_cast<std::uint64_t>(t)}));
    harvested_ += energy_.full_count() - before.full_count();
    const UserSet feasible = feasible_users(energy_);

    const std::string tag = phase();
    const bool estimating = tag == "estimation";
    if (cfg_.policy.kind == PolicyKind::Lse && t == cfg_.policy.estimation_rounds) build_clusters();
    const UserSet scheduled = select(feasible, t);
    last_scheduled_ = scheduled;

    const bool evaluate_now = (t + 1) % cfg_.eval_every == 0;
    double eps = std::numeric_limits<double>::quiet_NaN();
    if (evaluate_now && cfg_.track_epsilon && !scheduled.empty())
      eps = compute_epsilon(full_gradients(), scheduled);

    if (!scheduled.empty()) {
      std::vector<ComplexUpdate> packed;
      packed.reserve(scheduled.size());
      for (int m : scheduled) {
        const auto& local = data_.users[static_cast<std::size_t>(m)];
        const ModelVector trained = local_train(
            model_, local, cfg_.training,
            derive_seed(seed, {stream::kTrain, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(m)}), t);
        ModelVector delta = compute_update(model_, trained);
        if (estimating) {
          const double norm = delta.norm();
          if (norm > 0.0) delta /= norm;
        }
        packed.push_back(pack_complex(delta));
      }
      ComplexUpdate y;
      if (cfg_.channel_model == ChannelModel::Orthogonal) {
        const auto r = ChannelRealization::orthogonal(static_cast<int>(scheduled.size()), half_dim_, cfg_.channel);
        y = transmit_and_combine(packed, r, cfg_.channel);
      } else {
        y = over_the_air(packed, half_dim_, cfg_.channel,
                         derive_seed(seed, {stream::kChannel, static_cast<std::uint64_t>(t)}));
      }
      const int count = static_cast<int>(scheduled.size());
      const ModelVector estimate = estimate_aggregate(y, count, cfg_.channel);
      if (estimating)
        record_ = accumulate_estimation_round(std::move(record_), mask_of(scheduled, cfg_.partition.num_users),
                                              estimate, count);
      model_ += estimate;
      energy_ = consume(energy_, scheduled);
      consumed_ += count;
    }

    ++t_;
    if (evaluate_now) {
      const Evaluation ev = evaluate(model_, data_.test);
      metrics_.rows.push_back({t_, static_cast<int>(scheduled.size()), ev.accuracy, ev.loss, eps,
                               energy_.full_count(), tag});
    }
  }

  void run() {
    while (!done()) step();
  }

 private:
  UserSet select(const UserSet& feasible, int t) const {
    switch (cfg_.policy.kind) {
      case PolicyKind::None:
        return schedule_all(feasible);
      case PolicyKind::Entropy:
        return schedule_entropy(feasible, labels_, weights_,
                                cfg_.policy.max_subset > 0 ? cfg_.policy.max_subset : INT_MAX);
      case PolicyKind::Lse:
        if (t < cfg_.policy.estimation_rounds || !clustering_) return schedule_all(feasible);
        return schedule_clustered(feasible, *clustering_,
                                  derive_seed(cfg_.seed, {stream::kSchedule, static_cast<std::uint64_t>(t)}));
    }
    return {};
  }

  void build_clusters() {
    if (record_.size() == 0) {
      warnings_.push_back("lse: no estimation-phase observations; falling back to scheduling all feasible users");
      return;
    }
    const double ridge = cfg_.policy.ridge.value_or(default_ridge(record_));
    const RepresentationMatrix reps = estimate_representations(record_, ridge);
    clustering_ = cluster_users(reps, cfg_.policy.num_clusters);
    if (!clustering_->warning.empty()) warnings_.push_back("lse: " + clustering_->warning);
  }

  ExperimentConfig cfg_;
  ExperimentData data_;
  ModelVector model_;
  int half_dim_ = 0;
  EnergyState energy_;
  int initial_energy_ = 0;
  long long harvested_ = 0;
  long long consumed_ = 0;
  std::vector<LabelDistribution> labels_;
  std::vector<double> weights_;
  ParticipationRecord record_;
  std::optional<Clustering> clustering_;
  UserSet last_scheduled_;
  std::vector<std::string> warnings_;
  MetricsRecord metrics_;
  int t_ = 0;
};

inline MetricsRecord run_experiment(const ExperimentConfig& cfg, ExperimentData data) {
  Simulation sim(cfg, std::move(data));
  sim.run();
  for (const auto& w : sim.warnings()) std::cerr << "warning: " << w << '\n';
  return sim.metrics();
}

inline MetricsRecord run_experiment(const ExperimentConfig& cfg) { return run_experiment(cfg, prepare_data(cfg)); }

// ---------------------------------------------------------------------------
// Metrics persistence

inline const char* const kMetricsColumns[] = {"t",       "num_scheduled",      "test_accuracy", "test_loss",
                                              "epsilon", "battery_full_count", "phase"};

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace detail

inline std::string metrics_to_csv(const MetricsRecord& record) {
  std::string out;
  for (std::size_t i = 0; i < std::size(kMetricsColumns); ++i) out += (i ? "," : "") + std::string(kMetricsColumns[i]);
  out += '\n';
  for (const auto& r : record.rows) {
    out += std::to_string(r.t) + ',' + std::to_string(r.num_scheduled) + ',' + detail::format_double(r.test_accuracy) +
           ',' + detail::format_double(r.test_loss) + ',' + detail::format_double(r.epsilon) + ',' +
           std::to_string(r.battery_full_count) + ',' + r.phase + '\n';
  }
  return out;
}

inline MetricsRecord metrics_from_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("metrics csv: missing header");
  const auto header = detail::split_csv_line(line);
  if (header.size() != std::size(kMetricsColumns) ||
      !std::equal(header.begin(), header.end(), std::begin(kMetricsColumns)))
    throw FormatError("metrics csv: unexpected header");
  MetricsRecord rec;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = detail::split_csv_line(line);
    if (c.size() != header.size()) throw FormatError("metrics csv: wrong column count");
    rec.rows.push_back({std::stoi(c[0]), std::stoi(c[1]), detail::parse_double(c[2]), detail::parse_double(c[3]),
                        detail::parse_double(c[4]), std::stoi(c[5]), c[6]});
  }
  return rec;
}

inline nlohmann::json metrics_to_json(const MetricsRecord& record) {
  nlohmann::json arr = nlohmann::json::array();
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  for (const auto& r : record.rows) {
    arr.push_back({{"t", r.t},
                   {"num_scheduled", r.num_scheduled},
                   {"test_accuracy", num(r.test_accuracy)},
                   {"test_loss", num(r.test_loss)},
                   {"epsilon", num(r.epsilon)},
                   {"battery_full_count", r.battery_full_count},
                   {"phase", r.phase}});
  }
  return arr;
}

inline MetricsRecord metrics_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw FormatError("metrics json: expected an array");
  auto num = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  MetricsRecord rec;
  for (const auto& o : arr)
    rec.rows.push_back({o.at("t").get<int>(), o.at("num_scheduled").get<int>(), num(o.at("test_accuracy")),
                        num(o.at("test_loss")), num(o.at("epsilon")), o.at("battery_full_count").get<int>(),
                        o.at("phase").get<std::string>()});
  return rec;
}

enum class MetricsFormat { Csv, Json };

inline void export_metrics(const MetricsRecord& record, const std::filesystem::path& path, MetricsFormat format) {
  auto out = detail::open_for_write(path);
  if (format == MetricsFormat::Csv)
    out << metrics_to_csv(record);
  else
    out << metrics_to_json(record).dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline MetricsRecord import_metrics(const std::filesystem::path& path, MetricsFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  if (format == MetricsFormat::Csv) return metrics_from_csv(in);
  return metrics_from_json(nlohmann::json::parse(in));
}

/// Aligned t-vs-accuracy table, one column per labelled run. Series are
/// resampled onto the union of evaluation rounds by forward fill; cells before
/// a series' first evaluation are left empty.
inline std::string plot_table(const std::vector<std::pair<std::string, MetricsRecord>>& series) {
  std::vector<int> grid;
  for (const auto& [label, rec] : series)
    for (const auto& r : rec.rows) grid.push_back(r.t);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::string out = "t";
  for (const auto& [label, rec] : series) out += "," + label;
  out += '\n';
  std::vector<std::size_t> cursor(series.size(), 0);
  std::vector<std::optional<double>> last(series.size());
  for (int t : grid) {
    out += std::to_string(t);
    for (std::size_t s = 0; s < series.size(); ++s) {
      const auto& rows = series[s].second.rows;
      while (cursor[s] < rows.size() && rows[cursor[s]].t <= t) last[s] = rows[cursor[s]++].test_accuracy;
      out += ',';
      if (last[s]) out += detail::format_double(*last[s]);
    }
    out += '\n';
  }
  return out;
}

inline void emit_plot_data(const std::vector<std::pair<std::string, MetricsRecord>>& series,
                           const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  out << plot_table(series);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

/// Element-wise mean accuracy over replicate runs that share an evaluation grid.
inline MetricsRecord mean_metrics(const std::vector<MetricsRecord>& runs) {
  if (runs.empty()) return {};
  MetricsRecord mean = runs.front();
  for (std::size_t i = 0; i < mean.rows.size(); ++i) {
    double acc = 0.0, ls = 0.0, eps = 0.0, sched = 0.0, full = 0.0;
    for (const auto& r : runs) {
      if (r.rows.size() != mean.rows.size() || r.rows[i].t != mean.rows[i].t)
        throw ConfigError("mean_metrics: runs have different evaluation grids");
      acc += r.rows[i].test_accuracy;
      ls += r.rows[i].test_loss;
      eps += r.rows[i].epsilon;
      sched += r.rows[i].num_scheduled;
      full += r.rows[i].battery_full_count;
    }
    const double n = static_cast<double>(runs.size());
    mean.rows[i].test_accuracy = acc / n;
    mean.rows[i].test_loss = ls / n;
    mean.rows[i].epsilon = eps / n;
    mean.rows[i].num_scheduled = static_cast<int>(std::lround(sched / n));
    mean.rows[i].battery_full_count = static_cast<int>(std::lround(full / n));
  }
  return mean;
}

/// Seed of replicate i: the base seed itself, then derived streams.
inline std::uint64_t replicate_seed(std::uint64_t base, int i) {
  return i == 0 ? base : derive_seed(base, {0x5eed, static_cast<std::uint64_t>(i)});
}

// ---------------------------------------------------------------------------
// Convergence bound next to a measured run

/// Any field left unset is estimated from the experiment.
struct BoundOverrides {
  std::optional<double> mu, L, G2, Gamma, c, epsilon;
  int probe_steps = 50;
};

struct BoundReport {
  ProblemConstants constants;
  double gamma = 0.0;
  double c = 0.0;
  double initial_dist2 = 0.0;
  std::vector<int> num_scheduled;   // per round
  std::vector<double> epsilon;      // per round, as used in the bound
  std::vector<double> measured;     // ||theta(t) - theta*||^2, t = 1..rounds
  std::vector<double> bound;        // bound_trajectory, t = 1..rounds
};

inline BoundReport run_bound_check(const ExperimentConfig& cfg, const BoundOverrides& ov = {}) {
  ExperimentData data = prepare_data(cfg);
  const double l2 = cfg.training.l2;
  BoundReport rep;

  ConstantsProbe probe{l2, cfg.training.batch_size, cfg.training.eta, ov.probe_steps,
                       derive_seed(cfg.seed, {0xb0, 1})};
  if (!ov.mu || !ov.L || !ov.G2) rep.constants = estimate_constants(data.users, probe);
  if (ov.mu) rep.constants.mu = *ov.mu;
  if (ov.L) rep.constants.L = *ov.L;
  if (ov.G2) rep.constants.G2 = *ov.G2;

  const Dataset pooled = concatenate(data.users);
  const MinimizeResult global = reference_minimize(pooled, l2);
  if (ov.Gamma) {
    rep.gamma = *ov.Gamma;
  } else {
    std::vector<double> local_opt, weights;
    for (const auto& u : data.users) {
      local_opt.push_back(reference_minimize(u, l2).loss);
      weights.push_back(static_cast<double>(u.size()) / static_cast<double>(pooled.size()));
    }
    rep.gamma = compute_gamma(global.loss, local_opt, weights);
  }

  Simulation sim(cfg, std::move(data));
  rep.initial_dist2 = (sim.model() - global.theta).squaredNorm();
  while (!sim.done()) {
    // epsilon(t) uses the pre-step model and the schedule chosen during the step.
    std::vector<ModelVector> grads;
    if (!ov.epsilon) grads = sim.full_gradients();
    sim.step();
    const UserSet& s = sim.last_scheduled();
    rep.epsilon.push_back(ov.epsilon ? *ov.epsilon : (s.empty() ? 0.0 : compute_epsilon(grads, s)));
    rep.num_scheduled.push_back(static_cast<int>(s.size()));
    rep.measured.push_back((sim.model() - global.theta).squaredNorm());
  }

  BoundParams p;
  p.mu = rep.constants.mu;
  p.L = rep.constants.L;
  p.G2 = rep.constants.G2;
  p.Gamma = rep.gamma;
  p.tau = cfg.training.tau;
  const TrainingConfig training = cfg.training;
  p.eta = [training](int t) { return training.eta_at(t); };
  p.K = cfg.channel.K;
  p.N = shape_of(sim.data().users.front()).half_dim();
  p.sigma_z2 = cfg.channel_model == ChannelModel::Orthogonal ? 0.0 : cfg.channel.sigma_z2;
  p.sigma_h2 = cfg.channel.sigma_h2;
  const double alpha = cfg.channel.alpha;
  p.alpha = [alpha](int) { return alpha; };
  const std::vector<int> sizes = rep.num_scheduled;
  p.S_size = [sizes](int t) { return std::max(1, sizes.at(static_cast<std::size_t>(t))); };
  const std::vector<double> eps = rep.epsilon;
  p.epsilon = [eps](int t) { return eps.at(static_cast<std::size_t>(t)); };
  p.c = ov.c.value_or(default_c(p));
  rep.c = p.c;
  rep.bound = bound_trajectory(rep.initial_dist2, cfg.rounds, p);
  return rep;
}

inline std::string bound_report_csv(const BoundReport& rep) {
  std::string out = "t,measured_dist2,bound,num_scheduled,epsilon\n";
  for (std::size_t i = 0; i < rep.bound.size(); ++i) {
    out += std::to_string(i + 1) + ',' + detail::format_double(rep.measured[i]) + ',' +
           detail::format_double(rep.bound[i]) + ',' + std::to_string(rep.num_scheduled[i]) + ',' +
           detail::format_double(rep.epsilon[i]) + '\n';
  }
  return out;
}

}  // namespace otafl

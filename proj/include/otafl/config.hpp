#pragma once

// Strict JSON mapping for ExperimentConfig and BoundOverrides. Unknown keys
// are rejected; omitted keys keep their defaults.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <string>

#include "json.hpp"

#include "otafl/error.hpp"
#include "otafl/orchestrator.hpp"

namespace otafl {

using json = nlohmann::json;

namespace detail {

inline void expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

inline void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  expect_object(j, where);
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!keys.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  using detail::read;
  using detail::reject_unknown;
  ExperimentConfig cfg;
  reject_unknown(j, "config",
                 {"dataset", "partition", "training", "channel", "energy", "policy", "rounds", "seed", "eval_every",
                  "track_epsilon"});

  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    reject_unknown(d, "dataset",
                   {"kind", "num_classes", "num_features", "train_per_class", "test_per_class", "seed",
                    "train_images", "train_labels", "test_images", "test_labels"});
    std::string kind = "synthetic";
    read(d, "kind", kind, "dataset");
    if (kind == "synthetic")
      cfg.dataset.kind = DatasetKind::Synthetic;
    else if (kind == "mnist")
      cfg.dataset.kind = DatasetKind::Mnist;
    else if (kind == "fmnist")
      cfg.dataset.kind = DatasetKind::Fmnist;
    else
      throw ConfigError("dataset.kind must be synthetic, mnist or fmnist");
    read(d, "num_classes", cfg.dataset.num_classes, "dataset");
    read(d, "num_features", cfg.dataset.num_features, "dataset");
    read(d, "train_per_class", cfg.dataset.train_per_class, "dataset");
    read(d, "test_per_class", cfg.dataset.test_per_class, "dataset");
    if (d.contains("seed")) {
      std::uint64_t s = 0;
      read(d, "seed", s, "dataset");
      cfg.dataset.seed = s;
    }
    read(d, "train_images", cfg.dataset.train_images, "dataset");
    read(d, "train_labels", cfg.dataset.train_labels, "dataset");
    read(d, "test_images", cfg.dataset.test_images, "dataset");
    read(d, "test_labels", cfg.dataset.test_labels, "dataset");
    if (cfg.dataset.kind != DatasetKind::Synthetic &&
        (cfg.dataset.train_images.empty() || cfg.dataset.train_labels.empty() || cfg.dataset.test_images.empty() ||
         cfg.dataset.test_labels.empty()))
      throw ConfigError("dataset: IDX corpora need train_images, train_labels, test_images and test_labels");
  }

  if (j.contains("partition")) {
    const json& p = j["partition"];
    reject_unknown(p, "partition", {"mode", "classes_per_user", "beta", "num_users", "samples_per_user", "seed"});
    std::string mode = "classes_per_user";
    read(p, "mode", mode, "partition");
    if (mode == "classes_per_user")
      cfg.partition.mode = PartitionMode::ClassesPerUser;
    else if (mode == "dirichlet")
      cfg.partition.mode = PartitionMode::Dirichlet;
    else
      throw ConfigError("partition.mode must be classes_per_user or dirichlet");
    read(p, "classes_per_user", cfg.partition.classes_per_user, "partition");
    read(p, "beta", cfg.partition.beta, "partition");
    read(p, "num_users", cfg.partition.num_users, "partition");
    read(p, "samples_per_user", cfg.partition.samples_per_user, "partition");
    if (p.contains("seed")) {
      read(p, "seed", cfg.partition.seed, "partition");
      cfg.partition_seed_set = true;
    }
  }

  if (j.contains("training")) {
    const json& t = j["training"];
    reject_unknown(t, "training", {"tau", "eta", "batch_size", "lr_decay", "lr_step", "l2"});
    read(t, "tau", cfg.training.tau, "training");
    read(t, "eta", cfg.training.eta, "training");
    read(t, "batch_size", cfg.training.batch_size, "training");
    read(t, "lr_decay", cfg.training.lr_decay, "training");
    read(t, "lr_step", cfg.training.lr_step, "training");
    read(t, "l2", cfg.training.l2, "training");
  }

  if (j.contains("channel")) {
    const json& c = j["channel"];
    reject_unknown(c, "channel", {"K", "sigma_h2", "sigma_z2", "alpha", "model"});
    read(c, "K", cfg.channel.K, "channel");
    read(c, "sigma_h2", cfg.channel.sigma_h2, "channel");
    read(c, "sigma_z2", cfg.channel.sigma_z2, "channel");
    read(c, "alpha", cfg.channel.alpha, "channel");
    std::string model = "fading";
    read(c, "model", model, "channel");
    if (model == "fading")
      cfg.channel_model = ChannelModel::Fading;
    else if (model == "orthogonal")
      cfg.channel_model = ChannelModel::Orthogonal;
    else
      throw ConfigError("channel.model must be fading or orthogonal");
  }

  if (j.contains("energy")) {
    const json& e = j["energy"];
    reject_unknown(e, "energy", {"p_e", "start_full"});
    if (e.contains("p_e")) {
      if (e["p_e"].is_number()) {
        cfg.energy.p_e = {e["p_e"].get<double>()};
      } else {
        detail::read(e, "p_e", cfg.energy.p_e, "energy");
      }
    }
    read(e, "start_full", cfg.energy.start_full, "energy");
  }

  if (j.contains("policy")) {
    const json& p = j["policy"];
    reject_unknown(p, "policy", {"kind", "max_subset", "estimation_rounds", "num_clusters", "ridge"});
    std::string kind = "none";
    read(p, "kind", kind, "policy");
    if (kind == "none")
      cfg.policy.kind = PolicyKind::None;
    else if (kind == "entropy")
      cfg.policy.kind = PolicyKind::Entropy;
    else if (kind == "lse")
      cfg.policy.kind = PolicyKind::Lse;
    else
      throw ConfigError("policy.kind must be none, entropy or lse");
    read(p, "max_subset", cfg.policy.max_subset, "policy");
    read(p, "estimation_rounds", cfg.policy.estimation_rounds, "policy");
    read(p, "num_clusters", cfg.policy.num_clusters, "policy");
    if (p.contains("ridge")) {
      double r = 0.0;
      read(p, "ridge", r, "policy");
      cfg.policy.ridge = r;
    }
  }

  read(j, "rounds", cfg.rounds, "config");
  read(j, "seed", cfg.seed, "config");
  read(j, "eval_every", cfg.eval_every, "config");
  read(j, "track_epsilon", cfg.track_epsilon, "config");
  cfg.validate();
  return cfg;
}

inline json config_to_json(const ExperimentConfig& cfg) {
  json j;
  const auto& d = cfg.dataset;
  j["dataset"] = {{"kind", d.kind == DatasetKind::Synthetic ? "synthetic" : d.kind == DatasetKind::Mnist ? "mnist" : "fmnist"}};
  if (d.kind == DatasetKind::Synthetic) {
    j["dataset"]["num_classes"] = d.num_classes;
    j["dataset"]["num_features"] = d.num_features;
    j["dataset"]["train_per_class"] = d.train_per_class;
    j["dataset"]["test_per_class"] = d.test_per_class;
    if (d.seed) j["dataset"]["seed"] = *d.seed;
  } else {
    j["dataset"]["train_images"] = d.train_images;
    j["dataset"]["train_labels"] = d.train_labels;
    j["dataset"]["test_images"] = d.test_images;
    j["dataset"]["test_labels"] = d.test_labels;
  }
  const auto& p = cfg.partition;
  j["partition"] = {{"mode", p.mode == PartitionMode::ClassesPerUser ? "classes_per_user" : "dirichlet"},
                    {"classes_per_user", p.classes_per_user},
                    {"beta", p.beta},
                    {"num_users", p.num_users},
                    {"samples_per_user", p.samples_per_user}};
  if (cfg.partition_seed_set) j["partition"]["seed"] = p.seed;
  const auto& t = cfg.training;
  j["training"] = {{"tau", t.tau},           {"eta", t.eta},         {"batch_size", t.batch_size},
                   {"lr_decay", t.lr_decay}, {"lr_step", t.lr_step}, {"l2", t.l2}};
  j["channel"] = {{"K", cfg.channel.K},
                  {"sigma_h2", cfg.channel.sigma_h2},
                  {"sigma_z2", cfg.channel.sigma_z2},
                  {"alpha", cfg.channel.alpha},
                  {"model", cfg.channel_model == ChannelModel::Fading ? "fading" : "orthogonal"}};
  j["energy"] = {{"p_e", cfg.energy.p_e}, {"start_full", cfg.energy.start_full}};
  const auto& pol = cfg.policy;
  j["policy"] = {{"kind", pol.kind == PolicyKind::None ? "none" : pol.kind == PolicyKind::Entropy ? "entropy" : "lse"},
                 {"max_subset", pol.max_subset},
                 {"estimation_rounds", pol.estimation_rounds},
                 {"num_clusters", pol.num_clusters}};
  if (pol.ridge) j["policy"]["ridge"] = *pol.ridge;
  j["rounds"] = cfg.rounds;
  j["seed"] = cfg.seed;
  j["eval_every"] = cfg.eval_every;
  j["track_epsilon"] = cfg.track_epsilon;
  return j;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json_file(path));
}

inline BoundOverrides bound_overrides_from_json(const json& j) {
  detail::reject_unknown(j, "params", {"mu", "L", "G2", "Gamma", "c", "epsilon", "probe_steps"});
  BoundOverrides ov;
  auto opt = [&](const char* key, std::optional<double>& out) {
    if (j.contains(key)) {
      if (!j[key].is_number()) throw ConfigError(std::string("params.") + key + ": expected a number");
      out = j[key].get<double>();
    }
  };
  opt("mu", ov.mu);
  opt("L", ov.L);
  opt("G2", ov.G2);
  opt("Gamma", ov.Gamma);
  opt("c", ov.c);
  opt("epsilon", ov.epsilon);
  detail::read(j, "probe_steps", ov.probe_steps, "params");
  return ov;
}

}  // namespace otafl

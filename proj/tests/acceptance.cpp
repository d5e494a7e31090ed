// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "otafl/analysis.hpp"
#include "otafl/channel.hpp"
#include "otafl/orchestrator.hpp"
#include "otafl/scheduling.hpp"

using namespace otafl;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double stddev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

std::vector<ComplexUpdate> unit_updates(int users, int N, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<ComplexUpdate> out;
  for (int m = 0; m < users; ++m) {
    ComplexUpdate u(N);
    for (int n = 0; n < N; ++n) u[n] = {g(rng), g(rng)};
    u /= u.norm();
    out.push_back(u);
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome interference_decay() {
  const int users = 5, N = 16, seeds = 100;
  const ChannelConfig base{.K = 1, .sigma_h2 = 1.0, .sigma_z2 = 0.0};
  std::vector<double> xs, ys;
  std::string detail;
  for (int K : {10, 40, 160, 640}) {
    ChannelConfig cfg = base;
    cfg.K = K;
    double power = 0.0;
    for (int s = 0; s < seeds; ++s) {
      std::mt19937_64 rng(500 + static_cast<std::uint64_t>(s));
      const auto updates = unit_updates(users, N, rng);
      const auto r = draw_channel(users, N, cfg, derive_seed(11, {static_cast<std::uint64_t>(K), static_cast<std::uint64_t>(s)}));
      power += decompose(updates, r, cfg).interference.squaredNorm() / N;
    }
    power /= seeds;
    xs.push_back(std::log(K));
    ys.push_back(std::log(power));
    detail += "K=" + std::to_string(K) + ":" + fmt("%.4g", power) + " ";
  }
  const double mx = mean(xs), my = mean(ys);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxy / sxx;
  return {slope >= -1.3 && slope <= -0.7, detail + "slope=" + fmt("%.3f", slope) + " (need [-1.3, -0.7])"};
}

Outcome estimator_consistency() {
  const int users = 5, N = 100;
  const ChannelConfig cfg{.K = 10000, .sigma_h2 = 1.0, .sigma_z2 = 0.0};
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 1.0);
  ModelVector theta(2 * N);
  for (auto& x : theta) x = g(rng);
  const std::vector<ComplexUpdate> updates(users, pack_complex(theta));
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const ModelVector est = estimate_aggregate(over_the_air(updates, N, cfg, derive_seed(21, {s})), users, cfg);
    worst = std::max(worst, (est - theta).norm() / theta.norm());
  }
  return {worst <= 0.05, "worst relative L2 error over 5 channel draws=" + fmt("%.4f", worst) + " (need <= 0.05)"};
}

// Shared setup for the scheduling-gain criteria.
ExperimentConfig gain_config(PolicyKind kind, std::uint64_t seed) {
  ExperimentConfig c;
  c.dataset.num_classes = 10;
  c.dataset.num_features = 20;
  c.partition.num_users = 40;
  c.partition.classes_per_user = 1;
  c.partition.samples_per_user = 200;
  c.energy.p_e = {0.25};
  c.channel = {.K = 200, .sigma_h2 = 1.0, .sigma_z2 = 0.1};
  c.policy.kind = kind;
  c.policy.estimation_rounds = 100;
  c.policy.num_clusters = 10;
  c.rounds = 300;
  c.eval_every = 1;
  c.track_epsilon = false;
  c.seed = seed;
  return c;
}

constexpr int kGainSeeds = 5;
constexpr std::uint64_t kGainBase = 2024;

struct PolicyRuns {
  std::vector<MetricsRecord> runs;
  double final_mean = 0.0;  // mean accuracy over the final 50 rounds, averaged over seeds
  double final_std = 0.0;   // per-seed std over the final 50 rounds, averaged over seeds
  double post_mean = 0.0;   // mean accuracy over rounds 101..300, averaged over seeds
};

PolicyRuns run_policy(PolicyKind kind) {
  PolicyRuns out;
  for (int i = 0; i < kGainSeeds; ++i) {
    out.runs.push_back(run_experiment(gain_config(kind, replicate_seed(kGainBase, i))));
    const auto& rows = out.runs.back().rows;
    std::vector<double> last, post;
    for (const auto& r : rows) {
      if (r.t > 250) last.push_back(r.test_accuracy);
      if (r.t > 100) post.push_back(r.test_accuracy);
    }
    out.final_mean += mean(last) / kGainSeeds;
    out.final_std += stddev(last) / kGainSeeds;
    out.post_mean += mean(post) / kGainSeeds;
  }
  return out;
}

Outcome entropy_gain(const PolicyRuns& none, const PolicyRuns& entropy) {
  const double gain = 100.0 * (entropy.final_mean - none.final_mean);
  const bool ok = gain >= 3.0 && entropy.final_std < none.final_std;
  return {ok, "final-50 accuracy none=" + fmt("%.4f", none.final_mean) + " entropy=" + fmt("%.4f", entropy.final_mean) +
                  " gain=" + fmt("%.2f", gain) + " pts (need >= 3); std none=" + fmt("%.4f", none.final_std) +
                  " entropy=" + fmt("%.4f", entropy.final_std) + " (need entropy lower)"};
}

Outcome lse_clustering() {
  auto run = [](ChannelModel model, std::uint64_t seed) {
    ExperimentConfig c;
    c.dataset.num_classes = 10;
    c.dataset.num_features = 20;
    c.partition.num_users = 20;
    c.partition.classes_per_user = 1;
    c.partition.samples_per_user = 200;
    c.energy.p_e = {0.25};
    c.channel = {.K = 200, .sigma_h2 = 1.0, .sigma_z2 = 0.1};
    c.channel_model = model;
    c.policy.kind = PolicyKind::Lse;
    c.policy.estimation_rounds = 100;
    c.policy.num_clusters = 10;
    c.rounds = 101;
    c.eval_every = 101;
    c.track_epsilon = false;
    c.seed = seed;
    Simulation sim(c, prepare_data(c));
    sim.run();
    std::vector<int> truth;
    for (const auto& u : sim.data().users) truth.push_back(u.labels.front());
    return adjusted_rand_index(sim.clustering()->assignment, truth);
  };
  bool ok = true;
  std::string detail = "ARI fading:";
  for (int i = 0; i < 3; ++i) {
    const double ari = run(ChannelModel::Fading, replicate_seed(7, i));
    ok = ok && ari >= 0.8;
    detail += " " + fmt("%.3f", ari);
  }
  detail += " (need >= 0.8); noiseless:";
  for (int i = 0; i < 3; ++i) {
    const double ari = run(ChannelModel::Orthogonal, replicate_seed(7, i));
    ok = ok && ari >= 0.99;
    detail += " " + fmt("%.3f", ari);
  }
  return {ok, detail + " (need >= 0.99)"};
}

Outcome lse_gain(const PolicyRuns& none, const PolicyRuns& entropy, const PolicyRuns& lse) {
  const double gain = 100.0 * (lse.post_mean - none.post_mean);
  const double gap = 100.0 * std::abs(lse.post_mean - entropy.post_mean);
  return {gain >= 2.0 && gap <= 3.0,
          "rounds 101-300 accuracy none=" + fmt("%.4f", none.post_mean) + " entropy=" + fmt("%.4f", entropy.post_mean) +
              " lse=" + fmt("%.4f", lse.post_mean) + "; gain=" + fmt("%.2f", gain) + " pts (need >= 2), |lse-entropy|=" +
              fmt("%.2f", gap) + " pts (need <= 3)"};
}

Outcome bound_validity() {
  int passed = 0;
  std::string detail;
  for (int i = 0; i < 5; ++i) {
    ExperimentConfig c;
    c.dataset.num_classes = 4;
    c.dataset.num_features = 9;  // (9+1)*4 = 40 parameters
    c.dataset.train_per_class = 200;
    c.dataset.test_per_class = 50;
    c.partition.num_users = 8;
    c.partition.classes_per_user = 2;
    c.partition.samples_per_user = 100;
    c.training.l2 = 0.1;
    c.energy.p_e = {1.0};
    c.energy.start_full = true;
    c.channel = {.K = 2000, .sigma_h2 = 1.0, .sigma_z2 = 0.1};
    c.rounds = 200;
    c.eval_every = 200;
    c.track_epsilon = false;
    c.seed = replicate_seed(99, i);
    const BoundReport rep = run_bound_check(c);
    bool ok = true;
    double tightest = 0.0;
    for (std::size_t t = 0; t < rep.bound.size(); ++t) {
      ok = ok && rep.measured[t] <= rep.bound[t] && rep.epsilon[t] == 0.0;
      tightest = std::max(tightest, rep.measured[t] / rep.bound[t]);
    }
    passed += ok;
    detail += " " + fmt("%.3g", tightest);
  }
  return {passed == 5, std::to_string(passed) + "/5 seeds below bound at every t<=200 (need 5/5); max measured/bound:" +
                           detail};
}

Outcome oracle_suite() {
  std::string joined = OTAFL_UNIT_BINARIES;
  std::vector<std::string> bins;
  std::stringstream ss(joined);
  for (std::string b; std::getline(ss, b, '|');)
    if (!b.empty()) bins.push_back(b);
  int failed = 0;
  for (const auto& b : bins) {
    const std::string cmd = "\"" + b + "\" --gtest_brief=1 > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      ++failed;
      std::printf("  unit binary failed: %s\n", b.c_str());
    }
  }
  return {!bins.empty() && failed == 0,
          std::to_string(bins.size() - failed) + "/" + std::to_string(bins.size()) + " unit test binaries green"};
}

Outcome determinism(const MetricsRecord& first) {
  const MetricsRecord again = run_experiment(gain_config(PolicyKind::Entropy, replicate_seed(kGainBase, 0)));
  const std::string a = metrics_to_csv(first), b = metrics_to_csv(again);
  return {a == b, "entropy run, seed " + std::to_string(kGainBase) + ": " + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + " CSV bytes, " + (a == b ? "identical" : "different")};
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  int failures = 0;
  auto report = [&](int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
    const auto start = clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(clock::now() - start).count();
    const bool in_time = limit_s <= 0.0 || secs < limit_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("%s criterion %d (%s): %s; %.1f s", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    if (limit_s > 0.0) std::printf(" (limit %.0f s%s)", limit_s, in_time ? "" : ", exceeded");
    std::printf("\n");
    std::fflush(stdout);
  };

  report(1, "interference decay", 60, interference_decay);
  report(2, "estimator consistency", 10, estimator_consistency);

  PolicyRuns none, entropy, lse;
  report(3, "entropy scheduling gain", 600, [&] {
    none = run_policy(PolicyKind::None);
    entropy = run_policy(PolicyKind::Entropy);
    return entropy_gain(none, entropy);
  });
  report(4, "lse clustering", 600, lse_clustering);
  report(5, "lse scheduling gain", 600, [&] {
    lse = run_policy(PolicyKind::Lse);
    return lse_gain(none, entropy, lse);
  });
  report(6, "bound validity", 300, bound_validity);
  report(7, "oracle equivalence suite", 300, oracle_suite);
  report(8, "determinism", 0, [&] {
    if (entropy.runs.empty()) return Outcome{false, "criterion 3 runs missing"};
    return determinism(entropy.runs.front());
  });

  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

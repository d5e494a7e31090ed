// Command-line front end: simulate, compare and bound.

#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "otafl/config.hpp"
#include "otafl/orchestrator.hpp"

namespace fs = std::filesystem;
using namespace otafl;

namespace {

MetricsFormat parse_format(const std::string& f) { return f == "json" ? MetricsFormat::Json : MetricsFormat::Csv; }

std::string extension(MetricsFormat f) { return f == MetricsFormat::Json ? ".json" : ".csv"; }

/// Runs `seeds` replicates and writes one metrics file per replicate plus the
/// seed-averaged curve. Returns the averaged record.
MetricsRecord run_replicates(const ExperimentConfig& base, int seeds, const fs::path& out_dir, const std::string& stem,
                             MetricsFormat format) {
  std::vector<MetricsRecord> runs;
  for (int i = 0; i < seeds; ++i) {
    ExperimentConfig cfg = base;
    cfg.seed = replicate_seed(base.seed, i);
    runs.push_back(run_experiment(cfg));
    const std::string name = seeds == 1 ? stem : stem + "_seed" + std::to_string(i);
    export_metrics(runs.back(), out_dir / (name + extension(format)), format);
    const auto& rows = runs.back().rows;
    std::cout << stem << " seed " << cfg.seed << ": ";
    if (rows.empty())
      std::cout << "no evaluated rounds\n";
    else
      std::cout << "final accuracy " << rows.back().test_accuracy << " at t=" << rows.back().t << '\n';
  }
  MetricsRecord mean = mean_metrics(runs);
  if (seeds > 1) export_metrics(mean, out_dir / (stem + "_mean" + extension(format)), format);
  return mean;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Over-the-air federated learning simulator with energy-harvesting users"};
  app.require_subcommand(1);

  std::string config_path, params_path, out_dir = ".", format = "csv";
  std::vector<std::string> config_paths;
  std::uint64_t seed = 0;
  int seeds = 1;

  auto* simulate = app.add_subcommand("simulate", "Run one experiment configuration");
  simulate->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  auto* seed_opt = simulate->add_option("--seed", seed, "Override the config seed");
  simulate->add_option("--seeds", seeds, "Number of replicate runs with derived seeds")->check(CLI::PositiveNumber);
  simulate->add_option("--out", out_dir, "Output directory");
  simulate->add_option("--format", format, "Metrics format")->check(CLI::IsMember({"csv", "json"}));

  auto* compare = app.add_subcommand("compare", "Run several configs and emit aligned plot data");
  compare->add_option("--configs", config_paths, "Experiment configs (JSON)")->required()->check(CLI::ExistingFile);
  compare->add_option("--out", out_dir, "Output directory")->required();
  compare->add_option("--seeds", seeds, "Replicates per config")->check(CLI::PositiveNumber);

  auto* bound = app.add_subcommand("bound", "Evaluate the convergence bound next to a measured run");
  bound->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  bound->add_option("--params", params_path, "Bound constants (JSON); missing entries are estimated")
      ->required()
      ->check(CLI::ExistingFile);
  bound->add_option("--out", out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(out_dir);
    if (*simulate) {
      ExperimentConfig cfg = load_config(config_path);
      if (*seed_opt) cfg.seed = seed;
      run_replicates(cfg, seeds, out_dir, "metrics", parse_format(format));
    } else if (*compare) {
      std::vector<std::pair<std::string, MetricsRecord>> series;
      for (const auto& path : config_paths) {
        const ExperimentConfig cfg = load_config(path);
        const std::string label = fs::path(path).stem().string();
        series.emplace_back(label, run_replicates(cfg, seeds, out_dir, label, MetricsFormat::Csv));
      }
      emit_plot_data(series, fs::path(out_dir) / "plot.csv");
      std::cout << "wrote " << (fs::path(out_dir) / "plot.csv").string() << '\n';
    } else if (*bound) {
      const ExperimentConfig cfg = load_config(config_path);
      const BoundOverrides ov = bound_overrides_from_json(read_json_file(params_path));
      const BoundReport rep = run_bound_check(cfg, ov);
      std::cout << "mu=" << rep.constants.mu << " L=" << rep.constants.L << " G2=" << rep.constants.G2
                << " Gamma=" << rep.gamma << " c=" << rep.c << " initial_dist2=" << rep.initial_dist2 << '\n';
      std::size_t violations = 0;
      for (std::size_t i = 0; i < rep.bound.size(); ++i) violations += rep.measured[i] > rep.bound[i];
      std::cout << "rounds where measured distance exceeds the bound: " << violations << " of " << rep.bound.size()
                << '\n';
      const fs::path out = fs::path(out_dir) / "bound.csv";
      std::ofstream(out) << bound_report_csv(rep);
      std::cout << "wrote " << out.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

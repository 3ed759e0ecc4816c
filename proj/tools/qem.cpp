// qem: command-line driver for the mitigation pipeline.
//
//   qem simulate  --config cfg.json --out DIR
//   qem dataset   --config cfg.json --out DIR
//   qem train     --config cfg.json --dataset DIR/dataset.csv --out DIR
//   qem evaluate  --config cfg.json --checkpoint DIR/checkpoint.json --out DIR
//   qem reproduce fig1a [--config cfg.json] --out DIR
//   qem scaling   --config cfg.json --out DIR
//   qem selfcheck
//
// Exit codes: 0 success, 1 configuration error, 2 failed check, 3 resource guard.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "qem/experiment.hpp"
#include "qem/selfcheck.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kCheck = 2, kResource = 3 };

struct Common {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::string backend;
  int threads = 0;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Experiment config (JSON)");
  cmd->add_option("--out", c.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Seed for the training inputs and their shot noise");
  cmd->add_option("--backend", c.backend, "Simulation backend")->check(CLI::IsMember({"auto", "dm", "traj"}));
  cmd->add_option("--threads", c.threads, "Worker threads (default: QEM_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_flag("--quiet", c.quiet, "No progress output");
}

nlohmann::json read_json_file(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw qem::ConfigError("cannot open config " + path);
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw qem::ConfigError("config " + path + ": " + e.what());
  }
}

/// Command-line flags take precedence over the config file.
nlohmann::json apply_flags(nlohmann::json j, const Common& c) {
  if (c.seed) j["seed"] = *c.seed;
  if (!c.backend.empty()) j["backend"] = c.backend;
  if (c.threads > 0) j["threads"] = c.threads;
  return j;
}

qem::ExperimentConfig resolve(const Common& c) { return qem::config_from_json(apply_flags(read_json_file(c.config_path), c)); }

void print_metrics(const char* label, const qem::MetricsReport& m) {
  std::cout << label << ": mse_before " << m.mse_before << "  mse_after " << m.mse_after << "  xi " << m.xi
            << "  (" << m.n_eval << " points)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning-based error mitigation for Trotterized 2D transverse-field Ising dynamics"};
  app.require_subcommand(1);

  Common common;
  std::string dataset_path, checkpoint_path, figure;
  int trajectories = 4000;
  bool mutate_rzz = false;

  auto* simulate = app.add_subcommand("simulate", "Run one circuit and write observables and shots");
  add_common(simulate, common);
  auto* dataset = app.add_subcommand("dataset", "Generate a training dataset");
  add_common(dataset, common);
  auto* train = app.add_subcommand("train", "Train a network on a dataset CSV");
  add_common(train, common);
  train->add_option("--dataset", dataset_path, "Dataset CSV written by 'dataset'")->required();
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on held-out target circuits");
  add_common(evaluate, common);
  evaluate->add_option("--checkpoint", checkpoint_path, "Checkpoint JSON written by 'train'")->required();
  auto* reproduce = app.add_subcommand("reproduce", "Regenerate the data behind one figure panel");
  add_common(reproduce, common);
  reproduce->add_option("figure", figure, "Figure id")->required()->check(CLI::IsMember(qem::figure_ids()));
  auto* scaling = app.add_subcommand("scaling", "xi against training-set size for several lattices");
  add_common(scaling, common);
  auto* selfcheck = app.add_subcommand("selfcheck", "Run the oracle checks");
  selfcheck->add_option("--trajectories", trajectories, "Trajectories in the backend comparison")
      ->check(CLI::PositiveNumber);
  selfcheck->add_flag("--mutate-rzz", mutate_rzz, "Flip the RZ sign in the RZZ decomposition (should fail)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    const bool verbose = !common.quiet;
    const std::filesystem::path out = common.out_dir;
    if (simulate->parsed()) {
      const auto cfg = resolve(common);
      const auto v = qem::cmd_simulate(cfg, out);
      const auto lat = qem::build_square_lattice(cfg.rows, cfg.cols);
      qem::write_observables_csv(std::cout, v, lat.n, lat.edges);
    } else if (dataset->parsed()) {
      const auto d = qem::cmd_dataset(resolve(common), out, verbose);
      std::cout << "wrote " << d.samples.size() << " samples to " << (out / "dataset.csv").string() << '\n';
    } else if (train->parsed()) {
      const auto r = qem::cmd_train(resolve(common), dataset_path, out);
      std::cout << "best epoch " << r.best_epoch << ", validation MSE " << r.best_validation_mse << "; wrote "
                << (out / "checkpoint.json").string() << '\n';
    } else if (evaluate->parsed()) {
      print_metrics("held-out", qem::cmd_evaluate(resolve(common), checkpoint_path, out, verbose));
    } else if (reproduce->parsed()) {
      const auto cfg = qem::config_for_figure(apply_flags(read_json_file(common.config_path), common), figure);
      const auto r = qem::cmd_reproduce(cfg, out, verbose);
      print_metrics("curve", r.curve);
      print_metrics("held-out", r.held_out);
    } else if (scaling->parsed()) {
      const auto rows = qem::cmd_scaling(resolve(common), out, verbose);
      qem::write_scaling_csv(std::cout, rows);
    } else if (selfcheck->parsed()) {
      qem::SelfCheckOptions opt;
      opt.trajectories = trajectories;
      if (mutate_rzz) {
        opt.rzz = [](int i, int j, double theta) { return qem::rzz_as_cnot_rz_cnot(i, j, -theta); };
      }
      bool ok = true;
      for (const auto& r : qem::run_selfcheck(opt)) {
        std::cout << r << '\n';
        ok = ok && r.passed;
      }
      return ok ? kOk : kCheck;
    }
  } catch (const qem::ResourceGuardError& e) {
    std::cerr << "qem: resource guard: " << e.what() << '\n';
    return kResource;
  } catch (const qem::ConfigError& e) {
    std::cerr << "qem: configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const qem::NumericalError& e) {
    std::cerr << "qem: numerical failure: " << e.what() << '\n';
    return kCheck;
  } catch (const std::exception& e) {
    std::cerr << "qem: " << e.what() << '\n';
    return kConfig;
  }
  return kOk;
}

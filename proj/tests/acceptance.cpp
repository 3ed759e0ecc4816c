// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,2,...] [--work DIR] [--threads N]
//
// Criteria 1-5 are oracle checks and take seconds to minutes. Criteria 6-9
// run the full pipeline on the 3x3 lattice and take tens of minutes on one
// core. Simulated datasets are cached under --work, so a rerun only retrains.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "qem/experiment.hpp"
#include "qem/selfcheck.hpp"

using namespace qem;

namespace {

struct Options {
  std::set<int> only;
  std::filesystem::path work = "acceptance_work";
  int threads = 0;
  bool wanted(int k) const { return only.empty() || only.count(k) > 0; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// Training and evaluation sets for several observable kinds over shared
/// circuit runs, cached as dataset CSVs.
class DatasetStore {
 public:
  DatasetStore(std::filesystem::path dir, int threads) : dir_(std::move(dir)), threads_(threads) { ensure_directory(dir_); }

  std::map<ObservableKind, Dataset> get(const ExperimentConfig& c, const std::vector<ObservableKind>& kinds,
                                        CircuitRole role) {
    std::map<ObservableKind, Dataset> out;
    std::vector<ObservableKind> missing;
    for (ObservableKind k : kinds) {
      const auto path = path_for(c, k, role);
      if (std::filesystem::exists(path)) {
        std::ifstream in(path);
        out.emplace(k, read_dataset_csv(in));
      } else {
        missing.push_back(k);
      }
    }
    if (missing.empty()) return out;
    ExperimentConfig cfg = c;
    cfg.threads = threads_;
    const ExperimentContext ctx = make_context(cfg, true);
    const bool training = role == CircuitRole::training;
    const int count = training ? c.train_samples : c.eval_samples;
    std::clog << "simulating " << count << (training ? " training" : " evaluation") << " points ("
              << noise_kind_name(c.noise) << ", N2=" << c.N2 << ")\n";
    const auto points = sample_inputs(ctx.lattice, c.T, count, c.time_segments, training ? c.seed : c.eval_seed);
    const auto sets = build_datasets(ctx.setup, points, missing, role,
                                     training ? training_shot_seed(c) : eval_shot_seed(c), c.time_segments, c.T);
    for (std::size_t i = 0; i < missing.size(); ++i) {
      auto f = open_output(path_for(c, missing[i], role));
      write_dataset_csv(f, sets[i]);
      out.emplace(missing[i], sets[i]);
    }
    return out;
  }

 private:
  std::filesystem::path path_for(const ExperimentConfig& c, ObservableKind k, CircuitRole role) const {
    nlohmann::json key = config_to_json(c);
    key.erase("threads");
    key.erase("figure");
    key["role"] = role == CircuitRole::training ? "training" : "evaluation";
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(key.dump())));
    return dir_ / (std::string(buf) + "_" + to_string(k) + ".csv");
  }

  std::filesystem::path dir_;
  int threads_;
};

struct Mitigation {
  MetricsReport report;
  double stderr_xi = 0.0;
  int best_epoch = 0;
};

Mitigation train_and_evaluate(const ExperimentConfig& c, const Dataset& train_set, const Dataset& eval_set) {
  const TrainResult tr = train_mitigator(train_set, c.train);
  Mitigation m;
  m.report = evaluate(tr.params, eval_set);
  m.report.sample_count = train_set.samples.size();
  m.stderr_xi = bootstrap_xi_stderr(m.report, 1000, c.eval_seed);
  m.best_epoch = tr.best_epoch;
  std::clog << "  " << noise_kind_name(c.noise) << ' ' << to_string(train_set.kind) << ": xi " << m.report.xi
            << " +- " << m.stderr_xi << " (mse " << m.report.mse_before << " -> " << m.report.mse_after
            << ", best epoch " << tr.best_epoch << ")\n";
  return m;
}

std::string describe(const Mitigation& m) {
  return "xi " + fmt("%.3f", m.report.xi) + " +- " + fmt("%.3f", m.stderr_xi) + ", mse " +
         fmt("%.3g", m.report.mse_before) + " -> " + fmt("%.3g", m.report.mse_after);
}

ExperimentConfig base_config(const NoiseModel& noise) {
  ExperimentConfig c;  // 3x3, N1=4, N2=16, 8192 shots, 2000/200 samples, 300 segments
  c.noise = noise;
  return c;
}

class Suite {
 public:
  explicit Suite(const Options& opt) : opt_(opt), store_(opt.work / "datasets", opt.threads) {}

  void report(int k, CheckResult r) {
    std::cout << k << ". " << r << std::endl;
    all_passed_ = all_passed_ && r.passed;
  }

  bool passed() const { return all_passed_; }

  /// Depolarizing pipeline, shared by criteria 6, 7 and 8.
  const std::map<ObservableKind, Mitigation>& depolarizing() {
    if (dep_.empty()) {
      const ExperimentConfig c = base_config(kFigureDepolarizing);
      const std::vector<ObservableKind> kinds = {ObservableKind::Z1, ObservableKind::ZZ2, ObservableKind::X1};
      auto train_sets = store_.get(c, kinds, CircuitRole::training);
      auto eval_sets = store_.get(c, kinds, CircuitRole::evaluation);
      for (ObservableKind k : kinds) dep_.emplace(k, train_and_evaluate(c, train_sets.at(k), eval_sets.at(k)));
    }
    return dep_;
  }

  CheckResult criterion6() {
    const Mitigation& m = depolarizing().at(ObservableKind::Z1);
    return {"end-to-end depolarizing Z1", m.report.xi >= 3.0, m.report.xi, ">= 3",
            describe(m) + ", 2000 training / 200 held-out points"};
  }

  CheckResult criterion7() {
    const ExperimentConfig c = base_config(kFigurePauli);
    const std::vector<ObservableKind> kinds = {ObservableKind::Z1, ObservableKind::ZZ2};
    auto train_sets = store_.get(c, kinds, CircuitRole::training);
    auto eval_sets = store_.get(c, kinds, CircuitRole::evaluation);
    const Mitigation z = train_and_evaluate(c, train_sets.at(ObservableKind::Z1), eval_sets.at(ObservableKind::Z1));
    const Mitigation zz = train_and_evaluate(c, train_sets.at(ObservableKind::ZZ2), eval_sets.at(ObservableKind::ZZ2));
    const Mitigation& dep_zz = depolarizing().at(ObservableKind::ZZ2);
    const double slack = 2.0 * std::hypot(zz.stderr_xi, dep_zz.stderr_xi);
    const bool below_dep = zz.report.xi <= dep_zz.report.xi + slack;
    const bool ok = z.report.xi >= 3.0 && zz.report.xi >= 2.0 && below_dep;
    return {"end-to-end Pauli Z1 and ZZ2", ok, z.report.xi,
            "Z1 >= 3, ZZ2 >= 2, ZZ2 <= depolarizing ZZ2 + 2 combined bootstrap SE",
            "Z1 " + describe(z) + "; ZZ2 " + describe(zz) + "; depolarizing ZZ2 " + describe(dep_zz) +
                "; allowed " + fmt("%.3f", dep_zz.report.xi + slack)};
  }

  CheckResult criterion8() {
    const ExperimentConfig c = base_config(kFigureCrosstalk);
    auto train_sets = store_.get(c, {ObservableKind::X1}, CircuitRole::training);
    auto eval_sets = store_.get(c, {ObservableKind::X1}, CircuitRole::evaluation);
    const Mitigation xt = train_and_evaluate(c, train_sets.at(ObservableKind::X1), eval_sets.at(ObservableKind::X1));
    const Mitigation& dep_x = depolarizing().at(ObservableKind::X1);
    const Mitigation& dep_z = depolarizing().at(ObservableKind::Z1);
    const bool ok = xt.report.xi <= 1.5 && dep_x.report.xi >= 3.0;
    return {"crosstalk X1 negative result", ok, xt.report.xi, "<= 1.5, with depolarizing X1 >= 3 on the same pipeline",
            "crosstalk X1 " + describe(xt) + "; depolarizing X1 " + describe(dep_x) + "; depolarizing Z1 " +
                describe(dep_z)};
  }

  CheckResult criterion9() {
    ExperimentConfig c = base_config(kFigureDepolarizing);
    c.threads = opt_.threads;
    c.scaling.lattices = {{2, 3}, {3, 3}};
    c.scaling.time_segments = 100;
    const auto out = opt_.work / "scaling";
    ensure_directory(out);
    const std::vector<ScalingRow> rows = cmd_scaling(c, out, true);
    std::map<int, std::vector<ScalingRow>> by_n;
    for (const ScalingRow& r : rows) by_n[r.n].push_back(r);
    bool ok = true;
    double worst = 0.0;
    std::ostringstream detail;
    std::map<int, std::size_t> onset;
    for (auto& [n, curve] : by_n) {
      const ScalingRow& top = curve.back();
      const ScalingRow& half = curve[curve.size() - 2];
      const double rel = std::abs(top.xi - half.xi) / half.xi;
      worst = std::max(worst, rel);
      ok = ok && rel <= 0.10 && half.sample_count * 2 == top.sample_count;
      onset[n] = plateau_onset(curve, 0.9);
      detail << "n=" << n << " xi";
      for (const ScalingRow& r : curve) detail << ' ' << r.sample_count << ':' << fmt("%.2f", r.xi);
      detail << ", change from " << half.sample_count << " to " << top.sample_count << " " << fmt("%.1f", 100 * rel)
             << "%, onset " << onset[n] << "; ";
    }
    const double ratio = static_cast<double>(onset.at(9)) / static_cast<double>(onset.at(6));
    ok = ok && ratio >= 0.5 && ratio <= 2.0;
    detail << "onset ratio n9/n6 " << fmt("%.2f", ratio) << " (onset: first count reaching 90% of the top xi)";
    return {"scaling plateau", ok, worst, "<= 0.1 relative change over the last doubling, onset ratio in [0.5, 2]",
            detail.str()};
  }

  void run() {
    if (opt_.wanted(1)) report(1, timed_check([] { return check_channel_identities(50, 100); }));
    if (opt_.wanted(2)) report(2, timed_check([] { return check_trotter_convergence(2023, 2.0, 64); }));
    if (opt_.wanted(3)) report(3, timed_check([] { return check_backend_agreement(20000, 5.0); }));
    if (opt_.wanted(4)) report(4, timed_check([] { return check_crosstalk_coherence(); }));
    if (opt_.wanted(5)) report(5, timed_check([] { return check_mlp_gradients(); }));
    if (opt_.wanted(6)) report(6, timed_check([&] { return criterion6(); }));
    if (opt_.wanted(7)) report(7, timed_check([&] { return criterion7(); }));
    if (opt_.wanted(8)) report(8, timed_check([&] { return criterion8(); }));
    if (opt_.wanted(9)) report(9, timed_check([&] { return criterion9(); }));
  }

 private:
  const Options& opt_;
  DatasetStore store_;
  std::map<ObservableKind, Mitigation> dep_;
  bool all_passed_ = true;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the mitigation pipeline"};
  Options opt;
  std::vector<int> only;
  std::string work = opt.work.string();
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 9));
  app.add_option("--work", work, "Directory for cached datasets and scaling output")->capture_default_str();
  app.add_option("--threads", opt.threads, "Worker threads (default: QEM_THREADS or all cores)");
  CLI11_PARSE(app, argc, argv);
  opt.only.insert(only.begin(), only.end());
  opt.work = work;

  try {
    Suite suite(opt);
    suite.run();
    return suite.passed() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << '\n';
    return 2;
  }
}

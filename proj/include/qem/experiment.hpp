#pragma once

// Experiment configuration and the commands behind the qem CLI. Commands take
// a validated ExperimentConfig and an output directory and write CSV/JSON
// files whose header comments echo the full configuration.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qem/circuit.hpp"
#include "qem/common.hpp"
#include "qem/lattice.hpp"
#include "qem/mitigation.hpp"
#include "qem/mlp.hpp"
#include "qem/noise.hpp"
#include "qem/simulator.hpp"

namespace qem {

struct ScalingConfig {
  std::vector<std::pair<int, int>> lattices = {{2, 3}, {3, 3}};  // 3x4 runs on trajectories only
  std::vector<std::size_t> sample_counts = {50, 100, 200, 400, 800, 1600};
  int time_segments = 100;
};

struct SimulateConfig {
  double t = 1.0;
  std::string circuit = "target";  // or "training"
};

struct ExperimentConfig {
  int rows = 3;
  int cols = 3;
  std::uint64_t disorder_seed = 2023;
  double mean_J = 1.0;
  double T = 2.0;
  int N1 = 4;
  int N2 = 16;
  NoiseModel noise = Depolarizing{1e-4, 1e-2};
  std::uint64_t shots = 8192;
  ObservableKind kind = ObservableKind::Z1;
  std::string psi0 = "000111000";
  int train_samples = 2000;
  int eval_samples = 200;
  int time_segments = 300;
  int curve_points = 60;
  std::uint64_t seed = 1;       // training inputs and their shot noise
  std::uint64_t eval_seed = 2;  // held-out inputs and curve shot noise
  TrainConfig train;
  Backend backend = Backend::automatic;
  int threads = 0;  // 0: QEM_THREADS or the hardware count
  SimulateConfig simulate;
  ScalingConfig scaling;
  std::string figure;  // set by reproduce

  int n() const { return rows * cols; }
  int thread_count() const { return threads > 0 ? threads : default_thread_count(); }
};

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json lattices = nlohmann::json::array();
  for (const auto& [r, k] : c.scaling.lattices) lattices.push_back({r, k});
  nlohmann::json j{{"lattice", {{"rows", c.rows}, {"cols", c.cols}}},
                   {"disorder_seed", c.disorder_seed},
                   {"mean_J", c.mean_J},
                   {"T", c.T},
                   {"N1", c.N1},
                   {"N2", c.N2},
                   {"noise", noise_to_json(c.noise)},
                   {"shots", c.shots},
                   {"kind", to_string(c.kind)},
                   {"psi0", c.psi0},
                   {"train_samples", c.train_samples},
                   {"eval_samples", c.eval_samples},
                   {"time_segments", c.time_segments},
                   {"curve_points", c.curve_points},
                   {"seed", c.seed},
                   {"eval_seed", c.eval_seed},
                   {"train", train_config_to_json(c.train)},
                   {"backend", to_string(c.backend)},
                   {"threads", c.threads},
                   {"simulate", {{"t", c.simulate.t}, {"circuit", c.simulate.circuit}}},
                   {"scaling",
                    {{"lattices", lattices},
                     {"sample_counts", c.scaling.sample_counts},
                     {"time_segments", c.scaling.time_segments}}}};
  if (!c.figure.empty()) j["figure"] = c.figure;
  return j;
}

inline void validate_config(const ExperimentConfig& c) {
  const LatticeSpec lattice = build_square_lattice(c.rows, c.cols);
  if (!(c.mean_J > 0.0)) throw ConfigError("mean_J must be positive");
  if (!(c.T > 0.0)) throw ConfigError("T must be positive");
  if (c.N1 < 1 || c.N1 > c.N2) throw ConfigError("need 1 <= N1 <= N2");
  if (c.shots < 1) throw ConfigError("shots must be >= 1");
  if (static_cast<int>(c.psi0.size()) != lattice.n) {
    throw ConfigError("psi0 '" + c.psi0 + "' has " + std::to_string(c.psi0.size()) + " characters, lattice has " +
                      std::to_string(lattice.n) + " sites");
  }
  parse_bitstring(c.psi0);
  if (c.train_samples < 1 || c.eval_samples < 1) throw ConfigError("dataset sizes must be >= 1");
  if (c.time_segments < 1 || c.scaling.time_segments < 1) throw ConfigError("time_segments must be >= 1");
  if (c.curve_points < 1) throw ConfigError("curve_points must be >= 1");
  if (c.threads < 0) throw ConfigError("threads must be >= 0");
  if (c.simulate.circuit != "target" && c.simulate.circuit != "training") {
    throw ConfigError("simulate.circuit must be 'target' or 'training'");
  }
  if (!(c.simulate.t >= 0.0)) throw ConfigError("simulate.t must be non-negative");
  for (const auto& [r, k] : c.scaling.lattices) build_square_lattice(r, k);
  for (std::size_t s : c.scaling.sample_counts) {
    if (s < 1) throw ConfigError("scaling sample counts must be >= 1");
  }
  validate_noise(c.noise);
  validate_train_config(c.train);
}

/// Reads a config; keys absent from the JSON keep their defaults and unknown
/// keys are rejected so that typos do not pass silently.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "lattice", "disorder_seed", "mean_J", "T", "N1", "N2", "noise", "shots", "kind", "psi0", "train_samples",
      "eval_samples", "time_segments", "curve_points", "seed", "eval_seed", "train", "backend", "threads",
      "simulate", "scaling", "figure"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    if (j.contains("lattice")) {
      c.rows = j["lattice"].value("rows", c.rows);
      c.cols = j["lattice"].value("cols", c.cols);
    }
    c.disorder_seed = j.value("disorder_seed", c.disorder_seed);
    c.mean_J = j.value("mean_J", c.mean_J);
    c.T = j.value("T", c.T);
    c.N1 = j.value("N1", c.N1);
    c.N2 = j.value("N2", c.N2);
    if (j.contains("noise")) c.noise = noise_from_json(j["noise"]);
    c.shots = j.value("shots", c.shots);
    if (j.contains("kind")) c.kind = observable_kind_from_string(j["kind"].get<std::string>());
    c.psi0 = j.value("psi0", c.psi0);
    c.train_samples = j.value("train_samples", c.train_samples);
    c.eval_samples = j.value("eval_samples", c.eval_samples);
    c.time_segments = j.value("time_segments", c.time_segments);
    c.curve_points = j.value("curve_points", c.curve_points);
    c.seed = j.value("seed", c.seed);
    c.eval_seed = j.value("eval_seed", c.eval_seed);
    if (j.contains("train")) c.train = train_config_from_json(j["train"]);
    if (j.contains("backend")) c.backend = backend_from_string(j["backend"].get<std::string>());
    c.threads = j.value("threads", c.threads);
    if (j.contains("simulate")) {
      c.simulate.t = j["simulate"].value("t", c.simulate.t);
      c.simulate.circuit = j["simulate"].value("circuit", c.simulate.circuit);
    }
    if (j.contains("scaling")) {
      const auto& s = j["scaling"];
      if (s.contains("lattices")) {
        c.scaling.lattices.clear();
        for (const auto& l : s["lattices"]) c.scaling.lattices.emplace_back(l.at(0).get<int>(), l.at(1).get<int>());
      }
      c.scaling.sample_counts = s.value("sample_counts", c.scaling.sample_counts);
      c.scaling.time_segments = s.value("time_segments", c.scaling.time_segments);
    }
    c.figure = j.value("figure", c.figure);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate_config(c);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Figure presets

inline const Depolarizing kFigureDepolarizing{1e-4, 1e-2};
inline const PauliNoise kFigurePauli{{0.5e-4, 1.0e-4, 2.0e-4}, {1.0e-3, 2.0e-3, 3.0e-3}};
inline const Crosstalk kFigureCrosstalk{2 * std::numbers::pi * 50e3, kDefaultCrosstalkLayerSeconds};

/// Fixed parameters of each reproducible panel, as config JSON fragments.
inline nlohmann::json figure_preset(const std::string& id) {
  const auto preset = [](int N2, const NoiseModel& noise, const char* kind, const char* psi0) {
    return nlohmann::json{{"N1", 4}, {"N2", N2}, {"noise", noise_to_json(noise)}, {"kind", kind}, {"psi0", psi0},
                          {"lattice", {{"rows", 3}, {"cols", 3}}}};
  };
  static const std::map<std::string, nlohmann::json> presets = {
      {"fig1a", preset(16, kFigureDepolarizing, "Z1", "000111000")},
      {"fig1b", preset(32, kFigureDepolarizing, "Z1", "000111000")},
      {"fig1c", preset(48, kFigureDepolarizing, "Z1", "000111000")},
      {"fig1d", preset(64, kFigureDepolarizing, "Z1", "000111000")},
      {"fig2a", preset(16, kFigureDepolarizing, "ZZ2", "010101010")},
      {"fig2b", preset(32, kFigureDepolarizing, "ZZ2", "010101010")},
      {"fig4a", preset(32, kFigurePauli, "Z1", "000111000")},
      {"fig4b", preset(64, kFigurePauli, "Z1", "000111000")},
      {"fig5a", preset(16, kFigurePauli, "ZZ2", "010101010")},
      {"fig5b", preset(32, kFigurePauli, "ZZ2", "010101010")},
      {"fig6a", preset(16, kFigureCrosstalk, "X1", "010101010")},
      {"fig6b", preset(32, kFigureCrosstalk, "X1", "010101010")},
  };
  const auto it = presets.find(id);
  if (it == presets.end()) throw ConfigError("unknown figure '" + id + "'");
  return it->second;
}

inline std::vector<std::string> figure_ids() {
  return {"fig1a", "fig1b", "fig1c", "fig1d", "fig2a", "fig2b", "fig4a", "fig4b", "fig5a", "fig5b", "fig6a", "fig6b"};
}

/// Merges a figure preset into a user config. A user value that contradicts
/// the panel's fixed parameters is refused rather than overridden.
inline ExperimentConfig config_for_figure(const nlohmann::json& user, const std::string& id) {
  const nlohmann::json preset = figure_preset(id);
  nlohmann::json merged = user.is_null() ? nlohmann::json::object() : user;
  const ExperimentConfig user_view = config_from_json(merged);
  const nlohmann::json user_full = config_to_json(user_view);
  for (const auto& [key, value] : preset.items()) {
    if (merged.contains(key) && user_full.at(key) != value) {
      throw ConfigError(id + " fixes " + key + " = " + value.dump() + " but the config sets " + user_full.at(key).dump());
    }
    merged[key] = value;
  }
  if (merged.contains("figure") && merged["figure"] != id) {
    throw ConfigError("config names figure " + merged["figure"].dump() + ", requested " + id);
  }
  merged["figure"] = id;
  return config_from_json(merged);
}

// ---------------------------------------------------------------------------
// Shared plumbing

struct ExperimentContext {
  LatticeSpec lattice;
  DisorderRealization disorder;
  PipelineSetup setup;
};

inline void check_backend_guard(Backend b, int n) {
  if (b == Backend::density_matrix) check_density_matrix_guard(n);
}

inline ExperimentContext make_context(const ExperimentConfig& c, bool verbose) {
  ExperimentContext ctx;
  ctx.lattice = build_square_lattice(c.rows, c.cols);
  ctx.disorder = sample_disorder(ctx.lattice, c.mean_J, c.disorder_seed);
  check_backend_guard(c.backend, ctx.lattice.n);
  ctx.setup.lattice = ctx.lattice;
  ctx.setup.disorder = ctx.disorder;
  ctx.setup.noise = c.noise;
  ctx.setup.N1 = c.N1;
  ctx.setup.N2 = c.N2;
  ctx.setup.shots = c.shots;
  ctx.setup.backend = c.backend;
  ctx.setup.threads = c.thread_count();
  if (verbose) {
    auto mtx = std::make_shared<std::mutex>();
    ctx.setup.progress = [mtx](std::size_t done, std::size_t total) {
      const std::size_t step = std::max<std::size_t>(1, total / 10);
      if (done % step != 0 && done != total) return;
      std::lock_guard lock(*mtx);
      std::clog << "  simulated " << done << "/" << total << " points\n";
    };
  }
  return ctx;
}

/// Header comment lines: "# config {...}" plus any extra "# key value" pairs.
inline void write_config_echo(std::ostream& out, const ExperimentConfig& c) {
  out << "# config " << config_to_json(c).dump() << '\n';
  out << "# resolved_backend " << to_string(resolve_backend(c.backend, c.n(), c.noise)) << '\n';
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  ensure_directory(path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

inline std::uint64_t training_shot_seed(const ExperimentConfig& c) { return splitmix64(c.seed ^ 0x5407u); }
inline std::uint64_t eval_shot_seed(const ExperimentConfig& c) { return splitmix64(c.eval_seed ^ 0xE7A1u); }
inline std::uint64_t curve_shot_seed(const ExperimentConfig& c) { return splitmix64(c.eval_seed ^ 0xC0A7u); }

/// Everything that determines a trained network. Two configs with the same
/// fingerprint produce bitwise identical networks.
inline std::string network_fingerprint(const ExperimentConfig& c) {
  const nlohmann::json key{{"lattice", {c.rows, c.cols}},
                           {"disorder_seed", c.disorder_seed},
                           {"mean_J", c.mean_J},
                           {"T", c.T},
                           {"N1", c.N1},
                           {"N2", c.N2},
                           {"noise", noise_to_json(c.noise)},
                           {"shots", c.shots},
                           {"kind", to_string(c.kind)},
                           {"train_samples", c.train_samples},
                           {"time_segments", c.time_segments},
                           {"seed", c.seed},
                           {"train", train_config_to_json(c.train)},
                           {"backend", to_string(resolve_backend(c.backend, c.n(), c.noise))}};
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(key.dump())));
  return buf;
}

inline Dataset make_training_dataset(const ExperimentConfig& c, const ExperimentContext& ctx) {
  const auto points = sample_inputs(ctx.lattice, c.T, c.train_samples, c.time_segments, c.seed);
  return build_datasets(ctx.setup, points, {c.kind}, CircuitRole::training, training_shot_seed(c), c.time_segments,
                        c.T)
      .front();
}

inline Dataset make_eval_dataset(const ExperimentConfig& c, const ExperimentContext& ctx) {
  const auto points = sample_inputs(ctx.lattice, c.T, c.eval_samples, c.time_segments, c.eval_seed);
  return build_datasets(ctx.setup, points, {c.kind}, CircuitRole::evaluation, eval_shot_seed(c), c.time_segments,
                        c.T)
      .front();
}

/// Evaluation points along the curve: psi0 fixed, t = k T / curve_points.
inline std::vector<InputPoint> curve_points(const ExperimentConfig& c) {
  std::vector<InputPoint> pts;
  const std::uint64_t s = parse_bitstring(c.psi0);
  for (int k = 1; k <= c.curve_points; ++k) pts.push_back({s, c.T * k / c.curve_points});
  return pts;
}

inline void write_history_csv(std::ostream& out, const TrainResult& r) {
  out << "epoch,train_mse,validation_mse\n";
  char buf[96];
  for (const EpochRecord& e : r.history) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g\n", e.epoch, e.train_mse, e.validation_mse);
    out << buf;
  }
}

inline void write_checkpoint(const std::filesystem::path& path, const MlpParams& p, const TrainConfig& cfg,
                             const std::string& fingerprint) {
  auto out = open_output(path);
  out << checkpoint_to_json(p, cfg, fingerprint).dump() << '\n';
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  try {
    return checkpoint_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint " + path.string() + ": " + e.what());
  }
}

/// Trains the network for this config, or loads it from the cache directory
/// when a checkpoint with the same fingerprint exists.
inline MlpParams trained_network(const ExperimentConfig& c, const ExperimentContext& ctx,
                                 const std::filesystem::path& cache_dir, bool verbose) {
  const std::string fp = network_fingerprint(c);
  const auto path = cache_dir / ("net_" + fp + ".json");
  if (std::filesystem::exists(path)) {
    Checkpoint ck = read_checkpoint(path);
    if (ck.dataset_fingerprint == fp) {
      if (verbose) std::clog << "loaded cached network " << path.string() << '\n';
      return ck.params;
    }
  }
  if (verbose) std::clog << "generating " << c.train_samples << " training samples\n";
  const Dataset train_set = make_training_dataset(c, ctx);
  if (verbose) std::clog << "training network\n";
  const TrainResult tr = train_mitigator(train_set, c.train);
  if (verbose) {
    std::clog << "  best epoch " << tr.best_epoch << " of " << tr.history.size() - 1 << ", validation MSE "
              << tr.best_validation_mse << '\n';
  }
  write_checkpoint(path, tr.params, c.train, fp);
  return tr.params;
}

inline void write_curve_csv(std::ostream& out, const ExperimentConfig& c, const MetricsReport& m) {
  write_config_echo(out, c);
  out << "# xi " << m.xi << " mse_before " << m.mse_before << " mse_after " << m.mse_after << '\n';
  out << "t,exact,raw,mitigated\n";
  char buf[128];
  for (const CurvePoint& p : curve_from_report(m)) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g\n", p.t, p.exact, p.raw, p.mitigated);
    out << buf;
  }
}

inline void write_records_csv(std::ostream& out, const ExperimentConfig& c, const MetricsReport& m) {
  write_config_echo(out, c);
  out << "state,t,component,exact,raw,mitigated\n";
  char buf[128];
  for (const EvalRecord& r : m.records) {
    for (std::size_t i = 0; i < r.exact.size(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.10g,%zu,%.10g,%.10g,%.10g\n", r.point.t, i, r.exact[i], r.raw[i],
                    r.mitigated[i]);
      out << format_bitstring(r.point.state, c.n()) << buf;
    }
  }
}

inline void write_metrics_json(const std::filesystem::path& path, const ExperimentConfig& c, const MetricsReport& m) {
  auto out = open_output(path);
  out << metrics_to_json(m, config_to_json(c)).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Commands

/// One circuit run: observables of the configured kind plus the shot table.
inline ObservableVector cmd_simulate(const ExperimentConfig& c, const std::filesystem::path& out_dir) {
  const ExperimentContext ctx = make_context(c, false);
  const InputPoint p{parse_bitstring(c.psi0), c.simulate.t};
  const CircuitRole role = c.simulate.circuit == "training" ? CircuitRole::training : CircuitRole::evaluation;
  const Circuit circuit = noisy_circuit_for(ctx.setup, p, role);
  Rng rng = make_stream(c.seed, 0x5133);
  const Basis basis = measurement_basis(c.kind);
  const ShotTable table = sample_shots(circuit, c.noise, p.state, c.shots, basis, rng, c.backend);
  const ObservableVector v = observables_from_shots(table, c.kind, ctx.lattice.edges);
  {
    auto out = open_output(out_dir / "observables.csv");
    write_config_echo(out, c);
    write_observables_csv(out, v, ctx.lattice.n, ctx.lattice.edges);
  }
  {
    auto out = open_output(out_dir / "shots.csv");
    write_config_echo(out, c);
    write_shot_table_csv(out, table);
  }
  {
    auto out = open_output(out_dir / "circuit.txt");
    out << to_text(circuit);
  }
  return v;
}

inline Dataset cmd_dataset(const ExperimentConfig& c, const std::filesystem::path& out_dir, bool verbose) {
  const ExperimentContext ctx = make_context(c, verbose);
  Dataset d = make_training_dataset(c, ctx);
  auto out = open_output(out_dir / "dataset.csv");
  write_dataset_csv(out, d);
  auto disorder = open_output(out_dir / "disorder.json");
  disorder << disorder_to_json(ctx.lattice, ctx.disorder).dump(2) << '\n';
  return d;
}

inline TrainResult cmd_train(const ExperimentConfig& c, const std::filesystem::path& dataset_path,
                             const std::filesystem::path& out_dir) {
  std::ifstream in(dataset_path);
  if (!in) throw ConfigError("cannot open dataset " + dataset_path.string());
  const Dataset d = read_dataset_csv(in);
  if (d.kind != c.kind) throw ConfigError("dataset kind " + to_string(d.kind) + " differs from config kind " + to_string(c.kind));
  const TrainResult r = train_mitigator(d, c.train);
  const std::string fp = "dataset:" + std::to_string(fnv1a64(provenance_to_json(d.provenance).dump()));
  write_checkpoint(out_dir / "checkpoint.json", r.params, c.train, fp);
  auto out = open_output(out_dir / "history.csv");
  write_history_csv(out, r);
  return r;
}

inline MetricsReport cmd_evaluate(const ExperimentConfig& c, const std::filesystem::path& checkpoint_path,
                                  const std::filesystem::path& out_dir, bool verbose) {
  const Checkpoint ck = read_checkpoint(checkpoint_path);
  const ExperimentContext ctx = make_context(c, verbose);
  const int dim = observable_dimension(c.kind, ctx.lattice.n, ctx.lattice.edges.size());
  if (ck.params.input_dim() != dim) {
    throw ConfigError("checkpoint expects " + std::to_string(ck.params.input_dim()) + " inputs, kind " +
                      to_string(c.kind) + " has " + std::to_string(dim));
  }
  const Dataset eval_set = make_eval_dataset(c, ctx);
  MetricsReport m = evaluate(ck.params, eval_set);
  write_metrics_json(out_dir / "metrics.json", c, m);
  auto out = open_output(out_dir / "eval_records.csv");
  write_records_csv(out, c, m);
  return m;
}

struct ReproduceResult {
  MetricsReport curve;     // along the figure's time axis for psi0
  MetricsReport held_out;  // on eval_samples random points
};

inline ReproduceResult cmd_reproduce(const ExperimentConfig& c, const std::filesystem::path& out_dir, bool verbose) {
  if (c.figure.empty()) throw ConfigError("reproduce needs a figure id");
  const ExperimentContext ctx = make_context(c, verbose);
  const MlpParams net = trained_network(c, ctx, out_dir / "cache", verbose);
  ReproduceResult r;
  if (verbose) std::clog << "evaluating the " << c.curve_points << "-point curve\n";
  const Dataset curve_set = build_datasets(ctx.setup, curve_points(c), {c.kind}, CircuitRole::evaluation,
                                           curve_shot_seed(c), c.curve_points, c.T)
                                .front();
  r.curve = evaluate(net, curve_set);
  r.curve.sample_count = static_cast<std::size_t>(c.train_samples);
  if (verbose) std::clog << "evaluating " << c.eval_samples << " held-out points\n";
  r.held_out = evaluate(net, make_eval_dataset(c, ctx));
  r.held_out.sample_count = static_cast<std::size_t>(c.train_samples);
  {
    auto out = open_output(out_dir / (c.figure + "_curves.csv"));
    write_curve_csv(out, c, r.curve);
  }
  write_metrics_json(out_dir / (c.figure + "_metrics.json"), c, r.held_out);
  return r;
}

inline std::vector<ScalingRow> cmd_scaling(const ExperimentConfig& c, const std::filesystem::path& out_dir,
                                           bool verbose) {
  if (c.scaling.sample_counts.empty()) throw ConfigError("scaling.sample_counts is empty");
  const std::size_t largest = *std::max_element(c.scaling.sample_counts.begin(), c.scaling.sample_counts.end());
  std::vector<std::size_t> counts = c.scaling.sample_counts;
  std::sort(counts.begin(), counts.end());
  std::vector<ScalingRow> rows;
  for (const auto& [r, k] : c.scaling.lattices) {
    ExperimentConfig sub = c;
    sub.rows = r;
    sub.cols = k;
    sub.psi0 = std::string(static_cast<std::size_t>(r * k), '0');
    sub.time_segments = c.scaling.time_segments;
    sub.train_samples = static_cast<int>(largest);
    if (verbose) std::clog << "scaling: lattice " << r << "x" << k << '\n';
    const ExperimentContext ctx = make_context(sub, verbose);
    const Dataset train_set = make_training_dataset(sub, ctx);
    const Dataset eval_set = make_eval_dataset(sub, ctx);
    for (const ScalingRow& row : scaling_curve(train_set, eval_set, counts, sub.train)) {
      if (verbose) std::clog << "  n=" << row.n << " samples=" << row.sample_count << " xi=" << row.xi << '\n';
      rows.push_back(row);
    }
  }
  auto out = open_output(out_dir / "scaling.csv");
  write_config_echo(out, c);
  write_scaling_csv(out, rows);
  return rows;
}

}  // namespace qem

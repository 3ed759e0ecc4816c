#pragma once

// Learning-based mitigation: Monte-Carlo training sets from circuits whose
// noise mimics the target circuit, a network trained to map noisy observables
// to exact ones, and the improvement factor xi = MSE_before / MSE_after.
//
// Training circuit for (psi0, t): N1 Trotter layers of step t/N1 followed by
// N2 - N1 empty layers; its label is the noiseless N1-layer circuit.
// Evaluation circuit: N2 Trotter layers of step t/N2, compared with its own
// noiseless run.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "qem/circuit.hpp"
#include "qem/common.hpp"
#include "qem/lattice.hpp"
#include "qem/mlp.hpp"
#include "qem/noise.hpp"
#include "qem/simulator.hpp"

namespace qem {

struct InputPoint {
  std::uint64_t state = 0;  // basis-state index of psi0
  double t = 0.0;
};

/// i.i.d. points: psi0 uniform over all 2^n basis states, t uniform over the
/// grid {k T / segments : k = 1..segments}.
inline std::vector<InputPoint> sample_inputs(const LatticeSpec& lattice, double T, int n_points, int segments,
                                             std::uint64_t seed) {
  if (n_points < 1) throw ConfigError("n_points must be >= 1");
  if (segments < 1) throw ConfigError("time_segments must be >= 1");
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("total time T must be positive");
  Rng rng = make_stream(seed, 0x1A9u);
  const std::uint64_t states = std::uint64_t{1} << lattice.n;
  std::vector<InputPoint> points(static_cast<std::size_t>(n_points));
  for (auto& p : points) {
    p.state = uniform_below(rng, states);
    const auto k = 1 + uniform_below(rng, static_cast<std::uint64_t>(segments));
    p.t = static_cast<double>(k) * T / segments;
  }
  return points;
}

/// Everything needed to turn an InputPoint into circuits and shots.
struct PipelineSetup {
  LatticeSpec lattice;
  DisorderRealization disorder;
  NoiseModel noise = NoNoise{};
  int N1 = 4;
  int N2 = 16;
  std::uint64_t shots = 8192;
  Backend backend = Backend::automatic;
  int threads = 1;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

inline void validate_setup(const PipelineSetup& s) {
  if (s.N1 < 1 || s.N1 > s.N2) throw ConfigError("need 1 <= N1 <= N2");
  if (s.shots < 1) throw ConfigError("shots must be >= 1");
  validate_disorder(s.lattice, s.disorder);
  validate_noise(s.noise);
}

enum class CircuitRole { training, evaluation };

struct Sample {
  InputPoint point;
  ObservableVector input;  // noisy estimate
  ObservableVector label;  // exact value
};

struct DatasetProvenance {
  std::uint64_t disorder_seed = 0;
  nlohmann::json noise;
  int N1 = 0;
  int N2 = 0;
  std::uint64_t shots = 0;
  int time_segments = 0;
  double T = 0.0;
  std::uint64_t seed = 0;  // shot-noise seed
  std::string role;
  std::string backend;
};

struct Dataset {
  ObservableKind kind = ObservableKind::Z1;
  int n_qubits = 0;
  std::vector<Sample> samples;
  DatasetProvenance provenance;

  std::size_t dimension() const { return samples.empty() ? 0 : samples.front().input.values.size(); }

  /// First `count` samples with the same provenance.
  Dataset prefix(std::size_t count) const {
    Dataset d = *this;
    d.samples.resize(std::min(count, samples.size()));
    return d;
  }
};

inline nlohmann::json provenance_to_json(const DatasetProvenance& p) {
  return {{"disorder_seed", p.disorder_seed}, {"noise", p.noise},   {"N1", p.N1},
          {"N2", p.N2},                       {"shots", p.shots},   {"time_segments", p.time_segments},
          {"T", p.T},                         {"seed", p.seed},     {"role", p.role},
          {"backend", p.backend}};
}

inline DatasetProvenance provenance_from_json(const nlohmann::json& j) {
  DatasetProvenance p;
  p.disorder_seed = j.at("disorder_seed").get<std::uint64_t>();
  p.noise = j.at("noise");
  p.N1 = j.at("N1").get<int>();
  p.N2 = j.at("N2").get<int>();
  p.shots = j.at("shots").get<std::uint64_t>();
  p.time_segments = j.at("time_segments").get<int>();
  p.T = j.at("T").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.role = j.value("role", "training");
  p.backend = j.value("backend", "auto");
  return p;
}

inline Circuit noisy_circuit_for(const PipelineSetup& s, const InputPoint& p, CircuitRole role) {
  return role == CircuitRole::training ? build_training_circuit(s.lattice, s.disorder, p.t, s.N1, s.N2)
                                       : build_target_circuit(s.lattice, s.disorder, p.t, s.N2);
}

inline Circuit reference_circuit_for(const PipelineSetup& s, const InputPoint& p, CircuitRole role) {
  return build_target_circuit(s.lattice, s.disorder, p.t, role == CircuitRole::training ? s.N1 : s.N2);
}

/// Noisy estimates and exact values of several observable kinds at one point,
/// sharing circuit runs between kinds measured in the same basis.
inline std::vector<Sample> simulate_point(const PipelineSetup& s, const InputPoint& p,
                                          const std::vector<ObservableKind>& kinds, CircuitRole role, Rng& rng) {
  const Circuit noisy = noisy_circuit_for(s, p, role);
  std::vector<Basis> bases;
  for (ObservableKind k : kinds) {
    const Basis b = measurement_basis(k);
    if (std::find(bases.begin(), bases.end(), b) == bases.end()) bases.push_back(b);
  }
  std::map<Basis, ShotTable> tables;
  const Backend backend = resolve_backend(s.backend, s.lattice.n, s.noise);
  if (backend == Backend::density_matrix) {
    const auto dists = measurement_distributions_dm(noisy, s.noise, p.state, bases);
    for (std::size_t i = 0; i < bases.size(); ++i) {
      tables.emplace(bases[i], sample_from_probabilities(dists[i], s.lattice.n, bases[i], s.shots, rng));
    }
  } else {
    for (Basis b : bases) tables.emplace(b, sample_shots(noisy, s.noise, p.state, s.shots, b, rng, backend));
  }
  const StateVector exact = run_noiseless(reference_circuit_for(s, p, role), p.state);
  std::vector<Sample> out;
  for (ObservableKind k : kinds) {
    out.push_back({p, observables_from_shots(tables.at(measurement_basis(k)), k, s.lattice.edges),
                   exact_expectations(exact, k, s.lattice.edges)});
  }
  return out;
}

/// One training sample; the caller owns the random stream.
inline Sample make_sample(const PipelineSetup& s, const InputPoint& p, ObservableKind kind, Rng& rng) {
  validate_setup(s);
  return simulate_point(s, p, {kind}, CircuitRole::training, rng).front();
}

/// Datasets for every requested kind over the same points. Point i uses its
/// own stream derived from `seed`, so the result does not depend on the
/// thread count.
inline std::vector<Dataset> build_datasets(const PipelineSetup& s, const std::vector<InputPoint>& points,
                                           const std::vector<ObservableKind>& kinds, CircuitRole role,
                                           std::uint64_t seed, int time_segments, double T) {
  validate_setup(s);
  if (kinds.empty()) throw ConfigError("no observable kinds requested");
  std::vector<std::vector<Sample>> per_point(points.size());
  std::atomic<std::size_t> done{0};
  parallel_for(points.size(), s.threads, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    per_point[i] = simulate_point(s, points[i], kinds, role, rng);
    const std::size_t k = ++done;
    if (s.progress) s.progress(k, points.size());
  });
  DatasetProvenance prov{s.disorder.seed, noise_to_json(s.noise),
                         s.N1,            s.N2,
                         s.shots,         time_segments,
                         T,               seed,
                         role == CircuitRole::training ? "training" : "evaluation",
                         to_string(s.backend)};
  std::vector<Dataset> out;
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    Dataset d{kinds[k], s.lattice.n, {}, prov};
    d.samples.reserve(points.size());
    for (auto& samples : per_point) d.samples.push_back(samples[k]);
    out.push_back(std::move(d));
  }
  return out;
}

inline Dataset build_dataset(const PipelineSetup& s, double T, int n_points, int time_segments, ObservableKind kind,
                             std::uint64_t points_seed, std::uint64_t shot_seed) {
  const auto points = sample_inputs(s.lattice, T, n_points, time_segments, points_seed);
  return build_datasets(s, points, {kind}, CircuitRole::training, shot_seed, time_segments, T).front();
}

// ---------------------------------------------------------------------------
// Training and correction

inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> dataset_matrices(const Dataset& d) {
  if (d.samples.empty()) throw ConfigError("dataset is empty");
  const auto dim = static_cast<Eigen::Index>(d.dimension());
  Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(d.samples.size()));
  Eigen::MatrixXd y(dim, x.cols());
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const Sample& s = d.samples[i];
    if (s.input.kind != d.kind || s.label.kind != d.kind) throw ConfigError("dataset mixes observable kinds");
    if (static_cast<Eigen::Index>(s.input.values.size()) != dim || static_cast<Eigen::Index>(s.label.values.size()) != dim) {
      throw DimensionError("dataset samples disagree on dimension");
    }
    for (Eigen::Index r = 0; r < dim; ++r) {
      x(r, static_cast<Eigen::Index>(i)) = s.input.values[static_cast<std::size_t>(r)];
      y(r, static_cast<Eigen::Index>(i)) = s.label.values[static_cast<std::size_t>(r)];
    }
  }
  return {std::move(x), std::move(y)};
}

inline TrainResult train_mitigator(const Dataset& d, const TrainConfig& cfg) {
  const auto [x, y] = dataset_matrices(d);
  return train(x, y, cfg);
}

/// Network output clamped to the physical range [-1, 1].
inline ObservableVector mitigate(const MlpParams& params, const ObservableVector& noisy) {
  if (static_cast<int>(noisy.values.size()) != params.input_dim()) {
    throw DimensionError("observable dimension " + std::to_string(noisy.values.size()) +
                         " does not match the network input " + std::to_string(params.input_dim()));
  }
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(noisy.values.data(), static_cast<Eigen::Index>(noisy.values.size()));
  const Eigen::VectorXd y = forward(params, x);
  ObservableVector out{noisy.kind, std::vector<double>(static_cast<std::size_t>(y.size()))};
  for (Eigen::Index i = 0; i < y.size(); ++i) out.values[static_cast<std::size_t>(i)] = std::clamp(y(i), -1.0, 1.0);
  return out;
}

using Mitigator = std::function<ObservableVector(const ObservableVector&)>;

inline Mitigator network_mitigator(const MlpParams& params) {
  return [params](const ObservableVector& v) { return mitigate(params, v); };
}

inline Mitigator identity_mitigator() {
  return [](const ObservableVector& v) { return v; };
}

// ---------------------------------------------------------------------------
// Metrics

struct EvalRecord {
  InputPoint point;
  std::vector<double> raw, exact, mitigated;
};

struct MetricsReport {
  double mse_before = 0.0;
  double mse_after = 0.0;
  double xi = 0.0;  // +infinity when mse_after is zero
  std::size_t n_eval = 0;
  std::size_t sample_count = 0;  // training samples behind the mitigator
  std::vector<EvalRecord> records;
};

inline double improvement_factor(double mse_before, double mse_after) {
  if (mse_after == 0.0) return std::numeric_limits<double>::infinity();
  return mse_before / mse_after;
}

inline double squared_error(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

/// Applies the mitigator to every raw estimate of an evaluation set (whose
/// labels are the exact values) and aggregates MSE over points and components.
inline MetricsReport evaluate(const Mitigator& f, const Dataset& eval_set) {
  if (eval_set.samples.empty()) throw ConfigError("evaluation set is empty");
  MetricsReport r;
  r.n_eval = eval_set.samples.size();
  std::vector<double> before, after;
  std::size_t components = 0;
  for (const Sample& s : eval_set.samples) {
    EvalRecord rec{s.point, s.input.values, s.label.values, f(s.input).values};
    if (rec.mitigated.size() != rec.exact.size()) throw DimensionError("mitigator changed the observable dimension");
    before.push_back(squared_error(rec.raw, rec.exact));
    after.push_back(squared_error(rec.mitigated, rec.exact));
    components += rec.exact.size();
    r.records.push_back(std::move(rec));
  }
  r.mse_before = pairwise_sum(before) / static_cast<double>(components);
  r.mse_after = pairwise_sum(after) / static_cast<double>(components);
  r.xi = improvement_factor(r.mse_before, r.mse_after);
  return r;
}

inline MetricsReport evaluate(const MlpParams& params, const Dataset& eval_set) {
  return evaluate(network_mitigator(params), eval_set);
}

/// Standard error of xi over evaluation points, by bootstrap resampling.
inline double bootstrap_xi_stderr(const MetricsReport& r, int resamples, std::uint64_t seed) {
  if (r.records.size() < 2 || resamples < 2) return 0.0;
  Rng rng = make_stream(seed, 0xB007);
  std::vector<double> xs;
  xs.reserve(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    double sb = 0.0, sa = 0.0;
    for (std::size_t k = 0; k < r.records.size(); ++k) {
      const EvalRecord& rec = r.records[uniform_below(rng, r.records.size())];
      sb += squared_error(rec.raw, rec.exact);
      sa += squared_error(rec.mitigated, rec.exact);
    }
    if (sa > 0.0) xs.push_back(sb / sa);
  }
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : xs) mean += v;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double v : xs) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(xs.size() - 1));
}

/// Mean over components of exact, raw and mitigated values per record, as
/// drawn in the figures.
struct CurvePoint {
  double t = 0.0;
  double exact = 0.0, raw = 0.0, mitigated = 0.0;
};

inline std::vector<CurvePoint> curve_from_report(const MetricsReport& r) {
  const auto mean = [](const std::vector<double>& v) { return pairwise_sum(v) / static_cast<double>(v.size()); };
  std::vector<CurvePoint> out;
  for (const EvalRecord& rec : r.records) out.push_back({rec.point.t, mean(rec.exact), mean(rec.raw), mean(rec.mitigated)});
  std::stable_sort(out.begin(), out.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.t < b.t; });
  return out;
}

inline nlohmann::json metrics_to_json(const MetricsReport& r, const nlohmann::json& config_echo) {
  nlohmann::json j{{"mse_before", r.mse_before}, {"mse_after", r.mse_after}, {"n_eval", r.n_eval},
                   {"sample_count", r.sample_count}, {"config_echo", config_echo}};
  // JSON has no infinity; the sentinel is spelled out.
  if (std::isinf(r.xi)) {
    j["xi"] = "inf";
  } else {
    j["xi"] = r.xi;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Scaling study: xi against the number of training samples. Smaller training
// sets are prefixes of the largest one.

struct ScalingRow {
  int n = 0;
  std::size_t sample_count = 0;
  double xi = 0.0;
  double mse_before = 0.0;
  double mse_after = 0.0;
};

inline std::vector<ScalingRow> scaling_curve(const Dataset& train_set, const Dataset& eval_set,
                                             const std::vector<std::size_t>& counts, const TrainConfig& cfg) {
  std::vector<ScalingRow> rows;
  for (std::size_t count : counts) {
    if (count < 1 || count > train_set.samples.size()) {
      throw ConfigError("sample count " + std::to_string(count) + " outside the generated training set");
    }
    const TrainResult tr = train_mitigator(train_set.prefix(count), cfg);
    const MetricsReport m = evaluate(tr.params, eval_set);
    rows.push_back({train_set.n_qubits, count, m.xi, m.mse_before, m.mse_after});
  }
  return rows;
}

/// Smallest count whose xi reaches `fraction` of the xi at the largest count.
inline std::size_t plateau_onset(const std::vector<ScalingRow>& rows, double fraction) {
  if (rows.empty()) throw ConfigError("empty scaling curve");
  const double top = rows.back().xi;
  for (const ScalingRow& r : rows) {
    if (r.xi >= fraction * top) return r.sample_count;
  }
  return rows.back().sample_count;
}

inline void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows) {
  out << "n,sample_count,xi\n";
  char buf[64];
  for (const ScalingRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.10g", r.xi);
    out << r.n << ',' << r.sample_count << ',' << buf << '\n';
  }
}

// ---------------------------------------------------------------------------
// Dataset CSV: comment lines carry the provenance; one row per sample.


inline void write_dataset_csv(std::ostream& out, const Dataset& d) {
  out << "# provenance " << provenance_to_json(d.provenance).dump() << '\n';
  out << "# n_qubits " << d.n_qubits << '\n';
  const std::size_t dim = d.dimension();
  out << "state,t,kind";
  for (std::size_t i = 0; i < dim; ++i) out << ",input_" << i;
  for (std::size_t i = 0; i < dim; ++i) out << ",label_" << i;
  out << '\n';
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const Sample& s : d.samples) {
    out << format_bitstring(s.point.state, d.n_qubits) << ',' << num(s.point.t) << ',' << to_string(d.kind);
    for (double v : s.input.values) out << ',' << num(v);
    for (double v : s.label.values) out << ',' << num(v);
    out << '\n';
  }
}

inline Dataset read_dataset_csv(std::istream& in) {
  Dataset d;
  bool have_provenance = false, have_header = false;
  std::size_t dim = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string key;
      ls >> key;
      std::string rest;
      std::getline(ls, rest);
      if (key == "provenance") {
        d.provenance = provenance_from_json(nlohmann::json::parse(rest));
        have_provenance = true;
      } else if (key == "n_qubits") {
        d.n_qubits = std::stoi(rest);
      }
      continue;
    }
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!have_header) {
      if (cells.size() < 5 || cells[0] != "state" || cells[1] != "t" || cells[2] != "kind" || (cells.size() - 3) % 2) {
        throw ConfigError("dataset CSV: bad header");
      }
      dim = (cells.size() - 3) / 2;
      have_header = true;
      continue;
    }
    if (cells.size() != 3 + 2 * dim) throw ConfigError("dataset CSV: row has " + std::to_string(cells.size()) + " cells");
    Sample s;
    if (d.n_qubits == 0) d.n_qubits = static_cast<int>(cells[0].size());
    if (static_cast<int>(cells[0].size()) != d.n_qubits) throw ConfigError("dataset CSV: bitstring length mismatch");
    s.point.state = parse_bitstring(cells[0]);
    s.point.t = std::stod(cells[1]);
    const ObservableKind kind = observable_kind_from_string(cells[2]);
    if (d.samples.empty()) d.kind = kind;
    if (kind != d.kind) throw ConfigError("dataset CSV mixes observable kinds");
    s.input.kind = s.label.kind = kind;
    for (std::size_t i = 0; i < dim; ++i) s.input.values.push_back(std::stod(cells[3 + i]));
    for (std::size_t i = 0; i < dim; ++i) s.label.values.push_back(std::stod(cells[3 + dim + i]));
    d.samples.push_back(std::move(s));
  }
  if (!have_header) throw ConfigError("dataset CSV: missing header");
  if (!have_provenance) throw ConfigError("dataset CSV: missing provenance comment");
  return d;
}

}  // namespace qem

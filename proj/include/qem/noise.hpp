#pragma once

// Noise channels and their placement in a circuit.
//
// Depolarizing:   rho -> (1-p) rho + (p/2) I  on one qubit; the two-qubit form
//                 is the product of independent one-qubit channels.
// Pauli:          rho -> (1-px-py-pz) rho + px XrhoX + py YrhoY + pz ZrhoZ.
// ZZ crosstalk:   rho -> U rho U^dagger with U = diag(e^-iz, e^iz, e^iz, e^-iz),
//                 z = zeta * tau, on every coupled pair once per layer.

#include <cmath>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "qem/circuit.hpp"
#include "qem/common.hpp"
#include "qem/state.hpp"

namespace qem {

struct NoNoise {};

struct Depolarizing {
  double p1 = 0.0;
  double p2 = 0.0;
};

struct PauliNoise {
  PauliProbs one;  // after single-qubit gates
  PauliProbs two;  // on each qubit of a CNOT
};

struct Crosstalk {
  double zeta = 0.0;       // rad/s
  double tau_layer = 0.0;  // s
};

using NoiseModel = std::variant<NoNoise, Depolarizing, PauliNoise, Crosstalk>;

inline constexpr double kCnotDurationSeconds = 400e-9;
inline constexpr double kDefaultCrosstalkLayerSeconds = 2 * kCnotDurationSeconds;

inline std::string noise_kind_name(const NoiseModel& m) {
  struct V {
    std::string operator()(const NoNoise&) const { return "none"; }
    std::string operator()(const Depolarizing&) const { return "depolarizing"; }
    std::string operator()(const PauliNoise&) const { return "pauli"; }
    std::string operator()(const Crosstalk&) const { return "crosstalk"; }
  };
  return std::visit(V{}, m);
}

/// True when the model has no stochastic component.
inline bool is_deterministic(const NoiseModel& m) {
  return std::holds_alternative<NoNoise>(m) || std::holds_alternative<Crosstalk>(m);
}

inline PauliProbs depolarizing_as_pauli(double p) { return {p / 4, p / 4, p / 4}; }

inline void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0, 1]");
}

inline void check_pauli_probs(const PauliProbs& p, const char* what) {
  check_probability(p.px, what);
  check_probability(p.py, what);
  check_probability(p.pz, what);
  if (p.total() > 1.0 + 1e-15) throw ConfigError(std::string(what) + ": px + py + pz exceeds 1");
}

inline void validate_noise(const NoiseModel& m) {
  if (const auto* d = std::get_if<Depolarizing>(&m)) {
    check_probability(d->p1, "p1");
    check_probability(d->p2, "p2");
  } else if (const auto* p = std::get_if<PauliNoise>(&m)) {
    check_pauli_probs(p->one, "single-qubit Pauli probabilities");
    check_pauli_probs(p->two, "two-qubit Pauli probabilities");
  } else if (const auto* x = std::get_if<Crosstalk>(&m)) {
    if (!(x->zeta >= 0.0) || !std::isfinite(x->zeta)) throw ConfigError("zeta must be non-negative");
    if (!(x->tau_layer >= 0.0) || !std::isfinite(x->tau_layer)) throw ConfigError("tau_layer must be non-negative");
  }
}

// ---------------------------------------------------------------------------
// Exact channel action on density matrices.

inline void check_qubit(const DensityMatrix& rho, int q) {
  if (q < 0 || q >= rho.num_qubits()) throw DimensionError("qubit index out of range");
}

inline void pauli_dm(DensityMatrix& rho, const PauliProbs& p, int qubit) {
  check_pauli_probs(p, "Pauli channel");
  check_qubit(rho, qubit);
  rho.apply_pauli_channel(qubit, p);
}

inline void depolarize_dm(DensityMatrix& rho, int qubit, double p) {
  check_probability(p, "depolarizing probability");
  check_qubit(rho, qubit);
  rho.apply_pauli_channel(qubit, depolarizing_as_pauli(p));
}

inline void two_qubit_depolarize_dm(DensityMatrix& rho, double p2, int i, int j) {
  if (i == j) throw DimensionError("two-qubit depolarizing needs distinct qubits");
  depolarize_dm(rho, i, p2);
  depolarize_dm(rho, j, p2);
}

inline Eigen::Matrix4cd crosstalk_unitary(double zeta, double t) {
  const double phase = zeta * t;
  Eigen::Matrix4cd u = Eigen::Matrix4cd::Zero();
  u(0, 0) = std::polar(1.0, -phase);
  u(1, 1) = std::polar(1.0, phase);
  u(2, 2) = std::polar(1.0, phase);
  u(3, 3) = std::polar(1.0, -phase);
  return u;
}

/// Diagonal of the product of crosstalk unitaries on all edges, as a function
/// of the basis index: exp(-i z sum_edges s_a s_b) with s = +-1.
inline std::vector<cplx> crosstalk_phases(int n, const std::vector<Edge>& edges, double angle) {
  std::vector<cplx> d(std::size_t{1} << n);
  for (std::size_t i = 0; i < d.size(); ++i) {
    int sum = 0;
    for (const Edge& e : edges) sum += (((i >> e.a) ^ (i >> e.b)) & 1u) ? -1 : 1;
    d[i] = std::polar(1.0, -angle * sum);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Trajectory sampling.

inline Pauli sample_pauli_error(const PauliProbs& p, Rng& rng) {
  const double u = uniform01(rng);
  if (u < p.px) return Pauli::X;
  if (u < p.px + p.py) return Pauli::Y;
  if (u < p.px + p.py + p.pz) return Pauli::Z;
  return Pauli::I;
}

// ---------------------------------------------------------------------------
// Insertion policy: an annotated operation stream shared by both backends.

struct GateOp {
  Gate gate;
};

/// One-qubit Pauli channel slot after a rotation (or H, never noisy here).
struct Channel1Op {
  int qubit;
  PauliProbs probs;
};

/// Two-qubit slot after a CNOT: independent channels on both qubits.
struct Channel2Op {
  int a, b;
  PauliProbs probs;
};

/// Coherent ZZ phase on every listed edge.
struct CrosstalkOp {
  double angle;  // zeta * tau_layer
  std::vector<Edge> edges;
};

using NoisyOp = std::variant<GateOp, Channel1Op, Channel2Op, CrosstalkOp>;

struct AnnotatedCircuit {
  int n_qubits = 0;
  std::vector<Edge> coupling;
  std::vector<NoisyOp> ops;

  int one_qubit_slots() const {
    int k = 0;
    for (const auto& op : ops) k += std::holds_alternative<Channel1Op>(op);
    return k;
  }
  int two_qubit_slots() const {
    int k = 0;
    for (const auto& op : ops) k += std::holds_alternative<Channel2Op>(op);
    return k;
  }
  int crosstalk_slots() const {
    int k = 0;
    for (const auto& op : ops) k += std::holds_alternative<CrosstalkOp>(op);
    return k;
  }
};

/// Depolarizing and Pauli noise follow every rotation (1-qubit channel) and
/// every CNOT (channel on both qubits). Crosstalk follows every trotter/empty
/// layer on all coupled pairs. Basis-change layers stay noiseless.
inline AnnotatedCircuit insertion_policy(const Circuit& circuit, const NoiseModel& model) {
  validate_noise(model);
  AnnotatedCircuit out{circuit.n_qubits, circuit.coupling, {}};
  PauliProbs one{}, two{};
  bool incoherent = false;
  if (const auto* d = std::get_if<Depolarizing>(&model)) {
    one = depolarizing_as_pauli(d->p1);
    two = depolarizing_as_pauli(d->p2);
    incoherent = true;
  } else if (const auto* p = std::get_if<PauliNoise>(&model)) {
    one = p->one;
    two = p->two;
    incoherent = true;
  }
  const auto* xt = std::get_if<Crosstalk>(&model);
  for (const Layer& layer : circuit.layers) {
    const bool noisy_layer = layer.kind != LayerKind::basis_change;
    for (const Gate& g : layer.gates) {
      out.ops.push_back(GateOp{g});
      if (!incoherent || !noisy_layer) continue;
      if (g.is_rotation()) {
        out.ops.push_back(Channel1Op{g.q0, one});
      } else if (g.is_two_qubit()) {
        out.ops.push_back(Channel2Op{g.q0, g.q1, two});
      }
    }
    if (xt && noisy_layer && !circuit.coupling.empty()) {
      out.ops.push_back(CrosstalkOp{xt->zeta * xt->tau_layer, circuit.coupling});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON form: {kind, p1, p2} | {kind, p1x..p2z} | {kind, zeta_hz, tau_layer_ns}.
// zeta_hz is an ordinary frequency: zeta = 2 pi zeta_hz.

inline nlohmann::json noise_to_json(const NoiseModel& m) {
  nlohmann::json j;
  j["kind"] = noise_kind_name(m);
  if (const auto* d = std::get_if<Depolarizing>(&m)) {
    j["p1"] = d->p1;
    j["p2"] = d->p2;
  } else if (const auto* p = std::get_if<PauliNoise>(&m)) {
    j["p1x"] = p->one.px;
    j["p1y"] = p->one.py;
    j["p1z"] = p->one.pz;
    j["p2x"] = p->two.px;
    j["p2y"] = p->two.py;
    j["p2z"] = p->two.pz;
  } else if (const auto* x = std::get_if<Crosstalk>(&m)) {
    j["zeta_hz"] = x->zeta / (2 * std::numbers::pi);
    j["tau_layer_ns"] = x->tau_layer * 1e9;
  }
  return j;
}

inline NoiseModel noise_from_json(const nlohmann::json& j) {
  const std::string kind = j.value("kind", "none");
  NoiseModel m;
  if (kind == "none") {
    m = NoNoise{};
  } else if (kind == "depolarizing") {
    m = Depolarizing{j.value("p1", 0.0), j.value("p2", 0.0)};
  } else if (kind == "pauli") {
    m = PauliNoise{{j.value("p1x", 0.0), j.value("p1y", 0.0), j.value("p1z", 0.0)},
                   {j.value("p2x", 0.0), j.value("p2y", 0.0), j.value("p2z", 0.0)}};
  } else if (kind == "crosstalk") {
    m = Crosstalk{2 * std::numbers::pi * j.value("zeta_hz", 0.0),
                  j.value("tau_layer_ns", kDefaultCrosstalkLayerSeconds * 1e9) / 1e9};
  } else {
    throw ConfigError("unknown noise kind: " + kind);
  }
  validate_noise(m);
  return m;
}

}  // namespace qem

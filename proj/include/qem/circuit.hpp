#pragma once

// Gate-level circuits for Trotterized transverse-field Ising dynamics.
//
// Rotation conventions: RX(a) = exp(-i a X / 2), RZ(a) = exp(-i a Z / 2),
// RZZ(a) = exp(-i a Z(x)Z / 2). One Trotter layer of step dt applies
// exp(+i h_j dt X_j) = RX(-2 h_j dt) on every site, then
// exp(+i J_ij dt Z_i Z_j) = RZZ(-2 J_ij dt) on every edge in edge order.

#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "qem/common.hpp"
#include "qem/lattice.hpp"

namespace qem {

enum class GateKind { RX, RZ, CNOT, H };

struct Gate {
  GateKind kind = GateKind::H;
  int q0 = 0;       // qubit, or control for CNOT
  int q1 = -1;      // target for CNOT
  double angle = 0.0;

  static Gate rx(int q, double a) { return {GateKind::RX, q, -1, a}; }
  static Gate rz(int q, double a) { return {GateKind::RZ, q, -1, a}; }
  static Gate cnot(int c, int t) { return {GateKind::CNOT, c, t, 0.0}; }
  static Gate h(int q) { return {GateKind::H, q, -1, 0.0}; }

  bool is_rotation() const { return kind == GateKind::RX || kind == GateKind::RZ; }
  bool is_two_qubit() const { return kind == GateKind::CNOT; }

  friend bool operator==(const Gate&, const Gate&) = default;
};

enum class LayerKind { trotter, empty, basis_change };

struct Layer {
  LayerKind kind = LayerKind::trotter;
  std::vector<Gate> gates;
};

struct CircuitMeta {
  double t = 0.0;
  int n_real = 0;
  int n_empty = 0;
};

struct Circuit {
  int n_qubits = 0;
  std::vector<Edge> coupling;  // processor topology, shared with the spin lattice
  std::vector<Layer> layers;
  CircuitMeta meta;
};

enum class Basis { Z, X };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::trotter: return "trotter";
    case LayerKind::empty: return "empty";
    case LayerKind::basis_change: return "basis_change";
  }
  return "?";
}

inline std::array<Gate, 3> rzz_as_cnot_rz_cnot(int i, int j, double theta) {
  if (i == j) throw InvalidGateError("RZZ needs two distinct qubits");
  if (!std::isfinite(theta)) throw InvalidGateError("non-finite rotation angle");
  return {Gate::cnot(i, j), Gate::rz(j, theta), Gate::cnot(i, j)};
}

inline Layer trotter_layer(const LatticeSpec& lattice, const DisorderRealization& d, double dt) {
  if (!(dt >= 0.0)) throw ConfigError("Trotter step must be non-negative");
  validate_disorder(lattice, d);
  Layer layer{LayerKind::trotter, {}};
  layer.gates.reserve(static_cast<std::size_t>(lattice.n) + 3 * lattice.edges.size());
  for (int j = 0; j < lattice.n; ++j) {
    layer.gates.push_back(Gate::rx(j, -2.0 * d.h[static_cast<std::size_t>(j)] * dt));
  }
  for (std::size_t e = 0; e < lattice.edges.size(); ++e) {
    for (const Gate& g : rzz_as_cnot_rz_cnot(lattice.edges[e].a, lattice.edges[e].b, -2.0 * d.J[e] * dt)) {
      layer.gates.push_back(g);
    }
  }
  return layer;
}

/// The CNOT skeleton of a Trotter layer; nominally the identity.
inline Layer empty_layer(const LatticeSpec& lattice) {
  Layer layer{LayerKind::empty, {}};
  layer.gates.reserve(2 * lattice.edges.size());
  for (const Edge& e : lattice.edges) {
    layer.gates.push_back(Gate::cnot(e.a, e.b));
    layer.gates.push_back(Gate::cnot(e.a, e.b));
  }
  return layer;
}

inline Circuit build_target_circuit(const LatticeSpec& lattice, const DisorderRealization& d, double t, int N) {
  if (N < 1) throw ConfigError("target circuit needs at least one Trotter layer");
  if (!(t >= 0.0)) throw ConfigError("evolution time must be non-negative");
  Circuit c{lattice.n, lattice.edges, {}, {t, N, 0}};
  const Layer layer = trotter_layer(lattice, d, t / N);
  c.layers.assign(static_cast<std::size_t>(N), layer);
  return c;
}

/// N1 Trotter layers of step t/N1 followed by N2-N1 empty layers.
inline Circuit build_training_circuit(const LatticeSpec& lattice, const DisorderRealization& d, double t, int N1,
                                      int N2) {
  if (N1 < 1) throw ConfigError("training circuit needs N1 >= 1");
  if (N1 > N2) throw ConfigError("training circuit needs N1 <= N2");
  Circuit c = build_target_circuit(lattice, d, t, N1);
  const Layer idle = empty_layer(lattice);
  for (int k = N1; k < N2; ++k) c.layers.push_back(idle);
  c.meta.n_empty = N2 - N1;
  return c;
}

inline Layer basis_change_layer(Basis basis, int n) {
  Layer layer{LayerKind::basis_change, {}};
  if (basis == Basis::X) {
    for (int j = 0; j < n; ++j) layer.gates.push_back(Gate::h(j));
  }
  return layer;
}

struct GateCounts {
  int rx = 0, rz = 0, cnot = 0, h = 0;
};

inline GateCounts count_gates(const Circuit& c) {
  GateCounts k;
  for (const Layer& l : c.layers) {
    for (const Gate& g : l.gates) {
      switch (g.kind) {
        case GateKind::RX: ++k.rx; break;
        case GateKind::RZ: ++k.rz; break;
        case GateKind::CNOT: ++k.cnot; break;
        case GateKind::H: ++k.h; break;
      }
    }
  }
  return k;
}

inline void validate_circuit(const Circuit& c) {
  int trotter_like = 0;
  for (const Layer& l : c.layers) {
    if (l.kind != LayerKind::basis_change) ++trotter_like;
    for (const Gate& g : l.gates) {
      if (g.q0 < 0 || g.q0 >= c.n_qubits) throw InvalidGateError("gate qubit out of range");
      if (g.is_two_qubit() && (g.q1 < 0 || g.q1 >= c.n_qubits || g.q1 == g.q0)) {
        throw InvalidGateError("CNOT target out of range");
      }
      if (!std::isfinite(g.angle)) throw InvalidGateError("non-finite angle");
      if (l.kind == LayerKind::empty && g.kind != GateKind::CNOT) {
        throw InvalidGateError("empty layers may only contain CNOTs");
      }
    }
  }
  if (trotter_like != c.meta.n_real + c.meta.n_empty) throw ConfigError("circuit meta does not match its layers");
}

// Line-oriented text form: header lines, then "#LAYER kind" followed by one
// gate per line ("RX q a", "RZ q a", "CNOT c t", "H q"). Angles use %.17g so
// the text round-trips exactly.
inline std::string to_text(const Circuit& c) {
  std::ostringstream out;
  char buf[64];
  out << "#QUBITS " << c.n_qubits << '\n';
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "#META t=" << num(c.meta.t) << " N_real=" << c.meta.n_real << " N_empty=" << c.meta.n_empty << '\n';
  out << "#COUPLING";
  for (const Edge& e : c.coupling) out << ' ' << e.a << '-' << e.b;
  out << '\n';
  for (const Layer& l : c.layers) {
    out << "#LAYER " << to_string(l.kind) << '\n';
    for (const Gate& g : l.gates) {
      switch (g.kind) {
        case GateKind::RX: out << "RX " << g.q0 << ' ' << num(g.angle) << '\n'; break;
        case GateKind::RZ: out << "RZ " << g.q0 << ' ' << num(g.angle) << '\n'; break;
        case GateKind::CNOT: out << "CNOT " << g.q0 << ' ' << g.q1 << '\n'; break;
        case GateKind::H: out << "H " << g.q0 << '\n'; break;
      }
    }
  }
  return out.str();
}

inline Circuit circuit_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Circuit c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "#QUBITS") {
      ls >> c.n_qubits;
    } else if (word == "#META") {
      std::string kv;
      while (ls >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("bad #META entry: " + kv);
        const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
        if (key == "t") c.meta.t = std::stod(value);
        else if (key == "N_real") c.meta.n_real = std::stoi(value);
        else if (key == "N_empty") c.meta.n_empty = std::stoi(value);
      }
    } else if (word == "#COUPLING") {
      std::string pair;
      while (ls >> pair) {
        const auto dash = pair.find('-');
        if (dash == std::string::npos) throw ConfigError("bad coupling entry: " + pair);
        c.coupling.push_back({std::stoi(pair.substr(0, dash)), std::stoi(pair.substr(dash + 1))});
      }
    } else if (word == "#LAYER") {
      std::string kind;
      ls >> kind;
      Layer l;
      if (kind == "trotter") l.kind = LayerKind::trotter;
      else if (kind == "empty") l.kind = LayerKind::empty;
      else if (kind == "basis_change") l.kind = LayerKind::basis_change;
      else throw ConfigError("unknown layer kind: " + kind);
      c.layers.push_back(std::move(l));
    } else {
      if (c.layers.empty()) throw ConfigError("gate before first #LAYER");
      Gate g;
      if (word == "RX" || word == "RZ") {
        std::string angle;
        ls >> g.q0 >> angle;
        g.kind = word == "RX" ? GateKind::RX : GateKind::RZ;
        g.angle = std::stod(angle);
      } else if (word == "CNOT") {
        g.kind = GateKind::CNOT;
        ls >> g.q0 >> g.q1;
      } else if (word == "H") {
        g.kind = GateKind::H;
        ls >> g.q0;
      } else {
        throw ConfigError("unknown gate: " + word);
      }
      c.layers.back().gates.push_back(g);
    }
  }
  validate_circuit(c);
  return c;
}

}  // namespace qem

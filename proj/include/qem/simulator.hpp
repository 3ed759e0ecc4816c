#pragma once

// Circuit execution under a noise model.
//
// Two backends consume the same annotated op stream:
//  * density matrix: exact channel evolution (n <= 10), the reference;
//  * trajectories: one state vector per shot with sampled Pauli errors.
// Crosstalk is coherent; both backends apply it as a diagonal unitary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "qem/circuit.hpp"
#include "qem/common.hpp"
#include "qem/lattice.hpp"
#include "qem/noise.hpp"
#include "qem/state.hpp"

namespace qem {

inline constexpr int kMaxDensityMatrixQubits = 10;

enum class Backend { automatic, density_matrix, trajectory };

inline Backend backend_from_string(const std::string& s) {
  if (s == "auto") return Backend::automatic;
  if (s == "dm") return Backend::density_matrix;
  if (s == "traj") return Backend::trajectory;
  throw ConfigError("unknown backend '" + s + "' (expected auto, dm or traj)");
}

inline std::string to_string(Backend b) {
  switch (b) {
    case Backend::automatic: return "auto";
    case Backend::density_matrix: return "dm";
    case Backend::trajectory: return "traj";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Trajectory backend

inline void apply_gate(StateVector& psi, const Gate& g) {
  switch (g.kind) {
    case GateKind::RX: psi.apply_rx(g.q0, g.angle); break;
    case GateKind::RZ: psi.apply_rz(g.q0, g.angle); break;
    case GateKind::CNOT: psi.apply_cnot(g.q0, g.q1); break;
    case GateKind::H: psi.apply_h(g.q0); break;
  }
}

/// Applies the annotated stream to psi in place, sampling a Pauli error at
/// every channel slot. Returns the number of non-identity errors inserted.
inline int apply_trajectory(StateVector& psi, const AnnotatedCircuit& ac, Rng& rng) {
  int inserted = 0;
  std::vector<cplx> phases;
  double phase_angle = std::nan("");
  for (const NoisyOp& op : ac.ops) {
    if (const auto* g = std::get_if<GateOp>(&op)) {
      apply_gate(psi, g->gate);
    } else if (const auto* c1 = std::get_if<Channel1Op>(&op)) {
      if (c1->probs.trivial()) continue;
      const Pauli e = sample_pauli_error(c1->probs, rng);
      if (e != Pauli::I) {
        psi.apply_pauli(c1->qubit, e);
        ++inserted;
      }
    } else if (const auto* c2 = std::get_if<Channel2Op>(&op)) {
      if (c2->probs.trivial()) continue;
      for (int q : {c2->a, c2->b}) {
        const Pauli e = sample_pauli_error(c2->probs, rng);
        if (e != Pauli::I) {
          psi.apply_pauli(q, e);
          ++inserted;
        }
      }
    } else if (const auto* x = std::get_if<CrosstalkOp>(&op)) {
      if (phases.empty() || phase_angle != x->angle) {
        phases = crosstalk_phases(ac.n_qubits, x->edges, x->angle);
        phase_angle = x->angle;
      }
      psi.apply_diagonal(phases);
    }
  }
  return inserted;
}

inline StateVector run_trajectory(const Circuit& circuit, const NoiseModel& noise, std::uint64_t psi0, Rng& rng) {
  validate_circuit(circuit);
  StateVector psi = StateVector::basis_state(circuit.n_qubits, psi0);
  apply_trajectory(psi, insertion_policy(circuit, noise), rng);
  return psi;
}

inline StateVector run_noiseless(const Circuit& circuit, std::uint64_t psi0) {
  Rng unused(0);
  return run_trajectory(circuit, NoNoise{}, psi0, unused);
}

// ---------------------------------------------------------------------------
// Density-matrix backend. Consecutive ops supported on at most two qubits are
// fused into one pass over the matrix.

namespace detail {

struct MicroOp {
  enum Kind { unitary, phase, cnot, channel } kind;
  int bit = 0;
  int bit2 = 0;
  Mat2 u{};
  PauliProbs probs{};
};

struct FusedOp {
  int arity = 0;  // 1, 2, or 0 for a full diagonal
  std::array<int, 2> qubits{};
  std::vector<MicroOp> micro;
  std::vector<cplx> diagonal;
  // Superoperator on the flattened local block, by rows: entry i of the
  // output block is sum over k in [row_start[i], row_start[i+1]) of
  // coeff[k] * input[column[k]].
  std::vector<int> row_start;
  std::vector<int> column;
  std::vector<cplx> coeff;
};

template <int S>
inline void run_micro(Block<S>& b, const std::vector<MicroOp>& micro) {
  for (const MicroOp& m : micro) {
    switch (m.kind) {
      case MicroOp::unitary: block_unitary<S>(b, m.bit, m.u); break;
      case MicroOp::phase: block_phase<S>(b, m.bit, m.u[0], m.u[3]); break;
      case MicroOp::cnot: block_cnot<S>(b, m.bit, m.bit2); break;
      case MicroOp::channel: block_pauli_channel<S>(b, m.bit, m.probs); break;
    }
  }
}

template <int S>
inline void compile_superoperator(FusedOp& f) {
  constexpr int N = S * S;
  std::array<std::array<cplx, N>, N> image{};  // image[k] = superop applied to unit block k
  for (int k = 0; k < N; ++k) {
    Block<S> b{};
    b[k / S][k % S] = 1.0;
    run_micro<S>(b, f.micro);
    for (int i = 0; i < N; ++i) image[k][i] = b[i / S][i % S];
  }
  f.row_start.assign(1, 0);
  for (int i = 0; i < N; ++i) {
    for (int k = 0; k < N; ++k) {
      if (image[k][i] != cplx(0.0)) {
        f.column.push_back(k);
        f.coeff.push_back(image[k][i]);
      }
    }
    f.row_start.push_back(static_cast<int>(f.column.size()));
  }
}

template <int S>
inline void apply_superoperator(Block<S>& b, const FusedOp& f) {
  constexpr int N = S * S;
  std::array<cplx, N> in;
  for (int i = 0; i < N; ++i) in[i] = b[i / S][i % S];
  const int* col = f.column.data();
  const cplx* co = f.coeff.data();
  for (int i = 0; i < N; ++i) {
    cplx acc = 0.0;
    for (int k = f.row_start[i]; k < f.row_start[i + 1]; ++k) acc += co[k] * in[col[k]];
    b[i / S][i % S] = acc;
  }
}

/// Superoperator with at most W nonzeros per row (zero padded), held by
/// value so the per-block loop runs on locals.
template <int S, int W>
struct FixedSuperoperator {
  std::array<std::array<int, W>, S * S> column;
  std::array<std::array<double, W>, S * S> coeff_re;
  std::array<std::array<double, W>, S * S> coeff_im;

  static bool fits(const FusedOp& f) {
    for (int i = 0; i < S * S; ++i) {
      if (f.row_start[i + 1] - f.row_start[i] > W) return false;
    }
    return true;
  }

  explicit FixedSuperoperator(const FusedOp& f) {
    for (int i = 0; i < S * S; ++i) {
      const int width = f.row_start[i + 1] - f.row_start[i];
      for (int k = 0; k < W; ++k) {
        const bool used = k < width;
        column[i][k] = used ? f.column[f.row_start[i] + k] : 0;
        coeff_re[i][k] = used ? f.coeff[f.row_start[i] + k].real() : 0.0;
        coeff_im[i][k] = used ? f.coeff[f.row_start[i] + k].imag() : 0.0;
      }
    }
  }

  void operator()(Block<S>& b) const {
    constexpr int N = S * S;
    std::array<double, N> re, im;
    for (int i = 0; i < N; ++i) {
      re[i] = b[i / S][i % S].real();
      im[i] = b[i / S][i % S].imag();
    }
    for (int i = 0; i < N; ++i) {
      double ar = 0.0, ai = 0.0;
      for (int k = 0; k < W; ++k) {
        const int c = column[i][k];
        ar += coeff_re[i][k] * re[c] - coeff_im[i][k] * im[c];
        ai += coeff_re[i][k] * im[c] + coeff_im[i][k] * re[c];
      }
      b[i / S][i % S] = cplx(ar, ai);
    }
  }
};

inline std::vector<FusedOp> fuse(const AnnotatedCircuit& ac) {
  std::vector<FusedOp> program;
  // Pending ops are kept as (support, builder) until the group is flushed so
  // that local bit numbers are assigned once the group's support is final.
  struct Pending {
    std::array<int, 2> qubits;
    int arity;
    const NoisyOp* op;
  };
  std::vector<Pending> pending;
  std::array<int, 2> support{-1, -1};
  int support_size = 0;
  bool group_has_pair = false;

  const auto local = [&](int q) { return q == support[0] ? 0 : 1; };
  const auto flush = [&] {
    if (pending.empty()) return;
    FusedOp f;
    f.arity = support_size;
    f.qubits = support;
    for (const Pending& p : pending) {
      if (const auto* g = std::get_if<GateOp>(p.op)) {
        const Gate& gate = g->gate;
        switch (gate.kind) {
          case GateKind::RX: f.micro.push_back({MicroOp::unitary, local(gate.q0), 0, rx_matrix(gate.angle), {}}); break;
          case GateKind::H: f.micro.push_back({MicroOp::unitary, local(gate.q0), 0, h_matrix(), {}}); break;
          case GateKind::RZ: f.micro.push_back({MicroOp::phase, local(gate.q0), 0, rz_matrix(gate.angle), {}}); break;
          case GateKind::CNOT: f.micro.push_back({MicroOp::cnot, local(gate.q0), local(gate.q1), {}, {}}); break;
        }
      } else if (const auto* c1 = std::get_if<Channel1Op>(p.op)) {
        f.micro.push_back({MicroOp::channel, local(c1->qubit), 0, {}, c1->probs});
      } else if (const auto* c2 = std::get_if<Channel2Op>(p.op)) {
        f.micro.push_back({MicroOp::channel, local(c2->a), 0, {}, c2->probs});
        f.micro.push_back({MicroOp::channel, local(c2->b), 0, {}, c2->probs});
      }
    }
    if (f.arity == 1) compile_superoperator<2>(f);
    else compile_superoperator<4>(f);
    program.push_back(std::move(f));
    pending.clear();
    support = {-1, -1};
    support_size = 0;
    group_has_pair = false;
  };

  for (const NoisyOp& op : ac.ops) {
    std::array<int, 2> q{-1, -1};
    int arity = 0;
    if (const auto* g = std::get_if<GateOp>(&op)) {
      q = {g->gate.q0, g->gate.q1};
      arity = g->gate.is_two_qubit() ? 2 : 1;
    } else if (const auto* c1 = std::get_if<Channel1Op>(&op)) {
      if (c1->probs.trivial()) continue;
      q = {c1->qubit, -1};
      arity = 1;
    } else if (const auto* c2 = std::get_if<Channel2Op>(&op)) {
      if (c2->probs.trivial()) continue;
      q = {c2->a, c2->b};
      arity = 2;
    } else if (const auto* x = std::get_if<CrosstalkOp>(&op)) {
      flush();
      FusedOp f;
      f.arity = 0;
      f.diagonal = crosstalk_phases(ac.n_qubits, x->edges, x->angle);
      program.push_back(std::move(f));
      continue;
    }
    // Does the op fit into the current group's (at most two-qubit) support?
    std::array<int, 2> merged = support;
    int merged_size = support_size;
    bool fits = true;
    for (int k = 0; k < arity; ++k) {
      const int qk = q[static_cast<std::size_t>(k)];
      if (merged_size >= 1 && merged[0] == qk) continue;
      if (merged_size >= 2 && merged[1] == qk) continue;
      if (merged_size == 2) {
        fits = false;
        break;
      }
      merged[static_cast<std::size_t>(merged_size++)] = qk;
    }
    // Two single-qubit groups on different qubits stay separate: a dense
    // 2-qubit superoperator costs more than two 1-qubit passes.
    if (fits && merged_size == 2 && arity == 1 && support_size == 1 && !group_has_pair) fits = false;
    if (!fits) {
      flush();
      merged = {q[0], arity == 2 ? q[1] : -1};
      merged_size = arity;
    }
    group_has_pair = group_has_pair || arity == 2;
    support = merged;
    support_size = merged_size;
    pending.push_back({q, arity, &op});
  }
  flush();
  return program;
}

inline void run_program(DensityMatrix& rho, const std::vector<FusedOp>& program) {
  for (const FusedOp& f : program) {
    if (f.arity == 0) {
      rho.apply_diagonal(f.diagonal);
    } else if (f.arity == 1) {
      const FixedSuperoperator<2, 4> op(f);
      rho.for_each_block_hermitian<1>({f.qubits[0]}, op);
    } else {
      if (FixedSuperoperator<4, 4>::fits(f)) {
        const FixedSuperoperator<4, 4> op(f);
        rho.for_each_block_hermitian<2>({f.qubits[0], f.qubits[1]}, op);
      } else {
        rho.for_each_block_hermitian<2>({f.qubits[0], f.qubits[1]}, [&](Block<4>& b) { apply_superoperator<4>(b, f); });
      }
    }
  }
}

}  // namespace detail

inline void check_density_matrix_guard(int n) {
  if (n > kMaxDensityMatrixQubits) {
    throw ResourceGuardError("density-matrix backend is limited to n <= " + std::to_string(kMaxDensityMatrixQubits) +
                             " qubits (requested " + std::to_string(n) + "); use the trajectory backend");
  }
}

/// Evolves rho in place through the annotated stream.
inline void apply_density_matrix(DensityMatrix& rho, const AnnotatedCircuit& ac) {
  check_density_matrix_guard(ac.n_qubits);
  detail::run_program(rho, detail::fuse(ac));
}

inline DensityMatrix run_density_matrix(const Circuit& circuit, const NoiseModel& noise, std::uint64_t psi0) {
  check_density_matrix_guard(circuit.n_qubits);
  validate_circuit(circuit);
  DensityMatrix rho = DensityMatrix::basis_state(circuit.n_qubits, psi0);
  apply_density_matrix(rho, insertion_policy(circuit, noise));
  return rho;
}

// ---------------------------------------------------------------------------
// Observables

enum class ObservableKind { Z1, ZZ2, X1 };

inline std::string to_string(ObservableKind k) {
  switch (k) {
    case ObservableKind::Z1: return "Z1";
    case ObservableKind::ZZ2: return "ZZ2";
    case ObservableKind::X1: return "X1";
  }
  return "?";
}

inline ObservableKind observable_kind_from_string(const std::string& s) {
  if (s == "Z1") return ObservableKind::Z1;
  if (s == "ZZ2") return ObservableKind::ZZ2;
  if (s == "X1") return ObservableKind::X1;
  throw ConfigError("unknown observable kind '" + s + "' (expected Z1, ZZ2 or X1)");
}

inline Basis measurement_basis(ObservableKind k) { return k == ObservableKind::X1 ? Basis::X : Basis::Z; }

inline int observable_dimension(ObservableKind k, int n, std::size_t n_edges) {
  return k == ObservableKind::ZZ2 ? static_cast<int>(n_edges) : n;
}

struct ObservableVector {
  ObservableKind kind = ObservableKind::Z1;
  std::vector<double> values;

  double mean() const { return values.empty() ? 0.0 : pairwise_sum(values) / static_cast<double>(values.size()); }
};

inline std::vector<std::string> observable_labels(ObservableKind kind, int n, const std::vector<Edge>& edges) {
  std::vector<std::string> labels;
  if (kind == ObservableKind::ZZ2) {
    for (const Edge& e : edges) labels.push_back("Z" + std::to_string(e.a) + "Z" + std::to_string(e.b));
  } else {
    const char* p = kind == ObservableKind::X1 ? "X" : "Z";
    for (int j = 0; j < n; ++j) labels.push_back(p + std::to_string(j));
  }
  return labels;
}

/// Expectations of Z-type observables (Z_j, or Z_iZ_j per edge) from a
/// probability vector over the measured basis. Used for X1 as well, on
/// X-basis probabilities.
inline std::vector<double> parity_expectations(std::span<const double> probs, ObservableKind kind, int n,
                                               const std::vector<Edge>& edges) {
  const bool pairs = kind == ObservableKind::ZZ2;
  std::vector<double> v(pairs ? edges.size() : static_cast<std::size_t>(n), 0.0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (p == 0.0) continue;
    if (pairs) {
      for (std::size_t e = 0; e < edges.size(); ++e) {
        v[e] += ((((i >> edges[e].a) ^ (i >> edges[e].b)) & 1u) ? -p : p);
      }
    } else {
      for (int j = 0; j < n; ++j) v[static_cast<std::size_t>(j)] += ((i >> j) & 1u) ? -p : p;
    }
  }
  return v;
}

inline ObservableVector exact_expectations_dm(const DensityMatrix& rho, ObservableKind kind,
                                              const std::vector<Edge>& edges) {
  const int n = rho.num_qubits();
  if (kind != ObservableKind::X1) {
    const std::vector<double> p = rho.diagonal();
    return {kind, parity_expectations(p, kind, n, edges)};
  }
  // tr(rho X_j) = sum_r rho[r, r ^ bit_j]
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    const std::uint64_t bit = std::uint64_t{1} << j;
    double s = 0.0;
    for (std::uint64_t r = 0; r < rho.dim(); ++r) s += rho(r, r ^ bit).real();
    v[static_cast<std::size_t>(j)] = s;
  }
  return {kind, v};
}

inline ObservableVector exact_expectations(const StateVector& psi, ObservableKind kind, const std::vector<Edge>& edges) {
  const int n = psi.num_qubits();
  if (kind != ObservableKind::X1) {
    const std::vector<double> p = psi.probabilities();
    return {kind, parity_expectations(p, kind, n, edges)};
  }
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    const std::uint64_t bit = std::uint64_t{1} << j;
    double s = 0.0;
    for (std::uint64_t r = 0; r < psi.dim(); ++r) s += (std::conj(psi[r]) * psi[r ^ bit]).real();
    v[static_cast<std::size_t>(j)] = s;
  }
  return {kind, v};
}

// ---------------------------------------------------------------------------
// Shots

struct ShotTable {
  int n_qubits = 0;
  Basis basis = Basis::Z;
  std::uint64_t total_shots = 0;
  std::map<std::uint64_t, std::uint64_t> counts;  // basis index -> count
};

/// Draws shots from a probability vector by inverse CDF.
inline ShotTable sample_from_probabilities(std::span<const double> probs, int n, Basis basis, std::uint64_t shots,
                                           Rng& rng) {
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += std::max(0.0, probs[i]);
    cdf[i] = acc;
  }
  ShotTable table{n, basis, shots, {}};
  for (std::uint64_t s = 0; s < shots; ++s) {
    const double u = uniform01(rng) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    ++table.counts[static_cast<std::uint64_t>(it - cdf.begin())];
  }
  return table;
}

inline Backend resolve_backend(Backend requested, int n, const NoiseModel& noise) {
  if (requested != Backend::automatic) return requested;
  if (is_deterministic(noise)) return Backend::trajectory;
  return n <= kMaxDensityMatrixQubits ? Backend::density_matrix : Backend::trajectory;
}

// ---------------------------------------------------------------------------
// Measurement distributions on the density-matrix backend.
//
// A run of CNOTs and Pauli channels right before measurement maps the outcome
// distribution to itself without looking at coherences: a CNOT permutes basis
// states and a Pauli channel flips the measured bit with probability px + py.
// Such a tail (all empty layers of a training circuit, for instance) is
// applied to the probability vector instead of the full matrix. For an X-basis
// measurement the tail is conjugated by H on every qubit, which swaps control
// and target of each CNOT and exchanges the roles of X and Z errors.

namespace detail {

inline bool is_classical_tail_op(const NoisyOp& op) {
  if (const auto* g = std::get_if<GateOp>(&op)) return g->gate.kind == GateKind::CNOT;
  return std::holds_alternative<Channel1Op>(op) || std::holds_alternative<Channel2Op>(op);
}

inline void flip_mix(std::vector<double>& p, int q, double f) {
  if (f == 0.0) return;
  const std::uint64_t m = std::uint64_t{1} << q;
  for (std::uint64_t i = 0; i < p.size(); ++i) {
    if (i & m) continue;
    const double a = p[i], b = p[i | m];
    p[i] = (1.0 - f) * a + f * b;
    p[i | m] = (1.0 - f) * b + f * a;
  }
}

inline void apply_classical_tail(std::vector<double>& p, std::span<const NoisyOp> tail, Basis basis) {
  const auto flip = [basis](const PauliProbs& e) { return basis == Basis::Z ? e.px + e.py : e.pz + e.py; };
  for (const NoisyOp& op : tail) {
    if (const auto* g = std::get_if<GateOp>(&op)) {
      int c = g->gate.q0, t = g->gate.q1;
      if (basis == Basis::X) std::swap(c, t);
      const std::uint64_t cm = std::uint64_t{1} << c, tm = std::uint64_t{1} << t;
      for (std::uint64_t i = 0; i < p.size(); ++i) {
        if ((i & cm) && !(i & tm)) std::swap(p[i], p[i | tm]);
      }
    } else if (const auto* c1 = std::get_if<Channel1Op>(&op)) {
      flip_mix(p, c1->qubit, flip(c1->probs));
    } else if (const auto* c2 = std::get_if<Channel2Op>(&op)) {
      flip_mix(p, c2->a, flip(c2->probs));
      flip_mix(p, c2->b, flip(c2->probs));
    }
  }
}

}  // namespace detail

/// Outcome distributions of the noisy circuit measured in each requested
/// basis, from one density-matrix evolution shared by all of them.
inline std::vector<std::vector<double>> measurement_distributions_dm(const Circuit& circuit, const NoiseModel& noise,
                                                                     std::uint64_t psi0,
                                                                     const std::vector<Basis>& bases) {
  check_density_matrix_guard(circuit.n_qubits);
  validate_circuit(circuit);
  const AnnotatedCircuit ac = insertion_policy(circuit, noise);
  std::size_t split = ac.ops.size();
  while (split > 0 && detail::is_classical_tail_op(ac.ops[split - 1])) --split;
  AnnotatedCircuit prefix{ac.n_qubits, ac.coupling, {ac.ops.begin(), ac.ops.begin() + static_cast<std::ptrdiff_t>(split)}};
  const std::span<const NoisyOp> tail(ac.ops.data() + split, ac.ops.size() - split);

  DensityMatrix rho = DensityMatrix::basis_state(circuit.n_qubits, psi0);
  apply_density_matrix(rho, prefix);
  std::vector<std::vector<double>> out;
  for (Basis basis : bases) {
    std::vector<double> p;
    if (basis == Basis::Z) {
      p = rho.diagonal();
    } else {
      DensityMatrix rotated = rho;
      AnnotatedCircuit hadamards{ac.n_qubits, ac.coupling, {}};
      for (int q = 0; q < ac.n_qubits; ++q) hadamards.ops.push_back(GateOp{Gate::h(q)});
      apply_density_matrix(rotated, hadamards);
      p = rotated.diagonal();
    }
    detail::apply_classical_tail(p, tail, basis);
    out.push_back(std::move(p));
  }
  return out;
}

/// Measures `shots` times in `basis` after running the circuit.
///
/// Trajectory backend: one fresh noise realization per shot (a single shared
/// trajectory when the noise model is deterministic). Density-matrix backend:
/// shots are drawn from the diagonal of the final rho, which is the same
/// outcome distribution. `automatic` picks whichever is cheaper.
inline ShotTable sample_shots(const Circuit& circuit, const NoiseModel& noise, std::uint64_t psi0,
                              std::uint64_t shots, Basis basis, Rng& rng, Backend backend = Backend::automatic) {
  if (shots < 1) throw ConfigError("shots must be >= 1");
  Circuit measured = circuit;
  measured.layers.push_back(basis_change_layer(basis, circuit.n_qubits));
  const int n = circuit.n_qubits;
  backend = resolve_backend(backend, n, noise);
  if (backend == Backend::density_matrix) {
    const std::vector<double> p = measurement_distributions_dm(circuit, noise, psi0, {basis}).front();
    return sample_from_probabilities(p, n, basis, shots, rng);
  }
  validate_circuit(measured);
  const AnnotatedCircuit ac = insertion_policy(measured, noise);
  if (is_deterministic(noise)) {
    StateVector psi = StateVector::basis_state(n, psi0);
    apply_trajectory(psi, ac, rng);
    const std::vector<double> p = psi.probabilities();
    return sample_from_probabilities(p, n, basis, shots, rng);
  }
  ShotTable table{n, basis, shots, {}};
  for (std::uint64_t s = 0; s < shots; ++s) {
    Rng shot_rng(rng());
    StateVector psi = StateVector::basis_state(n, psi0);
    apply_trajectory(psi, ac, shot_rng);
    const std::vector<double> p = psi.probabilities();
    const ShotTable one = sample_from_probabilities(p, n, basis, 1, shot_rng);
    ++table.counts[one.counts.begin()->first];
  }
  return table;
}

inline ObservableVector observables_from_shots(const ShotTable& table, ObservableKind kind,
                                               const std::vector<Edge>& edges) {
  if (measurement_basis(kind) != table.basis) {
    throw ConfigError("observable " + to_string(kind) + " needs " + (table.basis == Basis::Z ? "X" : "Z") +
                      "-basis shots");
  }
  if (table.total_shots == 0) throw ConfigError("empty shot table");
  const int n = table.n_qubits;
  const bool pairs = kind == ObservableKind::ZZ2;
  std::vector<double> sums(pairs ? edges.size() : static_cast<std::size_t>(n), 0.0);
  for (const auto& [index, count] : table.counts) {
    const double c = static_cast<double>(count);
    if (pairs) {
      for (std::size_t e = 0; e < edges.size(); ++e) {
        sums[e] += ((((index >> edges[e].a) ^ (index >> edges[e].b)) & 1u) ? -c : c);
      }
    } else {
      for (int j = 0; j < n; ++j) sums[static_cast<std::size_t>(j)] += ((index >> j) & 1u) ? -c : c;
    }
  }
  for (double& s : sums) s /= static_cast<double>(table.total_shots);
  return {kind, sums};
}

// ---------------------------------------------------------------------------
// Continuous-time reference: psi(t) = exp(-iHt) psi0 by eigendecomposition.

class ExactPropagator {
 public:
  ExactPropagator(const LatticeSpec& lattice, const DisorderRealization& d) : n_(lattice.n) {
    const Eigen::MatrixXd H = dense_hamiltonian(lattice, d);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    if (es.info() != Eigen::Success) throw NumericalError("Hamiltonian diagonalization failed");
    energies_ = es.eigenvalues();
    vectors_ = es.eigenvectors();
  }

  StateVector evolve(double t, std::uint64_t psi0) const {
    // coefficients in the eigenbasis: V^T e_{psi0}
    const Eigen::VectorXd c = vectors_.row(static_cast<Eigen::Index>(psi0)).transpose();
    Eigen::VectorXcd phased(c.size());
    for (Eigen::Index k = 0; k < c.size(); ++k) phased(k) = std::polar(c(k), -energies_(k) * t);
    const Eigen::VectorXcd out = vectors_.cast<cplx>() * phased;
    StateVector psi(n_);
    for (Eigen::Index i = 0; i < out.size(); ++i) psi[static_cast<std::size_t>(i)] = out(i);
    return psi;
  }

  const Eigen::VectorXd& energies() const { return energies_; }

 private:
  int n_;
  Eigen::VectorXd energies_;
  Eigen::MatrixXd vectors_;
};

inline StateVector exact_evolve(const LatticeSpec& lattice, const DisorderRealization& d, double t,
                                std::uint64_t psi0) {
  return ExactPropagator(lattice, d).evolve(t, psi0);
}

// ---------------------------------------------------------------------------
// CSV

inline void write_shot_table_csv(std::ostream& out, const ShotTable& table) {
  out << "bitstring,count\n";
  for (const auto& [index, count] : table.counts) out << format_bitstring(index, table.n_qubits) << ',' << count << '\n';
}

inline void write_observables_csv(std::ostream& out, const ObservableVector& v, int n, const std::vector<Edge>& edges) {
  const auto labels = observable_labels(v.kind, n, edges);
  char buf[64];
  out << "index,label,value\n";
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v.values[i]);
    out << i << ',' << labels[i] << ',' << buf << '\n';
  }
}

}  // namespace qem

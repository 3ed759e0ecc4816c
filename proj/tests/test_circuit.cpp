#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "qem/circuit.hpp"
#include "qem/simulator.hpp"

using namespace qem;

namespace {

struct Fixture {
  LatticeSpec lat = build_square_lattice(3, 3);
  DisorderRealization d = sample_disorder(lat, 1.0, 2023);
};

}  // namespace

TEST(Rzz, DecompositionEqualsExponentialOfZZ) {
  for (double theta : {0.0, 0.3, -1.7, 3.0}) {
    Circuit c{2, {{0, 1}}, {Layer{LayerKind::trotter, {}}}, {0, 1, 0}};
    for (const Gate& g : rzz_as_cnot_rz_cnot(0, 1, theta)) c.layers[0].gates.push_back(g);
    const oracle::Mat zz = oracle::pauli_on('Z', 0, 2) * oracle::pauli_on('Z', 1, 2);
    const oracle::Mat expected = (oracle::cplx(0, -theta / 2) * zz).exp();
    EXPECT_LT((oracle::circuit_unitary(c) - expected).cwiseAbs().maxCoeff(), 1e-12) << theta;
  }
  EXPECT_THROW(rzz_as_cnot_rz_cnot(2, 2, 0.1), InvalidGateError);
  EXPECT_THROW(rzz_as_cnot_rz_cnot(0, 1, std::nan("")), InvalidGateError);
}

TEST(TrotterLayer, SingleSiteIsOneRx) {
  const LatticeSpec one = build_square_lattice(1, 1);
  const DisorderRealization d{{0.8}, {}, 0};
  const Layer l = trotter_layer(one, d, 0.25);
  ASSERT_EQ(l.gates.size(), 1u);
  EXPECT_EQ(l.gates[0], Gate::rx(0, -2 * 0.8 * 0.25));
}

TEST(TrotterLayer, ThreeByThreeGateCounts) {
  Fixture f;
  const Circuit c = build_target_circuit(f.lat, f.d, 1.0, 1);
  const GateCounts k = count_gates(c);
  EXPECT_EQ(k.rx, 9);
  EXPECT_EQ(k.rz, 12);
  EXPECT_EQ(k.cnot, 24);
  EXPECT_EQ(k.h, 0);
  // rotations first, then edge blocks in edge order
  const auto& g = c.layers[0].gates;
  for (int j = 0; j < 9; ++j) EXPECT_EQ(g[static_cast<std::size_t>(j)].kind, GateKind::RX);
  EXPECT_EQ(g[9], Gate::cnot(0, 1));
  EXPECT_EQ(g[10].kind, GateKind::RZ);
  EXPECT_EQ(g[10].q0, 1);
  EXPECT_DOUBLE_EQ(g[10].angle, -2 * f.d.J[0] * 1.0);
}

TEST(TrotterLayer, EqualsProductOfExponentials) {
  const LatticeSpec lat = build_square_lattice(2, 2);
  const auto d = sample_disorder(lat, 1.0, 3);
  const double dt = 0.05;
  const Circuit c = build_target_circuit(lat, d, dt, 1);
  oracle::Mat hx = oracle::Mat::Zero(16, 16), hzz = oracle::Mat::Zero(16, 16);
  for (int j = 0; j < 4; ++j) hx -= d.h[static_cast<std::size_t>(j)] * oracle::pauli_on('X', j, 4);
  for (std::size_t e = 0; e < lat.edges.size(); ++e) {
    hzz -= d.J[e] * oracle::pauli_on('Z', lat.edges[e].a, 4) * oracle::pauli_on('Z', lat.edges[e].b, 4);
  }
  const oracle::Mat expected = (oracle::cplx(0, -dt) * hzz).exp() * (oracle::cplx(0, -dt) * hx).exp();
  EXPECT_LT((oracle::circuit_unitary(c) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EmptyLayer, IsNominallyIdentity) {
  Fixture f;
  const Layer l = empty_layer(f.lat);
  EXPECT_EQ(l.gates.size(), 24u);
  for (std::size_t e = 0; e < f.lat.edges.size(); ++e) {
    EXPECT_EQ(l.gates[2 * e], Gate::cnot(f.lat.edges[e].a, f.lat.edges[e].b));
    EXPECT_EQ(l.gates[2 * e + 1], l.gates[2 * e]);
  }
  const LatticeSpec small = build_square_lattice(2, 2);
  Circuit c{4, small.edges, {empty_layer(small)}, {0, 0, 1}};
  EXPECT_LT((oracle::circuit_unitary(c) - oracle::Mat::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(TrainingCircuit, LayerStructureAndErrors) {
  Fixture f;
  const Circuit c = build_training_circuit(f.lat, f.d, 1.2, 4, 16);
  ASSERT_EQ(c.layers.size(), 16u);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(c.layers[static_cast<std::size_t>(k)].kind, LayerKind::trotter);
  for (int k = 4; k < 16; ++k) EXPECT_EQ(c.layers[static_cast<std::size_t>(k)].kind, LayerKind::empty);
  EXPECT_EQ(c.meta.n_real, 4);
  EXPECT_EQ(c.meta.n_empty, 12);
  EXPECT_DOUBLE_EQ(c.layers[0].gates[0].angle, -2 * f.d.h[0] * 1.2 / 4);
  const GateCounts k = count_gates(c);
  EXPECT_EQ(k.cnot, 16 * 24);  // same CNOT count as the 16-layer target circuit
  EXPECT_EQ(count_gates(build_target_circuit(f.lat, f.d, 1.2, 16)).cnot, k.cnot);
  EXPECT_THROW(build_training_circuit(f.lat, f.d, 1.0, 5, 4), ConfigError);
  EXPECT_THROW(build_training_circuit(f.lat, f.d, 1.0, 0, 4), ConfigError);
  EXPECT_THROW(build_target_circuit(f.lat, f.d, 1.0, 0), ConfigError);
}

TEST(TrainingCircuit, NoiselessRunEqualsShortCircuit) {
  Fixture f;
  const std::uint64_t psi0 = 0b101010101;
  const auto a = run_noiseless(build_training_circuit(f.lat, f.d, 0.9, 4, 16), psi0);
  const auto b = run_noiseless(build_target_circuit(f.lat, f.d, 0.9, 4), psi0);
  EXPECT_GT(fidelity(a, b), 1 - 1e-12);
}

TEST(BasisChange, XBasisIsHadamardOnEveryQubit) {
  const Layer x = basis_change_layer(Basis::X, 4);
  EXPECT_EQ(x.gates.size(), 4u);
  for (const Gate& g : x.gates) EXPECT_EQ(g.kind, GateKind::H);
  EXPECT_TRUE(basis_change_layer(Basis::Z, 4).gates.empty());
}

TEST(CircuitText, RoundTripsExactly) {
  Fixture f;
  Circuit c = build_training_circuit(f.lat, f.d, 1.234567, 4, 6);
  c.layers.push_back(basis_change_layer(Basis::X, 9));
  const Circuit back = circuit_from_text(to_text(c));
  EXPECT_EQ(back.n_qubits, 9);
  EXPECT_EQ(back.coupling, c.coupling);
  EXPECT_DOUBLE_EQ(back.meta.t, c.meta.t);
  ASSERT_EQ(back.layers.size(), c.layers.size());
  for (std::size_t l = 0; l < c.layers.size(); ++l) {
    EXPECT_EQ(back.layers[l].kind, c.layers[l].kind);
    EXPECT_EQ(back.layers[l].gates, c.layers[l].gates);
  }
}

TEST(CircuitText, RejectsMalformedInput) {
  EXPECT_THROW(circuit_from_text("#QUBITS 2\nRX 0 0.1\n"), ConfigError);
  EXPECT_THROW(circuit_from_text("#QUBITS 2\n#META t=0 N_real=1 N_empty=0\n#LAYER trotter\nFOO 1\n"), ConfigError);
  EXPECT_THROW(circuit_from_text("#QUBITS 2\n#META t=0 N_real=1 N_empty=0\n#LAYER trotter\nCNOT 1 1\n"),
               InvalidGateError);
  EXPECT_THROW(circuit_from_text("#QUBITS 2\n#META t=0 N_real=1 N_empty=0\n#LAYER empty\nRX 0 1\n"),
               InvalidGateError);
}

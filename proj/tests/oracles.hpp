#pragma once

// Dense reference implementations built from Kronecker products. They share
// nothing with the library kernels beyond the qubit-ordering convention
// (qubit k is bit k, so qubit n-1 is the leftmost Kronecker factor).

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "qem/circuit.hpp"
#include "qem/noise.hpp"
#include "qem/simulator.hpp"

namespace oracle {

using Mat = Eigen::MatrixXcd;
using cplx = std::complex<double>;

inline Mat pauli(char p) {
  Mat m(2, 2);
  const cplx i(0, 1);
  switch (p) {
    case 'X': m << 0, 1, 1, 0; break;
    case 'Y': m << 0, -i, i, 0; break;
    case 'Z': m << 1, 0, 0, -1; break;
    default: m << 1, 0, 0, 1; break;
  }
  return m;
}

/// `op` (2x2) on qubit q of an n-qubit register.
inline Mat on_qubit(const Mat& op, int q, int n) {
  Mat out = Mat::Identity(1, 1);
  for (int k = n - 1; k >= 0; --k) {
    const Mat f = k == q ? op : Mat::Identity(2, 2);
    Mat next = Eigen::kroneckerProduct(out, f).eval();
    out = next;
  }
  return out;
}

inline Mat pauli_on(char p, int q, int n) { return on_qubit(pauli(p), q, n); }

/// exp(-i a P / 2) = cos(a/2) I - i sin(a/2) P
inline Mat rotation(char p, double a) {
  return std::cos(a / 2) * Mat::Identity(2, 2) - cplx(0, 1) * std::sin(a / 2) * pauli(p);
}

inline Mat cnot(int c, int t, int n) {
  const Mat p0 = 0.5 * (Mat::Identity(2, 2) + pauli('Z'));
  const Mat p1 = 0.5 * (Mat::Identity(2, 2) - pauli('Z'));
  return on_qubit(p0, c, n) + on_qubit(p1, c, n) * pauli_on('X', t, n);
}

inline Mat gate_matrix(const qem::Gate& g, int n) {
  switch (g.kind) {
    case qem::GateKind::RX: return on_qubit(rotation('X', g.angle), g.q0, n);
    case qem::GateKind::RZ: return on_qubit(rotation('Z', g.angle), g.q0, n);
    case qem::GateKind::CNOT: return cnot(g.q0, g.q1, n);
    case qem::GateKind::H: {
      Mat h(2, 2);
      h << 1, 1, 1, -1;
      return on_qubit(h / std::sqrt(2.0), g.q0, n);
    }
  }
  return Mat();
}

inline Mat circuit_unitary(const qem::Circuit& c) {
  const Eigen::Index dim = Eigen::Index{1} << c.n_qubits;
  Mat u = Mat::Identity(dim, dim);
  for (const auto& layer : c.layers) {
    for (const auto& g : layer.gates) u = gate_matrix(g, c.n_qubits) * u;
  }
  return u;
}

/// H = -sum h_j X_j - sum J_ij Z_i Z_j from Kronecker products.
inline Mat hamiltonian(const qem::LatticeSpec& lat, const qem::DisorderRealization& d) {
  const Eigen::Index dim = Eigen::Index{1} << lat.n;
  Mat H = Mat::Zero(dim, dim);
  for (int j = 0; j < lat.n; ++j) H -= d.h[static_cast<std::size_t>(j)] * pauli_on('X', j, lat.n);
  for (std::size_t e = 0; e < lat.edges.size(); ++e) {
    H -= d.J[e] * pauli_on('Z', lat.edges[e].a, lat.n) * pauli_on('Z', lat.edges[e].b, lat.n);
  }
  return H;
}

inline Mat pauli_channel(const Mat& rho, int q, int n, const qem::PauliProbs& p) {
  const Mat X = pauli_on('X', q, n), Y = pauli_on('Y', q, n), Z = pauli_on('Z', q, n);
  return (1 - p.total()) * rho + p.px * X * rho * X + p.py * Y * rho * Y + p.pz * Z * rho * Z;
}

/// Density-matrix evolution of an annotated stream by dense matrices.
inline Mat evolve(const qem::AnnotatedCircuit& ac, const Mat& rho0) {
  const int n = ac.n_qubits;
  Mat rho = rho0;
  for (const auto& op : ac.ops) {
    if (const auto* g = std::get_if<qem::GateOp>(&op)) {
      const Mat u = gate_matrix(g->gate, n);
      rho = u * rho * u.adjoint();
    } else if (const auto* c1 = std::get_if<qem::Channel1Op>(&op)) {
      rho = pauli_channel(rho, c1->qubit, n, c1->probs);
    } else if (const auto* c2 = std::get_if<qem::Channel2Op>(&op)) {
      rho = pauli_channel(pauli_channel(rho, c2->a, n, c2->probs), c2->b, n, c2->probs);
    } else if (const auto* x = std::get_if<qem::CrosstalkOp>(&op)) {
      for (const auto& e : x->edges) {
        const Mat zz = pauli_on('Z', e.a, n) * pauli_on('Z', e.b, n);
        const Mat u = (cplx(0, -x->angle) * zz).exp();
        rho = u * rho * u.adjoint();
      }
    }
  }
  return rho;
}

inline Mat basis_projector(int n, std::uint64_t index) {
  const Eigen::Index dim = Eigen::Index{1} << n;
  Mat rho = Mat::Zero(dim, dim);
  rho(static_cast<Eigen::Index>(index), static_cast<Eigen::Index>(index)) = 1.0;
  return rho;
}

inline Mat to_dense(const qem::DensityMatrix& rho) {
  Mat m(static_cast<Eigen::Index>(rho.dim()), static_cast<Eigen::Index>(rho.dim()));
  for (std::size_t r = 0; r < rho.dim(); ++r) {
    for (std::size_t c = 0; c < rho.dim(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rho(r, c);
  }
  return m;
}

inline Eigen::VectorXcd to_dense(const qem::StateVector& psi) {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(psi.dim()));
  for (std::size_t i = 0; i < psi.dim(); ++i) v(static_cast<Eigen::Index>(i)) = psi[i];
  return v;
}

}  // namespace oracle

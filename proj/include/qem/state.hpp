#pragma once

// State vectors, density matrices and the in-place kernels that act on them.
// Qubit k is bit k of the basis index. Density matrices are stored row-major.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qem/common.hpp"

namespace qem {

using cplx = std::complex<double>;
using Mat2 = std::array<cplx, 4>;  // row-major 2x2

enum class Pauli : std::uint8_t { I, X, Y, Z };

/// Probabilities of X, Y and Z errors on one qubit; the remainder is "no error".
struct PauliProbs {
  double px = 0.0;
  double py = 0.0;
  double pz = 0.0;

  double total() const { return px + py + pz; }
  bool trivial() const { return px == 0.0 && py == 0.0 && pz == 0.0; }
  friend bool operator==(const PauliProbs&, const PauliProbs&) = default;
};

inline Mat2 rx_matrix(double a) {
  const double c = std::cos(a / 2), s = std::sin(a / 2);
  return {cplx(c, 0), cplx(0, -s), cplx(0, -s), cplx(c, 0)};
}

inline Mat2 rz_matrix(double a) {
  return {std::polar(1.0, -a / 2), cplx(0), cplx(0), std::polar(1.0, a / 2)};
}

inline Mat2 h_matrix() {
  const double r = 1.0 / std::sqrt(2.0);
  return {cplx(r), cplx(r), cplx(r), cplx(-r)};
}

inline std::uint64_t insert_zero_bit(std::uint64_t x, int pos) {
  const std::uint64_t low = x & ((std::uint64_t{1} << pos) - 1);
  return ((x >> pos) << (pos + 1)) | low;
}

// ---------------------------------------------------------------------------

class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(int n) : n_(n), amp_(std::size_t{1} << n, cplx(0)) { amp_[0] = 1.0; }

  static StateVector basis_state(int n, std::uint64_t index) {
    StateVector s(n);
    s.amp_[0] = 0.0;
    s.amp_.at(index) = 1.0;
    return s;
  }

  int num_qubits() const { return n_; }
  std::size_t dim() const { return amp_.size(); }
  std::span<cplx> amplitudes() { return amp_; }
  std::span<const cplx> amplitudes() const { return amp_; }
  cplx& operator[](std::size_t i) { return amp_[i]; }
  const cplx& operator[](std::size_t i) const { return amp_[i]; }

  double norm() const {
    double s = 0.0;
    for (const cplx& a : amp_) s += std::norm(a);
    return std::sqrt(s);
  }

  void apply_1q(int q, const Mat2& u) {
    const std::uint64_t bit = std::uint64_t{1} << q;
    const std::size_t half = amp_.size() / 2;
    for (std::uint64_t k = 0; k < half; ++k) {
      const std::uint64_t i0 = insert_zero_bit(k, q), i1 = i0 | bit;
      const cplx a0 = amp_[i0], a1 = amp_[i1];
      amp_[i0] = u[0] * a0 + u[1] * a1;
      amp_[i1] = u[2] * a0 + u[3] * a1;
    }
  }

  void apply_rx(int q, double a) { apply_1q(q, rx_matrix(a)); }

  void apply_rz(int q, double a) {
    const cplx d0 = std::polar(1.0, -a / 2), d1 = std::polar(1.0, a / 2);
    for (std::uint64_t i = 0; i < amp_.size(); ++i) amp_[i] *= ((i >> q) & 1u) ? d1 : d0;
  }

  void apply_h(int q) { apply_1q(q, h_matrix()); }

  void apply_cnot(int control, int target) {
    const std::uint64_t cbit = std::uint64_t{1} << control, tbit = std::uint64_t{1} << target;
    for (std::uint64_t i = 0; i < amp_.size(); ++i) {
      if ((i & cbit) && !(i & tbit)) std::swap(amp_[i], amp_[i | tbit]);
    }
  }

  void apply_pauli(int q, Pauli p) {
    const std::uint64_t bit = std::uint64_t{1} << q;
    switch (p) {
      case Pauli::I: return;
      case Pauli::X:
        for (std::uint64_t i = 0; i < amp_.size(); ++i) {
          if (!(i & bit)) std::swap(amp_[i], amp_[i | bit]);
        }
        return;
      case Pauli::Z:
        for (std::uint64_t i = 0; i < amp_.size(); ++i) {
          if (i & bit) amp_[i] = -amp_[i];
        }
        return;
      case Pauli::Y:
        // Y = [[0, -i], [i, 0]]
        for (std::uint64_t i = 0; i < amp_.size(); ++i) {
          if (!(i & bit)) {
            const cplx a0 = amp_[i], a1 = amp_[i | bit];
            amp_[i] = cplx(0, -1) * a1;
            amp_[i | bit] = cplx(0, 1) * a0;
          }
        }
        return;
    }
  }

  /// Multiplies every amplitude by phases[i] (a diagonal unitary).
  void apply_diagonal(std::span<const cplx> phases) {
    for (std::size_t i = 0; i < amp_.size(); ++i) amp_[i] *= phases[i];
  }

  std::vector<double> probabilities() const {
    std::vector<double> p(amp_.size());
    for (std::size_t i = 0; i < amp_.size(); ++i) p[i] = std::norm(amp_[i]);
    return p;
  }

 private:
  int n_ = 0;
  std::vector<cplx> amp_;
};

inline cplx inner_product(const StateVector& a, const StateVector& b) {
  cplx s = 0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

inline double fidelity(const StateVector& a, const StateVector& b) { return std::norm(inner_product(a, b)); }

// ---------------------------------------------------------------------------
// Local blocks of a density matrix. A Block<S> holds the S x S entries whose
// row and column indices agree outside the K acted-on qubits (S = 2^K); local
// bit k corresponds to the k-th acted-on qubit.

template <int S>
using Block = std::array<std::array<cplx, S>, S>;

template <int S>
void block_unitary(Block<S>& b, int bit, const Mat2& u) {
  const int m = 1 << bit;
  for (int r0 = 0; r0 < S; ++r0) {
    if (r0 & m) continue;
    const int r1 = r0 | m;
    for (int c = 0; c < S; ++c) {
      const cplx x0 = b[r0][c], x1 = b[r1][c];
      b[r0][c] = u[0] * x0 + u[1] * x1;
      b[r1][c] = u[2] * x0 + u[3] * x1;
    }
  }
  const cplx c00 = std::conj(u[0]), c01 = std::conj(u[1]), c10 = std::conj(u[2]), c11 = std::conj(u[3]);
  for (int r = 0; r < S; ++r) {
    for (int k0 = 0; k0 < S; ++k0) {
      if (k0 & m) continue;
      const int k1 = k0 | m;
      const cplx x0 = b[r][k0], x1 = b[r][k1];
      b[r][k0] = x0 * c00 + x1 * c01;
      b[r][k1] = x0 * c10 + x1 * c11;
    }
  }
}

/// Diagonal single-qubit unitary diag(d0, d1) on local bit `bit`.
template <int S>
void block_phase(Block<S>& b, int bit, cplx d0, cplx d1) {
  const int m = 1 << bit;
  const cplx up = d0 * std::conj(d1), down = d1 * std::conj(d0);
  for (int r = 0; r < S; ++r) {
    for (int c = 0; c < S; ++c) {
      const bool rb = r & m, cb = c & m;
      if (rb == cb) continue;
      b[r][c] *= rb ? down : up;
    }
  }
}

template <int S>
void block_cnot(Block<S>& b, int control_bit, int target_bit) {
  const int cm = 1 << control_bit, tm = 1 << target_bit;
  const auto perm = [&](int i) { return (i & cm) ? (i ^ tm) : i; };
  Block<S> out;
  for (int r = 0; r < S; ++r) {
    for (int c = 0; c < S; ++c) out[perm(r)][perm(c)] = b[r][c];
  }
  b = out;
}

/// rho -> (1-px-py-pz) rho + px X rho X + py Y rho Y + pz Z rho Z on local bit.
template <int S>
void block_pauli_channel(Block<S>& b, int bit, const PauliProbs& p) {
  const int m = 1 << bit;
  const double keep_pop = 1.0 - p.px - p.py, move_pop = p.px + p.py;
  const double keep_coh = 1.0 - p.px - p.py - 2.0 * p.pz, swap_coh = p.px - p.py;
  for (int r0 = 0; r0 < S; ++r0) {
    if (r0 & m) continue;
    for (int c0 = 0; c0 < S; ++c0) {
      if (c0 & m) continue;
      const int r1 = r0 | m, c1 = c0 | m;
      const cplx e00 = b[r0][c0], e11 = b[r1][c1], e01 = b[r0][c1], e10 = b[r1][c0];
      b[r0][c0] = keep_pop * e00 + move_pop * e11;
      b[r1][c1] = keep_pop * e11 + move_pop * e00;
      b[r0][c1] = keep_coh * e01 + swap_coh * e10;
      b[r1][c0] = keep_coh * e10 + swap_coh * e01;
    }
  }
}

// ---------------------------------------------------------------------------

class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(int n) : n_(n), dim_(std::size_t{1} << n), data_(dim_ * dim_, cplx(0)) {
    data_[0] = 1.0;
  }

  static DensityMatrix basis_state(int n, std::uint64_t index) {
    DensityMatrix rho(n);
    rho.data_[0] = 0.0;
    rho(index, index) = 1.0;
    return rho;
  }

  static DensityMatrix from_pure(const StateVector& psi) {
    DensityMatrix rho(psi.num_qubits());
    for (std::size_t r = 0; r < rho.dim_; ++r) {
      for (std::size_t c = 0; c < rho.dim_; ++c) rho(r, c) = psi[r] * std::conj(psi[c]);
    }
    return rho;
  }

  static DensityMatrix maximally_mixed(int n) {
    DensityMatrix rho(n);
    rho.data_[0] = 0.0;
    for (std::size_t i = 0; i < rho.dim_; ++i) rho(i, i) = 1.0 / static_cast<double>(rho.dim_);
    return rho;
  }

  int num_qubits() const { return n_; }
  std::size_t dim() const { return dim_; }
  cplx& operator()(std::size_t r, std::size_t c) { return data_[r * dim_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * dim_ + c]; }
  std::span<const cplx> data() const { return data_; }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) t += data_[i * dim_ + i].real();
    return t;
  }

  double purity() const {
    // tr(rho^2) = sum |rho_rc|^2 for Hermitian rho
    double s = 0.0;
    for (const cplx& v : data_) s += std::norm(v);
    return s;
  }

  double hermiticity_error() const {
    double e = 0.0;
    for (std::size_t r = 0; r < dim_; ++r) {
      for (std::size_t c = r; c < dim_; ++c) e = std::max(e, std::abs((*this)(r, c) - std::conj((*this)(c, r))));
    }
    return e;
  }

  double min_eigenvalue() const {
    Eigen::MatrixXcd m(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
    for (std::size_t r = 0; r < dim_; ++r) {
      for (std::size_t c = 0; c < dim_; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = (*this)(r, c);
    }
    const Eigen::MatrixXcd herm = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  std::vector<double> diagonal() const {
    std::vector<double> p(dim_);
    for (std::size_t i = 0; i < dim_; ++i) p[i] = data_[i * dim_ + i].real();
    return p;
  }

  /// Applies op(Block<2^K>&) to every local block on the given qubits.
  template <int K, class Op>
  void for_each_block(const std::array<int, K>& qubits, Op&& op) {
    constexpr int S = 1 << K;
    std::array<std::uint64_t, S> offset{};
    for (int local = 0; local < S; ++local) {
      for (int k = 0; k < K; ++k) {
        if (local & (1 << k)) offset[local] |= std::uint64_t{1} << qubits[k];
      }
    }
    std::array<int, K> sorted = qubits;
    std::sort(sorted.begin(), sorted.end());
    const auto spread = [&](std::uint64_t x) {
      for (int k = 0; k < K; ++k) x = insert_zero_bit(x, sorted[k]);
      return x;
    };
    const std::uint64_t rest = dim_ >> K;
    std::vector<std::uint64_t> bases(rest);
    for (std::uint64_t i = 0; i < rest; ++i) bases[i] = spread(i);
    Block<S> b;
    for (std::uint64_t rr = 0; rr < rest; ++rr) {
      const std::uint64_t rb = bases[rr];
      std::array<cplx*, S> row;
      for (int i = 0; i < S; ++i) row[i] = &data_[(rb | offset[i]) * dim_];
      for (std::uint64_t cc = 0; cc < rest; ++cc) {
        const std::uint64_t cb = bases[cc];
        for (int i = 0; i < S; ++i) {
          for (int j = 0; j < S; ++j) b[i][j] = row[i][cb | offset[j]];
        }
        op(b);
        for (int i = 0; i < S; ++i) {
          for (int j = 0; j < S; ++j) row[i][cb | offset[j]] = b[i][j];
        }
      }
    }
  }

  /// Like for_each_block, for ops that map Hermitian matrices to Hermitian
  /// matrices: only blocks on or above the block diagonal are computed and the
  /// lower ones are written as their conjugate transposes.
  template <int K, class Op>
  void for_each_block_hermitian(const std::array<int, K>& qubits, Op&& op) {
    constexpr int S = 1 << K;
    std::array<std::uint64_t, S> offset{};
    for (int local = 0; local < S; ++local) {
      for (int k = 0; k < K; ++k) {
        if (local & (1 << k)) offset[local] |= std::uint64_t{1} << qubits[k];
      }
    }
    std::array<int, K> sorted = qubits;
    std::sort(sorted.begin(), sorted.end());
    const std::uint64_t rest = dim_ >> K;
    std::vector<std::uint64_t> bases(rest);
    for (std::uint64_t i = 0; i < rest; ++i) {
      std::uint64_t x = i;
      for (int k = 0; k < K; ++k) x = insert_zero_bit(x, sorted[k]);
      bases[i] = x;
    }
    Block<S> b;
    for (std::uint64_t rr = 0; rr < rest; ++rr) {
      const std::uint64_t rb = bases[rr];
      std::array<cplx*, S> row;
      for (int i = 0; i < S; ++i) row[i] = &data_[(rb | offset[i]) * dim_];
      for (std::uint64_t cc = rr; cc < rest; ++cc) {
        const std::uint64_t cb = bases[cc];
        for (int i = 0; i < S; ++i) {
          for (int j = 0; j < S; ++j) b[i][j] = row[i][cb | offset[j]];
        }
        op(b);
        for (int i = 0; i < S; ++i) {
          for (int j = 0; j < S; ++j) row[i][cb | offset[j]] = b[i][j];
        }
        if (cc == rr) continue;
        for (int j = 0; j < S; ++j) {
          cplx* mirror = &data_[(cb | offset[j]) * dim_];
          for (int i = 0; i < S; ++i) mirror[rb | offset[i]] = std::conj(b[i][j]);
        }
      }
    }
  }

  void apply_1q(int q, const Mat2& u) {
    for_each_block<1>({q}, [&](Block<2>& b) { block_unitary<2>(b, 0, u); });
  }

  void apply_cnot(int control, int target) {
    for_each_block<2>({control, target}, [](Block<4>& b) { block_cnot<4>(b, 0, 1); });
  }

  void apply_pauli_channel(int q, const PauliProbs& p) {
    for_each_block<1>({q}, [&](Block<2>& b) { block_pauli_channel<2>(b, 0, p); });
  }

  /// rho -> D rho D^dagger for D = diag(phases).
  void apply_diagonal(std::span<const cplx> phases) {
    for (std::size_t r = 0; r < dim_; ++r) {
      const cplx pr = phases[r];
      cplx* row = &data_[r * dim_];
      for (std::size_t c = 0; c < dim_; ++c) row[c] *= pr * std::conj(phases[c]);
    }
  }

 private:
  int n_ = 0;
  std::size_t dim_ = 0;
  std::vector<cplx> data_;
};

}  // namespace qem

#pragma once

// Square spin lattice, Gaussian disorder and the dense transverse-field Ising
// Hamiltonian
//
//   H = -sum_j h_j X_j - sum_<ij> J_ij Z_i Z_j
//
// in the computational basis (qubit k is bit k of the basis index).

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "qem/common.hpp"

namespace qem {

struct Edge {
  int a = 0;
  int b = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct LatticeSpec {
  int rows = 0;
  int cols = 0;
  int n = 0;
  std::vector<Edge> edges;  // horizontal edges first, then vertical; each a < b
};

struct DisorderRealization {
  std::vector<double> h;  // transverse fields, one per site
  std::vector<double> J;  // couplings aligned with LatticeSpec::edges
  std::uint64_t seed = 0;
};

inline constexpr int kMaxLatticeSites = 14;
inline constexpr int kMaxDenseHamiltonianSites = 12;

inline LatticeSpec build_square_lattice(int rows, int cols) {
  if (rows < 1 || cols < 1) throw ConfigError("lattice dimensions must be positive");
  if (rows * cols > kMaxLatticeSites) {
    throw ConfigError("lattice " + std::to_string(rows) + "x" + std::to_string(cols) + " exceeds " +
                      std::to_string(kMaxLatticeSites) + " sites");
  }
  LatticeSpec lat{rows, cols, rows * cols, {}};
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) lat.edges.push_back({r * cols + c, r * cols + c + 1});
  }
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c < cols; ++c) lat.edges.push_back({r * cols + c, (r + 1) * cols + c});
  }
  return lat;
}

/// J_ij ~ N(mean_J, mean_J/2) and h_j ~ N(2 mean_J, mean_J), with fields
/// drawn first. Negative tail values are kept.
inline DisorderRealization sample_disorder(const LatticeSpec& lattice, double mean_J, std::uint64_t seed) {
  if (!(mean_J > 0.0) || !std::isfinite(mean_J)) throw ConfigError("mean_J must be positive and finite");
  Rng rng = make_stream(seed, 0xD150);
  const double mean_h = 2.0 * mean_J;
  std::normal_distribution<double> field(mean_h, mean_h / 2.0);
  std::normal_distribution<double> coupling(mean_J, mean_J / 2.0);
  DisorderRealization d;
  d.seed = seed;
  d.h.resize(static_cast<std::size_t>(lattice.n));
  d.J.resize(lattice.edges.size());
  for (auto& v : d.h) v = field(rng);
  for (auto& v : d.J) v = coupling(rng);
  return d;
}

inline void validate_disorder(const LatticeSpec& lattice, const DisorderRealization& d) {
  if (d.h.size() != static_cast<std::size_t>(lattice.n) || d.J.size() != lattice.edges.size()) {
    throw DimensionError("disorder realization does not match lattice");
  }
  for (double v : d.h) {
    if (!std::isfinite(v)) throw ConfigError("non-finite transverse field");
  }
  for (double v : d.J) {
    if (!std::isfinite(v)) throw ConfigError("non-finite coupling");
  }
}

/// Dense 2^n x 2^n Hamiltonian. It is real symmetric in this basis.
inline Eigen::MatrixXd dense_hamiltonian(const LatticeSpec& lattice, const DisorderRealization& d) {
  if (lattice.n > kMaxDenseHamiltonianSites) {
    throw ResourceGuardError("dense Hamiltonian limited to n <= " + std::to_string(kMaxDenseHamiltonianSites));
  }
  validate_disorder(lattice, d);
  const Eigen::Index dim = Eigen::Index{1} << lattice.n;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index s = 0; s < dim; ++s) {
    double diag = 0.0;
    for (std::size_t e = 0; e < lattice.edges.size(); ++e) {
      const auto [a, b] = lattice.edges[e];
      const bool parity = (((s >> a) ^ (s >> b)) & 1) != 0;
      diag -= d.J[e] * (parity ? -1.0 : 1.0);
    }
    H(s, s) = diag;
    for (int j = 0; j < lattice.n; ++j) H(s ^ (Eigen::Index{1} << j), s) -= d.h[static_cast<std::size_t>(j)];
  }
  return H;
}

inline nlohmann::json disorder_to_json(const LatticeSpec& lattice, const DisorderRealization& d) {
  return {{"rows", lattice.rows}, {"cols", lattice.cols}, {"seed", d.seed}, {"h", d.h}, {"J", d.J}};
}

/// Reads {rows, cols, seed, h, J}; returns the lattice it belongs to as well.
inline std::pair<LatticeSpec, DisorderRealization> disorder_from_json(const nlohmann::json& j) {
  LatticeSpec lattice = build_square_lattice(j.at("rows").get<int>(), j.at("cols").get<int>());
  DisorderRealization d;
  d.seed = j.at("seed").get<std::uint64_t>();
  d.h = j.at("h").get<std::vector<double>>();
  d.J = j.at("J").get<std::vector<double>>();
  validate_disorder(lattice, d);
  return {std::move(lattice), std::move(d)};
}

}  // namespace qem

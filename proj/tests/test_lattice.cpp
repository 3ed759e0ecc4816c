#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "qem/common.hpp"
#include "qem/lattice.hpp"

using namespace qem;

TEST(Bitstring, CharacterKIsQubitK) {
  EXPECT_EQ(parse_bitstring("000111000"), (1u << 3) | (1u << 4) | (1u << 5));
  EXPECT_EQ(parse_bitstring("100"), 1u);
  EXPECT_EQ(format_bitstring(1u << 3 | 1u << 4 | 1u << 5, 9), "000111000");
  EXPECT_EQ(format_bitstring(parse_bitstring("010101010"), 9), "010101010");
  EXPECT_THROW(parse_bitstring("01a"), ConfigError);
  EXPECT_THROW(parse_bitstring(""), ConfigError);
}

TEST(Random, StreamsAreReproducibleAndDistinct) {
  Rng a = make_stream(7, 1), b = make_stream(7, 1), c = make_stream(7, 2);
  const auto x = a(), y = b(), z = c();
  EXPECT_EQ(x, y);
  EXPECT_NE(x, z);
  Rng r(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(r);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(uniform_below(r, 7), 7u);
  }
}

TEST(Threads, ParallelForCoversEveryIndexOnce) {
  std::vector<int> hits(101, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 5) throw ConfigError("boom");
               }),
               ConfigError);
}

TEST(Lattice, ThreeByThreeHasTwelveEdgesInFixedOrder) {
  const LatticeSpec lat = build_square_lattice(3, 3);
  EXPECT_EQ(lat.n, 9);
  ASSERT_EQ(lat.edges.size(), 12u);
  EXPECT_EQ(lat.edges.front(), (Edge{0, 1}));
  EXPECT_EQ(lat.edges[5], (Edge{7, 8}));
  EXPECT_EQ(lat.edges[6], (Edge{0, 3}));
  EXPECT_EQ(lat.edges.back(), (Edge{5, 8}));
  std::set<std::pair<int, int>> unique;
  for (const Edge& e : lat.edges) {
    EXPECT_LT(e.a, e.b);
    unique.insert({e.a, e.b});
  }
  EXPECT_EQ(unique.size(), 12u);
}

TEST(Lattice, SmallAndInvalidShapes) {
  EXPECT_TRUE(build_square_lattice(1, 1).edges.empty());
  EXPECT_EQ(build_square_lattice(2, 3).edges.size(), 7u);
  EXPECT_EQ(build_square_lattice(3, 4).edges.size(), 17u);
  EXPECT_THROW(build_square_lattice(0, 3), ConfigError);
  EXPECT_THROW(build_square_lattice(4, 4), ConfigError);
}

TEST(Disorder, ReproducibleAndMatchesTargetMoments) {
  const LatticeSpec lat = build_square_lattice(3, 3);
  const auto a = sample_disorder(lat, 1.0, 42), b = sample_disorder(lat, 1.0, 42);
  EXPECT_EQ(a.h, b.h);
  EXPECT_EQ(a.J, b.J);
  EXPECT_NE(a.h, sample_disorder(lat, 1.0, 43).h);

  // Pool many realizations: h ~ N(2, 1), J ~ N(1, 0.5).
  double sh = 0, sh2 = 0, sj = 0, sj2 = 0;
  int nh = 0, nj = 0;
  for (std::uint64_t s = 0; s < 4000; ++s) {
    const auto d = sample_disorder(lat, 1.0, s);
    for (double v : d.h) sh += v, sh2 += v * v, ++nh;
    for (double v : d.J) sj += v, sj2 += v * v, ++nj;
  }
  const double mh = sh / nh, mj = sj / nj;
  EXPECT_NEAR(mh, 2.0, 0.02);
  EXPECT_NEAR(std::sqrt(sh2 / nh - mh * mh), 1.0, 0.02);
  EXPECT_NEAR(mj, 1.0, 0.01);
  EXPECT_NEAR(std::sqrt(sj2 / nj - mj * mj), 0.5, 0.01);
}

TEST(Disorder, RejectsBadMeanAndKeepsNegativeTails) {
  const LatticeSpec lat = build_square_lattice(3, 3);
  EXPECT_THROW(sample_disorder(lat, 0.0, 1), ConfigError);
  EXPECT_THROW(sample_disorder(lat, -1.0, 1), ConfigError);
  bool negative = false;
  for (std::uint64_t s = 0; s < 200 && !negative; ++s) {
    for (double v : sample_disorder(lat, 1.0, s).J) negative = negative || v < 0;
  }
  EXPECT_TRUE(negative);
}

TEST(Disorder, JsonRoundTrip) {
  const LatticeSpec lat = build_square_lattice(2, 3);
  const auto d = sample_disorder(lat, 0.7, 99);
  const auto [lat2, d2] = disorder_from_json(nlohmann::json::parse(disorder_to_json(lat, d).dump()));
  EXPECT_EQ(lat2.n, 6);
  EXPECT_EQ(d2.h, d.h);
  EXPECT_EQ(d2.J, d.J);
  EXPECT_EQ(d2.seed, 99u);
}

TEST(Hamiltonian, SingleSiteAndPair) {
  LatticeSpec one = build_square_lattice(1, 1);
  DisorderRealization d{{0.5}, {}, 0};
  const auto H = dense_hamiltonian(one, d);
  EXPECT_DOUBLE_EQ(H(0, 1), -0.5);
  EXPECT_DOUBLE_EQ(H(0, 0), 0.0);

  LatticeSpec two = build_square_lattice(1, 2);
  DisorderRealization d2{{0.0, 0.0}, {1.5}, 0};
  const auto H2 = dense_hamiltonian(two, d2);
  EXPECT_DOUBLE_EQ(H2(0, 0), -1.5);
  EXPECT_DOUBLE_EQ(H2(1, 1), 1.5);
  EXPECT_DOUBLE_EQ(H2(3, 3), -1.5);
}

TEST(Hamiltonian, MatchesKroneckerOracleAndIsTraceless) {
  const LatticeSpec lat = build_square_lattice(3, 3);
  const auto d = sample_disorder(lat, 1.0, 5);
  const Eigen::MatrixXd H = dense_hamiltonian(lat, d);
  const Eigen::MatrixXcd K = oracle::hamiltonian(lat, d);
  EXPECT_LT((H.cast<std::complex<double>>() - K).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(H.trace(), 0.0, 1e-12);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> mine(H, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ref(K, Eigen::EigenvaluesOnly);
  EXPECT_LT((mine.eigenvalues() - ref.eigenvalues()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Hamiltonian, GuardAboveTwelveSites) {
  const LatticeSpec lat = build_square_lattice(1, 13);
  const auto d = sample_disorder(lat, 1.0, 1);
  EXPECT_THROW(dense_hamiltonian(lat, d), ResourceGuardError);
}

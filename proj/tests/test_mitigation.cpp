#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "qem/mitigation.hpp"

using namespace qem;

namespace {

PipelineSetup small_setup(int rows, int cols, NoiseModel noise, int N2 = 16) {
  PipelineSetup s;
  s.lattice = build_square_lattice(rows, cols);
  s.disorder = sample_disorder(s.lattice, 1.0, 2023);
  s.noise = noise;
  s.N1 = 4;
  s.N2 = N2;
  s.shots = 4096;
  s.threads = 2;
  return s;
}

Dataset handmade(ObservableKind kind, std::vector<std::pair<std::vector<double>, std::vector<double>>> rows) {
  Dataset d{kind, 2, {}, {}};
  double t = 0.1;
  for (auto& [in, label] : rows) {
    d.samples.push_back({{1, t}, {kind, in}, {kind, label}});
    t += 0.1;
  }
  return d;
}

}  // namespace

TEST(SampleInputs, GridStatesAndDeterminism) {
  const LatticeSpec lat = build_square_lattice(3, 3);
  const auto a = sample_inputs(lat, 2.0, 3000, 300, 7);
  const auto b = sample_inputs(lat, 2.0, 3000, 300, 7);
  std::set<std::uint64_t> states;
  bool duplicates = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].state, b[i].state);
    EXPECT_EQ(a[i].t, b[i].t);
    EXPECT_LT(a[i].state, 512u);
    const double k = a[i].t * 300 / 2.0;
    EXPECT_NEAR(k, std::round(k), 1e-9);
    EXPECT_GE(std::round(k), 1.0);
    EXPECT_LE(std::round(k), 300.0);
    duplicates = duplicates || !states.insert(a[i].state).second;
  }
  EXPECT_TRUE(duplicates);
  const auto c = sample_inputs(lat, 2.0, 3000, 300, 8);
  bool differs = false;
  for (std::size_t i = 0; i < c.size(); ++i) differs = differs || c[i].state != a[i].state;
  EXPECT_TRUE(differs);
  EXPECT_THROW(sample_inputs(lat, 2.0, 0, 300, 1), ConfigError);
  EXPECT_THROW(sample_inputs(lat, 2.0, 5, 0, 1), ConfigError);
}

TEST(MakeSample, NoiselessDensityMatrixInputEqualsLabel) {
  PipelineSetup s = small_setup(2, 3, NoNoise{});
  const InputPoint p{0b101001, 0.8};
  const auto rho = run_density_matrix(noisy_circuit_for(s, p, CircuitRole::training), NoNoise{}, p.state);
  const auto noisy = exact_expectations_dm(rho, ObservableKind::ZZ2, s.lattice.edges).values;
  Rng rng(1);
  const Sample sample = make_sample(s, p, ObservableKind::ZZ2, rng);
  for (std::size_t i = 0; i < noisy.size(); ++i) EXPECT_NEAR(noisy[i], sample.label.values[i], 1e-12);
}

TEST(MakeSample, LabelAtSmallTimeIsTheInitialPattern) {
  PipelineSetup s = small_setup(3, 3, Depolarizing{1e-4, 1e-2});
  Rng rng(2);
  const Sample sample = make_sample(s, {parse_bitstring("000111000"), 1e-9}, ObservableKind::Z1, rng);
  const std::vector<double> want = {1, 1, 1, -1, -1, -1, 1, 1, 1};
  for (int j = 0; j < 9; ++j) EXPECT_NEAR(sample.label.values[j], want[j], 1e-9);
  EXPECT_EQ(sample.input.values.size(), 9u);
}

TEST(MakeSample, NoiseShrinksObservablesOnAverage) {
  PipelineSetup s = small_setup(3, 3, Depolarizing{1e-4, 1e-2});
  Rng rng(3);
  double noisy = 0, exact = 0;
  for (int k = 1; k <= 10; ++k) {
    const InputPoint p{uniform_below(rng, 512), k * 2.0 / 10};
    const auto dists = measurement_distributions_dm(noisy_circuit_for(s, p, CircuitRole::training), s.noise, p.state,
                                                    {Basis::Z});
    const auto in = parity_expectations(dists.front(), ObservableKind::Z1, 9, s.lattice.edges);
    const auto label =
        exact_expectations(run_noiseless(reference_circuit_for(s, p, CircuitRole::training), p.state),
                           ObservableKind::Z1, s.lattice.edges)
            .values;
    for (int j = 0; j < 9; ++j) noisy += std::abs(in[j]), exact += std::abs(label[j]);
  }
  EXPECT_LT(noisy, exact);
}

TEST(BuildDataset, DimensionsDeterminismAndThreadIndependence) {
  PipelineSetup s = small_setup(3, 3, Depolarizing{1e-4, 1e-2});
  s.shots = 256;
  const Dataset a = build_dataset(s, 2.0, 12, 300, ObservableKind::ZZ2, 5, 6);
  EXPECT_EQ(a.samples.size(), 12u);
  EXPECT_EQ(a.dimension(), 12u);
  s.threads = 1;
  const Dataset b = build_dataset(s, 2.0, 12, 300, ObservableKind::ZZ2, 5, 6);
  for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_EQ(a.samples[i].input.values, b.samples[i].input.values);
  EXPECT_EQ(a.provenance.N1, 4);
  EXPECT_EQ(a.provenance.N2, 16);
  EXPECT_EQ(a.provenance.time_segments, 300);
  EXPECT_EQ(a.provenance.disorder_seed, 2023u);
  EXPECT_EQ(a.provenance.noise.at("kind"), "depolarizing");
}

TEST(BuildDataset, SharedPointsAcrossKinds) {
  PipelineSetup s = small_setup(2, 3, Depolarizing{1e-3, 1e-2});
  s.shots = 128;
  const auto points = sample_inputs(s.lattice, 2.0, 6, 100, 1);
  const auto sets = build_datasets(s, points, {ObservableKind::Z1, ObservableKind::ZZ2, ObservableKind::X1},
                                   CircuitRole::evaluation, 3, 100, 2.0);
  ASSERT_EQ(sets.size(), 3u);
  EXPECT_EQ(sets[0].dimension(), 6u);
  EXPECT_EQ(sets[1].dimension(), 7u);
  EXPECT_EQ(sets[2].dimension(), 6u);
  for (const auto& d : sets) EXPECT_EQ(d.samples[4].point.t, points[4].t);
}

TEST(Mitigate, ClampsAndChecksDimension) {
  MlpParams p = zeros_like(init_mlp({2, 3, 2}, 1));
  p.biases.back() << 1.2, -0.3;
  const ObservableVector out = mitigate(p, {ObservableKind::Z1, {0.1, 0.2}});
  EXPECT_EQ(out.values, (std::vector<double>{1.0, -0.3}));
  EXPECT_THROW(mitigate(p, {ObservableKind::Z1, {0.1}}), DimensionError);
}

TEST(Evaluate, IdentityMitigatorGivesXiOne) {
  const Dataset d = handmade(ObservableKind::Z1, {{{0.1, 0.2}, {0.3, 0.1}}, {{-0.5, 0.9}, {-0.4, 1.0}}});
  const MetricsReport r = evaluate(identity_mitigator(), d);
  EXPECT_EQ(r.xi, 1.0);
  EXPECT_EQ(r.n_eval, 2u);
  EXPECT_NEAR(r.mse_before, (0.04 + 0.01 + 0.01 + 0.01) / 4, 1e-15);
}

TEST(Evaluate, XiArithmeticAndInfinitySentinel) {
  EXPECT_DOUBLE_EQ(improvement_factor(0.04, 0.01), 4.0);
  EXPECT_TRUE(std::isinf(improvement_factor(0.04, 0.0)));
  const Dataset exact = handmade(ObservableKind::Z1, {{{0.2, 0.2}, {0.2, 0.2}}});
  const MetricsReport r = evaluate(identity_mitigator(), exact);
  EXPECT_EQ(r.mse_before, 0.0);
  EXPECT_TRUE(std::isinf(r.xi));
  EXPECT_EQ(metrics_to_json(r, {}).at("xi"), "inf");
  const Dataset half = handmade(ObservableKind::Z1, {{{0.4, 0.0}, {0.0, 0.0}}});
  const Mitigator halve = [](const ObservableVector& v) {
    ObservableVector o = v;
    for (double& x : o.values) x /= 2;
    return o;
  };
  EXPECT_DOUBLE_EQ(evaluate(halve, half).xi, 4.0);
}

TEST(Evaluate, MoreLayersMeanMoreDamage) {
  const PipelineSetup s16 = small_setup(2, 3, Depolarizing{1e-4, 1e-2}, 16);
  const PipelineSetup s32 = small_setup(2, 3, Depolarizing{1e-4, 1e-2}, 32);
  const auto points = sample_inputs(s16.lattice, 2.0, 50, 100, 9);
  const auto e16 = build_datasets(s16, points, {ObservableKind::Z1}, CircuitRole::evaluation, 1, 100, 2.0).front();
  const auto e32 = build_datasets(s32, points, {ObservableKind::Z1}, CircuitRole::evaluation, 1, 100, 2.0).front();
  EXPECT_GE(evaluate(identity_mitigator(), e32).mse_before, evaluate(identity_mitigator(), e16).mse_before);
}

TEST(Bootstrap, StandardErrorIsSmallForConsistentRecords) {
  std::vector<std::pair<std::vector<double>, std::vector<double>>> rows;
  for (int i = 0; i < 40; ++i) rows.push_back({{0.2 + 0.01 * i, 0.0}, {0.0, 0.0}});
  const Dataset d = handmade(ObservableKind::Z1, rows);
  const Mitigator halve = [](const ObservableVector& v) {
    ObservableVector o = v;
    for (double& x : o.values) x /= 2;
    return o;
  };
  const MetricsReport r = evaluate(halve, d);
  EXPECT_DOUBLE_EQ(r.xi, 4.0);
  EXPECT_LT(bootstrap_xi_stderr(r, 200, 1), 1e-12);
}

TEST(Curves, SortedByTimeWithComponentMeans) {
  Dataset d = handmade(ObservableKind::Z1, {{{0.1, 0.3}, {0.0, 1.0}}, {{0.5, 0.5}, {1.0, 1.0}}});
  std::swap(d.samples[0], d.samples[1]);
  const auto c = curve_from_report(evaluate(identity_mitigator(), d));
  ASSERT_EQ(c.size(), 2u);
  EXPECT_LT(c[0].t, c[1].t);
  EXPECT_DOUBLE_EQ(c[0].raw, 0.2);
  EXPECT_DOUBLE_EQ(c[0].exact, 0.5);
}

TEST(Scaling, PlateauOnsetPicksFirstCountNearTheTop) {
  const std::vector<ScalingRow> rows = {{9, 50, 1.0}, {9, 100, 2.5}, {9, 200, 3.7}, {9, 400, 4.0}};
  EXPECT_EQ(plateau_onset(rows, 0.9), 200u);
  EXPECT_EQ(plateau_onset(rows, 0.5), 100u);
  std::ostringstream out;
  write_scaling_csv(out, rows);
  EXPECT_EQ(out.str().substr(0, 28), "n,sample_count,xi\n9,50,1\n9,1");
}

TEST(DatasetCsv, RoundTripsSamplesAndProvenance) {
  PipelineSetup s = small_setup(2, 3, PauliNoise{{1e-4, 1e-4, 2e-4}, {1e-3, 2e-3, 3e-3}});
  s.shots = 64;
  const Dataset d = build_dataset(s, 2.0, 5, 100, ObservableKind::ZZ2, 1, 2);
  std::stringstream io;
  write_dataset_csv(io, d);
  const std::string text = io.str();
  EXPECT_NE(text.find("state,t,kind,input_0"), std::string::npos);
  const Dataset back = read_dataset_csv(io);
  EXPECT_EQ(back.kind, ObservableKind::ZZ2);
  EXPECT_EQ(back.n_qubits, 6);
  ASSERT_EQ(back.samples.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(back.samples[i].point.state, d.samples[i].point.state);
    EXPECT_EQ(back.samples[i].point.t, d.samples[i].point.t);
    EXPECT_EQ(back.samples[i].input.values, d.samples[i].input.values);
    EXPECT_EQ(back.samples[i].label.values, d.samples[i].label.values);
  }
  EXPECT_EQ(provenance_to_json(back.provenance), provenance_to_json(d.provenance));
}

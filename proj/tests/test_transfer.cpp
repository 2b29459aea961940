#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "mfgrow/data_io.hpp"
#include "mfgrow/experiments.hpp"
#include "mfgrow/transfer.hpp"

using namespace mfgrow;

namespace {

Network example3_net(std::size_t width, std::uint64_t seed) {
  InitSpec init = nonzero_mean_default(Parametrization::MFP);
  init.bias_default = DistributionSpec::uniform(-0.5, 0.5);
  return make_network(MlpSpec::uniform(4, width, 1, 1, true, true), Parametrization::MFP, Activation::Tanh, init,
                      seed);
}

// Mean over inputs of |a(x) - b(x)|, one output.
double mean_abs_gap(const Network& a, const Network& b, const Matrix& x) {
  const Matrix fa = forward_batch(a, x).output();
  const Matrix fb = forward_batch(b, x).output();
  return (fa - fb).cwiseAbs().mean();
}

}  // namespace

TEST(Duplicate, Example3BlockStructure) {
  const Network net = example3_net(3, 1);
  const GammaPartition p = compute_partition(net.arch());
  const Network big = transfer(net, p, TransferPlan::duplicate(p, 2), Rng(0));
  const Matrix& w = net.weight("W1");
  Matrix expect(6, 6);
  expect << w, w, w, w;
  EXPECT_EQ(big.weight("W1"), expect);
  EXPECT_LE(max_relative_deviation(net, big, random_inputs(200, 1, 3.0, Rng(1))), 1e-12);
}

TEST(Duplicate, PreservesFunctionAcrossDepths) {
  for (std::size_t depth = 2; depth <= 5; ++depth)
    for (std::size_t k : {2, 3}) {
      InitSpec init = nonzero_mean_default(Parametrization::MFP);
      init.bias_default = DistributionSpec::uniform(-0.5, 0.5);
      const Network net =
          make_network(MlpSpec::uniform(depth, 7, 2, 2, true), Parametrization::MFP, Activation::Tanh, init, depth);
      EXPECT_LE(duplication_deviation(net, k, 300, Rng(k)), 1e-9) << depth << " x" << k;
    }
}

TEST(Transfer, IdentityIsBitExact) {
  const Network net = example3_net(5, 2);
  const GammaPartition p = compute_partition(net.arch());
  TransferPlan plan = TransferPlan::resize_hidden(p, 5, SamplingStrategy::identity());
  const Network same = transfer(net, p, plan, Rng(3));
  for (const auto& name : net.weight_names()) EXPECT_EQ(same.weight(name), net.weight(name)) << name;
  EXPECT_EQ(forward_batch(same, random_inputs(20, 1, 2.0, Rng(4))).output(),
            forward_batch(net, random_inputs(20, 1, 2.0, Rng(4))).output());
}

TEST(Transfer, IndexSetsAreGammaConsistent) {
  const Network net = make_network(MlpSpec::uniform(4, 9, 2, 1, true), Parametrization::MFP, Activation::Tanh,
                                   nonzero_mean_default(Parametrization::MFP), 7);
  const GammaPartition p = compute_partition(net.arch());
  const TransferResult r = transfer_with_indices(net, p, TransferPlan::resize_hidden(p, 13), Rng(8));
  // Group 0 is the 2-dimensional input axis.
  const auto& g1 = r.index_sets[1].indices;
  const auto& g2 = r.index_sets[2].indices;
  const auto& g3 = r.index_sets[3].indices;
  ASSERT_EQ(g2.size(), 13u);
  for (std::size_t j = 0; j < 13; ++j) {
    for (std::size_t k = 0; k < 13; ++k) {
      EXPECT_EQ(r.net.weight("W1")(j, k), net.weight("W1")(g2[j], g1[k]));
      EXPECT_EQ(r.net.weight("W2")(k, j), net.weight("W2")(g3[k], g2[j]));
    }
    EXPECT_EQ(r.net.weight("B1")(j, 0), net.weight("B1")(g2[j], 0));
  }
}

TEST(Transfer, ShapesAndScalars) {
  const Network net = make_network(MlpSpec::uniform(3, 10, 4, 2, true), Parametrization::MFP, Activation::Tanh,
                                   nonzero_mean_default(Parametrization::MFP), 1);
  const GammaPartition p = compute_partition(net.arch());
  const Network big = transfer(net, p, TransferPlan::resize_hidden(p, 25), Rng(2));
  EXPECT_EQ(big.weight("U").rows(), 25);
  EXPECT_EQ(big.weight("U").cols(), 4);
  EXPECT_EQ(big.weight("W1").rows(), 25);
  EXPECT_EQ(big.weight("W1").cols(), 25);
  EXPECT_EQ(big.weight("V").rows(), 2);
  EXPECT_EQ(big.layers()[1].fan_in, 25u);
  EXPECT_EQ(big.layers()[2].fan_in, 25u);
}

TEST(Transfer, Deterministic) {
  const Network net = example3_net(6, 3);
  const GammaPartition p = compute_partition(net.arch());
  TransferPlan plan = TransferPlan::resize_hidden(p, 11, SamplingStrategy::function_based(8, moment_specs(2, true)));
  plan.r1 = 0.1;
  plan.r2 = 0.2;
  const Network a = transfer(net, p, plan, Rng(5));
  const Network b = transfer(net, p, plan, Rng(5));
  EXPECT_EQ(checkpoint_bytes(a), checkpoint_bytes(b));
  const Network c = transfer(net, p, plan, Rng(6));
  EXPECT_NE(checkpoint_bytes(a), checkpoint_bytes(c));
}

TEST(Transfer, RejectsResizingData) {
  const Network net = example3_net(4, 0);
  const GammaPartition p = compute_partition(net.arch());
  TransferPlan plan;
  plan.target_widths[2] = 3;  // output group
  EXPECT_THROW(transfer(net, p, plan, Rng(0)), ParameterError);
  TransferPlan bad = TransferPlan::resize_hidden(p, 8);
  bad.r2 = 1.0;
  EXPECT_THROW(transfer(net, p, bad, Rng(0)), ParameterError);
}

TEST(Transfer, GrowingBeatsBootstrapAtSourceWidth) {
  // Resampling 1000 of 100 particles tracks the empirical measure better than
  // a same-size bootstrap, since only the resampling noise differs.
  const Matrix x = random_inputs(200, 1, 3.0, Rng(99));
  double grow = 0.0, boot = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Network net = make_network(MlpSpec::uniform(2, 100), Parametrization::MFP, Activation::Tanh,
                                     nonzero_mean_default(Parametrization::MFP), seed);
    const GammaPartition p = compute_partition(net.arch());
    SamplingStrategy s = SamplingStrategy::random();
    s.force_replacement = true;
    grow += mean_abs_gap(net, transfer(net, p, TransferPlan::resize_hidden(p, 1000, s), Rng(seed + 100)), x);
    boot += mean_abs_gap(net, transfer(net, p, TransferPlan::resize_hidden(p, 100, s), Rng(seed + 100)), x);
  }
  EXPECT_LT(grow, 5.0 * boot);
  EXPECT_LT(grow, boot);
}

TEST(Noise, Modes) {
  Rng rng(0);
  EXPECT_EQ(apply_noise(2.5, 0.0, NoiseMode::Perturb, rng), 2.5);
  EXPECT_EQ(apply_noise(2.5, 0.0, NoiseMode::Literal, rng), 0.0);
  EXPECT_THROW(apply_noise(1.0, -0.1, NoiseMode::Perturb, rng), ParameterError);
  double ratio = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double w = apply_noise(3.0, 0.4, NoiseMode::Perturb, rng);
    ASSERT_GE(w, 3.0 * 0.6);
    ASSERT_LE(w, 3.0 * 1.4);
    ratio += w / 3.0 / n;
  }
  EXPECT_NEAR(ratio, 1.0, 0.002);
  EXPECT_EQ(parse_noise_mode("literal"), NoiseMode::Literal);
  EXPECT_THROW(parse_noise_mode("loud"), ConfigError);
}

TEST(GrowThenTrain, FirstRecordMatchesSmallNet) {
  const auto dir = std::filesystem::temp_directory_path() / "mfgrow_test_grow";
  std::filesystem::create_directories(dir);
  const Network small = make_network(MlpSpec::uniform(3, 6, 1, 1, true), Parametrization::MFP, Activation::Tanh,
                                     nonzero_mean_default(Parametrization::MFP), 4);
  save_checkpoint(small, dir / "small.ckpt");
  const Dataset data = synth_regression(SynthKind::Sine, 64, 0.0, Rng(1));
  const GammaPartition p = compute_partition(small.arch());
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  const TrainingLog log = grow_then_train(dir / "small.ckpt", TransferPlan::duplicate(p, 3), OptimizerConfig{}, cfg,
                                          data, nullptr);
  ASSERT_GE(log.records.size(), 2u);
  EXPECT_NEAR(log.records.front().train_loss, evaluate(small, data, LossKind::Square).loss, 1e-9);
  std::filesystem::remove_all(dir);
}

#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "mfgrow/data_io.hpp"

using namespace mfgrow;
using mfgrow::testing::gradient_check;
using mfgrow::testing::random_net;

namespace {

Network two_layer(std::size_t n, Parametrization p, Activation act, std::uint64_t seed) {
  MlpSpec spec;
  spec.hidden = {n};
  InitSpec init;
  init.weight_default = DistributionSpec::gaussian(0.5, 1.0);
  return make_network(spec, p, act, init, seed);
}

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

}  // namespace

TEST(Forward, TwoLayerIdentitySymmetric) {
  MlpSpec spec;
  spec.hidden = {7};
  Network net(spec, Parametrization::MFP, Activation::Identity);
  net.weight("U").setOnes();
  net.weight("V").setOnes();
  EXPECT_DOUBLE_EQ(forward_batch(net, scalar(2.0)).output()(0, 0), 2.0);
}

TEST(Forward, TwoLayerIdentityLoopOracle) {
  const Network net = two_layer(13, Parametrization::MFP, Activation::Identity, 4);
  const Vector& u = net.weight("U");
  const Vector& v = net.weight("V");
  for (double x : {-1.5, 0.25, 3.0}) {
    double acc = 0.0;
    for (int i = 0; i < 13; ++i) acc += v(i) * u(i);
    EXPECT_NEAR(forward_batch(net, scalar(x)).output()(0, 0), acc / 13.0 * x, 1e-14);
  }
}

TEST(Forward, SpOverMfpIsNPerHiddenAverage) {
  // Identity activation and shared weights: each of the two averages over N
  // is sqrt(N) larger under SP.
  const std::size_t n = 16;
  MlpSpec spec = MlpSpec::uniform(3, n);
  Network mfp(spec, Parametrization::MFP, Activation::Identity);
  initialize(mfp, nonzero_mean_default(Parametrization::MFP), Rng(3));
  Network sp(spec, Parametrization::SP, Activation::Identity);
  for (const auto& name : mfp.weight_names()) sp.weight(name) = mfp.weight(name);
  const double f_mfp = forward_batch(mfp, scalar(0.7)).output()(0, 0);
  const double f_sp = forward_batch(sp, scalar(0.7)).output()(0, 0);
  EXPECT_NEAR(f_sp, f_mfp * std::sqrt(double(n)) * std::sqrt(double(n)), 1e-12 * std::abs(f_sp));
}

TEST(Forward, InputWidthMismatch) {
  const Network net = two_layer(4, Parametrization::MFP, Activation::Tanh, 0);
  EXPECT_THROW(forward_batch(net, Matrix(Matrix::Zero(1, 2))), DimensionError);
}

TEST(Backward, ZeroWeightsGiveZeroGradient) {
  Network net(MlpSpec::uniform(3, 5), Parametrization::MFP, Activation::Tanh);
  const auto lg = loss_and_gradient(net, scalar(1.3), scalar(0.8), LossKind::Square);
  for (const auto& [name, g] : lg.grads) EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0) << name;
}

TEST(Backward, FiniteDifferencesAllParametrizations) {
  for (Parametrization p : {Parametrization::SP, Parametrization::MuP, Parametrization::MFP}) {
    for (std::size_t depth : {2, 3, 5}) {
      const Network net = random_net(depth, p, 17 + depth);
      const Matrix x = random_inputs(3, 3, 1.5, Rng(5));
      const Matrix y = random_inputs(3, 2, 1.0, Rng(6));
      const auto r = gradient_check(net, x, y, LossKind::Square);
      EXPECT_LE(r.max_rel, 1e-6) << to_string(p) << " depth " << depth << " worst " << r.worst;
      EXPECT_GT(r.checked, 0u);
    }
  }
}

TEST(Backward, FiniteDifferencesCrossEntropy) {
  const Network net = random_net(3, Parametrization::MFP, 9, 4, 3);
  const Matrix x = random_inputs(5, 4, 1.0, Rng(1));
  const Matrix y = one_hot({0, 2, 1, 1, 0}, 3);
  EXPECT_LE(gradient_check(net, x, y, LossKind::CrossEntropy).max_rel, 1e-6);
}

TEST(Backward, FiniteDifferencesSkipConnection) {
  MlpSpec spec = MlpSpec::uniform(4, 9, 1, 1, true, true);
  InitSpec init = nonzero_mean_default(Parametrization::MFP);
  init.bias_default = DistributionSpec::uniform(-0.5, 0.5);
  const Network net = make_network(spec, Parametrization::MFP, Activation::Tanh, init, 2);
  const Matrix x = random_inputs(2, 1, 2.0, Rng(3));
  const Matrix y = random_inputs(2, 1, 1.0, Rng(4));
  EXPECT_LE(gradient_check(net, x, y, LossKind::Square).max_rel, 1e-6);
}

TEST(Backward, TwoLayerClosedForm) {
  // dv_i = eta (y - f) psi(u_i x), du_i = eta (y - f) v_i psi'(u_i x) x, after the lr scalars.
  const std::size_t n = 50;
  const Network net = two_layer(n, Parametrization::MFP, Activation::Tanh, 12);
  const double x = 0.9, y = -0.3;
  const auto lg = loss_and_gradient(net, scalar(x), scalar(y), LossKind::Square);
  const Vector& u = net.weight("U");
  const Vector& v = net.weight("V");
  double f = 0.0;
  for (std::size_t i = 0; i < n; ++i) f += v(i) * std::tanh(u(i) * x);
  f /= double(n);
  const double mv = lr_multiplier(net, "V");
  const double mu = lr_multiplier(net, "U");
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::tanh(u(i) * x);
    const double dv = (y - f) * t;
    const double du = (y - f) * v(i) * (1.0 - t * t) * x;
    EXPECT_NEAR(-mv * lg.grads.at("V")(i), dv, 1e-12);
    EXPECT_NEAR(-mu * lg.grads.at("U")(i), du, 1e-12);
  }
}

TEST(Backward, FiveLayerDeltaFormulas) {
  // Distinct widths so every axis is distinguishable; square loss, single pair.
  MlpSpec spec;
  spec.hidden = {5, 6, 7, 4};  // N1..N4
  InitSpec init;
  init.weight_default = DistributionSpec::gaussian(0.3, 1.0);
  const Network net = make_network(spec, Parametrization::MFP, Activation::Tanh, init, 21);
  const std::size_t n1 = 5, n2 = 6, n3 = 7, n4 = 4;
  const Vector& u = net.weight("U");
  const Matrix& w1 = net.weight("W1");
  const Matrix& w2 = net.weight("W2");
  const Matrix& w3 = net.weight("W3");
  const Vector& v = net.weight("V");
  const double x = 0.8, y = 0.2;
  auto psi = [](double z) { return std::tanh(z); };
  auto dpsi = [](double z) { return 1.0 - std::tanh(z) * std::tanh(z); };

  std::vector<double> a1(n1), z2(n2), z3(n3), z4(n4);
  for (std::size_t j = 0; j < n1; ++j) a1[j] = u(j) * x;
  for (std::size_t i = 0; i < n2; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < n1; ++j) s += w1(i, j) * psi(a1[j]);
    z2[i] = s / n1;
  }
  for (std::size_t i = 0; i < n3; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < n2; ++j) s += w2(i, j) * psi(z2[j]);
    z3[i] = s / n2;
  }
  for (std::size_t i = 0; i < n4; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < n3; ++j) s += w3(i, j) * psi(z3[j]);
    z4[i] = s / n3;
  }
  double f = 0;
  for (std::size_t i = 0; i < n4; ++i) f += v(i) * psi(z4[i]);
  f /= n4;
  const double e = y - f;

  // Bracketed backward sums of the closed forms.
  std::vector<double> b4(n4), b3(n3, 0.0), b2(n2, 0.0);
  for (std::size_t g4 = 0; g4 < n4; ++g4) b4[g4] = v(g4) * dpsi(z4[g4]);
  for (std::size_t i = 0; i < n3; ++i) {
    for (std::size_t g4 = 0; g4 < n4; ++g4) b3[i] += b4[g4] * w3(g4, i);
    b3[i] /= n4;
  }
  for (std::size_t i = 0; i < n2; ++i) {
    for (std::size_t g3 = 0; g3 < n3; ++g3) b2[i] += b3[g3] * dpsi(z3[g3]) * w2(g3, i);
    b2[i] /= n3;
  }

  const auto g = loss_and_gradient(net, scalar(x), scalar(y), LossKind::Square).grads;
  auto delta = [&](const std::string& w, Eigen::Index i, Eigen::Index j) {
    return -lr_multiplier(net, w) * g.at(w)(i, j);
  };
  const double tol = 1e-12;
  for (std::size_t i = 0; i < n4; ++i) EXPECT_NEAR(delta("V", i, 0), e * psi(z4[i]), tol);
  for (std::size_t i = 0; i < n4; ++i)
    for (std::size_t j = 0; j < n3; ++j) EXPECT_NEAR(delta("W3", i, j), e * b4[i] * psi(z3[j]), tol);
  for (std::size_t i = 0; i < n3; ++i)
    for (std::size_t j = 0; j < n2; ++j)
      EXPECT_NEAR(delta("W2", i, j), e * b3[i] * dpsi(z3[i]) * psi(z2[j]), tol);
  for (std::size_t i = 0; i < n2; ++i)
    for (std::size_t j = 0; j < n1; ++j)
      EXPECT_NEAR(delta("W1", i, j), e * b2[i] * dpsi(z2[i]) * psi(a1[j]), tol);
  for (std::size_t j = 0; j < n1; ++j) {
    double s = 0;
    for (std::size_t g2 = 0; g2 < n2; ++g2) s += b2[g2] * dpsi(z2[g2]) * w1(g2, j);
    EXPECT_NEAR(delta("U", j, 0), e * (s / n2) * dpsi(a1[j]) * x, tol);
  }
}

TEST(LrMultiplier, FiveLayerMfpScalars) {
  MlpSpec spec;
  spec.hidden = {5, 6, 7, 4};
  const Network net(spec, Parametrization::MFP);
  EXPECT_EQ(lr_multiplier(net, "V"), 4.0);
  EXPECT_EQ(lr_multiplier(net, "W3"), 4.0 * 7.0);
  EXPECT_EQ(lr_multiplier(net, "W2"), 7.0 * 6.0);
  EXPECT_EQ(lr_multiplier(net, "W1"), 6.0 * 5.0);
  EXPECT_EQ(lr_multiplier(net, "U"), 5.0);
}

TEST(LrMultiplier, SpIsOne) {
  const Network net(MlpSpec::uniform(4, 12, 3, 2, true), Parametrization::SP);
  for (const auto& w : net.weight_names()) EXPECT_EQ(lr_multiplier(net, w), 1.0) << w;
}

TEST(Training, ZeroLearningRateChangesNothing) {
  Network net = two_layer(20, Parametrization::MFP, Activation::Tanh, 1);
  const Network before = net;
  const Dataset data = synth_regression(SynthKind::Sine, 100, 0.0, Rng(2));
  OptimizerConfig oc;
  oc.lr = 0.0;
  Optimizer opt(net, oc);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 10;
  const TrainingLog log = train(net, data, nullptr, opt, tc);
  for (const auto& w : net.weight_names()) EXPECT_EQ(net.weight(w), before.weight(w));
  ASSERT_GE(log.records.size(), 2u);
  EXPECT_EQ(log.records.front().train_loss, log.records.back().train_loss);
}

TEST(Training, SineBaseline) {
  // Frozen after the first verified run: lr 0.1, batch 32, 2000 steps, N=200.
  const Dataset data = synth_regression(SynthKind::Sine, 2000, 0.0, Rng(0).substream("train"));
  MlpSpec spec;
  spec.hidden = {200};
  Network net = make_network(spec, Parametrization::MFP, Activation::Tanh,
                             nonzero_mean_default(Parametrization::MFP), 0);
  OptimizerConfig oc;
  oc.lr = 0.1;
  Optimizer opt(net, oc);
  TrainConfig tc;
  tc.epochs = 1000;
  tc.max_steps = 2000;
  tc.batch_size = 32;
  train(net, data, nullptr, opt, tc);
  EXPECT_LT(test_mse(net, data), 0.05);
}

TEST(Training, LogIsSeedDeterministic) {
  auto run = [] {
    Network net = two_layer(30, Parametrization::MFP, Activation::Tanh, 5);
    const Dataset data = synth_regression(SynthKind::Cubic, 200, 0.1, Rng(8));
    OptimizerConfig oc;
    oc.kind = OptimizerKind::Adam;
    oc.lr = 0.01;
    Optimizer opt(net, oc);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 16;
    tc.seed = 4;
    return train(net, data, &data, opt, tc).to_csv();
  };
  EXPECT_EQ(run(), run());
}

TEST(Training, DivergenceIsReported) {
  Network net = two_layer(10, Parametrization::MFP, Activation::Identity, 1);
  const Dataset data = synth_regression(SynthKind::Sine, 64, 0.0, Rng(1));
  OptimizerConfig oc;
  oc.lr = 1e6;
  Optimizer opt(net, oc);
  TrainConfig tc;
  tc.epochs = 50;
  tc.batch_size = 8;
  EXPECT_THROW(train(net, data, nullptr, opt, tc), DivergenceError);
}

TEST(Adam, FirstStepIsLrTimesSign) {
  // With bias correction the first Adam step is lr * g / (|g| + eps').
  Network net = two_layer(3, Parametrization::SP, Activation::Tanh, 2);
  const Network before = net;
  const auto lg = loss_and_gradient(net, scalar(0.5), scalar(1.0), LossKind::Square);
  OptimizerConfig oc;
  oc.kind = OptimizerKind::Adam;
  oc.lr = 0.01;
  Optimizer opt(net, oc);
  opt.step(net, lg.grads);
  for (const auto& w : net.weight_names()) {
    const Matrix d = net.weight(w) - before.weight(w);
    const Matrix& g = lg.grads.at(w);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const double expect = -0.01 * g.data()[i] / (std::abs(g.data()[i]) + 1e-8);
      EXPECT_NEAR(d.data()[i], expect, 1e-12);
    }
  }
}

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mfgrow/diagnostics.hpp"
#include "mfgrow/transfer.hpp"

namespace mfgrow {

Network make_network(const MlpSpec& spec, Parametrization p, Activation act, const InitSpec& init, std::uint64_t seed);

// Rows drawn uniformly from [-lim, lim]^dim.
Matrix random_inputs(std::size_t n, std::size_t dim, double lim, const Rng& rng);

// max over rows of |a(x) - b(x)| / (1 + |a(x)|), taken over output entries.
double max_relative_deviation(const Network& a, const Network& b, const Matrix& inputs);

// Duplication growth by k followed by max_relative_deviation on n inputs.
double duplication_deviation(const Network& net, std::size_t k, std::size_t n_inputs, const Rng& rng);

double test_mse(const Network& net, const Dataset& data);

struct RegenConfig {
  std::size_t width = 500;
  std::size_t regen_width = 2000;
  std::size_t steps = 4000;
  std::size_t batch_size = 32;
  double lr = 0.1;
  std::size_t n_train = 2000;
  std::size_t n_test = 1000;
  double noise_std = 0.0;
  std::size_t candidates = 64;
  int p = 4;
  DistributionSpec init = DistributionSpec::gaussian(0.0, 1.0);
  std::uint64_t seed = 0;
};

struct RegenResult {
  double source_mse = 0.0;
  double regen_mse = 0.0;
  double ratio = 0.0;
  double random_regen_mse = 0.0;  // plain random resampling, for reference
  TrainingLog log;
};

// Trains a 2-layer MFP net on sine regression, regenerates it at a larger
// width by function-based moment matching, and compares test MSE without
// retraining.
RegenResult twolayer_regen(const RegenConfig& cfg);

struct ClassifierConfig {
  Parametrization parametrization = Parametrization::MFP;
  std::size_t width = 300;
  std::size_t epochs = 10;
  OptimizerConfig optimizer;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  Activation activation = Activation::Tanh;
};

// Learning rates used for the image-classification runs of each parametrization.
OptimizerConfig default_classifier_optimizer(Parametrization p);

// Biased 3-layer classifier of the configured width.
Network make_classifier(const ClassifierConfig& cfg, std::size_t input_dim, std::size_t classes);

TrainingLog train_classifier(const ClassifierConfig& cfg, const Dataset& train_set, const Dataset& test_set,
                             Network* final_net = nullptr, const EpochCallback& on_epoch_end = {});

struct Fig2Config {
  bool grow = true;
  std::size_t small = 100;
  std::size_t large = 1000;
  std::size_t transfer_epoch = 4;
  std::size_t post_epochs = 3;
  OptimizerConfig optimizer;  // lr 0.1
  std::size_t batch_size = 64;
  std::vector<std::pair<double, double>> settings;  // (r1, r2)
  NoiseMode noise = NoiseMode::Perturb;
  SamplingStrategy strategy = SamplingStrategy::random();
  std::uint64_t seed = 0;
  double tolerance = 0.02;
};

struct Fig2Run {
  double r1 = 0.0;
  double r2 = 0.0;
  TrainingLog log;
  bool within = false;  // reached benchmark - tolerance in some post-transfer epoch
};

struct Fig2Result {
  TrainingLog source;
  TrainingLog benchmark;
  std::vector<Fig2Run> runs;
  double duplication_deviation = -1.0;  // growth by an integer factor only

  bool pass() const;
  std::string summary_csv() const;
};

// Source net trained for transfer_epoch epochs, transferred per setting and
// trained post_epochs more; benchmark trained from scratch at the target
// width for the same total epochs.
Fig2Result run_fig2(const Fig2Config& cfg, const Dataset& train_set, const Dataset& test_set,
                    const std::filesystem::path& workdir);

template <typename T>
T median(std::vector<T> v) {
  if (v.empty()) throw ParameterError("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / T(2);
}

}  // namespace mfgrow

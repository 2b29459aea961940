#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mfgrow/data_io.hpp"
#include "mfgrow/rc_init.hpp"
#include "mfgrow/transfer.hpp"

namespace mfgrow {

struct DatasetConfig {
  enum class Kind { Cifar10, SynthRegression, SynthClassification };

  Kind kind = Kind::SynthRegression;
  std::string dir;  // cifar10; empty: MFGROW_CIFAR10_DIR
  SynthKind function = SynthKind::Sine;
  std::size_t n_train = 1000;
  std::size_t n_test = 200;
  double noise_std = 0.0;
  std::size_t dim = 32;
  std::size_t classes = 10;
  double separation = 1.0;
};

struct ArchConfig {
  std::string builder = "mlp";  // "mlp" or "file"
  std::string file;
  // Zero data dimensions are taken from the dataset.
  MlpSpec spec;
  Activation activation = Activation::Tanh;
};

struct TransferConfig {
  std::size_t width = 0;
  SamplingStrategy strategy = SamplingStrategy::random();
  double r1 = 0.0;
  double r2 = 0.0;
  NoiseMode noise = NoiseMode::Perturb;
  std::size_t at_epoch = 0;  // 0: transfer the initialized network
};

struct ExperimentConfig {
  Parametrization parametrization = Parametrization::MFP;
  ArchConfig arch;
  std::optional<InitSpec> init;
  OptimizerConfig optimizer;
  std::size_t batch_size = 64;
  std::size_t epochs = 1;
  std::size_t max_steps = 0;
  std::vector<std::uint64_t> seeds{0};
  DatasetConfig dataset;
  std::optional<LossKind> loss;
  std::optional<TransferConfig> transfer;
  std::string output_dir = "out";

  LossKind loss_for(const Dataset& d) const {
    return loss.value_or(d.classification() ? LossKind::CrossEntropy : LossKind::Square);
  }
  InitSpec init_spec() const { return init.value_or(nonzero_mean_default(parametrization)); }
};

// Validates the whole document; unknown keys are rejected at every level.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

DistributionSpec parse_distribution(const nlohmann::json& j);
nlohmann::json to_json(const DistributionSpec& d);

// Train and test sets; synthetic sets derive from `seed`.
std::pair<Dataset, Dataset> load_datasets(const DatasetConfig& cfg, std::uint64_t seed);

MlpSpec resolve_spec(const ExperimentConfig& cfg, const Dataset& train_set);

}  // namespace mfgrow

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mfgrow/measure.hpp"
#include "mfgrow/network.hpp"

namespace mfgrow {

enum class NoiseMode { Literal, Perturb };

std::string to_string(NoiseMode m);
NoiseMode parse_noise_mode(const std::string& s);

// Literal: w * u. Perturb: w * (1 + u). u ~ uniform(-r1, r1).
double apply_noise(double w, double r1, NoiseMode mode, Rng& rng);

struct TransferPlan {
  // Group index -> new width. Groups not listed keep their width and their
  // samples (identity).
  std::map<int, std::size_t> target_widths;
  std::map<int, SamplingStrategy> strategies;
  SamplingStrategy default_strategy = SamplingStrategy::random();
  double r1 = 0.0;
  double r2 = 0.0;
  NoiseMode noise = NoiseMode::Perturb;
  std::uint64_t seed = 0;

  // Every non-data group to `width`.
  static TransferPlan resize_hidden(const GammaPartition& partition, std::size_t width,
                                    SamplingStrategy strategy = SamplingStrategy::random());
  // Every non-data group to k times its width, each sample repeated k times.
  static TransferPlan duplicate(const GammaPartition& partition, std::size_t k);

  const SamplingStrategy& strategy_for(int group) const;
  void validate(const GammaPartition& partition) const;
  std::vector<std::pair<std::string, std::string>> tags() const;
};

struct TransferResult {
  Network net;
  std::vector<IndexSet> index_sets;  // one per group, identity for untouched groups
};

TransferResult transfer_with_indices(const Network& net, const GammaPartition& partition, const TransferPlan& plan,
                                     const Rng& rng);

inline Network transfer(const Network& net, const GammaPartition& partition, const TransferPlan& plan, const Rng& rng) {
  return transfer_with_indices(net, partition, plan, rng).net;
}

// Loads a checkpoint, transfers it with `plan` (seeded by plan.seed) and
// resumes training with a fresh optimizer. The first record is the loss of
// the transferred network before any update.
TrainingLog grow_then_train(const std::filesystem::path& small_ckpt, const TransferPlan& plan,
                            const OptimizerConfig& opt_cfg, const TrainConfig& train_cfg, const Dataset& train_set,
                            const Dataset* test_set);

}  // namespace mfgrow

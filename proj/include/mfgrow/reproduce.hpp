#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mfgrow/experiments.hpp"

namespace mfgrow {

// One measured quantity against its acceptance bound.
struct Check {
  std::string name;
  double value = 0.0;
  std::string op;  // "<=", ">=", "in"
  double lo = 0.0;
  double hi = 0.0;  // upper bound for "in"
  bool pass = false;

  static Check at_most(std::string name, double value, double bound);
  static Check at_least(std::string name, double value, double bound);
  static Check within(std::string name, double value, double lo, double hi);
  std::string bound() const;
};

struct Report {
  std::string name;
  std::vector<Check> checks;
  std::vector<std::string> files;  // written outputs, relative to the output dir

  bool pass() const;
  std::string summary_csv() const;
  std::string summary_text() const;
};

struct ReproduceOptions {
  std::filesystem::path out = "out";
  std::uint64_t seed = 0;            // first seed; runs use seed, seed+1, ...
  std::optional<std::size_t> seeds;  // default depends on the experiment
  std::optional<double> r1;          // fig2: a single (r1, r2) setting
  std::optional<double> r2;
  bool fallback = false;  // fig1 at N=150, 5 epochs
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> width;
};

// Seeds 3, N=1000, 10 epochs, CIFAR-10 in the real run.
Report reproduce_table1(const ReproduceOptions& opt, const Dataset& train_set, const Dataset& test_set);

// Accuracy of the three parametrizations at N=300 after 10 epochs, middle
// layer heatmaps before and after training, and the first-step update probe.
Report reproduce_fig1(const ReproduceOptions& opt, const Dataset& train_set, const Dataset& test_set);

Report reproduce_fig2(const ReproduceOptions& opt, bool grow, const Dataset& train_set, const Dataset& test_set);

Report reproduce_twolayer_regen(const ReproduceOptions& opt);

// Median over seeds of the first-step middle-layer update ratio between
// widths 256 and 1024; the batch is 64 samples of `data`.
std::vector<UpdateProbe> update_probe_seeds(Parametrization p, const Dataset& data, std::uint64_t first_seed,
                                            std::size_t seeds, double lr_width_exponent = 0.0);

// Acceptance bounds shared by the reproduce reports and the acceptance binary.
namespace bounds {
inline constexpr double kCifarAccuracy = 0.43;
inline constexpr double kCifarFallbackAccuracy = 0.38;
inline constexpr double kInitCorrelation = 0.1;
inline constexpr double kMfpFirstColumn = 0.3;
inline constexpr double kMfpOverSp = 3.0;
inline constexpr double kMfpLastRow = 0.1;
inline constexpr double kFig2Tolerance = 0.02;
inline constexpr double kPreservation = 1e-9;
inline constexpr double kRegenRatio = 1.2;
inline constexpr double kMfpProbeLo = 0.7;
inline constexpr double kMfpProbeHi = 1.5;
inline constexpr double kSpProbeLo = 1.5;
inline constexpr double kSpProbeHi = 3.0;
}  // namespace bounds

}  // namespace mfgrow

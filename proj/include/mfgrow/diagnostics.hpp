#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfgrow/network.hpp"
#include "mfgrow/rc_init.hpp"

namespace mfgrow {

struct Reducer {
  enum class Kind { Mean, PartialSum };

  Kind kind = Kind::Mean;
  std::size_t k = 0;

  static Reducer mean() { return {Kind::Mean, 0}; }
  static Reducer partial_sum(std::size_t k) { return {Kind::PartialSum, k}; }
  std::string describe() const;
};

// One value per index of `axis`, reduced over the opposing axis.
struct Profile {
  std::string weight;
  Axis axis = Axis::Row;
  Reducer reducer;
  int group = -1;  // partition group of the axis; -1 when built by hand
  Vector values;

  std::string label() const;
};

Profile profile(const Network& net, const std::string& weight, Axis axis, Reducer reducer);

// |Pearson r|; 0 when either input is constant.
double abs_pearson(const Vector& a, const Vector& b);

struct CorrelationPair {
  std::string a;
  std::string b;
  double r = 0.0;
  bool same_group = true;
};

struct CorrelationReport {
  std::vector<CorrelationPair> pairs;
  Parametrization parametrization = Parametrization::MFP;
  std::size_t step = 0;
  std::uint64_t seed = 0;

  double value(const std::string& a, const std::string& b) const;
  std::string to_csv() const;
};

// Pairwise |r| for every pair in the same group (profiles with group -1 pair
// with everything and must then have equal lengths).
CorrelationReport correlation_matrix(const std::vector<Profile>& profiles);

// Layer pairs of the 3-layer correlation table, labelled "first"/"last"
// against "M.column"/"M.row". first: U row means; last: partial sums of V's
// first rows per column; M.column / M.row: W1 column / row means. The
// same-group pairs are first~M.column and last~M.row.
CorrelationReport table1_pairs(const Network& net, std::size_t partial_rows = 4);

struct CorrelationExperimentConfig {
  Parametrization parametrization = Parametrization::MFP;
  std::size_t width = 1000;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;
  std::size_t batch_size = 64;
  Activation activation = Activation::Tanh;
  std::optional<InitSpec> init;  // default: nonzero_mean_default(parametrization)
};

struct CorrelationExperimentResult {
  CorrelationReport initial;
  CorrelationReport trained;
  TrainingLog log;
};

// Trains a biased 3-layer net of the configured width and reports the table
// pairs before and after training.
CorrelationExperimentResult correlation_experiment(const CorrelationExperimentConfig& cfg, const Dataset& train_set,
                                                   const Dataset& test_set);

enum class Normalize { MinMax, ZScore };

Normalize parse_normalize(const std::string& s);

struct Heatmap {
  Matrix values;  // normalized, rows/cols permuted into profile order
  std::vector<std::size_t> row_order;
  std::vector<std::size_t> col_order;

  std::string to_grid() const;
  std::string gnuplot_script(const std::string& grid_file, const std::string& title) const;
};

Heatmap heatmap_of(const Matrix& w, Normalize normalize);
Heatmap heatmap_export(const Network& net, const std::string& weight, Normalize normalize);

struct HistogramTrajectory {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t bins = 0;
  std::vector<std::vector<std::size_t>> counts;  // one row per snapshot
  std::vector<double> means;
  std::vector<double> stddevs;

  std::string to_csv() const;
};

// Fixed-bin histograms of the mean profile of `weight` along `axis` for each
// snapshot; the bin range spans all snapshots.
HistogramTrajectory histogram_trajectory(const std::vector<Network>& snapshots, const std::string& weight, Axis axis,
                                         std::size_t bins = 30);

struct UpdateProbe {
  double small = 0.0;  // mean |dW| of the middle matrix at the smaller width
  double large = 0.0;
  double ratio = 0.0;  // small / large
  // Same ratio for the mean |change| of the middle layer's pre-activations.
  double preact_ratio = 0.0;
};

// One SGD step from the default initialization on `batch`, at two widths of
// a 3-layer net.
UpdateProbe update_scaling_probe(Parametrization p, std::size_t n_small, std::size_t n_large, std::uint64_t seed,
                                 const Dataset& batch, const OptimizerConfig& opt, LossKind loss);

}  // namespace mfgrow

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mfgrow/network.hpp"

namespace mfgrow {

enum class FeatureKind { Scalar, RowProfile, ColProfile };

// One column of a group measure. `values` holds the per-sample scalar (vector
// weights) or profile (mean over the opposing axis); `slices` keeps the full
// slice of each sample so weights can be rebuilt from the measure.
struct Feature {
  std::string name;  // "V", "B1", "R(W1)", "C(W2)"
  std::string weight;
  FeatureKind kind = FeatureKind::Scalar;
  Vector values;
  Matrix slices;  // width x slice length
};

struct GroupMeasure {
  int group = 0;
  std::size_t width = 0;
  std::vector<Feature> features;

  const Feature& feature(const std::string& name) const;
  bool has_feature(const std::string& name) const;
  // Euclidean norm of each sample over all of its full slices.
  Vector norms() const;
  GroupMeasure select(const std::vector<std::size_t>& indices) const;
  // One row per sample, one column per feature value.
  std::string to_csv() const;
};

std::vector<GroupMeasure> extract_measures(const Network& net, const GammaPartition& partition);

// Writes every slice of `measures` back into `net`; the inverse of extract_measures.
void reassemble(Network& net, const std::vector<GroupMeasure>& measures);

// sum_{q=1..p} | mean|a|^q - mean|b|^q |
double moment_loss(const Vector& a, const Vector& b, int p);

struct TestFunctionSpec {
  enum class Kind { Moment, Indicator };

  Kind kind = Kind::Moment;
  int p = 1;
  double q = 1.0;
  double weight = 1.0;
  // Apply to the Euclidean norm of each sample's feature values (the joint
  // particle) instead of feature by feature.
  bool joint = false;

  static TestFunctionSpec moment(int p, double weight = 1.0) { return {Kind::Moment, p, 1.0, weight, false}; }
  static TestFunctionSpec indicator(int p, double q, double weight = 1.0) {
    return {Kind::Indicator, p, q, weight, false};
  }
  static TestFunctionSpec joint_moment(int p, double weight = 1.0) { return {Kind::Moment, p, 1.0, weight, true}; }
  void validate() const;
  // Unweighted discrepancy between two samples of one feature.
  double evaluate(const Vector& a, const Vector& b) const;
};

// Moments 1..p with unit weights, per feature or on the joint particle norm.
std::vector<TestFunctionSpec> moment_specs(int p, bool joint = false);

// Per-sample Euclidean norm of the feature values.
Vector joint_values(const GroupMeasure& m);

// Sum over specs of weight * discrepancy; per-feature specs are summed over
// the features of x.
double weighted_measure_loss(const GroupMeasure& x, const GroupMeasure& y, const std::vector<TestFunctionSpec>& specs);

struct SamplingStrategy {
  enum class Kind { Identity, Duplicate, Random, Group, FunctionBased };

  Kind kind = Kind::Random;
  std::size_t n_groups = 4;
  std::size_t n_candidates = 64;
  std::vector<TestFunctionSpec> specs = moment_specs(4);
  // Draw with replacement even when the target fits in the pool.
  bool force_replacement = false;

  static SamplingStrategy identity() { return {Kind::Identity}; }
  static SamplingStrategy duplicate() { return {Kind::Duplicate}; }
  static SamplingStrategy random() { return {Kind::Random}; }
  static SamplingStrategy group(std::size_t n_groups);
  static SamplingStrategy function_based(std::size_t n_candidates, std::vector<TestFunctionSpec> specs);
  std::string describe() const;
};

SamplingStrategy parse_strategy(const std::string& s);

struct IndexSet {
  int group = 0;
  std::vector<std::size_t> indices;
};

// Samples that survive the norm filter: the ceil((1 - r2) * width) largest
// norms, returned in ascending index order. Ties keep the lower index.
std::vector<std::size_t> norm_pool(const GroupMeasure& m, double r2);

IndexSet draw_indices(const GroupMeasure& m, std::size_t target, const SamplingStrategy& strategy, double r2, Rng& rng);

struct CandidateReport {
  std::vector<IndexSet> candidates;
  std::vector<double> losses;
  std::size_t winner = 0;
};

// Function-based sampling with every candidate kept for inspection.
CandidateReport function_based_candidates(const GroupMeasure& m, std::size_t target, const SamplingStrategy& strategy,
                                          double r2, Rng& rng);

// (mean(u v), mean(u) mean(v)): the paired measure versus the product of marginals.
std::pair<double, double> coupling_contrast(const Vector& u, const Vector& v);

}  // namespace mfgrow

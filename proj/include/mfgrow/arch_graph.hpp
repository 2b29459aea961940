#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfgrow/error.hpp"

namespace mfgrow {

enum class Parametrization { SP = 0, MuP = 1, MFP = 2 };
enum class Axis { Row, Col };
enum class WeightKind { Matrix, Vector };

std::string to_string(Parametrization p);
Parametrization parse_parametrization(const std::string& s);
std::string to_string(Axis a);

struct GammaVar {
  int id = 0;
  std::size_t width = 1;
  // Indexes a data dimension (input, output, or a width-1 scalar axis);
  // transfer never resamples these.
  bool data = false;
  // Indexes tensors outside the modelled block (e.g. the block's output
  // feeding the next layer). Groups made only of external variables are not
  // reported.
  bool external = false;
};

struct WeightDecl {
  std::string name;
  WeightKind kind = WeightKind::Matrix;
  std::vector<std::size_t> shape;  // {rows, cols} or {len}

  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return kind == WeightKind::Matrix ? shape.at(1) : 1; }
  std::size_t axis_size(Axis a) const { return a == Axis::Row ? rows() : cols(); }
};

struct AxisUsage {
  std::string weight;
  Axis axis = Axis::Row;
  int gamma = 0;
};

struct ArchGraph {
  std::vector<WeightDecl> weights;
  std::vector<AxisUsage> usages;
  std::vector<GammaVar> gammas;
  Parametrization parametrization = Parametrization::MFP;

  const WeightDecl& weight(const std::string& name) const;
  bool has_weight(const std::string& name) const;
  const GammaVar& gamma(int id) const;

  // Distinct gamma ids used at (weight, axis), ascending.
  std::vector<int> gammas_at(const std::string& weight, Axis axis) const;

  // Throws StructuralError on any broken invariant.
  void validate() const;
};

struct GammaPartition {
  std::vector<std::vector<int>> groups;  // sorted by smallest member
  std::vector<std::size_t> widths;
  std::vector<bool> data;  // all members are data variables

  std::size_t size() const { return groups.size(); }
  // Index of the group holding gamma `id`, or -1 if it was omitted.
  int group_of(int id) const;
  std::string describe() const;
};

GammaPartition compute_partition(const ArchGraph& g);

// Dense chain x -> U -> W1 -> ... -> V. Depth counts weight layers, so
// hidden.size() == depth - 1. With `skip`, layer 3 also receives the
// pre-activation of layer 2 (the double use of W1 in the 4-layer example).
struct MlpSpec {
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  std::vector<std::size_t> hidden;
  bool bias = false;
  bool skip = false;

  std::size_t depth() const { return hidden.size() + 1; }
  static MlpSpec uniform(std::size_t depth, std::size_t width, std::size_t input_dim = 1,
                         std::size_t output_dim = 1, bool bias = false, bool skip = false);
};

// Weight name of layer l (1-based): U, W1 .. W{L-2}, V. Bias names prefix "B".
std::string mlp_weight_name(std::size_t layer, std::size_t depth);
std::string mlp_bias_name(std::size_t layer, std::size_t depth);

ArchGraph build_mlp(const MlpSpec& spec, Parametrization p = Parametrization::MFP);
ArchGraph build_mlp(std::size_t depth, const std::vector<std::size_t>& widths, bool with_bias, bool with_skip,
                    Parametrization p = Parametrization::MFP);

// Residual block h1 = psi(W1 h0 + B1), h4 = psi(W3 F(psi(W2 h0 + B2)) + B3),
// h5 = psi(W4 (h1 + h4) + B4). The rows of W4/B4 index the next layer and are
// marked external.
ArchGraph build_skip_block(std::size_t n);
// X = psi(W1 h0, B1); h1 = (WV X) F((WK X)^T (WQ X)); h2 = psi(W2 h1, B2).
// d_x is the token count; it fixes no weight shape and is only validated.
ArchGraph build_attention_block(std::size_t n, std::size_t d_x);

// 4-layer skip network of the gamma-notation example: widths n, biases on all
// layers, scalar input and output.
ArchGraph build_example3(std::size_t n);

nlohmann::json to_json(const ArchGraph& g);
// Parses and validates. Missing "gammas" are derived from the usages.
ArchGraph arch_from_json(const nlohmann::json& j);

}  // namespace mfgrow

#pragma once

#include <string>
#include <vector>

#include "mfgrow/tensor.hpp"

namespace mfgrow {

// One example per row. Classification sets store one-hot targets alongside
// the integer labels.
struct Dataset {
  Matrix inputs;
  Matrix targets;
  std::vector<int> labels;
  std::string split;

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(inputs.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(targets.cols()); }
  bool classification() const { return !labels.empty(); }

  Dataset subset(const std::vector<std::size_t>& rows) const;
  Dataset head(std::size_t n) const;
  void validate() const;
};

Matrix one_hot(const std::vector<int>& labels, std::size_t classes);

}  // namespace mfgrow

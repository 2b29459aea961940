#pragma once

// Shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <string>

#include "mfgrow/experiments.hpp"

namespace mfgrow::testing {

struct GradCheck {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::string worst;  // weight[index] of the largest error
};

// Analytic f64 gradient against central differences evaluated in long double.
inline GradCheck gradient_check(const Network& net, const Matrix& x, const Matrix& y, LossKind loss,
                                long double h = 1e-5L, double floor = 1e-8) {
  const GradientSet grads = loss_and_gradient(net, x, y, loss).grads;
  auto wide = net.cast<long double>();
  const MatrixT<long double> xl = x.cast<long double>();
  const MatrixT<long double> yl = y.cast<long double>();
  GradCheck out;
  for (const auto& name : net.weight_names()) {
    auto& w = wide.weight(name);
    const Matrix& g = grads.at(name);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const long double keep = w.data()[i];
      w.data()[i] = keep + h;
      const long double up = loss_value(wide, xl, yl, loss);
      w.data()[i] = keep - h;
      const long double down = loss_value(wide, xl, yl, loss);
      w.data()[i] = keep;
      const double fd = static_cast<double>((up - down) / (2.0L * h));
      const double an = g.data()[i];
      if (std::max(std::abs(an), std::abs(fd)) <= floor) continue;
      const double rel = std::abs(an - fd) / std::max(std::abs(an), std::abs(fd));
      ++out.checked;
      if (rel > out.max_rel) {
        out.max_rel = rel;
        out.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

// Random bias-carrying MLP with hidden widths drawn from [8, 32].
inline Network random_net(std::size_t depth, Parametrization p, std::uint64_t seed, std::size_t input_dim = 3,
                          std::size_t output_dim = 2) {
  Rng rng = Rng(seed).substream("shape");
  MlpSpec spec;
  spec.input_dim = input_dim;
  spec.output_dim = output_dim;
  spec.bias = true;
  for (std::size_t l = 0; l + 1 < depth; ++l) spec.hidden.push_back(8 + rng.index(25));
  InitSpec init = nonzero_mean_default(p);
  init.bias_default = DistributionSpec::uniform(-0.5, 0.5);
  return make_network(spec, p, Activation::Tanh, init, seed);
}

}  // namespace mfgrow::testing

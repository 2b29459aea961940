#pragma once

#include <map>
#include <string>
#include <vector>

#include "mfgrow/network.hpp"

namespace mfgrow {

enum class InitMode { Iid, Rc };
enum class RcPhi { Product, Sum };

std::string to_string(InitMode m);
std::string to_string(RcPhi phi);
InitMode parse_init_mode(const std::string& s);
RcPhi parse_phi(const std::string& s);

inline double apply_phi(RcPhi phi, double r, double c) { return phi == RcPhi::Product ? r * c : r + c; }

struct InitSpec {
  InitMode mode = InitMode::Iid;
  RcPhi phi = RcPhi::Product;
  // One entry per slot in weight declaration order: eligible matrices take
  // two slots in rc mode (row factor, then column factor), every other weight
  // takes one. Empty: weight_default / bias_default by role.
  std::vector<DistributionSpec> distributions;
  // One per eligible matrix in rc mode; empty: `phi` for all.
  std::vector<RcPhi> phis;
  DistributionSpec weight_default = DistributionSpec::gaussian(1.0, 3.0);
  DistributionSpec bias_default = DistributionSpec::constant(0.0);
};

// Matrix whose two axes are both indexed by hidden widths.
bool rc_eligible(const Network& net, const std::string& weight);

// Number of distributions an explicit list must supply for `net`.
std::size_t init_slots(const Network& net, const InitSpec& spec);

struct RcFactors {
  Vector r;
  Vector c;
  RcPhi phi = RcPhi::Product;
};

using InitRecord = std::map<std::string, RcFactors>;

Matrix regenerate(const RcFactors& f);

// Overwrites every weight. Each weight draws from its own substream of `rng`
// keyed by name, so the result does not depend on iteration order.
void initialize(Network& net, const InitSpec& spec, const Rng& rng, InitRecord* record = nullptr);

InitSpec nonzero_mean_default(Parametrization p);

}  // namespace mfgrow

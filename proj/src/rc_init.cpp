#include "mfgrow/rc_init.hpp"

namespace mfgrow {

std::string to_string(InitMode m) { return m == InitMode::Iid ? "iid" : "rc"; }
std::string to_string(RcPhi phi) { return phi == RcPhi::Product ? "product" : "sum"; }

InitMode parse_init_mode(const std::string& s) {
  if (s == "iid") return InitMode::Iid;
  if (s == "rc") return InitMode::Rc;
  throw ConfigError("unknown init mode '" + s + "'");
}

RcPhi parse_phi(const std::string& s) {
  if (s == "product") return RcPhi::Product;
  if (s == "sum") return RcPhi::Sum;
  throw ConfigError("unknown phi '" + s + "'");
}

bool rc_eligible(const Network& net, const std::string& weight) {
  const ArchGraph& arch = net.arch();
  const WeightDecl& decl = arch.weight(weight);
  if (decl.kind != WeightKind::Matrix) return false;
  for (Axis axis : {Axis::Row, Axis::Col})
    for (int id : arch.gammas_at(weight, axis))
      if (arch.gamma(id).data) return false;
  return true;
}

namespace {

bool is_bias(const Network& net, const std::string& name) {
  for (const auto& layer : net.layers())
    if (layer.bias == name) return true;
  return false;
}

}  // namespace

std::size_t init_slots(const Network& net, const InitSpec& spec) {
  std::size_t n = 0;
  for (const auto& name : net.weight_names()) n += (spec.mode == InitMode::Rc && rc_eligible(net, name)) ? 2 : 1;
  return n;
}

Matrix regenerate(const RcFactors& f) {
  Matrix w(f.r.size(), f.c.size());
  for (Eigen::Index j = 0; j < f.r.size(); ++j)
    for (Eigen::Index k = 0; k < f.c.size(); ++k) w(j, k) = apply_phi(f.phi, f.r(j), f.c(k));
  return w;
}

void initialize(Network& net, const InitSpec& spec, const Rng& rng, InitRecord* record) {
  const auto names = net.weight_names();
  std::size_t eligible = 0;
  for (const auto& name : names)
    if (spec.mode == InitMode::Rc && rc_eligible(net, name)) ++eligible;
  const std::size_t slots = init_slots(net, spec);
  if (!spec.distributions.empty() && spec.distributions.size() != slots)
    throw ParameterError("init: " + std::to_string(spec.distributions.size()) + " distributions for " +
                         std::to_string(slots) + " slots");
  if (!spec.phis.empty() && spec.phis.size() != eligible)
    throw ParameterError("init: " + std::to_string(spec.phis.size()) + " phi entries for " + std::to_string(eligible) +
                         " eligible matrices");
  for (const auto& d : spec.distributions) d.validate();
  spec.weight_default.validate();
  spec.bias_default.validate();

  std::size_t slot = 0;
  std::size_t matrix_index = 0;
  auto next = [&](const std::string& name) {
    if (!spec.distributions.empty()) return spec.distributions[slot++];
    return is_bias(net, name) ? spec.bias_default : spec.weight_default;
  };

  if (record) record->clear();
  for (const auto& name : names) {
    Matrix& w = net.weight(name);
    Rng stream = rng.substream(name);
    if (spec.mode == InitMode::Rc && rc_eligible(net, name)) {
      const DistributionSpec row_dist = next(name);
      const DistributionSpec col_dist = next(name);
      Rng row_rng = stream.substream("R");
      Rng col_rng = stream.substream("C");
      RcFactors f;
      f.phi = spec.phis.empty() ? spec.phi : spec.phis[matrix_index];
      ++matrix_index;
      f.r = sample(row_rng, row_dist, w.rows());
      f.c = sample(col_rng, col_dist, w.cols());
      w = regenerate(f);
      if (record) (*record)[name] = std::move(f);
    } else {
      const DistributionSpec d = next(name);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = d.draw(stream);
    }
  }
}

InitSpec nonzero_mean_default(Parametrization p) {
  InitSpec s;
  switch (p) {
    case Parametrization::MFP:
      s.weight_default = DistributionSpec::gaussian(1.0, 3.0);
      break;
    case Parametrization::SP:
      s.weight_default = DistributionSpec::uniform(-1.0, 1.0);
      break;
    case Parametrization::MuP:
      s.weight_default = DistributionSpec::gaussian(0.0, 1.0);
      break;
  }
  s.bias_default = DistributionSpec::constant(0.0);
  return s;
}

}  // namespace mfgrow

#include "mfgrow/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace mfgrow {

const Feature& GroupMeasure::feature(const std::string& name) const {
  for (const auto& f : features)
    if (f.name == name) return f;
  throw ParameterError("group measure " + std::to_string(group) + " has no feature '" + name + "'");
}

bool GroupMeasure::has_feature(const std::string& name) const {
  return std::any_of(features.begin(), features.end(), [&](const Feature& f) { return f.name == name; });
}

Vector GroupMeasure::norms() const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(width));
  for (const auto& f : features)
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += f.slices.row(i).squaredNorm();
  return out.cwiseSqrt();
}

GroupMeasure GroupMeasure::select(const std::vector<std::size_t>& indices) const {
  GroupMeasure out;
  out.group = group;
  out.width = indices.size();
  for (const auto& f : features) {
    Feature g;
    g.name = f.name;
    g.weight = f.weight;
    g.kind = f.kind;
    g.values.resize(static_cast<Eigen::Index>(indices.size()));
    g.slices.resize(static_cast<Eigen::Index>(indices.size()), f.slices.cols());
    for (std::size_t k = 0; k < indices.size(); ++k) {
      if (indices[k] >= width) throw ParameterError("select: index " + std::to_string(indices[k]) + " out of range");
      g.values(static_cast<Eigen::Index>(k)) = f.values(static_cast<Eigen::Index>(indices[k]));
      g.slices.row(static_cast<Eigen::Index>(k)) = f.slices.row(static_cast<Eigen::Index>(indices[k]));
    }
    out.features.push_back(std::move(g));
  }
  return out;
}

std::string GroupMeasure::to_csv() const {
  std::string out = "sample";
  for (const auto& f : features) out += "," + f.name;
  out += "\n";
  for (std::size_t i = 0; i < width; ++i) {
    out += std::to_string(i);
    for (const auto& f : features) out += "," + format_double(f.values(static_cast<Eigen::Index>(i)));
    out += "\n";
  }
  return out;
}

std::vector<GroupMeasure> extract_measures(const Network& net, const GammaPartition& partition) {
  const ArchGraph& arch = net.arch();
  std::vector<GroupMeasure> out;
  for (std::size_t gi = 0; gi < partition.size(); ++gi) {
    const std::set<int> members(partition.groups[gi].begin(), partition.groups[gi].end());
    auto touches = [&](const std::string& w, Axis a) {
      for (int id : arch.gammas_at(w, a))
        if (members.count(id)) return true;
      return false;
    };
    GroupMeasure m;
    m.group = static_cast<int>(gi);
    m.width = partition.widths[gi];
    for (const auto& decl : arch.weights) {
      const Matrix& w = net.weight(decl.name);
      if (touches(decl.name, Axis::Row)) {
        Feature f;
        f.weight = decl.name;
        if (decl.kind == WeightKind::Vector) {
          f.name = decl.name;
          f.kind = FeatureKind::Scalar;
          f.values = w.col(0);
        } else {
          f.name = "R(" + decl.name + ")";
          f.kind = FeatureKind::RowProfile;
          f.values = w.rowwise().mean();
        }
        f.slices = w;
        m.features.push_back(std::move(f));
      }
      if (decl.kind == WeightKind::Matrix && touches(decl.name, Axis::Col)) {
        Feature f;
        f.weight = decl.name;
        f.name = "C(" + decl.name + ")";
        f.kind = FeatureKind::ColProfile;
        f.values = w.colwise().mean().transpose();
        f.slices = w.transpose();
        m.features.push_back(std::move(f));
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

void reassemble(Network& net, const std::vector<GroupMeasure>& measures) {
  for (const auto& m : measures) {
    for (const auto& f : m.features) {
      Matrix& w = net.weight(f.weight);
      if (f.kind == FeatureKind::ColProfile) {
        if (f.slices.rows() != w.cols() || f.slices.cols() != w.rows())
          throw DimensionError("reassemble: column slices of '" + f.weight + "' do not fit");
        w = f.slices.transpose();
      } else {
        if (f.slices.rows() != w.rows() || f.slices.cols() != w.cols())
          throw DimensionError("reassemble: row slices of '" + f.weight + "' do not fit");
        w = f.slices;
      }
    }
  }
}

namespace {

double abs_moment(const Vector& a, int q) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) s += std::pow(std::abs(a(i)), q);
  return s / static_cast<double>(a.size());
}

double exceed_fraction(const Vector& a, int p, double q) {
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (std::pow(std::abs(a(i)), p) >= q) ++n;
  return static_cast<double>(n) / static_cast<double>(a.size());
}

}  // namespace

double moment_loss(const Vector& a, const Vector& b, int p) {
  if (p < 1) throw ParameterError("moment_loss: p must be >= 1");
  if (a.size() == 0 || b.size() == 0) throw DimensionError("moment_loss: empty feature");
  double total = 0.0;
  for (int q = 1; q <= p; ++q) total += std::abs(abs_moment(a, q) - abs_moment(b, q));
  return total;
}

void TestFunctionSpec::validate() const {
  if (p < 1) throw ParameterError("test function needs p >= 1");
  if (kind == Kind::Indicator && !(q > 0.0)) throw ParameterError("indicator test function needs q > 0");
  if (!(weight > 0.0)) throw ParameterError("test function weight must be positive");
}

double TestFunctionSpec::evaluate(const Vector& a, const Vector& b) const {
  validate();
  if (a.size() == 0 || b.size() == 0) throw DimensionError("test function on an empty feature");
  if (kind == Kind::Moment) return std::abs(abs_moment(a, p) - abs_moment(b, p));
  return std::abs(exceed_fraction(a, p, q) - exceed_fraction(b, p, q));
}

std::vector<TestFunctionSpec> moment_specs(int p, bool joint) {
  std::vector<TestFunctionSpec> out;
  for (int q = 1; q <= p; ++q) out.push_back(joint ? TestFunctionSpec::joint_moment(q) : TestFunctionSpec::moment(q));
  return out;
}

Vector joint_values(const GroupMeasure& m) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(m.width));
  for (const auto& f : m.features) out += f.values.cwiseProduct(f.values);
  return out.cwiseSqrt();
}

double weighted_measure_loss(const GroupMeasure& x, const GroupMeasure& y, const std::vector<TestFunctionSpec>& specs) {
  double total = 0.0;
  for (const auto& f : x.features) {
    const Feature& g = y.feature(f.name);
    for (const auto& s : specs)
      if (!s.joint) total += s.weight * s.evaluate(f.values, g.values);
  }
  if (std::any_of(specs.begin(), specs.end(), [](const TestFunctionSpec& s) { return s.joint; })) {
    for (const auto& f : y.features) x.feature(f.name);
    const Vector jx = joint_values(x);
    const Vector jy = joint_values(y);
    for (const auto& s : specs)
      if (s.joint) total += s.weight * s.evaluate(jx, jy);
  }
  return total;
}

SamplingStrategy SamplingStrategy::group(std::size_t n_groups) {
  SamplingStrategy s;
  s.kind = Kind::Group;
  s.n_groups = n_groups;
  return s;
}

SamplingStrategy SamplingStrategy::function_based(std::size_t n_candidates, std::vector<TestFunctionSpec> specs) {
  SamplingStrategy s;
  s.kind = Kind::FunctionBased;
  s.n_candidates = n_candidates;
  s.specs = std::move(specs);
  return s;
}

std::string SamplingStrategy::describe() const {
  switch (kind) {
    case Kind::Identity:
      return "identity";
    case Kind::Duplicate:
      return "duplicate";
    case Kind::Random:
      return "random";
    case Kind::Group:
      return "group(" + std::to_string(n_groups) + ")";
    case Kind::FunctionBased:
      return (std::any_of(specs.begin(), specs.end(), [](const TestFunctionSpec& s) { return s.joint; })
                  ? "function_based("
                  : "function_based_marginal(") +
             std::to_string(n_candidates) + ")";
  }
  return "?";
}

SamplingStrategy parse_strategy(const std::string& s) {
  // name[:count]; the count is n_groups for group and n_candidates for the
  // function-based variants.
  const auto colon = s.find(':');
  const std::string name = s.substr(0, colon);
  std::size_t count = 0;
  if (colon != std::string::npos) {
    const std::string arg = s.substr(colon + 1);
    if (arg.empty() || arg.find_first_not_of("0123456789") != std::string::npos || std::stoul(arg) == 0)
      throw ConfigError("bad count in sampling strategy '" + s + "'");
    count = std::stoul(arg);
  }
  const bool counted = name == "group" || name == "function_based" || name == "function_based_marginal";
  if (colon != std::string::npos && !counted) throw ConfigError("sampling strategy '" + name + "' takes no count");
  if (name == "identity") return SamplingStrategy::identity();
  if (name == "duplicate") return SamplingStrategy::duplicate();
  if (name == "random") return SamplingStrategy::random();
  if (name == "group") return SamplingStrategy::group(count ? count : 4);
  if (name == "function_based") return SamplingStrategy::function_based(count ? count : 64, moment_specs(4, true));
  if (name == "function_based_marginal")
    return SamplingStrategy::function_based(count ? count : 64, moment_specs(4, false));
  throw ConfigError("unknown sampling strategy '" + s + "'");
}

std::vector<std::size_t> norm_pool(const GroupMeasure& m, double r2) {
  if (!(r2 >= 0.0 && r2 < 1.0)) throw ParameterError("norm rate r2 must lie in [0, 1)");
  // The epsilon keeps e.g. (1 - 0.9) * 100 from rounding up to 11.
  const auto keep = static_cast<std::size_t>(std::ceil((1.0 - r2) * static_cast<double>(m.width) - 1e-9));
  if (keep == 0) throw ParameterError("norm rate r2 leaves no samples in group " + std::to_string(m.group));
  std::vector<std::size_t> order(m.width);
  std::iota(order.begin(), order.end(), 0);
  if (keep < m.width) {
    const Vector n = m.norms();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return n(static_cast<Eigen::Index>(a)) > n(static_cast<Eigen::Index>(b));
    });
    order.resize(keep);
    std::sort(order.begin(), order.end());
  }
  return order;
}

namespace {

std::vector<std::size_t> draw_uniform(const std::vector<std::size_t>& pool, std::size_t target, bool replace, Rng& rng) {
  std::vector<std::size_t> out;
  out.reserve(target);
  if (replace) {
    for (std::size_t k = 0; k < target; ++k) out.push_back(pool[rng.index(pool.size())]);
  } else {
    std::vector<std::size_t> work = pool;
    for (std::size_t k = 0; k < target; ++k) std::swap(work[k], work[k + rng.index(work.size() - k)]);
    out.assign(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(target));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> draw_grouped(const GroupMeasure& m, const std::vector<std::size_t>& pool, std::size_t target,
                                      const SamplingStrategy& s, bool replace, Rng& rng) {
  if (s.n_groups == 0) throw ParameterError("group sampling needs n_groups >= 1");
  const Vector n = m.norms();
  std::vector<std::size_t> by_norm = pool;
  std::stable_sort(by_norm.begin(), by_norm.end(), [&](std::size_t a, std::size_t b) {
    return n(static_cast<Eigen::Index>(a)) > n(static_cast<Eigen::Index>(b));
  });
  const std::size_t total = by_norm.size();
  const std::size_t groups = std::min(s.n_groups, total);
  std::vector<std::vector<std::size_t>> chunks(groups);
  for (std::size_t g = 0; g < groups; ++g)
    chunks[g].assign(by_norm.begin() + static_cast<std::ptrdiff_t>(g * total / groups),
                     by_norm.begin() + static_cast<std::ptrdiff_t>((g + 1) * total / groups));

  std::vector<std::size_t> out;
  if (replace) {
    for (std::size_t k = 0; k < target; ++k) {
      std::size_t pick = rng.index(total);
      std::size_t g = 0;
      while (pick >= chunks[g].size()) pick -= chunks[g++].size();
      const auto& chunk = chunks[g];
      out.push_back(chunk[rng.index(chunk.size())]);
    }
  } else {
    // Proportional quotas, largest remainder first, then a plain draw per group.
    std::vector<std::size_t> quota(groups);
    std::vector<std::pair<double, std::size_t>> rest;
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < groups; ++g) {
      const double exact = static_cast<double>(target) * static_cast<double>(chunks[g].size()) / static_cast<double>(total);
      quota[g] = static_cast<std::size_t>(std::floor(exact));
      assigned += quota[g];
      rest.push_back({exact - static_cast<double>(quota[g]), g});
    }
    std::stable_sort(rest.begin(), rest.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < target; ++k, ++assigned) ++quota[rest[k % groups].second];
    for (std::size_t g = 0; g < groups; ++g) {
      const auto part = draw_uniform(chunks[g], std::min(quota[g], chunks[g].size()), false, rng);
      out.insert(out.end(), part.begin(), part.end());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

CandidateReport function_based_candidates(const GroupMeasure& m, std::size_t target, const SamplingStrategy& strategy,
                                          double r2, Rng& rng) {
  if (strategy.n_candidates == 0) throw ParameterError("function-based sampling needs n_candidates >= 1");
  if (strategy.specs.empty()) throw ParameterError("function-based sampling needs at least one test function");
  const auto pool = norm_pool(m, r2);
  const bool replace = strategy.force_replacement || target > pool.size();
  CandidateReport report;
  for (std::size_t c = 0; c < strategy.n_candidates; ++c) {
    IndexSet set{m.group, draw_uniform(pool, target, replace, rng)};
    report.losses.push_back(weighted_measure_loss(m, m.select(set.indices), strategy.specs));
    report.candidates.push_back(std::move(set));
  }
  report.winner = static_cast<std::size_t>(
      std::min_element(report.losses.begin(), report.losses.end()) - report.losses.begin());
  return report;
}

IndexSet draw_indices(const GroupMeasure& m, std::size_t target, const SamplingStrategy& strategy, double r2, Rng& rng) {
  if (target < 1) throw ParameterError("draw_indices: target must be >= 1");
  IndexSet out;
  out.group = m.group;
  switch (strategy.kind) {
    case SamplingStrategy::Kind::Identity: {
      if (target != m.width || r2 != 0.0) throw ParameterError("identity sampling requires target = width and r2 = 0");
      out.indices.resize(m.width);
      std::iota(out.indices.begin(), out.indices.end(), 0);
      return out;
    }
    case SamplingStrategy::Kind::Duplicate: {
      const auto pool = norm_pool(m, r2);
      for (std::size_t k = 0; k < target; ++k) out.indices.push_back(pool[k % pool.size()]);
      return out;
    }
    case SamplingStrategy::Kind::Random: {
      const auto pool = norm_pool(m, r2);
      out.indices = draw_uniform(pool, target, strategy.force_replacement || target > pool.size(), rng);
      return out;
    }
    case SamplingStrategy::Kind::Group: {
      const auto pool = norm_pool(m, r2);
      out.indices = draw_grouped(m, pool, target, strategy, strategy.force_replacement || target > pool.size(), rng);
      return out;
    }
    case SamplingStrategy::Kind::FunctionBased: {
      auto report = function_based_candidates(m, target, strategy, r2, rng);
      return std::move(report.candidates[report.winner]);
    }
  }
  return out;
}

std::pair<double, double> coupling_contrast(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw DimensionError("coupling_contrast: sample lengths differ");
  if (u.size() < 2) throw ParameterError("coupling_contrast needs at least 2 samples");
  return {mean(u.cwiseProduct(v)), mean(u) * mean(v)};
}

}  // namespace mfgrow

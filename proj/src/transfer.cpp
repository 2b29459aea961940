#include "mfgrow/transfer.hpp"

#include <numeric>

#include "mfgrow/data_io.hpp"

namespace mfgrow {

std::string to_string(NoiseMode m) { return m == NoiseMode::Literal ? "literal" : "perturb"; }

NoiseMode parse_noise_mode(const std::string& s) {
  if (s == "literal") return NoiseMode::Literal;
  if (s == "perturb") return NoiseMode::Perturb;
  throw ConfigError("unknown noise mode '" + s + "'");
}

double apply_noise(double w, double r1, NoiseMode mode, Rng& rng) {
  if (!(r1 >= 0.0) || !std::isfinite(r1)) throw ParameterError("noise rate r1 must be finite and >= 0");
  if (r1 == 0.0) return mode == NoiseMode::Perturb ? w : 0.0;
  const double u = rng.uniform(-r1, r1);
  return mode == NoiseMode::Perturb ? w * (1.0 + u) : w * u;
}

TransferPlan TransferPlan::resize_hidden(const GammaPartition& partition, std::size_t width, SamplingStrategy strategy) {
  TransferPlan plan;
  plan.default_strategy = std::move(strategy);
  for (std::size_t g = 0; g < partition.size(); ++g)
    if (!partition.data[g]) plan.target_widths[static_cast<int>(g)] = width;
  return plan;
}

TransferPlan TransferPlan::duplicate(const GammaPartition& partition, std::size_t k) {
  if (k < 1) throw ParameterError("duplication factor must be >= 1");
  TransferPlan plan;
  plan.default_strategy = SamplingStrategy::duplicate();
  for (std::size_t g = 0; g < partition.size(); ++g)
    if (!partition.data[g]) plan.target_widths[static_cast<int>(g)] = k * partition.widths[g];
  return plan;
}

const SamplingStrategy& TransferPlan::strategy_for(int group) const {
  auto it = strategies.find(group);
  return it == strategies.end() ? default_strategy : it->second;
}

void TransferPlan::validate(const GammaPartition& partition) const {
  if (!(r1 >= 0.0) || !std::isfinite(r1)) throw ParameterError("transfer plan: r1 must be finite and >= 0");
  if (!(r2 >= 0.0 && r2 < 1.0)) throw ParameterError("transfer plan: r2 must lie in [0, 1)");
  for (const auto& [g, width] : target_widths) {
    if (g < 0 || static_cast<std::size_t>(g) >= partition.size())
      throw ParameterError("transfer plan names group " + std::to_string(g) + " but the partition has " +
                           std::to_string(partition.size()));
    if (width < 1) throw ParameterError("transfer plan: target width of group " + std::to_string(g) + " is 0");
    if (partition.data[static_cast<std::size_t>(g)] && width != partition.widths[static_cast<std::size_t>(g)])
      throw ParameterError("transfer plan resizes data group " + std::to_string(g));
  }
  for (const auto& [g, s] : strategies)
    if (g < 0 || static_cast<std::size_t>(g) >= partition.size())
      throw ParameterError("transfer plan has a strategy for unknown group " + std::to_string(g));
}

std::vector<std::pair<std::string, std::string>> TransferPlan::tags() const {
  std::vector<std::pair<std::string, std::string>> out;
  std::string widths;
  for (const auto& [g, w] : target_widths) widths += (widths.empty() ? "" : ";") + std::to_string(g) + ":" + std::to_string(w);
  out.push_back({"widths", widths});
  out.push_back({"strategy", default_strategy.describe()});
  out.push_back({"r1", format_double(r1)});
  out.push_back({"r2", format_double(r2)});
  out.push_back({"noise", to_string(noise)});
  out.push_back({"seed", std::to_string(seed)});
  return out;
}

TransferResult transfer_with_indices(const Network& net, const GammaPartition& partition, const TransferPlan& plan,
                                     const Rng& rng) {
  plan.validate(partition);
  const ArchGraph& arch = net.arch();
  const GammaPartition own = compute_partition(arch);
  if (own.groups != partition.groups) throw ParameterError("transfer: partition does not belong to this network");

  const auto measures = extract_measures(net, partition);
  const Rng group_root = rng.substream("groups");
  std::vector<IndexSet> sets(partition.size());
  std::vector<bool> resampled(partition.size(), false);
  for (std::size_t g = 0; g < partition.size(); ++g) {
    sets[g].group = static_cast<int>(g);
    auto it = plan.target_widths.find(static_cast<int>(g));
    if (it == plan.target_widths.end() || partition.data[g]) {
      sets[g].indices.resize(partition.widths[g]);
      std::iota(sets[g].indices.begin(), sets[g].indices.end(), 0);
      continue;
    }
    Rng stream = group_root.substream(g);
    sets[g] = draw_indices(measures[g], it->second, plan.strategy_for(static_cast<int>(g)), plan.r2, stream);
    resampled[g] = true;
  }

  auto group_at = [&](const std::string& w, Axis a) {
    const int g = partition.group_of(arch.gammas_at(w, a).front());
    if (g < 0) throw StructuralError("transfer: axis " + w + "." + to_string(a) + " lies in no reported group");
    return static_cast<std::size_t>(g);
  };

  MlpSpec spec = net.spec();
  for (std::size_t l = 0; l + 1 < net.layers().size(); ++l)
    spec.hidden[l] = sets[group_at(net.layers()[l].weight, Axis::Row)].indices.size();
  Network out(spec, net.parametrization(), net.activation());

  const Rng noise_root = rng.substream("noise");
  for (const auto& decl : arch.weights) {
    const Matrix& src = net.weight(decl.name);
    const std::size_t rg = group_at(decl.name, Axis::Row);
    const auto& rows = sets[rg].indices;
    std::vector<std::size_t> cols{0};
    bool noisy = resampled[rg];
    if (decl.kind == WeightKind::Matrix) {
      const std::size_t cg = group_at(decl.name, Axis::Col);
      cols = sets[cg].indices;
      noisy = noisy || resampled[cg];
    }
    Matrix& dst = out.weight(decl.name);
    if (dst.rows() != static_cast<Eigen::Index>(rows.size()) || dst.cols() != static_cast<Eigen::Index>(cols.size()))
      throw StructuralError("transfer: rebuilt shape of '" + decl.name + "' disagrees with the index sets");
    Rng noise = noise_root.substream(decl.name);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      for (std::size_t k = 0; k < cols.size(); ++k) {
        const double w = src(static_cast<Eigen::Index>(rows[j]), static_cast<Eigen::Index>(cols[k]));
        dst(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = noisy ? apply_noise(w, plan.r1, plan.noise, noise) : w;
      }
    }
  }
  return {std::move(out), std::move(sets)};
}

TrainingLog grow_then_train(const std::filesystem::path& small_ckpt, const TransferPlan& plan,
                            const OptimizerConfig& opt_cfg, const TrainConfig& train_cfg, const Dataset& train_set,
                            const Dataset* test_set) {
  const Network small = load_checkpoint(small_ckpt);
  const GammaPartition partition = compute_partition(small.arch());
  Network grown = transfer(small, partition, plan, Rng(plan.seed));
  Optimizer opt(grown, opt_cfg);
  TrainConfig cfg = train_cfg;
  cfg.record_initial = true;
  try {
    TrainingLog log = train(grown, train_set, test_set, opt, cfg);
    log.tags = plan.tags();
    return log;
  } catch (const DivergenceError& e) {
    std::string params;
    for (const auto& [k, v] : plan.tags()) params += " " + k + "=" + v;
    throw DivergenceError(std::string("after transfer with") + params + ": " + e.what(), e.step());
  }
}

}  // namespace mfgrow

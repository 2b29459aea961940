#include "mfgrow/diagnostics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace mfgrow {

std::string Reducer::describe() const {
  return kind == Kind::Mean ? "mean" : "partial_sum(" + std::to_string(k) + ")";
}

std::string Profile::label() const { return weight + "." + to_string(axis) + "." + reducer.describe(); }

Profile profile(const Network& net, const std::string& weight, Axis axis, Reducer reducer) {
  const WeightDecl& decl = net.arch().weight(weight);
  const Matrix& w = net.weight(weight);
  if (decl.kind == WeightKind::Vector && axis != Axis::Row)
    throw ParameterError("profile: vector weight '" + weight + "' has no col axis");
  const Eigen::Index opposing = axis == Axis::Row ? w.cols() : w.rows();
  if (reducer.kind == Reducer::Kind::PartialSum &&
      (reducer.k == 0 || reducer.k > static_cast<std::size_t>(opposing)))
    throw ParameterError("profile: partial_sum(" + std::to_string(reducer.k) + ") exceeds the opposing dimension " +
                         std::to_string(opposing) + " of '" + weight + "'");

  Profile p;
  p.weight = weight;
  p.axis = axis;
  p.reducer = reducer;
  p.group = compute_partition(net.arch()).group_of(net.arch().gammas_at(weight, axis).front());
  const Eigen::Index len = axis == Axis::Row ? w.rows() : w.cols();
  p.values.resize(len);
  const Eigen::Index take = reducer.kind == Reducer::Kind::Mean ? opposing : static_cast<Eigen::Index>(reducer.k);
  for (Eigen::Index i = 0; i < len; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < take; ++j) s += axis == Axis::Row ? w(i, j) : w(j, i);
    p.values(i) = reducer.kind == Reducer::Kind::Mean ? s / static_cast<double>(opposing) : s;
  }
  return p;
}

double abs_pearson(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw DimensionError("correlation of profiles with lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  if (a.size() < 2) throw DimensionError("correlation needs at least 2 values");
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double da = a(i) - ma;
    const double db = b(i) - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return std::min(1.0, std::abs(sab) / std::sqrt(saa * sbb));
}

double CorrelationReport::value(const std::string& a, const std::string& b) const {
  for (const auto& p : pairs)
    if ((p.a == a && p.b == b) || (p.a == b && p.b == a)) return p.r;
  throw ParameterError("correlation report has no pair " + a + " / " + b);
}

std::string CorrelationReport::to_csv() const {
  std::string out = "a,b,abs_r,same_group,parametrization,step,seed\n";
  for (const auto& p : pairs) {
    out += p.a + "," + p.b + "," + format_double(p.r) + "," + (p.same_group ? "1" : "0") + "," + to_string(parametrization) +
           "," + std::to_string(step) + "," + std::to_string(seed) + "\n";
  }
  return out;
}

CorrelationReport correlation_matrix(const std::vector<Profile>& profiles) {
  CorrelationReport report;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    for (std::size_t j = i + 1; j < profiles.size(); ++j) {
      const Profile& a = profiles[i];
      const Profile& b = profiles[j];
      if (a.group >= 0 && b.group >= 0 && a.group != b.group) continue;
      report.pairs.push_back({a.label(), b.label(), abs_pearson(a.values, b.values), true});
    }
  }
  return report;
}

CorrelationReport table1_pairs(const Network& net, std::size_t partial_rows) {
  if (net.depth() != 3) throw ParameterError("correlation table needs a 3-layer network");
  const Profile first = profile(net, "U", Axis::Row, Reducer::mean());
  const Profile m_col = profile(net, "W1", Axis::Col, Reducer::mean());
  const Profile m_row = profile(net, "W1", Axis::Row, Reducer::mean());
  const bool vector_out = net.arch().weight("V").kind == WeightKind::Vector;
  const Profile last = vector_out ? profile(net, "V", Axis::Row, Reducer::mean())
                                  : profile(net, "V", Axis::Col,
                                            Reducer::partial_sum(std::min(partial_rows, net.output_dim())));
  CorrelationReport r;
  r.parametrization = net.parametrization();
  r.pairs.push_back({"first", "M.column", abs_pearson(first.values, m_col.values), true});
  r.pairs.push_back({"last", "M.row", abs_pearson(last.values, m_row.values), true});
  if (first.values.size() == m_row.values.size()) {
    r.pairs.push_back({"first", "M.row", abs_pearson(first.values, m_row.values), false});
    r.pairs.push_back({"last", "M.column", abs_pearson(last.values, m_col.values), false});
  }
  return r;
}

CorrelationExperimentResult correlation_experiment(const CorrelationExperimentConfig& cfg, const Dataset& train_set,
                                                   const Dataset& test_set) {
  MlpSpec spec;
  spec.input_dim = train_set.input_dim();
  spec.output_dim = train_set.output_dim();
  spec.hidden = {cfg.width, cfg.width};
  spec.bias = true;
  Network net(spec, cfg.parametrization, cfg.activation);
  initialize(net, cfg.init.value_or(nonzero_mean_default(cfg.parametrization)), Rng(cfg.seed).substream("init"));

  CorrelationExperimentResult out;
  out.initial = table1_pairs(net);
  out.initial.seed = cfg.seed;
  Optimizer opt(net, cfg.optimizer);
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.loss = train_set.classification() ? LossKind::CrossEntropy : LossKind::Square;
  tc.seed = cfg.seed;
  out.log = train(net, train_set, &test_set, opt, tc);
  out.trained = table1_pairs(net);
  out.trained.seed = cfg.seed;
  out.trained.step = opt.steps();
  return out;
}

Normalize parse_normalize(const std::string& s) {
  if (s == "minmax") return Normalize::MinMax;
  if (s == "zscore") return Normalize::ZScore;
  throw ConfigError("unknown normalization '" + s + "'");
}

namespace {

std::vector<std::size_t> argsort(const Vector& v) {
  std::vector<std::size_t> order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return v(static_cast<Eigen::Index>(a)) < v(static_cast<Eigen::Index>(b));
  });
  return order;
}

}  // namespace

Heatmap heatmap_of(const Matrix& w, Normalize normalize) {
  if (w.size() == 0) throw DimensionError("heatmap of an empty matrix");
  Matrix n(w.rows(), w.cols());
  if (normalize == Normalize::MinMax) {
    const double lo = w.minCoeff();
    const double hi = w.maxCoeff();
    if (hi == lo) {
      n.setConstant(0.5);
    } else {
      n = (w.array() - lo) / (hi - lo);
    }
  } else {
    const double m = mean(w);
    const double s = stddev(w);
    if (s == 0.0) {
      n.setZero();
    } else {
      n = (w.array() - m) / s;
    }
  }
  Heatmap h;
  h.row_order = argsort(n.rowwise().mean());
  h.col_order = argsort(n.colwise().mean().transpose());
  h.values.resize(n.rows(), n.cols());
  for (Eigen::Index i = 0; i < n.rows(); ++i)
    for (Eigen::Index j = 0; j < n.cols(); ++j)
      h.values(i, j) = n(static_cast<Eigen::Index>(h.row_order[static_cast<std::size_t>(i)]),
                         static_cast<Eigen::Index>(h.col_order[static_cast<std::size_t>(j)]));
  return h;
}

Heatmap heatmap_export(const Network& net, const std::string& weight, Normalize normalize) {
  if (net.arch().weight(weight).kind != WeightKind::Matrix)
    throw ParameterError("heatmap: '" + weight + "' is not a matrix");
  return heatmap_of(net.weight(weight), normalize);
}

std::string Heatmap::to_grid() const {
  std::string out;
  char buf[32];
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%s%.6g", j ? " " : "", values(i, j));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

std::string Heatmap::gnuplot_script(const std::string& grid_file, const std::string& title) const {
  return "set title '" + title + "'\nset view map\nset palette rgb 33,13,10\nunset key\n" +
         "set xrange [-0.5:" + std::to_string(values.cols() - 0.5) + "]\nset yrange [-0.5:" +
         std::to_string(values.rows() - 0.5) + "]\nplot '" + grid_file + "' matrix with image\n";
}

std::string HistogramTrajectory::to_csv() const {
  std::string out = "# range=" + format_double(lo) + ":" + format_double(hi) + " bins=" + std::to_string(bins) + "\n";
  out += "snapshot,mean,std";
  for (std::size_t b = 0; b < bins; ++b) out += ",bin_" + std::to_string(b);
  out += "\n";
  for (std::size_t s = 0; s < counts.size(); ++s) {
    out += std::to_string(s) + "," + format_double(means[s]) + "," + format_double(stddevs[s]);
    for (auto c : counts[s]) out += "," + std::to_string(c);
    out += "\n";
  }
  return out;
}

HistogramTrajectory histogram_trajectory(const std::vector<Network>& snapshots, const std::string& weight, Axis axis,
                                         std::size_t bins) {
  if (snapshots.empty()) throw ParameterError("histogram_trajectory: no snapshots");
  if (bins == 0) throw ParameterError("histogram_trajectory: bins must be >= 1");
  const Matrix& ref = snapshots.front().weight(weight);
  std::vector<Vector> profiles;
  for (std::size_t s = 0; s < snapshots.size(); ++s) {
    const Matrix& w = snapshots[s].weight(weight);
    if (w.rows() != ref.rows() || w.cols() != ref.cols())
      throw ParameterError("histogram_trajectory: shape drift in '" + weight + "' at snapshot " + std::to_string(s));
    profiles.push_back(profile(snapshots[s], weight, axis, Reducer::mean()).values);
  }
  HistogramTrajectory h;
  h.bins = bins;
  h.lo = profiles.front().minCoeff();
  h.hi = profiles.front().maxCoeff();
  for (const auto& p : profiles) {
    h.lo = std::min(h.lo, p.minCoeff());
    h.hi = std::max(h.hi, p.maxCoeff());
  }
  if (h.hi == h.lo) {
    h.lo -= 0.5;
    h.hi += 0.5;
  }
  for (const auto& p : profiles) {
    std::vector<std::size_t> counts(bins, 0);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double t = (p(i) - h.lo) / (h.hi - h.lo) * static_cast<double>(bins);
      counts[std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, t)))]++;
    }
    h.counts.push_back(std::move(counts));
    h.means.push_back(mean(p));
    h.stddevs.push_back(stddev(p));
  }
  return h;
}

UpdateProbe update_scaling_probe(Parametrization p, std::size_t n_small, std::size_t n_large, std::uint64_t seed,
                                 const Dataset& batch, const OptimizerConfig& opt_cfg, LossKind loss) {
  auto run = [&](std::size_t n) {
    MlpSpec spec;
    spec.input_dim = batch.input_dim();
    spec.output_dim = batch.output_dim();
    spec.hidden = {n, n};
    Network net(spec, p, Activation::Tanh);
    initialize(net, nonzero_mean_default(p), Rng(seed).substream("init"));
    const Matrix before = net.weight("W1");
    const Matrix z_before = forward_batch(net, batch.inputs).z[1];
    const auto lg = loss_and_gradient(net, batch.inputs, batch.targets, loss);
    Optimizer opt(net, opt_cfg);
    opt.step(net, lg.grads);
    const Matrix z_after = forward_batch(net, batch.inputs).z[1];
    const double dw = (net.weight("W1") - before).cwiseAbs().mean();
    const double dz = (z_after - z_before).cwiseAbs().mean();
    return std::make_pair(dw, dz);
  };
  const auto [dw_small, dz_small] = run(n_small);
  const auto [dw_large, dz_large] = run(n_large);
  UpdateProbe out;
  out.small = dw_small;
  out.large = dw_large;
  out.ratio = dw_small / dw_large;
  out.preact_ratio = dz_small / dz_large;
  return out;
}

}  // namespace mfgrow

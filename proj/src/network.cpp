#include "mfgrow/network.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>

namespace mfgrow {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh:
      return "tanh";
    case Activation::Relu:
      return "relu";
    case Activation::Identity:
      return "identity";
  }
  return "?";
}

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string to_string(LossKind l) { return l == LossKind::Square ? "square" : "cross_entropy"; }

LossKind parse_loss(const std::string& s) {
  if (s == "square") return LossKind::Square;
  if (s == "cross_entropy") return LossKind::CrossEntropy;
  throw ConfigError("unknown loss '" + s + "'");
}

std::vector<LayerInfo> mlp_layers(const MlpSpec& spec) {
  const std::size_t depth = spec.depth();
  std::vector<LayerInfo> layers;
  for (std::size_t l = 1; l <= depth; ++l) {
    LayerInfo info;
    info.weight = mlp_weight_name(l, depth);
    if (spec.bias) info.bias = mlp_bias_name(l, depth);
    info.fan_in = l == 1 ? spec.input_dim : spec.hidden[l - 2];
    info.fan_out = l == depth ? spec.output_dim : spec.hidden[l - 1];
    info.hidden_in = l > 1;
    info.hidden_out = l < depth;
    if (spec.skip && l == 3) info.skip_from = 1;
    layers.push_back(info);
  }
  return layers;
}

double lr_multiplier(const ArchGraph& arch, const MlpSpec& spec, const std::string& weight, double lr_width_exponent) {
  if (!arch.has_weight(weight)) throw StructuralError("lr_multiplier: unknown weight '" + weight + "'");
  if (arch.parametrization != Parametrization::MFP) {
    const double widest = static_cast<double>(*std::max_element(spec.hidden.begin(), spec.hidden.end()));
    return std::pow(widest, lr_width_exponent);
  }
  for (const auto& layer : mlp_layers(spec)) {
    const double out = layer.hidden_out ? static_cast<double>(layer.fan_out) : 1.0;
    if (layer.weight == weight) return out * static_cast<double>(layer.fan_in);
    if (layer.bias == weight) return out;
  }
  throw StructuralError("lr_multiplier: weight '" + weight + "' belongs to no layer");
}

Optimizer::Optimizer(const Network& net, const OptimizerConfig& cfg) : cfg_(cfg) {
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) throw ParameterError("learning rate must be finite and >= 0");
  if (cfg.kind == OptimizerKind::Adam &&
      (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0 || cfg.eps <= 0.0))
    throw ParameterError("Adam needs beta1, beta2 in [0,1) and eps > 0");
  for (const auto& name : net.weight_names()) {
    multipliers_[name] = lr_multiplier(net, name, cfg.lr_width_exponent);
    if (cfg.kind == OptimizerKind::Adam) {
      m_[name] = Matrix::Zero(net.weight(name).rows(), net.weight(name).cols());
      v_[name] = m_[name];
    }
  }
}

void Optimizer::step(Network& net, const GradientSet& grads) {
  ++t_;
  for (const auto& [name, g] : grads) {
    Matrix& w = net.weight(name);
    if (g.rows() != w.rows() || g.cols() != w.cols())
      throw DimensionError("optimizer: gradient of '" + name + "' has shape " + shape_string(g.rows(), g.cols()));
    const double rate = cfg_.lr * multipliers_.at(name);
    if (cfg_.kind == OptimizerKind::Sgd) {
      w -= rate * g;
      continue;
    }
    Matrix& m = m_.at(name);
    Matrix& v = v_.at(name);
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double mhat = m.data()[i] / c1;
      const double vhat = v.data()[i] / c2;
      w.data()[i] -= rate * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string TrainingLog::to_csv() const {
  std::string out;
  for (const auto& [k, v] : tags) out += "# " + k + "=" + v + "\n";
  out += "epoch,step,train_loss,test_loss,test_acc,seed\n";
  for (const auto& r : records) {
    out += std::to_string(r.epoch) + "," + std::to_string(r.step) + "," + format_double(r.train_loss) + "," +
           format_double(r.test_loss) + "," + format_double(r.test_acc) + "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

void TrainingLog::append(const TrainingLog& other) {
  records.insert(records.end(), other.records.begin(), other.records.end());
}

namespace {

Matrix gather(const Matrix& m, const std::vector<std::size_t>& order, std::size_t begin, std::size_t end) {
  Matrix out(static_cast<Eigen::Index>(end - begin), m.cols());
  for (std::size_t i = begin; i < end; ++i) out.row(static_cast<Eigen::Index>(i - begin)) = m.row(order[i]);
  return out;
}

}  // namespace

Evaluation evaluate(const Network& net, const Dataset& data, LossKind loss, std::size_t batch) {
  if (data.size() == 0) throw ParameterError("evaluate: empty dataset");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  double total = 0.0;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < data.size(); begin += batch) {
    const std::size_t end = std::min(begin + batch, data.size());
    const Matrix x = gather(data.inputs, order, begin, end);
    const Matrix y = gather(data.targets, order, begin, end);
    const Matrix f = forward_batch(net, x).output();
    total += loss_and_output_grad<double>(loss, f, y, nullptr) * static_cast<double>(end - begin);
    if (data.classification()) {
      for (std::size_t i = begin; i < end; ++i) {
        Eigen::Index arg = 0;
        f.row(static_cast<Eigen::Index>(i - begin)).maxCoeff(&arg);
        if (arg == data.labels[i]) ++correct;
      }
    }
  }
  Evaluation e;
  e.loss = total / static_cast<double>(data.size());
  e.accuracy = data.classification() ? static_cast<double>(correct) / static_cast<double>(data.size())
                                     : std::numeric_limits<double>::quiet_NaN();
  return e;
}

TrainingLog train(Network& net, const Dataset& data, const Dataset* test, Optimizer& opt, const TrainConfig& cfg,
                  const EpochCallback& on_epoch_end) {
  data.validate();
  if (data.size() == 0) throw ParameterError("train: empty training set");
  if (cfg.batch_size == 0) throw ParameterError("train: batch size must be >= 1");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  TrainingLog log;
  const Rng shuffle_root = Rng(cfg.seed).substream("shuffle");
  std::size_t step = cfg.first_step;

  auto record = [&](std::size_t epoch, double train_loss) {
    TrainingRecord r;
    r.epoch = epoch;
    r.step = step;
    r.train_loss = train_loss;
    r.test_loss = nan;
    r.test_acc = nan;
    r.seed = cfg.seed;
    if (test != nullptr && test->size() > 0) {
      const Evaluation e = evaluate(net, *test, cfg.loss);
      r.test_loss = e.loss;
      r.test_acc = e.accuracy;
    }
    log.records.push_back(r);
  };

  if (cfg.record_initial) record(cfg.first_epoch - 1, evaluate(net, data, cfg.loss).loss);

  std::vector<std::size_t> order(data.size());
  bool exhausted = false;
  for (std::size_t e = 0; e < cfg.epochs && !exhausted; ++e) {
    const std::size_t epoch = cfg.first_epoch + e;
    std::iota(order.begin(), order.end(), 0);
    Rng rng = shuffle_root.substream(epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < data.size(); begin += cfg.batch_size) {
      if (cfg.max_steps != 0 && step - cfg.first_step >= cfg.max_steps) {
        exhausted = true;
        break;
      }
      const std::size_t end = std::min(begin + cfg.batch_size, data.size());
      const Matrix x = gather(data.inputs, order, begin, end);
      const Matrix y = gather(data.targets, order, begin, end);
      auto lg = loss_and_gradient(net, x, y, cfg.loss);
      if (!std::isfinite(lg.loss) || std::abs(lg.loss) > cfg.divergence_threshold)
        throw DivergenceError("training loss " + format_double(lg.loss), step);
      opt.step(net, lg.grads);
      ++step;
      sum += lg.loss;
      ++batches;
    }
    if (cfg.max_steps != 0 && step - cfg.first_step >= cfg.max_steps) exhausted = true;
    if (batches > 0) record(epoch, sum / static_cast<double>(batches));
    if (on_epoch_end) on_epoch_end(epoch, net);
  }
  return log;
}

}  // namespace mfgrow

#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mfgrow/arch_graph.hpp"
#include "mfgrow/dataset.hpp"
#include "mfgrow/tensor.hpp"

namespace mfgrow {

enum class Activation { Tanh, Relu, Identity };
enum class LossKind { Square, CrossEntropy };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);
std::string to_string(LossKind l);
LossKind parse_loss(const std::string& s);

struct LayerInfo {
  std::string weight;
  std::string bias;  // empty without biases
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  bool hidden_in = false;
  bool hidden_out = false;
  int skip_from = -1;  // 0-based layer whose pre-activation is added to this one
};

std::vector<LayerInfo> mlp_layers(const MlpSpec& spec);

// Forward scalar of a layer: MFP averages over every fan-in, SP scales every
// layer by 1/sqrt(fan_in), muP does the same except for 1/fan_in at the output.
template <typename Scalar>
Scalar layer_scale(Parametrization p, const LayerInfo& layer, bool output_layer) {
  const Scalar fan(static_cast<Scalar>(layer.fan_in));
  switch (p) {
    case Parametrization::MFP:
      return Scalar(1) / fan;
    case Parametrization::SP:
      return Scalar(1) / std::sqrt(fan);
    case Parametrization::MuP:
      return output_layer ? Scalar(1) / fan : Scalar(1) / std::sqrt(fan);
  }
  return Scalar(1);
}

template <typename Scalar>
class BasicNetwork {
 public:
  using Mat = MatrixT<Scalar>;

  BasicNetwork(const MlpSpec& spec, Parametrization p, Activation act = Activation::Tanh)
      : spec_(spec), arch_(build_mlp(spec, p)), activation_(act), layers_(mlp_layers(spec)) {
    for (const auto& w : arch_.weights) store_[w.name] = Mat::Zero(w.rows(), w.cols());
  }

  const MlpSpec& spec() const { return spec_; }
  const ArchGraph& arch() const { return arch_; }
  Parametrization parametrization() const { return arch_.parametrization; }
  Activation activation() const { return activation_; }
  const std::vector<LayerInfo>& layers() const { return layers_; }
  std::size_t depth() const { return layers_.size(); }
  std::size_t input_dim() const { return spec_.input_dim; }
  std::size_t output_dim() const { return spec_.output_dim; }

  bool has(const std::string& name) const { return store_.count(name) != 0; }
  Mat& weight(const std::string& name) { return lookup(store_, name); }
  const Mat& weight(const std::string& name) const { return lookup(store_, name); }
  const std::map<std::string, Mat>& store() const { return store_; }

  // Weights in declaration order (U, BU, W1, B1, ..., V, BV).
  std::vector<std::string> weight_names() const {
    std::vector<std::string> names;
    for (const auto& w : arch_.weights) names.push_back(w.name);
    return names;
  }

  Scalar scale(std::size_t layer) const {
    return layer_scale<Scalar>(parametrization(), layers_.at(layer), layer + 1 == layers_.size());
  }

  // Weight of a layer viewed as fan_out x fan_in (vector weights share storage).
  Eigen::Map<const Mat> layer_matrix(std::size_t l) const {
    const LayerInfo& info = layers_.at(l);
    const Mat& w = weight(info.weight);
    return Eigen::Map<const Mat>(w.data(), static_cast<Eigen::Index>(info.fan_out),
                                 static_cast<Eigen::Index>(info.fan_in));
  }

  template <typename Other>
  BasicNetwork<Other> cast() const {
    BasicNetwork<Other> out(spec_, parametrization(), activation_);
    for (const auto& [name, w] : store_) out.weight(name) = w.template cast<Other>();
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, w] : store_) n += static_cast<std::size_t>(w.size());
    return n;
  }

 private:
  template <typename Store>
  static auto& lookup(Store& store, const std::string& name) {
    auto it = store.find(name);
    if (it == store.end()) throw StructuralError("network has no weight '" + name + "'");
    return it->second;
  }

  MlpSpec spec_;
  ArchGraph arch_;
  Activation activation_;
  std::vector<LayerInfo> layers_;
  std::map<std::string, Mat> store_;
};

using Network = BasicNetwork<double>;

template <typename Scalar>
using GradientSetT = std::map<std::string, MatrixT<Scalar>>;
using GradientSet = GradientSetT<double>;

template <typename Scalar>
struct ForwardCache {
  std::vector<MatrixT<Scalar>> z;  // pre-activations per layer, batch x fan_out
  std::vector<MatrixT<Scalar>> h;  // h[0] = input, h[l+1] = activation of layer l
  const MatrixT<Scalar>& output() const { return z.back(); }
};

template <typename Scalar>
Scalar activate(Activation a, Scalar z) {
  switch (a) {
    case Activation::Tanh:
      return std::tanh(z);
    case Activation::Relu:
      return z > Scalar(0) ? z : Scalar(0);
    case Activation::Identity:
      return z;
  }
  return z;
}

// Derivative expressed through the pre-activation z and h = activate(z).
template <typename Scalar>
Scalar activate_derivative(Activation a, Scalar z, Scalar h) {
  switch (a) {
    case Activation::Tanh:
      return Scalar(1) - h * h;
    case Activation::Relu:
      return z > Scalar(0) ? Scalar(1) : Scalar(0);
    case Activation::Identity:
      return Scalar(1);
  }
  throw ConfigError("activation has no derivative");
}

template <typename Scalar>
ForwardCache<Scalar> forward_batch(const BasicNetwork<Scalar>& net, const MatrixT<Scalar>& x) {
  if (static_cast<std::size_t>(x.cols()) != net.input_dim()) {
    throw DimensionError("forward: input has " + std::to_string(x.cols()) + " features, network expects " +
                         std::to_string(net.input_dim()));
  }
  const auto& layers = net.layers();
  ForwardCache<Scalar> cache;
  cache.h.push_back(x);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerInfo& info = layers[l];
    const MatrixT<Scalar> wt = net.layer_matrix(l).transpose();
    MatrixT<Scalar> z = matmul(cache.h.back(), wt);
    z *= net.scale(l);
    if (!info.bias.empty()) {
      const auto& b = net.weight(info.bias);
      for (Eigen::Index r = 0; r < z.rows(); ++r) z.row(r) += b.col(0).transpose();
    }
    if (info.skip_from >= 0) z += cache.z[static_cast<std::size_t>(info.skip_from)];
    cache.z.push_back(z);
    if (l + 1 < layers.size()) cache.h.push_back(z.unaryExpr([&](Scalar v) { return activate(net.activation(), v); }));
  }
  return cache;
}

template <typename Scalar>
VectorT<Scalar> forward(const BasicNetwork<Scalar>& net, const VectorT<Scalar>& x) {
  const MatrixT<Scalar> row = x.transpose();
  return forward_batch(net, row).output().row(0).transpose();
}

// Loss averaged over the batch and its derivative w.r.t. the network output.
// Square: 0.5 * |f - y|^2. Cross-entropy: -sum_k y_k log softmax(f)_k.
template <typename Scalar>
Scalar loss_and_output_grad(LossKind kind, const MatrixT<Scalar>& f, const MatrixT<Scalar>& y, MatrixT<Scalar>* d_out) {
  if (f.rows() != y.rows() || f.cols() != y.cols())
    throw DimensionError("loss: output " + shape_string(f.rows(), f.cols()) + " vs target " +
                         shape_string(y.rows(), y.cols()));
  const Scalar batch(static_cast<Scalar>(f.rows()));
  Scalar total(0);
  if (d_out) d_out->resize(f.rows(), f.cols());
  for (Eigen::Index b = 0; b < f.rows(); ++b) {
    if (kind == LossKind::Square) {
      for (Eigen::Index k = 0; k < f.cols(); ++k) {
        const Scalar e = f(b, k) - y(b, k);
        total += Scalar(0.5) * e * e;
        if (d_out) (*d_out)(b, k) = e / batch;
      }
    } else {
      const Scalar m = f.row(b).maxCoeff();
      Scalar sum(0);
      for (Eigen::Index k = 0; k < f.cols(); ++k) sum += std::exp(f(b, k) - m);
      const Scalar lse = m + std::log(sum);
      Scalar mass(0);
      for (Eigen::Index k = 0; k < f.cols(); ++k) {
        total -= y(b, k) * (f(b, k) - lse);
        mass += y(b, k);
      }
      if (d_out) {
        for (Eigen::Index k = 0; k < f.cols(); ++k) (*d_out)(b, k) = (std::exp(f(b, k) - lse) * mass - y(b, k)) / batch;
      }
    }
  }
  return total / batch;
}

// Reverse pass for a batch given dLoss/dOutput. Gradients have the stored shapes.
template <typename Scalar>
GradientSetT<Scalar> backward_batch(const BasicNetwork<Scalar>& net, const ForwardCache<Scalar>& cache,
                                    const MatrixT<Scalar>& d_out) {
  const auto& layers = net.layers();
  GradientSetT<Scalar> grads;
  std::vector<MatrixT<Scalar>> skip_grad(layers.size());
  MatrixT<Scalar> dz = d_out;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const LayerInfo& info = layers[l];
    if (skip_grad[l].size() != 0) dz += skip_grad[l];
    const Scalar s = net.scale(l);
    const MatrixT<Scalar> dzt = dz.transpose();
    MatrixT<Scalar> dw = matmul(dzt, cache.h[l]);
    dw *= s;
    const auto& stored = net.weight(info.weight);
    grads[info.weight] = Eigen::Map<const MatrixT<Scalar>>(dw.data(), stored.rows(), stored.cols());
    if (!info.bias.empty()) {
      MatrixT<Scalar> db = MatrixT<Scalar>::Zero(dz.cols(), 1);
      for (Eigen::Index b = 0; b < dz.rows(); ++b) db.col(0) += dz.row(b).transpose();
      grads[info.bias] = db;
    }
    if (info.skip_from >= 0) {
      auto& acc = skip_grad[static_cast<std::size_t>(info.skip_from)];
      if (acc.size() == 0) {
        acc = dz;
      } else {
        acc += dz;
      }
    }
    if (l == 0) break;
    MatrixT<Scalar> dh = matmul(dz, net.layer_matrix(l));
    dh *= s;
    const auto& z_prev = cache.z[l - 1];
    const auto& h_prev = cache.h[l];
    for (Eigen::Index r = 0; r < dh.rows(); ++r)
      for (Eigen::Index c = 0; c < dh.cols(); ++c)
        dh(r, c) *= activate_derivative(net.activation(), z_prev(r, c), h_prev(r, c));
    dz = std::move(dh);
  }
  return grads;
}

template <typename Scalar>
struct LossGradient {
  Scalar loss;
  GradientSetT<Scalar> grads;
};

template <typename Scalar>
LossGradient<Scalar> loss_and_gradient(const BasicNetwork<Scalar>& net, const MatrixT<Scalar>& x,
                                       const MatrixT<Scalar>& y, LossKind kind) {
  const auto cache = forward_batch(net, x);
  MatrixT<Scalar> d_out;
  const Scalar loss = loss_and_output_grad(kind, cache.output(), y, &d_out);
  return {loss, backward_batch(net, cache, d_out)};
}

template <typename Scalar>
GradientSetT<Scalar> backward(const BasicNetwork<Scalar>& net, const VectorT<Scalar>& x, const VectorT<Scalar>& y,
                              LossKind kind) {
  if (static_cast<std::size_t>(y.size()) != net.output_dim())
    throw DimensionError("backward: target has " + std::to_string(y.size()) + " entries, network outputs " +
                         std::to_string(net.output_dim()));
  const MatrixT<Scalar> xr = x.transpose();
  const MatrixT<Scalar> yr = y.transpose();
  return loss_and_gradient(net, xr, yr, kind).grads;
}

template <typename Scalar>
Scalar loss_value(const BasicNetwork<Scalar>& net, const MatrixT<Scalar>& x, const MatrixT<Scalar>& y, LossKind kind) {
  return loss_and_output_grad<Scalar>(kind, forward_batch(net, x).output(), y, nullptr);
}

// Per-weight learning-rate multiplier. MFP: fan-in width times the fan-out
// width when the fan-out is hidden, i.e. N_out*N_in for hidden matrices, N for
// u, v and hidden biases, 1 for an output bias. SP/muP: (largest hidden
// width)^lr_width_exponent, 1 by default.
double lr_multiplier(const ArchGraph& arch, const MlpSpec& spec, const std::string& weight,
                     double lr_width_exponent = 0.0);

template <typename Scalar>
double lr_multiplier(const BasicNetwork<Scalar>& net, const std::string& weight, double lr_width_exponent = 0.0) {
  return lr_multiplier(net.arch(), net.spec(), weight, lr_width_exponent);
}

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr_width_exponent = 0.0;
};

class Optimizer {
 public:
  Optimizer(const Network& net, const OptimizerConfig& cfg);

  void step(Network& net, const GradientSet& grads);

  double multiplier(const std::string& weight) const { return multipliers_.at(weight); }
  std::size_t steps() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  std::map<std::string, double> multipliers_;
  std::map<std::string, Matrix> m_, v_;
  std::size_t t_ = 0;
};

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 64;
  LossKind loss = LossKind::Square;
  std::uint64_t seed = 0;
  std::size_t max_steps = 0;  // 0: no limit
  std::size_t first_epoch = 1;
  std::size_t first_step = 0;
  bool record_initial = false;  // evaluate before the first update as epoch first_epoch-1
  double divergence_threshold = 1e6;
};

struct TrainingRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
  std::uint64_t seed = 0;
};

struct TrainingLog {
  std::vector<TrainingRecord> records;
  std::vector<std::pair<std::string, std::string>> tags;

  std::string to_csv() const;
  void append(const TrainingLog& other);
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;  // NaN for regression sets
};

Evaluation evaluate(const Network& net, const Dataset& data, LossKind loss, std::size_t batch = 500);

using EpochCallback = std::function<void(std::size_t epoch, const Network& net)>;

// Minibatch training. `test` may be null; test columns are then NaN.
TrainingLog train(Network& net, const Dataset& data, const Dataset* test, Optimizer& opt, const TrainConfig& cfg,
                  const EpochCallback& on_epoch_end = {});

std::string format_double(double v);

}  // namespace mfgrow

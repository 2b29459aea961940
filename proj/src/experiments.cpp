#include "mfgrow/experiments.hpp"

#include <algorithm>
#include <limits>

#include "mfgrow/data_io.hpp"

namespace mfgrow {

Network make_network(const MlpSpec& spec, Parametrization p, Activation act, const InitSpec& init, std::uint64_t seed) {
  Network net(spec, p, act);
  initialize(net, init, Rng(seed).substream("init"));
  return net;
}

Matrix random_inputs(std::size_t n, std::size_t dim, double lim, const Rng& rng) {
  Rng r = rng;
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = r.uniform(-lim, lim);
  return x;
}

double max_relative_deviation(const Network& a, const Network& b, const Matrix& inputs) {
  const Matrix fa = forward_batch(a, inputs).output();
  const Matrix fb = forward_batch(b, inputs).output();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < fa.size(); ++i)
    worst = std::max(worst, std::abs(fb.data()[i] - fa.data()[i]) / (1.0 + std::abs(fa.data()[i])));
  return worst;
}

double duplication_deviation(const Network& net, std::size_t k, std::size_t n_inputs, const Rng& rng) {
  const GammaPartition partition = compute_partition(net.arch());
  const Network grown = transfer(net, partition, TransferPlan::duplicate(partition, k), rng.substream("transfer"));
  return max_relative_deviation(net, grown, random_inputs(n_inputs, net.input_dim(), 2.0, rng.substream("inputs")));
}

double test_mse(const Network& net, const Dataset& data) { return 2.0 * evaluate(net, data, LossKind::Square).loss; }

RegenResult twolayer_regen(const RegenConfig& cfg) {
  const Rng root(cfg.seed);
  const Dataset train_set = synth_regression(SynthKind::Sine, cfg.n_train, cfg.noise_std, root.substream("train"));
  const Dataset test_set = synth_regression(SynthKind::Sine, cfg.n_test, 0.0, root.substream("test"));
  MlpSpec spec;
  spec.hidden = {cfg.width};
  InitSpec init;
  init.weight_default = cfg.init;
  Network net = make_network(spec, Parametrization::MFP, Activation::Tanh, init, cfg.seed);
  OptimizerConfig oc;
  oc.lr = cfg.lr;
  Optimizer opt(net, oc);
  TrainConfig tc;
  tc.epochs = std::numeric_limits<std::size_t>::max() / 2;
  tc.max_steps = cfg.steps;
  tc.batch_size = cfg.batch_size;
  tc.seed = cfg.seed;
  RegenResult out;
  out.log = train(net, train_set, &test_set, opt, tc);

  const GammaPartition partition = compute_partition(net.arch());
  TransferPlan plan = TransferPlan::resize_hidden(
      partition, cfg.regen_width, SamplingStrategy::function_based(cfg.candidates, moment_specs(cfg.p, true)));
  const Network regen = transfer(net, partition, plan, root.substream("regen"));
  TransferPlan random_plan = TransferPlan::resize_hidden(partition, cfg.regen_width, SamplingStrategy::random());
  const Network random_regen = transfer(net, partition, random_plan, root.substream("regen"));

  out.source_mse = test_mse(net, test_set);
  out.regen_mse = test_mse(regen, test_set);
  out.random_regen_mse = test_mse(random_regen, test_set);
  out.ratio = out.regen_mse / out.source_mse;
  return out;
}

OptimizerConfig default_classifier_optimizer(Parametrization p) {
  OptimizerConfig o;
  o.kind = OptimizerKind::Sgd;
  switch (p) {
    case Parametrization::MFP:
      o.lr = 0.1;
      break;
    case Parametrization::SP:
      o.lr = 0.1;
      break;
    case Parametrization::MuP:
      o.lr = 0.1;
      break;
  }
  return o;
}

Network make_classifier(const ClassifierConfig& cfg, std::size_t input_dim, std::size_t classes) {
  MlpSpec spec;
  spec.input_dim = input_dim;
  spec.output_dim = classes;
  spec.hidden = {cfg.width, cfg.width};
  spec.bias = true;
  return make_network(spec, cfg.parametrization, cfg.activation, nonzero_mean_default(cfg.parametrization), cfg.seed);
}

TrainingLog train_classifier(const ClassifierConfig& cfg, const Dataset& train_set, const Dataset& test_set,
                             Network* final_net, const EpochCallback& on_epoch_end) {
  Network net = make_classifier(cfg, train_set.input_dim(), train_set.output_dim());
  Optimizer opt(net, cfg.optimizer);
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.loss = LossKind::CrossEntropy;
  tc.seed = cfg.seed;
  TrainingLog log = train(net, train_set, &test_set, opt, tc, on_epoch_end);
  if (final_net) *final_net = std::move(net);
  return log;
}

bool Fig2Result::pass() const {
  return !runs.empty() && std::all_of(runs.begin(), runs.end(), [](const Fig2Run& r) { return r.within; }) &&
         (duplication_deviation < 0.0 || duplication_deviation <= 1e-9);
}

std::string Fig2Result::summary_csv() const {
  const double bench = benchmark.records.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                 : benchmark.records.back().test_acc;
  std::string out = "r1,r2,final_acc,benchmark_acc,within\n";
  for (const auto& r : runs) {
    const double acc = r.log.records.empty() ? std::numeric_limits<double>::quiet_NaN() : r.log.records.back().test_acc;
    out += format_double(r.r1) + "," + format_double(r.r2) + "," + format_double(acc) + "," + format_double(bench) + "," +
           (r.within ? "1" : "0") + "\n";
  }
  return out;
}

Fig2Result run_fig2(const Fig2Config& cfg, const Dataset& train_set, const Dataset& test_set,
                    const std::filesystem::path& workdir) {
  const std::size_t source_width = cfg.grow ? cfg.small : cfg.large;
  const std::size_t target_width = cfg.grow ? cfg.large : cfg.small;
  ClassifierConfig cc;
  cc.parametrization = Parametrization::MFP;
  cc.optimizer = cfg.optimizer;
  cc.batch_size = cfg.batch_size;
  cc.seed = cfg.seed;

  Fig2Result result;
  cc.width = source_width;
  cc.epochs = cfg.transfer_epoch;
  Network source = make_classifier(cc, train_set.input_dim(), train_set.output_dim());
  result.source = train_classifier(cc, train_set, test_set, &source);
  const auto ckpt = workdir / ("fig2_source_" + std::to_string(source_width) + "_seed" + std::to_string(cfg.seed) + ".ckpt");
  save_checkpoint(source, ckpt, cfg.seed);

  cc.width = target_width;
  cc.epochs = cfg.transfer_epoch + cfg.post_epochs;
  result.benchmark = train_classifier(cc, train_set, test_set);

  if (cfg.grow && target_width % source_width == 0)
    result.duplication_deviation =
        duplication_deviation(source, target_width / source_width, 1000, Rng(cfg.seed).substream("preserve"));

  const GammaPartition partition = compute_partition(source.arch());
  for (const auto& [r1, r2] : cfg.settings) {
    TransferPlan plan = TransferPlan::resize_hidden(partition, target_width, cfg.strategy);
    plan.r1 = r1;
    plan.r2 = r2;
    plan.noise = cfg.noise;
    plan.seed = cfg.seed;
    TrainConfig tc;
    tc.epochs = cfg.post_epochs;
    tc.batch_size = cfg.batch_size;
    tc.loss = LossKind::CrossEntropy;
    tc.seed = cfg.seed;
    tc.first_epoch = cfg.transfer_epoch + 1;
    Fig2Run run;
    run.r1 = r1;
    run.r2 = r2;
    try {
      run.log = grow_then_train(ckpt, plan, cfg.optimizer, tc, train_set, &test_set);
    } catch (const DivergenceError&) {
      result.runs.push_back(run);
      continue;
    }
    for (const auto& rec : run.log.records) {
      if (rec.epoch <= cfg.transfer_epoch) continue;
      for (const auto& b : result.benchmark.records)
        if (b.epoch == rec.epoch && rec.test_acc >= b.test_acc - cfg.tolerance) run.within = true;
    }
    result.runs.push_back(std::move(run));
  }
  return result;
}

}  // namespace mfgrow

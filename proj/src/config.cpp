#include "mfgrow/config.hpp"

#include <algorithm>

namespace mfgrow {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }))
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  return obj.contains(key) ? obj.at(key).get<T>() : fallback;
}

DatasetConfig parse_dataset(const json& j) {
  check_keys(j, {"kind", "dir", "function", "n_train", "n_test", "noise_std", "dim", "classes", "separation"}, "dataset");
  DatasetConfig d;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "cifar10") {
    d.kind = DatasetConfig::Kind::Cifar10;
  } else if (kind == "synth_regression") {
    d.kind = DatasetConfig::Kind::SynthRegression;
  } else if (kind == "synth_classification") {
    d.kind = DatasetConfig::Kind::SynthClassification;
  } else {
    throw ConfigError("unknown dataset kind '" + kind + "'");
  }
  d.dir = get_or<std::string>(j, "dir", "");
  if (j.contains("function")) d.function = parse_synth_kind(j.at("function").get<std::string>());
  d.n_train = get_or<std::size_t>(j, "n_train", d.n_train);
  d.n_test = get_or<std::size_t>(j, "n_test", d.n_test);
  d.noise_std = get_or<double>(j, "noise_std", d.noise_std);
  d.dim = get_or<std::size_t>(j, "dim", d.dim);
  d.classes = get_or<std::size_t>(j, "classes", d.classes);
  d.separation = get_or<double>(j, "separation", d.separation);
  if (d.n_train < 1) throw ConfigError("dataset.n_train must be >= 1");
  return d;
}

ArchConfig parse_arch(const json& j) {
  check_keys(j, {"builder", "file", "depth", "width", "hidden", "input_dim", "output_dim", "bias", "skip", "activation"},
             "arch");
  ArchConfig a;
  a.builder = get_or<std::string>(j, "builder", "mlp");
  if (a.builder == "file") {
    a.file = j.at("file").get<std::string>();
  } else if (a.builder != "mlp") {
    throw ConfigError("unknown arch builder '" + a.builder + "'");
  }
  if (j.contains("hidden")) {
    a.spec.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  } else if (a.builder == "mlp") {
    const auto depth = j.at("depth").get<std::size_t>();
    if (depth < 2) throw ConfigError("arch.depth must be >= 2");
    a.spec.hidden.assign(depth - 1, j.at("width").get<std::size_t>());
  }
  a.spec.input_dim = get_or<std::size_t>(j, "input_dim", 0);
  a.spec.output_dim = get_or<std::size_t>(j, "output_dim", 0);
  a.spec.bias = get_or<bool>(j, "bias", false);
  a.spec.skip = get_or<bool>(j, "skip", false);
  if (j.contains("activation")) a.activation = parse_activation(j.at("activation").get<std::string>());
  return a;
}

InitSpec parse_init(const json& j) {
  check_keys(j, {"mode", "phi", "distributions", "weight", "bias"}, "init");
  InitSpec s;
  if (j.contains("mode")) s.mode = parse_init_mode(j.at("mode").get<std::string>());
  if (j.contains("phi")) {
    if (j.at("phi").is_array()) {
      for (const auto& p : j.at("phi")) s.phis.push_back(parse_phi(p.get<std::string>()));
    } else {
      s.phi = parse_phi(j.at("phi").get<std::string>());
    }
  }
  if (j.contains("distributions"))
    for (const auto& d : j.at("distributions")) s.distributions.push_back(parse_distribution(d));
  if (j.contains("weight")) s.weight_default = parse_distribution(j.at("weight"));
  if (j.contains("bias")) s.bias_default = parse_distribution(j.at("bias"));
  return s;
}

OptimizerConfig parse_optimizer(const json& j, std::size_t* batch) {
  check_keys(j, {"kind", "lr", "batch", "beta1", "beta2", "eps", "lr_width_exponent"}, "optimizer");
  OptimizerConfig o;
  const std::string kind = get_or<std::string>(j, "kind", "sgd");
  if (kind == "sgd") {
    o.kind = OptimizerKind::Sgd;
  } else if (kind == "adam") {
    o.kind = OptimizerKind::Adam;
  } else {
    throw ConfigError("unknown optimizer '" + kind + "'");
  }
  o.lr = get_or<double>(j, "lr", o.lr);
  o.beta1 = get_or<double>(j, "beta1", o.beta1);
  o.beta2 = get_or<double>(j, "beta2", o.beta2);
  o.eps = get_or<double>(j, "eps", o.eps);
  o.lr_width_exponent = get_or<double>(j, "lr_width_exponent", o.lr_width_exponent);
  *batch = get_or<std::size_t>(j, "batch", *batch);
  if (!(o.lr >= 0.0)) throw ConfigError("optimizer.lr must be >= 0");
  if (*batch < 1) throw ConfigError("optimizer.batch must be >= 1");
  return o;
}

TransferConfig parse_transfer(const json& j) {
  check_keys(j, {"width", "strategy", "r1", "r2", "noise", "at_epoch"}, "transfer");
  TransferConfig t;
  t.width = j.at("width").get<std::size_t>();
  if (j.contains("strategy")) t.strategy = parse_strategy(j.at("strategy").get<std::string>());
  t.r1 = get_or<double>(j, "r1", 0.0);
  t.r2 = get_or<double>(j, "r2", 0.0);
  if (j.contains("noise")) t.noise = parse_noise_mode(j.at("noise").get<std::string>());
  t.at_epoch = get_or<std::size_t>(j, "at_epoch", 0);
  if (t.width < 1) throw ConfigError("transfer.width must be >= 1");
  if (!(t.r1 >= 0.0)) throw ConfigError("transfer.r1 must be >= 0");
  if (!(t.r2 >= 0.0 && t.r2 < 1.0)) throw ConfigError("transfer.r2 must lie in [0, 1)");
  return t;
}

}  // namespace

DistributionSpec parse_distribution(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  DistributionSpec d;
  if (kind == "uniform") {
    check_keys(j, {"kind", "low", "high"}, "uniform distribution");
    d = DistributionSpec::uniform(j.at("low").get<double>(), j.at("high").get<double>());
  } else if (kind == "gaussian") {
    check_keys(j, {"kind", "mean", "std"}, "gaussian distribution");
    d = DistributionSpec::gaussian(j.at("mean").get<double>(), j.at("std").get<double>());
  } else if (kind == "constant") {
    check_keys(j, {"kind", "value"}, "constant distribution");
    d = DistributionSpec::constant(j.at("value").get<double>());
  } else {
    throw ConfigError("unknown distribution kind '" + kind + "'");
  }
  try {
    d.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return d;
}

nlohmann::json to_json(const DistributionSpec& d) {
  switch (d.kind) {
    case DistributionSpec::Kind::Uniform:
      return {{"kind", "uniform"}, {"low", d.a}, {"high", d.b}};
    case DistributionSpec::Kind::Gaussian:
      return {{"kind", "gaussian"}, {"mean", d.a}, {"std", d.b}};
    case DistributionSpec::Kind::Constant:
      return {{"kind", "constant"}, {"value", d.a}};
  }
  return {};
}

ExperimentConfig parse_experiment_config(const json& j) {
  try {
    check_keys(j, {"parametrization", "arch", "init", "optimizer", "epochs", "max_steps", "seeds", "dataset", "loss",
                   "transfer", "output_dir"},
               "experiment config");
    ExperimentConfig c;
    if (j.contains("parametrization")) c.parametrization = parse_parametrization(j.at("parametrization").get<std::string>());
    c.arch = parse_arch(j.at("arch"));
    if (j.contains("init")) c.init = parse_init(j.at("init"));
    if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer"), &c.batch_size);
    c.epochs = get_or<std::size_t>(j, "epochs", c.epochs);
    c.max_steps = get_or<std::size_t>(j, "max_steps", c.max_steps);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
    c.dataset = parse_dataset(j.at("dataset"));
    if (j.contains("loss")) c.loss = parse_loss(j.at("loss").get<std::string>());
    if (j.contains("transfer")) c.transfer = parse_transfer(j.at("transfer"));
    c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir);
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const DataUnavailableError& e) {
    throw ConfigError(e.what());
  }
  return parse_experiment_config(j);
}

std::pair<Dataset, Dataset> load_datasets(const DatasetConfig& cfg, std::uint64_t seed) {
  const Rng root = Rng(seed).substream("dataset");
  switch (cfg.kind) {
    case DatasetConfig::Kind::Cifar10: {
      const auto dir = find_cifar10(cfg.dir);
      if (dir.empty()) throw DataUnavailableError(kCifarHelp);
      return load_cifar10(dir);
    }
    case DatasetConfig::Kind::SynthRegression:
      return {synth_regression(cfg.function, cfg.n_train, cfg.noise_std, root.substream("train")),
              synth_regression(cfg.function, std::max<std::size_t>(cfg.n_test, 1), 0.0, root.substream("test"))};
    case DatasetConfig::Kind::SynthClassification: {
      // Train and test share cluster centres; only the points differ.
      Dataset all = synth_classification(cfg.n_train + cfg.n_test, cfg.dim, cfg.classes, cfg.separation, root);
      std::vector<std::size_t> train_rows(cfg.n_train), test_rows(cfg.n_test);
      for (std::size_t i = 0; i < cfg.n_train; ++i) train_rows[i] = i;
      for (std::size_t i = 0; i < cfg.n_test; ++i) test_rows[i] = cfg.n_train + i;
      return {all.subset(train_rows), all.subset(test_rows)};
    }
  }
  throw ConfigError("unknown dataset kind");
}

MlpSpec resolve_spec(const ExperimentConfig& cfg, const Dataset& train_set) {
  MlpSpec spec = cfg.arch.spec;
  if (cfg.arch.builder == "file") {
    const Network net = network_from_json(json::parse(read_text(cfg.arch.file)));
    spec = net.spec();
  }
  if (spec.input_dim == 0) spec.input_dim = train_set.input_dim();
  if (spec.output_dim == 0) spec.output_dim = train_set.output_dim();
  if (spec.input_dim != train_set.input_dim() || spec.output_dim != train_set.output_dim())
    throw ConfigError("architecture data dimensions (" + std::to_string(spec.input_dim) + ", " +
                      std::to_string(spec.output_dim) + ") do not match the dataset (" +
                      std::to_string(train_set.input_dim()) + ", " + std::to_string(train_set.output_dim()) + ")");
  return spec;
}

}  // namespace mfgrow

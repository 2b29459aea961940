// mfgrow: command line harness for partitions, training, transfer,
// diagnostics, sampling and the scripted experiment reproductions.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mfgrow/config.hpp"
#include "mfgrow/data_io.hpp"
#include "mfgrow/reproduce.hpp"

namespace fs = std::filesystem;
using namespace mfgrow;

namespace {

constexpr int kOk = 0;
constexpr int kAcceptanceFailure = 1;
constexpr int kInputError = 2;
constexpr int kMissingData = 3;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

std::uint64_t seed_or(const Globals& g, std::uint64_t fallback) { return g.seed.value_or(fallback); }

std::string seed_suffix(std::uint64_t seed) { return "_seed" + std::to_string(seed); }

void note(const fs::path& path) { std::printf("wrote %s\n", path.string().c_str()); }

void write_out(const fs::path& path, const std::string& text) {
  write_text(path, text);
  note(path);
}

// ---- gamma ----

struct GammaArgs {
  std::string file;
  std::string builder;
  std::size_t mlp = 0;
  std::size_t width = 4;
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  bool bias = false;
  bool skip = false;
  std::string emit;
};

ArchGraph gamma_arch(const GammaArgs& a) {
  if (!a.file.empty()) return arch_from_json(nlohmann::json::parse(read_text(a.file)));
  if (a.mlp > 0) {
    if (a.mlp < 2) throw ParameterError("--mlp needs depth >= 2");
    return build_mlp(MlpSpec::uniform(a.mlp, a.width, a.input_dim, a.output_dim, a.bias, a.skip));
  }
  if (a.builder == "example3") return build_example3(a.width);
  if (a.builder == "skip") return build_skip_block(a.width);
  if (a.builder == "attention") return build_attention_block(a.width, a.input_dim);
  throw ParameterError("gamma needs an arch file, --mlp <depth> or --builder example3|skip|attention");
}

int cmd_gamma(const GammaArgs& a) {
  const ArchGraph g = gamma_arch(a);
  const GammaPartition partition = compute_partition(g);
  std::printf("%s", partition.describe().c_str());
  std::printf("%zu groups\n", partition.size());
  if (!a.emit.empty()) write_out(a.emit, to_json(g).dump(2) + "\n");
  return kOk;
}

// ---- init ----

struct InitArgs {
  std::size_t mlp = 3;
  std::size_t width = 64;
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  bool bias = false;
  std::string parametrization = "mfp";
  std::string mode = "iid";
  std::string phi = "product";
  std::string activation = "tanh";
};

int cmd_init(const Globals& g, const InitArgs& a) {
  MlpSpec spec;
  Parametrization p;
  InitSpec init;
  Activation act;
  std::uint64_t seed = seed_or(g, 0);
  if (!g.config.empty()) {
    const ExperimentConfig cfg = load_experiment_config(g.config);
    seed = seed_or(g, cfg.seeds.front());
    const auto [train_set, test_set] = load_datasets(cfg.dataset, seed);
    spec = resolve_spec(cfg, train_set);
    p = cfg.parametrization;
    init = cfg.init_spec();
    act = cfg.arch.activation;
  } else {
    spec = MlpSpec::uniform(a.mlp, a.width, a.input_dim, a.output_dim, a.bias);
    p = parse_parametrization(a.parametrization);
    init = nonzero_mean_default(p);
    init.mode = parse_init_mode(a.mode);
    init.phi = parse_phi(a.phi);
    act = parse_activation(a.activation);
  }
  Network net(spec, p, act);
  InitRecord record;
  initialize(net, init, Rng(seed).substream("init"), &record);
  const fs::path out = fs::path(g.out) / ("init" + seed_suffix(seed) + ".ckpt");
  save_checkpoint(net, out, seed);
  note(out);
  if (!record.empty()) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, f] : record) {
      j[name] = {{"phi", to_string(f.phi)},
                 {"R", std::vector<double>(f.r.data(), f.r.data() + f.r.size())},
                 {"C", std::vector<double>(f.c.data(), f.c.data() + f.c.size())}};
    }
    write_out(fs::path(g.out) / ("init" + seed_suffix(seed) + "_rc.json"), j.dump(2) + "\n");
  }
  return kOk;
}

// ---- train ----

int cmd_train(const Globals& g) {
  if (g.config.empty()) throw ConfigError("train needs --config <file>");
  const ExperimentConfig cfg = load_experiment_config(g.config);
  const fs::path out = g.out != "out" ? fs::path(g.out) : fs::path(cfg.output_dir);
  std::vector<std::uint64_t> seeds = cfg.seeds;
  if (g.seed) seeds = {*g.seed};
  for (std::uint64_t seed : seeds) {
    const auto [train_set, test_set] = load_datasets(cfg.dataset, seed);
    Network net(resolve_spec(cfg, train_set), cfg.parametrization, cfg.arch.activation);
    initialize(net, cfg.init_spec(), Rng(seed).substream("init"));
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.loss = cfg.loss_for(train_set);
    tc.seed = seed;
    tc.max_steps = cfg.max_steps;

    TrainingLog log;
    if (cfg.transfer) {
      const TransferConfig& t = *cfg.transfer;
      const std::size_t before = std::min(t.at_epoch, cfg.epochs);
      if (before > 0) {
        Optimizer opt(net, cfg.optimizer);
        TrainConfig first = tc;
        first.epochs = before;
        log = train(net, train_set, &test_set, opt, first);
      }
      const GammaPartition partition = compute_partition(net.arch());
      TransferPlan plan = TransferPlan::resize_hidden(partition, t.width, t.strategy);
      plan.r1 = t.r1;
      plan.r2 = t.r2;
      plan.noise = t.noise;
      plan.seed = seed;
      net = transfer(net, partition, plan, Rng(seed).substream("transfer"));
      Optimizer opt(net, cfg.optimizer);
      TrainConfig rest = tc;
      rest.epochs = cfg.epochs - before;
      rest.first_epoch = before + 1;
      rest.first_step = log.records.empty() ? 0 : log.records.back().step;
      rest.record_initial = true;
      TrainingLog after = train(net, train_set, &test_set, opt, rest);
      for (const auto& tag : plan.tags()) after.tags.push_back(tag);
      log.append(after);
    } else {
      Optimizer opt(net, cfg.optimizer);
      log = train(net, train_set, &test_set, opt, tc);
    }
    log.tags.insert(log.tags.begin(), {"parametrization", to_string(cfg.parametrization)});
    write_out(out / ("train" + seed_suffix(seed) + ".csv"), log.to_csv());
    const fs::path ckpt = out / ("final" + seed_suffix(seed) + ".ckpt");
    save_checkpoint(net, ckpt, seed);
    note(ckpt);
    if (!log.records.empty()) {
      const auto& last = log.records.back();
      std::printf("seed %llu: train_loss %.6g test_loss %.6g test_acc %.6g\n", static_cast<unsigned long long>(seed),
                  last.train_loss, last.test_loss, last.test_acc);
    }
  }
  return kOk;
}

// ---- transfer ----

struct TransferArgs {
  std::string from;
  std::size_t width = 0;
  std::vector<std::string> widths;  // group:width
  std::string strategy = "random";
  double r1 = 0.0;
  double r2 = 0.0;
  std::string noise = "perturb";
};

int cmd_transfer(const Globals& g, const TransferArgs& a) {
  std::uint64_t stored = 0;
  const Network net = load_checkpoint(a.from, &stored);
  const std::uint64_t seed = seed_or(g, stored);
  const GammaPartition partition = compute_partition(net.arch());
  const SamplingStrategy strategy = parse_strategy(a.strategy);
  TransferPlan plan;
  if (a.width > 0) plan = TransferPlan::resize_hidden(partition, a.width, strategy);
  plan.default_strategy = strategy;
  for (const auto& w : a.widths) {
    const auto colon = w.find(':');
    if (colon == std::string::npos) {
      // A bare width applies to every hidden group.
      for (const auto& [group, width] : TransferPlan::resize_hidden(partition, std::stoul(w)).target_widths)
        plan.target_widths[group] = width;
      continue;
    }
    plan.target_widths[std::stoi(w.substr(0, colon))] = std::stoul(w.substr(colon + 1));
  }
  if (plan.target_widths.empty()) throw ParameterError("transfer needs --width or --widths");
  plan.r1 = a.r1;
  plan.r2 = a.r2;
  plan.noise = parse_noise_mode(a.noise);
  plan.seed = seed;
  const TransferResult res = transfer_with_indices(net, partition, plan, Rng(seed).substream("transfer"));
  // --out names either a directory or the checkpoint itself.
  const bool file_out = fs::path(g.out).extension() == ".ckpt";
  const fs::path ckpt = file_out ? fs::path(g.out) : fs::path(g.out) / ("transferred" + seed_suffix(seed) + ".ckpt");
  save_checkpoint(res.net, ckpt, seed);
  note(ckpt);
  std::string csv = "group,position,source_index\n";
  for (const auto& s : res.index_sets)
    for (std::size_t i = 0; i < s.indices.size(); ++i)
      csv += std::to_string(s.group) + "," + std::to_string(i) + "," + std::to_string(s.indices[i]) + "\n";
  write_out(file_out ? fs::path(fs::path(g.out).replace_extension("").string() + "_indices.csv")
                     : fs::path(g.out) / ("transferred" + seed_suffix(seed) + "_indices.csv"),
            csv);
  std::printf("%s", compute_partition(res.net.arch()).describe().c_str());
  return kOk;
}

// ---- diagnose ----

struct DiagnoseArgs {
  std::vector<std::string> ckpts;
  std::string report = "corr";
  std::string weight = "W1";
  std::string normalize = "minmax";
  std::string axis = "row";
  std::size_t bins = 30;
};

int cmd_diagnose(const Globals& g, const DiagnoseArgs& a) {
  if (a.ckpts.empty()) throw ParameterError("diagnose needs --ckpt");
  std::vector<Network> nets;
  for (const auto& c : a.ckpts) nets.push_back(load_checkpoint(c));
  const fs::path out(g.out);
  const std::string stem = fs::path(a.ckpts.front()).stem().string();
  if (a.report == "corr") {
    for (std::size_t i = 0; i < nets.size(); ++i) {
      const Network& net = nets[i];
      CorrelationReport r;
      if (net.depth() == 3) {
        r = table1_pairs(net);
      } else {
        std::vector<Profile> profiles;
        for (const auto& w : net.weight_names()) {
          if (net.arch().weight(w).kind != WeightKind::Matrix) continue;
          profiles.push_back(profile(net, w, Axis::Row, Reducer::mean()));
          profiles.push_back(profile(net, w, Axis::Col, Reducer::mean()));
        }
        r = correlation_matrix(profiles);
      }
      r.parametrization = net.parametrization();
      write_out(out / (fs::path(a.ckpts[i]).stem().string() + "_corr.csv"), r.to_csv());
    }
  } else if (a.report == "heatmap") {
    for (std::size_t i = 0; i < nets.size(); ++i) {
      const Heatmap h = heatmap_export(nets[i], a.weight, parse_normalize(a.normalize));
      const std::string base = fs::path(a.ckpts[i]).stem().string() + "_" + a.weight;
      write_out(out / (base + ".grid"), h.to_grid());
      write_out(out / (base + ".gp"), h.gnuplot_script(base + ".grid", base));
    }
  } else if (a.report == "hist") {
    if (a.axis != "row" && a.axis != "col") throw ParameterError("--axis is row or col");
    const HistogramTrajectory h =
        histogram_trajectory(nets, a.weight, a.axis == "row" ? Axis::Row : Axis::Col, a.bins);
    write_out(out / (stem + "_" + a.weight + "_hist.csv"), h.to_csv());
  } else {
    throw ParameterError("--report is corr, heatmap or hist");
  }
  return kOk;
}

// ---- sample ----

struct SampleArgs {
  std::string ckpt;
  int group = 0;
  std::size_t target = 0;
  std::string strategy = "random";
  double r2 = 0.0;
};

int cmd_sample(const Globals& g, const SampleArgs& a) {
  std::uint64_t stored = 0;
  const Network net = load_checkpoint(a.ckpt, &stored);
  const std::uint64_t seed = seed_or(g, stored);
  const auto measures = extract_measures(net, compute_partition(net.arch()));
  const GroupMeasure* m = nullptr;
  for (const auto& gm : measures)
    if (gm.group == a.group) m = &gm;
  if (!m) throw ParameterError("no resampleable group " + std::to_string(a.group));
  const std::size_t target = a.target ? a.target : m->width;
  const SamplingStrategy strategy = parse_strategy(a.strategy);
  Rng rng = Rng(seed).substream("sample");
  const fs::path out(g.out);
  const std::string base = "sample_group" + std::to_string(a.group) + seed_suffix(seed);
  IndexSet chosen;
  if (strategy.kind == SamplingStrategy::Kind::FunctionBased) {
    const CandidateReport rep = function_based_candidates(*m, target, strategy, a.r2, rng);
    std::string csv = "candidate,loss,winner\n";
    for (std::size_t i = 0; i < rep.losses.size(); ++i)
      csv += std::to_string(i) + "," + format_double(rep.losses[i]) + "," + (i == rep.winner ? "1" : "0") + "\n";
    write_out(out / (base + "_candidates.csv"), csv);
    chosen = rep.candidates[rep.winner];
  } else {
    chosen = draw_indices(*m, target, strategy, a.r2, rng);
  }
  std::string csv = "position,source_index\n";
  for (std::size_t i = 0; i < chosen.indices.size(); ++i)
    csv += std::to_string(i) + "," + std::to_string(chosen.indices[i]) + "\n";
  write_out(out / (base + "_indices.csv"), csv);
  write_out(out / (base + "_measure.csv"), m->select(chosen.indices).to_csv());
  return kOk;
}

// ---- reproduce ----

struct ReproduceArgs {
  std::string name;
  std::optional<std::size_t> seeds;
  std::optional<double> r1;
  std::optional<double> r2;
  std::string dataset_dir;
  bool synthetic = false;
  bool quick = false;
  bool fallback = false;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> width;
};

// Small stand-in for CIFAR-10 used by --synthetic.
std::pair<Dataset, Dataset> synthetic_images(std::uint64_t seed, bool quick) {
  DatasetConfig d;
  d.kind = DatasetConfig::Kind::SynthClassification;
  d.n_train = quick ? 1000 : 5000;
  d.n_test = quick ? 500 : 1000;
  d.dim = 64;
  d.classes = 10;
  d.separation = 0.5;
  return load_datasets(d, seed);
}

int cmd_reproduce(const Globals& g, const ReproduceArgs& a) {
  ReproduceOptions opt;
  opt.out = g.out;
  opt.seed = seed_or(g, 0);
  opt.seeds = a.seeds;
  opt.r1 = a.r1;
  opt.r2 = a.r2;
  opt.fallback = a.fallback;
  opt.epochs = a.epochs;
  opt.width = a.width;

  Report report;
  if (a.name == "twolayer_regen") {
    report = reproduce_twolayer_regen(opt);
  } else {
    Dataset train_set, test_set;
    if (a.synthetic) {
      std::tie(train_set, test_set) = synthetic_images(opt.seed, a.quick);
    } else {
      const fs::path dir = find_cifar10(a.dataset_dir);
      if (dir.empty()) throw DataUnavailableError(kCifarHelp);
      std::tie(train_set, test_set) = load_cifar10(dir);
      if (a.quick) {
        train_set = train_set.head(5000);
        test_set = test_set.head(1000);
      }
    }
    if (a.name == "table1")
      report = reproduce_table1(opt, train_set, test_set);
    else if (a.name == "fig1")
      report = reproduce_fig1(opt, train_set, test_set);
    else if (a.name == "fig2_grow")
      report = reproduce_fig2(opt, true, train_set, test_set);
    else if (a.name == "fig2_prune")
      report = reproduce_fig2(opt, false, train_set, test_set);
    else
      throw ParameterError("unknown experiment " + a.name);
  }
  std::printf("%s", report.summary_text().c_str());
  std::printf("outputs in %s\n", opt.out.string().c_str());
  return report.pass() ? kOk : kAcceptanceFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mfgrow: mean-field weight transfer toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "experiment config (JSON)");
  app.add_option("--seed", g.seed, "seed (u64)");
  app.add_option("--out", g.out, "output directory")->capture_default_str();

  GammaArgs ga;
  auto* gamma = app.add_subcommand("gamma", "print the Γ partition of an architecture");
  gamma->add_option("file", ga.file, "architecture JSON");
  gamma->add_option("--mlp", ga.mlp, "MLP depth (weight layers)");
  gamma->add_option("--builder", ga.builder, "example3 | skip | attention");
  gamma->add_option("--width", ga.width, "hidden width")->capture_default_str();
  gamma->add_option("--input-dim", ga.input_dim)->capture_default_str();
  gamma->add_option("--output-dim", ga.output_dim)->capture_default_str();
  gamma->add_flag("--bias", ga.bias);
  gamma->add_flag("--skip", ga.skip);
  gamma->add_option("--emit", ga.emit, "also write the architecture JSON here");

  InitArgs ia;
  auto* init = app.add_subcommand("init", "initialize a network and save a checkpoint");
  init->add_option("--mlp", ia.mlp, "depth")->capture_default_str();
  init->add_option("--width", ia.width)->capture_default_str();
  init->add_option("--input-dim", ia.input_dim)->capture_default_str();
  init->add_option("--output-dim", ia.output_dim)->capture_default_str();
  init->add_flag("--bias", ia.bias);
  init->add_option("--parametrization", ia.parametrization, "sp | mup | mfp")->capture_default_str();
  init->add_option("--mode", ia.mode, "iid | rc")->capture_default_str();
  init->add_option("--phi", ia.phi, "product | sum")->capture_default_str();
  init->add_option("--activation", ia.activation)->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "train from an experiment config");

  TransferArgs ta;
  auto* transfer_cmd = app.add_subcommand("transfer", "grow or prune a checkpoint");
  transfer_cmd->add_option("--from", ta.from, "source checkpoint")->required();
  transfer_cmd->add_option("--width", ta.width, "new width of every hidden group");
  transfer_cmd->add_option("--widths", ta.widths, "width for every hidden group, or group:width pairs");
  transfer_cmd->add_option("--strategy", ta.strategy, "identity | duplicate | random | group[:n] | function_based[:n] | function_based_marginal[:n]")
      ->capture_default_str();
  transfer_cmd->add_option("--r1", ta.r1, "random rate")->capture_default_str();
  transfer_cmd->add_option("--r2", ta.r2, "norm rate")->capture_default_str();
  transfer_cmd->add_option("--noise", ta.noise, "perturb | literal")->capture_default_str();

  DiagnoseArgs da;
  auto* diagnose = app.add_subcommand("diagnose", "correlation, heatmap and histogram reports");
  diagnose->add_option("--ckpt", da.ckpts, "checkpoint(s); several for hist")->required();
  diagnose->add_option("--report", da.report, "corr | heatmap | hist")->capture_default_str();
  diagnose->add_option("--weight", da.weight)->capture_default_str();
  diagnose->add_option("--normalize", da.normalize, "minmax | zscore")->capture_default_str();
  diagnose->add_option("--axis", da.axis, "row | col")->capture_default_str();
  diagnose->add_option("--bins", da.bins)->capture_default_str();

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "draw an index set from one group's empirical measure");
  sample->add_option("--ckpt", sa.ckpt)->required();
  sample->add_option("--group", sa.group)->capture_default_str();
  sample->add_option("--target", sa.target, "sample count (default: group width)");
  sample->add_option("--strategy", sa.strategy)->capture_default_str();
  sample->add_option("--r2", sa.r2)->capture_default_str();

  ReproduceArgs ra;
  auto* reproduce = app.add_subcommand("reproduce", "run a scripted experiment and check its acceptance bounds");
  reproduce->add_option("name", ra.name, "table1 | fig1 | fig2_grow | fig2_prune | twolayer_regen")
      ->required()
      ->check(CLI::IsMember({"table1", "fig1", "fig2_grow", "fig2_prune", "twolayer_regen"}));
  reproduce->add_option("--seeds", ra.seeds, "number of seeds");
  reproduce->add_option("--r1", ra.r1);
  reproduce->add_option("--r2", ra.r2);
  reproduce->add_option("--dataset-dir", ra.dataset_dir, "CIFAR-10 binary directory");
  reproduce->add_flag("--synthetic", ra.synthetic, "synthetic stand-in for CIFAR-10");
  reproduce->add_flag("--quick", ra.quick, "smaller data subsets");
  reproduce->add_flag("--fallback", ra.fallback, "fig1 at N=150, 5 epochs");
  reproduce->add_option("--epochs", ra.epochs);
  reproduce->add_option("--width", ra.width);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*gamma) return cmd_gamma(ga);
    if (*init) return cmd_init(g, ia);
    if (*train_cmd) return cmd_train(g);
    if (*transfer_cmd) return cmd_transfer(g, ta);
    if (*diagnose) return cmd_diagnose(g, da);
    if (*sample) return cmd_sample(g, sa);
    if (*reproduce) return cmd_reproduce(g, ra);
  } catch (const DataUnavailableError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kMissingData;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kAcceptanceFailure;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: invalid JSON: %s\n", e.what());
    return kInputError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: bad number: %s\n", e.what());
    return kInputError;
  }
  return kInputError;
}

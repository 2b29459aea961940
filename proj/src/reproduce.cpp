#include "mfgrow/reproduce.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "mfgrow/data_io.hpp"

namespace mfgrow {

Check Check::at_most(std::string name, double value, double bound) {
  return {std::move(name), value, "<=", bound, 0.0, value <= bound};
}

Check Check::at_least(std::string name, double value, double bound) {
  return {std::move(name), value, ">=", bound, 0.0, value >= bound};
}

Check Check::within(std::string name, double value, double lo, double hi) {
  return {std::move(name), value, "in", lo, hi, value >= lo && value <= hi};
}

std::string Check::bound() const {
  char buf[96];
  if (op == "in")
    std::snprintf(buf, sizeof buf, "[%g, %g]", lo, hi);
  else
    std::snprintf(buf, sizeof buf, "%s %g", op.c_str(), lo);
  return buf;
}

bool Report::pass() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string Report::summary_csv() const {
  std::string out = "check,value,bound,pass\n";
  for (const auto& c : checks)
    out += c.name + "," + format_double(c.value) + ",\"" + c.bound() + "\"," + (c.pass ? "1" : "0") + "\n";
  return out;
}

std::string Report::summary_text() const {
  std::string out;
  for (const auto& c : checks) {
    char line[256];
    std::snprintf(line, sizeof line, "%-4s %-40s %.6g (%s)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value,
                  c.bound().c_str());
    out += line;
  }
  out += std::string(pass() ? "PASS " : "FAIL ") + name + "\n";
  return out;
}

namespace {

void emit(Report& r, const ReproduceOptions& opt, const std::string& file, const std::string& text) {
  write_text(opt.out / file, text);
  r.files.push_back(file);
}

std::string seed_suffix(std::uint64_t seed) { return "_seed" + std::to_string(seed); }

void write_summary(Report& r, const ReproduceOptions& opt) {
  emit(r, opt, r.name + "_summary.csv", r.summary_csv());
}

const Parametrization kAll[] = {Parametrization::SP, Parametrization::MuP, Parametrization::MFP};

}  // namespace

Report reproduce_table1(const ReproduceOptions& opt, const Dataset& train_set, const Dataset& test_set) {
  Report report{"table1", {}, {}};
  const std::size_t seeds = opt.seeds.value_or(3);
  // (parametrization, stage, pair) -> per-seed |r|
  std::map<std::string, std::vector<double>> values;
  auto key = [](Parametrization p, const std::string& stage, const CorrelationPair& c) {
    return to_string(p) + "," + stage + "," + c.a + "~" + c.b;
  };
  for (Parametrization p : kAll) {
    for (std::size_t s = 0; s < seeds; ++s) {
      CorrelationExperimentConfig cfg;
      cfg.parametrization = p;
      cfg.width = opt.width.value_or(1000);
      cfg.epochs = opt.epochs.value_or(10);
      cfg.seed = opt.seed + s;
      cfg.optimizer = default_classifier_optimizer(p);
      const auto res = correlation_experiment(cfg, train_set, test_set);
      const std::string tag = "table1_" + to_string(p) + seed_suffix(cfg.seed);
      emit(report, opt, tag + "_init.csv", res.initial.to_csv());
      emit(report, opt, tag + "_trained.csv", res.trained.to_csv());
      emit(report, opt, tag + "_log.csv", res.log.to_csv());
      for (const auto& c : res.initial.pairs) values[key(p, "init", c)].push_back(c.r);
      for (const auto& c : res.trained.pairs) values[key(p, "trained", c)].push_back(c.r);
    }
  }
  std::string table = "parametrization,stage,pair,median_abs_r\n";
  std::map<std::string, double> med;
  for (const auto& [k, v] : values) {
    med[k] = median(v);
    table += k + "," + format_double(med[k]) + "\n";
  }
  emit(report, opt, "table1_medians.csv", table);

  for (Parametrization p : kAll)
    for (const auto& [k, v] : med)
      if (k.rfind(to_string(p) + ",init,", 0) == 0)
        report.checks.push_back(Check::at_most("init " + k.substr(k.rfind(',') + 1) + " " + to_string(p), v,
                                               bounds::kInitCorrelation));
  const double mfp_first = med.at("MFP,trained,first~M.column");
  const double sp_first = med.at("SP,trained,first~M.column");
  report.checks.push_back(Check::at_least("trained MFP first~M.column", mfp_first, bounds::kMfpFirstColumn));
  report.checks.push_back(
      Check::at_least("trained MFP/SP first~M.column", sp_first > 0.0 ? mfp_first / sp_first : INFINITY,
                      bounds::kMfpOverSp));
  report.checks.push_back(
      Check::at_least("trained MFP last~M.row", med.at("MFP,trained,last~M.row"), bounds::kMfpLastRow));
  write_summary(report, opt);
  return report;
}

std::vector<UpdateProbe> update_probe_seeds(Parametrization p, const Dataset& data, std::uint64_t first_seed,
                                            std::size_t seeds, double lr_width_exponent) {
  std::vector<UpdateProbe> out;
  for (std::size_t s = 0; s < seeds; ++s) {
    const std::uint64_t seed = first_seed + s;
    // A different 64-sample batch per seed.
    std::vector<std::size_t> rows(64);
    Rng rng = Rng(seed).substream("probe-batch");
    for (auto& r : rows) r = rng.index(data.size());
    OptimizerConfig oc;
    oc.lr = 0.1;
    oc.lr_width_exponent = lr_width_exponent;
    out.push_back(update_scaling_probe(p, 256, 1024, seed, data.subset(rows), oc,
                                       data.classification() ? LossKind::CrossEntropy : LossKind::Square));
  }
  return out;
}

Report reproduce_fig1(const ReproduceOptions& opt, const Dataset& train_set, const Dataset& test_set) {
  Report report{"fig1", {}, {}};
  const std::size_t seeds = opt.seeds.value_or(3);
  const std::size_t width = opt.width.value_or(opt.fallback ? 150 : 300);
  const std::size_t epochs = opt.epochs.value_or(opt.fallback ? 5 : 10);
  const double threshold = opt.fallback ? bounds::kCifarFallbackAccuracy : bounds::kCifarAccuracy;
  for (Parametrization p : kAll) {
    std::vector<double> acc;
    for (std::size_t s = 0; s < seeds; ++s) {
      ClassifierConfig cc;
      cc.parametrization = p;
      cc.width = width;
      cc.epochs = epochs;
      cc.seed = opt.seed + s;
      cc.optimizer = default_classifier_optimizer(p);
      const std::string tag = "fig1_" + to_string(p) + seed_suffix(cc.seed);
      Network trained = make_classifier(cc, train_set.input_dim(), train_set.output_dim());
      if (s == 0) {
        const Heatmap h = heatmap_export(trained, "W1", Normalize::MinMax);
        emit(report, opt, tag + "_W1_init.grid", h.to_grid());
        emit(report, opt, tag + "_W1_init.gp", h.gnuplot_script(tag + "_W1_init.grid", to_string(p) + " init"));
      }
      const TrainingLog log = train_classifier(cc, train_set, test_set, &trained);
      emit(report, opt, tag + "_log.csv", log.to_csv());
      if (s == 0) {
        const Heatmap h = heatmap_export(trained, "W1", Normalize::MinMax);
        emit(report, opt, tag + "_W1_trained.grid", h.to_grid());
        emit(report, opt, tag + "_W1_trained.gp",
             h.gnuplot_script(tag + "_W1_trained.grid", to_string(p) + " trained"));
      }
      acc.push_back(log.records.empty() ? 0.0 : log.records.back().test_acc);
    }
    report.checks.push_back(Check::at_least("median test acc " + to_string(p), median(acc), threshold));
  }

  std::string probe_csv = "parametrization,seed,small,large,ratio,preact_ratio\n";
  for (Parametrization p : {Parametrization::MFP, Parametrization::SP}) {
    const auto probes = update_probe_seeds(p, train_set, opt.seed, 5);
    std::vector<double> ratios;
    for (std::size_t s = 0; s < probes.size(); ++s) {
      const auto& u = probes[s];
      probe_csv += to_string(p) + "," + std::to_string(opt.seed + s) + "," + format_double(u.small) + "," +
                   format_double(u.large) + "," + format_double(u.ratio) + "," + format_double(u.preact_ratio) + "\n";
      ratios.push_back(u.ratio);
    }
    if (p == Parametrization::MFP)
      report.checks.push_back(
          Check::within("update ratio 256/1024 MFP", median(ratios), bounds::kMfpProbeLo, bounds::kMfpProbeHi));
    else
      report.checks.push_back(
          Check::within("update ratio 256/1024 SP", median(ratios), bounds::kSpProbeLo, bounds::kSpProbeHi));
  }
  emit(report, opt, "fig1_update_probe.csv", probe_csv);
  write_summary(report, opt);
  return report;
}

Report reproduce_fig2(const ReproduceOptions& opt, bool grow, const Dataset& train_set, const Dataset& test_set) {
  Report report{grow ? "fig2_grow" : "fig2_prune", {}, {}};
  Fig2Config cfg;
  cfg.grow = grow;
  cfg.optimizer.lr = 0.1;
  cfg.tolerance = bounds::kFig2Tolerance;
  if (opt.width) (grow ? cfg.large : cfg.small) = *opt.width;
  if (opt.epochs) cfg.post_epochs = *opt.epochs;
  if (opt.r1 || opt.r2)
    cfg.settings = {{opt.r1.value_or(0.0), opt.r2.value_or(0.0)}};
  else if (grow)
    cfg.settings = {{0.0, 0.0}, {1.0, 0.4}, {4.0, 0.8}};
  else
    cfg.settings = {{0.0, 0.0}, {0.5, 0.9}};

  const std::size_t seeds = opt.seeds.value_or(1);
  for (std::size_t s = 0; s < seeds; ++s) {
    cfg.seed = opt.seed + s;
    const Fig2Result res = run_fig2(cfg, train_set, test_set, opt.out);
    const std::string tag = report.name + seed_suffix(cfg.seed);
    report.files.push_back("fig2_source_" + std::to_string(grow ? cfg.small : cfg.large) + seed_suffix(cfg.seed) +
                           ".ckpt");
    emit(report, opt, tag + "_source.csv", res.source.to_csv());
    emit(report, opt, tag + "_benchmark.csv", res.benchmark.to_csv());
    emit(report, opt, tag + "_runs.csv", res.summary_csv());
    for (const auto& run : res.runs) {
      const std::string rtag = "r1=" + format_double(run.r1) + " r2=" + format_double(run.r2);
      emit(report, opt, tag + "_r1_" + format_double(run.r1) + "_r2_" + format_double(run.r2) + ".csv",
           run.log.to_csv());
      // Best gap to the benchmark over the post-transfer epochs.
      double gap = INFINITY;
      for (const auto& rec : run.log.records) {
        if (rec.epoch <= cfg.transfer_epoch) continue;
        for (const auto& b : res.benchmark.records)
          if (b.epoch == rec.epoch) gap = std::min(gap, b.test_acc - rec.test_acc);
      }
      report.checks.push_back(Check::at_most("benchmark gap " + rtag + seed_suffix(cfg.seed), gap, cfg.tolerance));
    }
    if (res.duplication_deviation >= 0.0)
      report.checks.push_back(Check::at_most("duplication preservation" + seed_suffix(cfg.seed),
                                             res.duplication_deviation, bounds::kPreservation));
  }
  write_summary(report, opt);
  return report;
}

Report reproduce_twolayer_regen(const ReproduceOptions& opt) {
  Report report{"twolayer_regen", {}, {}};
  const std::size_t seeds = opt.seeds.value_or(5);
  std::string csv = "seed,source_mse,regen_mse,ratio,random_regen_mse\n";
  std::vector<double> ratios;
  for (std::size_t s = 0; s < seeds; ++s) {
    RegenConfig cfg;
    cfg.seed = opt.seed + s;
    if (opt.width) cfg.width = *opt.width;
    const RegenResult r = twolayer_regen(cfg);
    csv += std::to_string(cfg.seed) + "," + format_double(r.source_mse) + "," + format_double(r.regen_mse) + "," +
           format_double(r.ratio) + "," + format_double(r.random_regen_mse) + "\n";
    emit(report, opt, "twolayer_regen" + seed_suffix(cfg.seed) + "_log.csv", r.log.to_csv());
    ratios.push_back(r.ratio);
  }
  emit(report, opt, "twolayer_regen.csv", csv);
  report.checks.push_back(Check::at_most("median regenerated/source test MSE", median(ratios), bounds::kRegenRatio));
  write_summary(report, opt);
  return report;
}

}  // namespace mfgrow

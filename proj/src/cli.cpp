#include "reprog/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <memory>
#include <optional>

#include "reprog/blackbox.hpp"
#include "reprog/checkpoint.hpp"
#include "reprog/diagnostics.hpp"
#include "reprog/errors.hpp"
#include "reprog/ingest.hpp"
#include "reprog/report.hpp"
#include "reprog/run_config.hpp"

namespace reprog {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string report_dir;
};

RunConfig load_run_config(const Options& opt) {
  RunConfig cfg;
  if (!opt.config.empty()) {
    cfg = parse_run_config(read_json_file(opt.config), fs::current_path());
  } else if (!opt.report_dir.empty()) {
    cfg = load_report(opt.report_dir).config;
  } else {
    throw ConfigError("--config is required");
  }
  if (opt.seed) cfg.reprogram.seed = *opt.seed;
  if (!opt.mode.empty()) {
    if (opt.mode == "white_box") {
      cfg.reprogram.mode = Mode::white_box;
    } else if (opt.mode == "black_box") {
      cfg.reprogram.mode = Mode::black_box;
    } else {
      throw ConfigError("--mode must be white_box or black_box");
    }
  }
  if (!opt.report_dir.empty()) cfg.report_dir = fs::absolute(opt.report_dir).lexically_normal();
  // Overrides go through the same checks as the file.
  return parse_run_config(to_json(cfg), fs::current_path());
}

struct TargetData {
  Dataset train;
  Dataset test;
};

TargetData load_target(const RunConfig& cfg) {
  TargetData d{load_dataset(cfg.target), load_dataset(cfg.target_test)};
  if (cfg.target.format == DatasetSpec::Format::ucr && cfg.target_test.format == DatasetSpec::Format::ucr) {
    align_labels(d.train, d.test);
  }
  return d;
}

std::unique_ptr<ProbabilityOracle> make_oracle(const RunConfig& cfg, const FrozenModel& model) {
  if (cfg.endpoint) {
    return std::make_unique<BlackboxEndpoint>(cfg.endpoint->command, model.input_dim(), model.num_classes());
  }
  return std::make_unique<LocalOracle>(model);
}

int cmd_train_source(const Options& opt, std::ostream& out) {
  if (opt.config.empty()) throw ConfigError("--config is required");
  SourceRunConfig cfg = parse_source_config(read_json_file(opt.config), fs::current_path());
  if (opt.seed) cfg.training.seed = *opt.seed;
  if (!opt.mode.empty()) throw ConfigError("--mode does not apply to train-source");

  Dataset data = load_dataset(cfg.dataset);
  SourceTrainStats stats;
  FrozenModel model =
      train_source(data, mlp_architecture(data.samples.cols(), cfg.hidden, data.num_classes), cfg.training, &stats);
  fs::create_directories(cfg.checkpoint.parent_path());
  save_checkpoint(model, cfg.checkpoint);

  if (!opt.report_dir.empty()) {
    fs::create_directories(opt.report_dir);
    write_text_file(fs::path(opt.report_dir) / report_files::config, to_json(cfg).dump(2) + "\n");
  }
  out << "checkpoint " << cfg.checkpoint.string() << "\n"
      << "digest " << model.param_digest() << "\n"
      << "parameters " << model.parameter_count() << "\n"
      << "train_accuracy " << stats.train_accuracy << "\n"
      << "final_loss " << stats.final_loss << "\n";
  return kExitOk;
}

int cmd_reprogram(const Options& opt, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_run_config(opt);
  if (cfg.report_dir.empty()) throw ConfigError("report_dir is required (config key or --report-dir)");

  const FrozenModel model = load_checkpoint(cfg.source_checkpoint);
  const std::string digest_before = model.param_digest();
  TargetData data = load_target(cfg);

  ReprogramHooks hooks;
  std::optional<AlignmentProbe> probe;
  if (cfg.diagnostics.track_alignment) {
    probe.emplace(model, load_dataset(*cfg.source_heldout), data.test, cfg.diagnostics.n_rep,
                  cfg.diagnostics.seed);
    hooks.alignment = [&probe](const InputTransform& t, const OutputMap& o) { return (*probe)(t, o); };
  }

  RunSummary summary;
  summary.source_digest_before = digest_before;
  std::optional<ReprogramResult> result;
  try {
    if (cfg.reprogram.mode == Mode::white_box) {
      result = reprogram(model, data.train, data.test, cfg.reprogram, hooks);
      summary.queries = result->trace.epochs.empty() ? result->trace.baseline.queries
                                                     : result->trace.epochs.back().queries;
    } else {
      auto oracle = make_oracle(cfg, model);
      result = reprogram(*oracle, data.train, data.test, cfg.reprogram, hooks);
      summary.queries = oracle->queries();
      summary.requests = oracle->calls();
      if (auto* ep = dynamic_cast<BlackboxEndpoint*>(oracle.get())) {
        auto served = ep->served();
        summary.endpoint_samples = served.samples;
        summary.endpoint_requests = served.requests;
      }
    }
  } catch (const DivergenceError& e) {
    fs::create_directories(cfg.report_dir);
    write_text_file(cfg.report_dir / "divergence.json", e.dump + "\n");
    write_text_file(cfg.report_dir / report_files::trace, trace_jsonl(e.trace));
    throw;
  }

  summary.source_digest_after = load_checkpoint(cfg.source_checkpoint).param_digest();
  if (model.param_digest() != digest_before || summary.source_digest_after != digest_before) {
    err << "error: source model parameters changed during reprogramming\n";
    return kExitRuntime;
  }
  summary.trainable_parameters = result->trainable_parameters();
  summary.final_test_accuracy =
      result->trace.epochs.empty() ? result->trace.baseline.test_accuracy : result->trace.epochs.back().test_accuracy;
  write_report(cfg.report_dir, cfg, *result, summary);

  out << "mode " << to_string(cfg.reprogram.mode) << "\n"
      << "baseline_test_accuracy " << result->trace.baseline.test_accuracy << "\n"
      << "final_test_accuracy " << summary.final_test_accuracy << "\n"
      << "trainable_parameters " << summary.trainable_parameters << "\n"
      << "source_digest " << digest_before << " (unchanged)\n";
  if (cfg.reprogram.mode == Mode::black_box) {
    out << "queries " << summary.queries << "\n"
        << "requests " << summary.requests << "\n";
    if (summary.endpoint_samples) {
      out << "endpoint_served " << *summary.endpoint_samples << " samples, " << *summary.endpoint_requests
          << " requests\n";
    }
  }
  out << "report " << cfg.report_dir.string() << "\n";
  return kExitOk;
}

fs::path report_dir_of(const Options& opt, const RunConfig& cfg) {
  if (!opt.report_dir.empty()) return opt.report_dir;
  if (cfg.report_dir.empty()) throw ConfigError("report_dir is required (config key or --report-dir)");
  return cfg.report_dir;
}

int cmd_evaluate(const Options& opt, std::ostream& out) {
  RunConfig cfg = load_run_config(opt);
  LoadedReport rep = load_report(report_dir_of(opt, cfg));
  const FrozenModel model = load_checkpoint(cfg.source_checkpoint);
  TargetData data = load_target(cfg);

  double acc = 0.0;
  if (cfg.reprogram.mode == Mode::white_box) {
    LocalOracle oracle(model);
    acc = evaluate_accuracy(oracle, rep.transform, rep.output, data.test);
    out << "target_risk " << rms_risk(model, rep.transform, rep.output, data.test) << "\n";
  } else {
    auto oracle = make_oracle(cfg, model);
    acc = evaluate_accuracy(*oracle, rep.transform, rep.output, data.test);
    out << "queries " << oracle->queries() << "\n";
  }
  out << "test_accuracy " << acc << "\n";
  return kExitOk;
}

int cmd_diagnose(const Options& opt, std::ostream& out) {
  RunConfig cfg = load_run_config(opt);
  fs::path dir = report_dir_of(opt, cfg);
  LoadedReport rep = load_report(dir);
  if (!rep.output.is_label_mapping()) {
    throw AssumptionError("diagnose needs a one-to-one label mapping; this run trained a linear head");
  }
  const FrozenModel model = load_checkpoint(cfg.source_checkpoint);
  TargetData data = load_target(cfg);
  std::optional<Dataset> heldout;
  if (cfg.source_heldout) heldout = load_dataset(*cfg.source_heldout);

  Theorem1Report r = theorem1_report(model, rep.transform, rep.output.mapping(), heldout ? &*heldout : nullptr,
                                     data.test, cfg.diagnostics.n_rep, cfg.diagnostics.seed);
  write_theorem1(dir, r);
  out << format_theorem1_table(r);
  if (cfg.reprogram.mode == Mode::white_box) {
    out << "input_gradient_l1 "
        << input_gradient_l1(model, rep.transform, rep.output, data.test, cfg.reprogram.loss) << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Model reprogramming: adapt a frozen classifier to a new task", "reprog"};
  app.require_subcommand(1);

  Options opt;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", opt.config, "JSON configuration file");
    if (config_required) c->required();
    sub->add_option("--seed", seed, "override the seed");
    sub->add_option("--mode", opt.mode, "override the mode")->check(CLI::IsMember({"white_box", "black_box"}));
    sub->add_option("--report-dir", opt.report_dir, "run report directory");
  };
  auto* train = app.add_subcommand("train-source", "train a source classifier and write its checkpoint");
  auto* repro = app.add_subcommand("reprogram", "train an input transform and output map");
  auto* eval = app.add_subcommand("evaluate", "target accuracy of a saved run");
  auto* diag = app.add_subcommand("diagnose", "risk, alignment and bound of a saved run");
  add_common(train, true);
  add_common(repro, true);
  add_common(eval, false);
  add_common(diag, false);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  for (auto* sub : {train, repro, eval, diag}) {
    if (sub->parsed() && sub->count("--seed") > 0) opt.seed = seed;
  }

  out << std::setprecision(6);
  try {
    if (train->parsed()) return cmd_train_source(opt, out);
    if (repro->parsed()) return cmd_reprogram(opt, out, err);
    if (eval->parsed()) return cmd_evaluate(opt, out);
    return cmd_diagnose(opt, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const AssumptionError& e) {
    err << "refused: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UnsupportedModeError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace reprog

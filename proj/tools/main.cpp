// gatedgeom: verification checks, training, sweeps and reports.
//
// Exit codes: 0 success, 1 a check or aggregation failed, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gatedgeom/checkpoint.hpp"
#include "gatedgeom/data.hpp"
#include "gatedgeom/errors.hpp"
#include "gatedgeom/evaluation.hpp"
#include "gatedgeom/experiment.hpp"
#include "gatedgeom/format.hpp"
#include "gatedgeom/report.hpp"
#include "gatedgeom/training.hpp"
#include "gatedgeom/verify.hpp"

namespace fs = std::filesystem;
using namespace gatedgeom;

namespace {

constexpr const char* kOutputRootEnv = "GATEDGEOM_OUTPUT_ROOT";

// Relative output paths are placed under $GATEDGEOM_OUTPUT_ROOT when it is set.
std::string output_path(const std::string& path) {
  const char* root = std::getenv(kOutputRootEnv);
  if (!root || !*root || fs::path(path).is_absolute()) return path;
  return (fs::path(root) / path).string();
}

std::vector<std::string> split_commas(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ','))
      if (!part.empty()) out.push_back(part);
  }
  return out;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- verify ----

struct VerifyArgs {
  std::vector<std::string> positional;
  std::vector<std::string> only;
  std::string layers;
  std::uint64_t seed = 0;
  int workers = 1;
  int trials = 200;
  std::string json_out;
};

int cmd_verify(const VerifyArgs& a) {
  std::vector<std::string> ids = split_commas(a.only);
  for (const auto& p : split_commas(a.positional)) {
    if (p == "all") {
      ids.insert(ids.end(), verify_selectors().begin(), verify_selectors().end());
    } else {
      ids.push_back(p);
    }
  }
  if (ids.empty()) ids = verify_selectors();
  for (const auto& id : ids) {
    const auto& known = verify_selectors();
    if (std::find(known.begin(), known.end(), id) == known.end()) {
      std::string list;
      for (const auto& k : known) list += " " + k;
      throw UsageError("unknown check '" + id + "'; known:" + list);
    }
  }
  VerifyOptions opt;
  opt.seed = a.seed;
  opt.workers = a.workers;
  opt.robustness_trials = a.trials;
  if (!a.layers.empty()) {
    opt.depth_layers.clear();
    for (const auto& s : split_commas({a.layers})) {
      try {
        opt.depth_layers.push_back(std::stoi(s));
      } catch (const std::exception&) {
        throw UsageError("--L expects a comma-separated list of integers");
      }
    }
  }
  const auto records = run_verify(ids, opt);
  const std::string json = verify_report_json(records);
  if (!a.json_out.empty()) {
    write_file_atomic(output_path(a.json_out), json);
  }
  std::cout << json;
  for (const auto& r : records) {
    std::cerr << (r.pass ? "PASS " : "FAIL ") << r.theorem_id << " " << r.quantity
              << " expected=" << format_number(r.expected) << " measured=" << format_number(r.measured)
              << " tol=" << format_number(r.tolerance) << "\n";
  }
  return all_passed(records) ? 0 : 1;
}

// ---- shared config loading ----

ExperimentConfig config_from(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : load_experiment_config(path);
}

// ---- train ----

struct TrainArgs {
  std::string config;
  std::string task = "curved";
  std::string variant = "strength";
  double alpha = 1.0;
  std::uint64_t seed = 0;
  int epochs = -1;
  std::string out = "train";
  bool measure = false;
};

int cmd_train(const TrainArgs& a) {
  const ExperimentConfig cfg = config_from(a.config);
  SweepSpec spec = sweep_spec_for(cfg, parse_task_kind(a.task));
  if (a.epochs >= 0) spec.train.epochs = a.epochs;
  const VariantSetting setting{parse_gate_variant(a.variant), a.alpha};
  const fs::path dir = output_path(a.out);
  fs::create_directories(dir);

  std::ostringstream metrics;
  CellResult r;
  if (a.measure) {
    r = run_cell(spec, setting, a.seed);
  } else {
    spec.data.task = parse_task_kind(a.task);
    const Dataset data = generate(spec.data, a.seed);
    TrainConfig tc = spec.train;
    tc.model.variant = setting.variant;
    tc.model.alpha = setting.alpha;
    const TrainResult t = train(tc, data, a.seed);
    r.params = t.params;
    r.epochs = t.epochs;
    r.test_accuracy = t.test_accuracy;
    r.status = t.aborted ? "aborted" : "ok";
    r.diagnostic = t.diagnostic;
  }
  for (const auto& e : r.epochs) {
    nlohmann::ordered_json j{{"run_id", a.task + "/" + setting.label() + "/seed" + std::to_string(a.seed)},
                             {"epoch", e.epoch},
                             {"train_loss", e.train_loss},
                             {"test_acc", e.test_acc}};
    metrics << j.dump() << "\n";
  }
  save_checkpoint((dir / "checkpoint.json").string(), r.params);
  write_file_atomic((dir / "metrics.jsonl").string(), metrics.str());

  nlohmann::ordered_json summary{{"task", a.task},
                                 {"variant", setting.label()},
                                 {"seed", a.seed},
                                 {"status", r.status},
                                 {"test_accuracy", r.test_accuracy}};
  if (!r.diagnostic.empty()) summary["diagnostic"] = r.diagnostic;
  if (a.measure) {
    summary["curvature_iso"] = r.curvature.iso;
    summary["curvature_aniso"] = r.curvature.aniso;
    summary["curvature_sqrt_embed"] = r.curvature.sqrt_embed;
  }
  std::cout << summary.dump(2) << "\n";
  return r.status == "ok" ? 0 : 1;
}

// ---- sweep ----

struct SweepArgs {
  std::string config;
  std::vector<std::string> tasks;
  std::string output;
  int workers = 0;
  bool print_config = false;
  int max_cells = -1;
};

int cmd_sweep(const SweepArgs& a) {
  ExperimentConfig cfg = config_from(a.config);
  if (!a.tasks.empty()) {
    cfg.tasks.clear();
    for (const auto& t : split_commas(a.tasks)) cfg.tasks.push_back(parse_task_kind(t));
  }
  if (!a.output.empty()) cfg.output_dir = a.output;
  if (a.workers > 0) cfg.workers = a.workers;
  cfg.output_dir = output_path(cfg.output_dir);
  if (a.print_config) {
    std::cout << experiment_config_json(cfg);
    return 0;
  }
  const auto summary = run_experiment(cfg, a.max_cells, [](const std::string& line) { std::cerr << line << "\n"; });
  std::cerr << "cells: " << summary.total_cells << " executed: " << summary.executed
            << " skipped: " << summary.skipped << " failed: " << summary.failed.size() << "\n";
  for (const auto& key : summary.failed) std::cerr << "failed cell " << key << "\n";
  return summary.failed.empty() ? 0 : 1;
}

// ---- report ----

int cmd_report(const std::string& dir) {
  const std::string path = output_path(dir);
  const int code = write_report(path);
  const Report r = build_report(path);
  std::cout << report_json(r);
  return code;
}

// ---- export-boundary ----

struct BoundaryArgs {
  std::string config;
  std::string checkpoint;
  std::string task = "curved";
  int resolution = 200;
  std::string out;
};

int cmd_export_boundary(const BoundaryArgs& a) {
  const ExperimentConfig cfg = config_from(a.config);
  DatasetSpec spec = cfg.dataset;
  spec.task = parse_task_kind(a.task);
  std::string csv;
  if (a.checkpoint.empty()) {
    csv = grid_csv(latent_grid(spec, a.resolution));
  } else {
    const ModelParams params = load_checkpoint(output_path(a.checkpoint));
    csv = grid_csv(latent_grid(spec, a.resolution, &params));
  }
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    write_file_atomic(output_path(a.out), csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curvature checks and gated-attention experiments"};
  app.require_subcommand(1);

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Run geometric checks (default: all)");
  verify->add_option("checks", va.positional, "Check ids, or 'all'");
  verify->add_option("--only", va.only, "Run only these checks (comma-separated or repeated)");
  verify->add_option("--L", va.layers, "Layer counts for depth-amplification, e.g. 1,2,4,8");
  verify->add_option("--seed", va.seed, "Seed for randomized checks");
  verify->add_option("--workers", va.workers, "Worker threads")->check(CLI::PositiveNumber);
  verify->add_option("--trials", va.trials, "Robustness trials")->check(CLI::PositiveNumber);
  verify->add_option("--json", va.json_out, "Also write the JSON report here");

  TrainArgs ta;
  auto* trainc = app.add_subcommand("train", "Train one model");
  trainc->add_option("--config", ta.config, "Experiment config JSON")->check(CLI::ExistingFile);
  trainc->add_option("--task", ta.task, "curved or linear");
  trainc->add_option("--variant", ta.variant, "ungated, silu, gated_sigmoid, gated_nonsparse, strength");
  trainc->add_option("--alpha", ta.alpha, "Gate strength");
  trainc->add_option("--seed", ta.seed, "Seed");
  trainc->add_option("--epochs", ta.epochs, "Override the epoch count");
  trainc->add_option("--out", ta.out, "Output directory");
  trainc->add_flag("--measure", ta.measure, "Also measure the curvature proxies");

  SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep", "Run the experiment sweep (resumable)");
  sweep->add_option("config,--config", sa.config, "Experiment config JSON")->check(CLI::ExistingFile);
  sweep->add_option("--task", sa.tasks, "Restrict to these tasks");
  sweep->add_option("--output", sa.output, "Output directory");
  sweep->add_option("--workers", sa.workers, "Concurrent cells")->check(CLI::PositiveNumber);
  sweep->add_option("--max-cells", sa.max_cells, "Stop after this many new cells");
  sweep->add_flag("--print-config", sa.print_config, "Print the resolved configuration and exit");

  std::string report_dir = "results";
  auto* report = app.add_subcommand("report", "Aggregate a results directory");
  report->add_option("dir", report_dir, "Results directory");

  BoundaryArgs ba;
  auto* boundary = app.add_subcommand("export-boundary", "Export a latent decision-boundary grid");
  boundary->add_option("--config", ba.config, "Experiment config JSON")->check(CLI::ExistingFile);
  boundary->add_option("--checkpoint", ba.checkpoint, "Model checkpoint (omit for ground truth only)");
  boundary->add_option("--task", ba.task, "curved or linear");
  boundary->add_option("--resolution", ba.resolution, "Grid side")->check(CLI::PositiveNumber);
  boundary->add_option("--out", ba.out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*verify) return cmd_verify(va);
    if (*trainc) return cmd_train(ta);
    if (*sweep) return cmd_sweep(sa);
    if (*report) return cmd_report(report_dir);
    if (*boundary) return cmd_export_boundary(ba);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

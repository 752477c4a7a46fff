#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gatedgeom/data.hpp"
#include "gatedgeom/evaluation.hpp"
#include "gatedgeom/training.hpp"

namespace gatedgeom {

struct BoundaryConfig {
  int resolution = 200;
  std::vector<double> alphas{0.0, 1.0};
  std::uint64_t seed = 0;
};

// Everything a sweep needs. Defaults are the experiment protocol values.
struct ExperimentConfig {
  std::string output_dir = "results";
  int workers = 1;
  std::vector<TaskKind> tasks{TaskKind::curved, TaskKind::linear};
  std::vector<double> alphas{0.0, 0.25, 0.5, 1.0, 1.5};
  std::vector<double> condition_numbers{2, 4, 8, 12, 20};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  // Run on the curved task only; empty disables the ablation.
  std::vector<GateVariant> ablation_variants{GateVariant::ungated, GateVariant::silu,
                                             GateVariant::gated_sigmoid, GateVariant::gated_nonsparse};
  DatasetSpec dataset;
  TrainConfig train;
  ProxyConfig proxy;
  BoundaryConfig boundary;
};

// Parses a JSON object. Unknown keys anywhere raise ConfigError naming the key;
// missing keys keep their defaults.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);
// Full resolved configuration, every key present.
std::string experiment_config_json(const ExperimentConfig& config);

enum class SweepGroup { strength, ablation };

struct CellSpec {
  TaskKind task = TaskKind::curved;
  SweepGroup group = SweepGroup::strength;
  VariantSetting setting;
  std::uint64_t seed = 0;
};

// Cells in output order: curved strength, curved ablation, linear strength.
std::vector<CellSpec> experiment_cells(const ExperimentConfig& config);

// Content hash (16 hex digits) of everything that determines a cell's result.
std::string cell_key(const ExperimentConfig& config, const CellSpec& cell);

SweepSpec sweep_spec_for(const ExperimentConfig& config, TaskKind task);

struct ExperimentSummary {
  int total_cells = 0;
  int executed = 0;  // cells run by this invocation
  int skipped = 0;   // already complete on disk
  std::vector<std::string> failed;  // keys of cells whose status is not "ok"
};

// Runs every missing cell, then writes the figure and table files from the
// cell results on disk. Rerunning with the same configuration skips completed
// cells and rewrites byte-identical outputs. max_new_cells >= 0 stops after that
// many executed cells (for interruption tests) and skips the output files.
ExperimentSummary run_experiment(const ExperimentConfig& config, int max_new_cells = -1,
                                 const std::function<void(const std::string&)>& log = {});

// Writes fig*/table*/records files from stored cell results; cells missing on
// disk are left out.
void write_experiment_outputs(const ExperimentConfig& config);

// Stored cell result, read back from disk.
struct StoredCell {
  CellSpec spec;
  std::string key;
  std::string status;
  std::string diagnostic;
  double test_accuracy = 0.0;
  ModelCurvature curvature;
  std::vector<EpochMetrics> epochs;
};

// Empty optional-like result: returns false when the cell is not on disk.
bool load_cell(const ExperimentConfig& config, const CellSpec& cell, StoredCell* out);

std::string cell_result_path(const ExperimentConfig& config, const std::string& key);
std::string cell_checkpoint_path(const ExperimentConfig& config, const std::string& key);

std::string records_csv(const std::vector<SweepRecord>& records);
std::string records_jsonl(const std::vector<SweepRecord>& records);

}  // namespace gatedgeom

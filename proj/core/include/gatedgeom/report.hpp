#pragma once

#include <string>
#include <vector>

#include "gatedgeom/experiment.hpp"

namespace gatedgeom {

struct ScoreEntry {
  std::string id;
  std::string description;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct AggregateRow {
  std::string task;
  std::string group;
  std::string setting;  // label of the variant setting
  int n = 0;
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double iso_mean = 0.0, iso_std = 0.0;
  double sqrt_embed_mean = 0.0, sqrt_embed_std = 0.0;
  std::vector<double> aniso_mean, aniso_std;  // per condition number
};

struct Report {
  bool complete = false;
  std::vector<std::string> missing;  // keys of absent or failed cells
  std::vector<AggregateRow> aggregates;
  std::vector<ScoreEntry> scorecard;

  bool all_pass() const;
};

// Reads resolved_config.json and the cell results under dir. A directory
// without a resolved configuration gives an incomplete, empty report.
Report build_report(const std::string& dir);
// Scorecard over already-loaded cells, used by build_report.
std::vector<ScoreEntry> scorecard(const ExperimentConfig& config, const std::vector<StoredCell>& cells);

std::string report_json(const Report& report);

// Writes summary.json (and refreshes the figure CSVs when the configuration is
// readable). Returns 0 when complete and every scorecard entry passes, else 1.
int write_report(const std::string& dir);

}  // namespace gatedgeom

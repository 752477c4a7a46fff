#include "doctest.h"

#include <filesystem>
#include <set>
#include <sstream>

#include "gatedgeom/errors.hpp"
#include "gatedgeom/experiment.hpp"
#include "gatedgeom/format.hpp"
#include "gatedgeom/report.hpp"
#include "json.hpp"

using namespace gatedgeom;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gatedgeom_unit_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig tiny_config(const fs::path& dir) {
  ExperimentConfig c;
  c.output_dir = dir.string();
  c.seeds = {0, 1};
  c.dataset.n_train = 200;
  c.dataset.n_test = 60;
  c.train.epochs = 1;
  c.train.model.d_model = 8;
  c.train.model.d_hidden = 8;
  c.proxy.n_directions = 8;
  c.proxy.eval_points = 8;
  c.boundary.resolution = 6;
  return c;
}

const std::vector<std::string> kOutputs{
    "records.csv",        "records.jsonl",        "metrics.jsonl",           "fig2_gate_vs_curvature.csv",
    "fig3_boundaries.csv", "fig4_curvature_vs_accuracy.csv", "fig5_ablation.csv", "fig5_ablation_aniso.csv",
    "fig6_iso_vs_aniso.csv", "tableA4_linear_control.csv", "resolved_config.json"};

int line_count(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("default configuration carries the protocol values") {
  const ExperimentConfig c;
  CHECK(c.alphas == std::vector<double>{0, 0.25, 0.5, 1.0, 1.5});
  CHECK(c.condition_numbers == std::vector<double>{2, 4, 8, 12, 20});
  CHECK(c.seeds.size() == 5);
  CHECK(c.dataset.n_train == 4000);
  CHECK(c.dataset.n_test == 1000);
  CHECK(c.dataset.seq_len == 8);
  CHECK(c.dataset.noise_sigma == 0.2);
  CHECK(c.train.batch_size == 128);
  CHECK(c.train.epochs == 20);
  CHECK(c.train.optimizer.lr == 2e-3);
  CHECK(c.train.optimizer.weight_decay == 1e-4);
  CHECK(c.train.model.d_model == 64);
  CHECK(c.proxy.epsilon == 1e-2);
  CHECK(c.proxy.n_directions == 64);

  const auto j = nlohmann::json::parse(experiment_config_json(c));
  CHECK(j["train"]["lr"].get<double>() == 2e-3);
  CHECK(j["model"]["d_model"].get<int>() == 64);
  CHECK(j["proxy"]["aggregate"].get<std::string>() == "mean_of_norms");
  // Serialization round-trips.
  CHECK(experiment_config_json(parse_experiment_config(experiment_config_json(c))) == experiment_config_json(c));
}

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_experiment_config(
      R"({"seeds": [3], "train": {"epochs": 2}, "proxy": {"input_mode": "noisy_tokens"}, "tasks": ["linear"]})");
  CHECK(c.seeds == std::vector<std::uint64_t>{3});
  CHECK(c.train.epochs == 2);
  CHECK(c.train.batch_size == 128);
  CHECK(c.proxy.input_mode == ProxyInputMode::noisy_tokens);
  CHECK(c.tasks == std::vector<TaskKind>{TaskKind::linear});

  CHECK_THROWS_WITH_AS(parse_experiment_config(R"({"sedes": [1]})"), doctest::Contains("sedes"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_experiment_config(R"({"train": {"learning_rate": 1}})"),
                       doctest::Contains("train.learning_rate"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"train": {"epochs": "ten"}})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"condition_numbers": [0.5]})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"ablation_variants": ["relu"]})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("[1, 2"), ConfigError);
}

TEST_CASE("cell enumeration and keys") {
  const ExperimentConfig c;
  const auto cells = experiment_cells(c);
  // 25 curved strength runs, 4 ablation variants x 5 seeds, 25 linear runs.
  CHECK(cells.size() == 70);
  CHECK(cells[0].task == TaskKind::curved);
  CHECK(cells[25].group == SweepGroup::ablation);
  CHECK(cells[45].task == TaskKind::linear);
  std::set<std::string> keys;
  for (const auto& cell : cells) keys.insert(cell_key(c, cell));
  CHECK(keys.size() == 70);
  CHECK(cell_key(c, cells[3]).size() == 16);
  CHECK(cell_key(c, cells[3]) == cell_key(ExperimentConfig{}, cells[3]));

  ExperimentConfig other;
  other.train.epochs = 19;
  CHECK(cell_key(other, cells[3]) != cell_key(c, cells[3]));
  // Output placement and worker count do not affect results.
  other = c;
  other.output_dir = "elsewhere";
  other.workers = 4;
  CHECK(cell_key(other, cells[3]) == cell_key(c, cells[3]));
}

TEST_CASE("experiment outputs are complete, resumable and byte-identical") {
  const fs::path full = scratch("full");
  const ExperimentConfig cfg = tiny_config(full);
  const ExperimentSummary s = run_experiment(cfg);
  CHECK(s.total_cells == 28);
  CHECK(s.executed == 28);
  CHECK(s.failed.empty());
  for (const auto& name : kOutputs) CHECK(fs::exists(full / name));
  CHECK(fs::exists(full / "manifest.json"));

  // records: one row per (cell, condition number) plus the header.
  CHECK(line_count(read_file((full / "records.csv").string())) == 1 + 28 * 5);
  CHECK(line_count(read_file((full / "fig5_ablation.csv").string())) == 1 + 4);
  CHECK(line_count(read_file((full / "tableA4_linear_control.csv").string())) == 1 + 5);
  CHECK(line_count(read_file((full / "fig2_gate_vs_curvature.csv").string())) == 1 + 25);
  CHECK(line_count(read_file((full / "fig3_boundaries.csv").string())) == 1 + 2 * 36);
  CHECK(line_count(read_file((full / "metrics.jsonl").string())) == 28);

  const auto manifest = nlohmann::json::parse(read_file((full / "manifest.json").string()));
  REQUIRE(manifest["cells"].size() == 28);
  for (const auto& c : manifest["cells"]) CHECK(c["status"] == "ok");

  // An interrupted run resumes to the same bytes.
  const fs::path resumed = scratch("resumed");
  ExperimentConfig rc = tiny_config(resumed);
  const ExperimentSummary first = run_experiment(rc, 5);
  CHECK(first.executed == 5);
  CHECK_FALSE(fs::exists(resumed / "records.csv"));
  rc.workers = 2;
  const ExperimentSummary second = run_experiment(rc);
  CHECK(second.skipped == 5);
  CHECK(second.executed == 23);
  for (const auto& name : kOutputs) {
    if (name == "resolved_config.json") continue;  // names its own output_dir and workers
    CAPTURE(name);
    CHECK(read_file((full / name).string()) == read_file((resumed / name).string()));
  }

  // A rerun with nothing left to do rewrites the same bytes.
  const std::string before = read_file((full / "fig4_curvature_vs_accuracy.csv").string());
  const ExperimentSummary third = run_experiment(cfg);
  CHECK(third.executed == 0);
  CHECK(read_file((full / "fig4_curvature_vs_accuracy.csv").string()) == before);

  SUBCASE("report over the finished directory") {
    const Report r = build_report(full.string());
    CHECK(r.complete);
    CHECK(r.missing.empty());
    int ablation_rows = 0;
    for (const auto& a : r.aggregates) {
      CHECK(a.n == 2);
      ablation_rows += a.group == "ablation";
    }
    CHECK(ablation_rows == 4);
    bool has_pearson = false;
    for (const auto& e : r.scorecard) has_pearson |= e.id == "curved_pearson";
    CHECK(has_pearson);
    write_report(full.string());
    const auto summary = nlohmann::json::parse(read_file((full / "summary.json").string()));
    CHECK(summary["complete"].get<bool>());
  }
  SUBCASE("a missing cell makes the report incomplete") {
    fs::remove(cell_result_path(cfg, cell_key(cfg, experiment_cells(cfg)[7])));
    const Report r = build_report(full.string());
    CHECK_FALSE(r.complete);
    CHECK(r.missing.size() == 1);
    CHECK(write_report(full.string()) == 1);
  }
}

TEST_CASE("linear task alone writes the control table") {
  const fs::path dir = scratch("linear");
  ExperimentConfig cfg = tiny_config(dir);
  cfg.tasks = {TaskKind::linear};
  const ExperimentSummary s = run_experiment(cfg);
  CHECK(s.total_cells == 10);
  const std::string table = read_file((dir / "tableA4_linear_control.csv").string());
  CHECK(line_count(table) == 6);
  CHECK(table.rfind("alpha,n_seeds,accuracy_mean,accuracy_std,curvature_iso_mean,curvature_iso_std\n", 0) == 0);
  CHECK_FALSE(fs::exists(dir / "fig2_gate_vs_curvature.csv"));
}

TEST_CASE("an empty directory gives an incomplete report") {
  const fs::path dir = scratch("empty");
  fs::create_directories(dir);
  const Report r = build_report(dir.string());
  CHECK_FALSE(r.complete);
  CHECK_FALSE(r.all_pass());
  CHECK(write_report(dir.string()) == 1);
  CHECK(fs::exists(dir / "summary.json"));
}

TEST_CASE("scorecard arithmetic on synthetic cells") {
  ExperimentConfig cfg;
  cfg.tasks = {TaskKind::linear};
  cfg.alphas = {0.0, 1.0};
  cfg.seeds = {0, 1};
  std::vector<StoredCell> cells;
  auto add = [&](double alpha, std::uint64_t seed, double acc) {
    StoredCell c;
    c.spec = {TaskKind::linear, SweepGroup::strength, {GateVariant::strength, alpha}, seed};
    c.status = "ok";
    c.test_accuracy = acc;
    cells.push_back(c);
  };
  add(0.0, 0, 0.95);
  add(0.0, 1, 0.97);
  add(1.0, 0, 0.96);
  add(1.0, 1, 0.98);
  const auto sc = scorecard(cfg, cells);
  REQUIRE(sc.size() == 2);
  CHECK(sc[0].id == "linear_accuracy_band");
  CHECK(sc[0].value == doctest::Approx(0.96));
  CHECK(sc[0].pass);
  // Spread 0.01 against 2 x pooled std = 2 x 0.01414.
  CHECK(sc[1].value == doctest::Approx(0.01));
  CHECK(sc[1].threshold == doctest::Approx(2 * std::sqrt(2e-4)));
  CHECK(sc[1].pass);
}

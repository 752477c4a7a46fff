#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <string>

#include <sys/wait.h>

#include "gatedgeom/format.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using gatedgeom::read_file;
using gatedgeom::write_file_atomic;

namespace {

const fs::path kWork = fs::temp_directory_path() / "gatedgeom_cli_test";

// Runs the tool with stdout captured to a file; returns the exit status.
int run(const std::string& args, std::string* out = nullptr, const std::string& env = "") {
  fs::create_directories(kWork);
  const fs::path captured = kWork / "stdout.txt";
  const std::string cmd =
      env + " \"" GATEDGEOM_CLI_PATH "\" " + args + " > \"" + captured.string() + "\" 2> \"" + (kWork / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  if (out) *out = read_file(captured.string());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kTinyConfig = R"({
  "seeds": [0],
  "alphas": [0, 1],
  "condition_numbers": [2, 20],
  "ablation_variants": [],
  "dataset": {"n_train": 150, "n_test": 40},
  "train": {"epochs": 1},
  "model": {"d_model": 8, "d_hidden": 8},
  "proxy": {"n_directions": 4, "eval_points": 4},
  "boundary": {"resolution": 4, "alphas": [1], "seed": 0}
})";

}  // namespace

TEST_CASE("verify exit codes") {
  std::string out;
  CHECK(run("verify --only sphere-witness", &out) == 0);
  const auto j = nlohmann::json::parse(out);
  CHECK(j["pass"].get<bool>());
  CHECK(j["records"].size() >= 2);
  CHECK(run("verify --only no-such-check") == 2);
  CHECK(run("verify --only depth-amplification --L 1,2,4,8", &out) == 0);
  int gaps = 0;
  const auto depth = nlohmann::json::parse(out);
  for (const auto& r : depth["records"])
    gaps += r["quantity"].get<std::string>().rfind("relative gap", 0) == 0;
  CHECK(gaps == 4);
  CHECK(run("verify --L x --only depth-amplification") == 2);
}

TEST_CASE("usage errors") {
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("sweep --workers 0") == 2);
  CHECK(run("--help") == 0);
  const fs::path bad = kWork / "bad.json";
  write_file_atomic(bad.string(), R"({"epochs": 3})");
  CHECK(run("sweep " + bad.string()) == 2);
}

TEST_CASE("print-config shows the resolved defaults") {
  std::string out;
  CHECK(run("sweep --print-config", &out) == 0);
  const auto j = nlohmann::json::parse(out);
  CHECK(j["train"]["epochs"].get<int>() == 20);
  CHECK(j["alphas"].size() == 5);
  CHECK(run("sweep --print-config --workers 3 --task linear", &out) == 0);
  const auto k = nlohmann::json::parse(out);
  CHECK(k["workers"].get<int>() == 3);
  CHECK(k["tasks"].size() == 1);
}

TEST_CASE("sweep, report and boundary export through the output root") {
  const fs::path root = kWork / "root";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = kWork / "tiny.json";
  write_file_atomic(cfg.string(), kTinyConfig);
  const std::string env = "GATEDGEOM_OUTPUT_ROOT=\"" + root.string() + "\"";

  CHECK(run("sweep " + cfg.string() + " --output runs", nullptr, env) == 0);
  CHECK(fs::exists(root / "runs" / "records.csv"));
  CHECK(fs::exists(root / "runs" / "tableA4_linear_control.csv"));
  const std::string first = read_file((root / "runs" / "records.csv").string());
  CHECK(run("sweep " + cfg.string() + " --output runs", nullptr, env) == 0);
  CHECK(read_file((root / "runs" / "records.csv").string()) == first);

  std::string out;
  const int code = run("report runs", &out, env);
  const auto rep = nlohmann::json::parse(out);
  CHECK(rep["complete"].get<bool>());
  CHECK(code == (rep["pass"].get<bool>() ? 0 : 1));
  CHECK(fs::exists(root / "runs" / "summary.json"));

  fs::create_directories(root / "empty");
  CHECK(run("report empty", nullptr, env) == 1);

  CHECK(run("train --config " + cfg.string() + " --alpha 1 --out model", &out, env) == 0);
  CHECK(nlohmann::json::parse(out)["status"] == "ok");
  CHECK(fs::exists(root / "model" / "checkpoint.json"));
  CHECK(run("export-boundary --checkpoint model/checkpoint.json --resolution 5 --out grid.csv", nullptr, env) == 0);
  const std::string grid = read_file((root / "grid.csv").string());
  int lines = 0;
  for (char c : grid) lines += c == '\n';
  CHECK(lines == 1 + 25);
  CHECK(run("export-boundary --resolution 3", &out) == 0);
  CHECK(out.rfind("center_x,center_y,true_label,pred_label,logit_0,logit_1\n", 0) == 0);
}

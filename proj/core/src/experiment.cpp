#include "gatedgeom/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "gatedgeom/checkpoint.hpp"
#include "gatedgeom/errors.hpp"
#include "gatedgeom/format.hpp"
#include "gatedgeom/parallel.hpp"
#include "json.hpp"

namespace gatedgeom {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// ---- config (de)serialization ---------------------------------------------------

void reject_unknown(const nlohmann::json& obj, const std::string& where,
                    const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& target, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("wrong type for '" + (where.empty() ? std::string(key) : where + "." + key) + "'");
  }
}

ojson dataset_json(const DatasetSpec& d) {
  return ojson{{"n_train", d.n_train},         {"n_test", d.n_test},   {"seq_len", d.seq_len},
               {"noise_sigma", d.noise_sigma}, {"box_lo", d.box_lo},   {"box_hi", d.box_hi},
               {"linear_w", {d.linear_w[0], d.linear_w[1]}}};
}

ojson train_json(const TrainConfig& t) {
  return ojson{{"batch_size", t.batch_size},
               {"epochs", t.epochs},
               {"shuffle", t.shuffle},
               {"lr", t.optimizer.lr},
               {"weight_decay", t.optimizer.weight_decay},
               {"beta1", t.optimizer.beta1},
               {"beta2", t.optimizer.beta2},
               {"eps", t.optimizer.eps}};
}

ojson model_json(const ModelConfig& m) {
  return ojson{{"d_model", m.d_model}, {"d_hidden", m.d_hidden}, {"layernorm_eps", m.layernorm_eps}};
}

ojson proxy_json(const ProxyConfig& p) {
  return ojson{{"epsilon", p.epsilon},
               {"n_directions", p.n_directions},
               {"eval_points", p.eval_points},
               {"eval_seed", p.eval_seed},
               {"aggregate", to_string(p.aggregate)},
               {"input_mode", to_string(p.input_mode)}};
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string group_name(SweepGroup g) { return g == SweepGroup::strength ? "strength" : "ablation"; }

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  reject_unknown(j, "", {"output_dir", "workers", "tasks", "alphas", "condition_numbers", "seeds",
                         "ablation_variants", "dataset", "train", "model", "proxy", "boundary"});
  read(j, "output_dir", c.output_dir, "");
  read(j, "workers", c.workers, "");
  read(j, "alphas", c.alphas, "");
  read(j, "condition_numbers", c.condition_numbers, "");
  read(j, "seeds", c.seeds, "");
  if (j.contains("tasks")) {
    std::vector<std::string> names;
    read(j, "tasks", names, "");
    c.tasks.clear();
    for (const auto& n : names) c.tasks.push_back(parse_task_kind(n));
  }
  if (j.contains("ablation_variants")) {
    std::vector<std::string> names;
    read(j, "ablation_variants", names, "");
    c.ablation_variants.clear();
    for (const auto& n : names) c.ablation_variants.push_back(parse_gate_variant(n));
  }
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    reject_unknown(d, "dataset", {"n_train", "n_test", "seq_len", "noise_sigma", "box_lo", "box_hi", "linear_w"});
    read(d, "n_train", c.dataset.n_train, "dataset");
    read(d, "n_test", c.dataset.n_test, "dataset");
    read(d, "seq_len", c.dataset.seq_len, "dataset");
    read(d, "noise_sigma", c.dataset.noise_sigma, "dataset");
    read(d, "box_lo", c.dataset.box_lo, "dataset");
    read(d, "box_hi", c.dataset.box_hi, "dataset");
    if (d.contains("linear_w")) {
      std::vector<double> w;
      read(d, "linear_w", w, "dataset");
      if (w.size() != 2) throw ConfigError("dataset.linear_w must have two entries");
      c.dataset.linear_w = Eigen::Vector2d(w[0], w[1]);
    }
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    reject_unknown(t, "train", {"batch_size", "epochs", "shuffle", "lr", "weight_decay", "beta1", "beta2", "eps"});
    read(t, "batch_size", c.train.batch_size, "train");
    read(t, "epochs", c.train.epochs, "train");
    read(t, "shuffle", c.train.shuffle, "train");
    read(t, "lr", c.train.optimizer.lr, "train");
    read(t, "weight_decay", c.train.optimizer.weight_decay, "train");
    read(t, "beta1", c.train.optimizer.beta1, "train");
    read(t, "beta2", c.train.optimizer.beta2, "train");
    read(t, "eps", c.train.optimizer.eps, "train");
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    reject_unknown(m, "model", {"d_model", "d_hidden", "layernorm_eps"});
    read(m, "d_model", c.train.model.d_model, "model");
    read(m, "d_hidden", c.train.model.d_hidden, "model");
    read(m, "layernorm_eps", c.train.model.layernorm_eps, "model");
  }
  if (j.contains("proxy")) {
    const auto& p = j["proxy"];
    reject_unknown(p, "proxy", {"epsilon", "n_directions", "eval_points", "eval_seed", "aggregate", "input_mode"});
    read(p, "epsilon", c.proxy.epsilon, "proxy");
    read(p, "n_directions", c.proxy.n_directions, "proxy");
    read(p, "eval_points", c.proxy.eval_points, "proxy");
    read(p, "eval_seed", c.proxy.eval_seed, "proxy");
    std::string s;
    if (p.contains("aggregate")) {
      read(p, "aggregate", s, "proxy");
      c.proxy.aggregate = parse_proxy_aggregate(s);
    }
    if (p.contains("input_mode")) {
      read(p, "input_mode", s, "proxy");
      c.proxy.input_mode = parse_proxy_input_mode(s);
    }
  }
  if (j.contains("boundary")) {
    const auto& b = j["boundary"];
    reject_unknown(b, "boundary", {"resolution", "alphas", "seed"});
    read(b, "resolution", c.boundary.resolution, "boundary");
    read(b, "alphas", c.boundary.alphas, "boundary");
    read(b, "seed", c.boundary.seed, "boundary");
  }

  if (c.workers < 1) throw ConfigError("workers must be at least 1");
  if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
  if (c.train.batch_size < 1 || c.train.epochs < 0) throw ConfigError("invalid batch size or epoch count");
  if (c.dataset.n_train < 1 || c.dataset.n_test < 1 || c.dataset.seq_len < 1) {
    throw ConfigError("dataset sizes must be positive");
  }
  if (!(c.proxy.epsilon > 0.0) || c.proxy.n_directions < 1 || c.proxy.eval_points < 1) {
    throw ConfigError("proxy epsilon, n_directions and eval_points must be positive");
  }
  for (double k : c.condition_numbers)
    if (!(k >= 1.0)) throw ConfigError("condition numbers must be >= 1");
  for (double a : c.alphas)
    if (!(a >= 0.0)) throw ConfigError("gate strengths must be nonnegative");
  if (c.dataset.linear_w.norm() == 0.0) throw ConfigError("dataset.linear_w must be nonzero");
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(read_file(path));
}

std::string experiment_config_json(const ExperimentConfig& c) {
  ojson j;
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  j["tasks"] = ojson::array();
  for (auto t : c.tasks) j["tasks"].push_back(to_string(t));
  j["alphas"] = c.alphas;
  j["condition_numbers"] = c.condition_numbers;
  j["seeds"] = c.seeds;
  j["ablation_variants"] = ojson::array();
  for (auto v : c.ablation_variants) j["ablation_variants"].push_back(std::string(to_string(v)));
  j["dataset"] = dataset_json(c.dataset);
  j["train"] = train_json(c.train);
  j["model"] = model_json(c.train.model);
  j["proxy"] = proxy_json(c.proxy);
  j["boundary"] = ojson{{"resolution", c.boundary.resolution},
                        {"alphas", c.boundary.alphas},
                        {"seed", c.boundary.seed}};
  return j.dump(2) + "\n";
}

std::vector<CellSpec> experiment_cells(const ExperimentConfig& config) {
  std::vector<CellSpec> out;
  auto has = [&](TaskKind t) {
    return std::find(config.tasks.begin(), config.tasks.end(), t) != config.tasks.end();
  };
  auto add_strength = [&](TaskKind task) {
    for (const auto& s : strength_settings(config.alphas))
      for (auto seed : config.seeds) out.push_back({task, SweepGroup::strength, s, seed});
  };
  if (has(TaskKind::curved)) {
    add_strength(TaskKind::curved);
    for (auto v : config.ablation_variants) {
      const VariantSetting s{v, v == GateVariant::ungated ? 0.0 : 1.0};
      for (auto seed : config.seeds) out.push_back({TaskKind::curved, SweepGroup::ablation, s, seed});
    }
  }
  if (has(TaskKind::linear)) add_strength(TaskKind::linear);
  return out;
}

std::string cell_key(const ExperimentConfig& config, const CellSpec& cell) {
  ojson j;
  j["task"] = to_string(cell.task);
  j["variant"] = std::string(to_string(cell.setting.variant));
  j["alpha"] = cell.setting.alpha;
  j["seed"] = cell.seed;
  j["dataset"] = dataset_json(config.dataset);
  j["train"] = train_json(config.train);
  j["model"] = model_json(config.train.model);
  j["proxy"] = proxy_json(config.proxy);
  j["condition_numbers"] = config.condition_numbers;
  return fnv1a_hex(j.dump());
}

SweepSpec sweep_spec_for(const ExperimentConfig& config, TaskKind task) {
  SweepSpec s;
  s.task = task;
  s.condition_numbers = config.condition_numbers;
  s.seeds = config.seeds;
  s.data = config.dataset;
  s.data.task = task;
  s.train = config.train;
  s.proxy = config.proxy;
  return s;
}

std::string cell_result_path(const ExperimentConfig& config, const std::string& key) {
  return (fs::path(config.output_dir) / "cells" / (key + ".json")).string();
}

std::string cell_checkpoint_path(const ExperimentConfig& config, const std::string& key) {
  return (fs::path(config.output_dir) / "cells" / (key + ".ckpt.json")).string();
}

namespace {

std::string cell_json(const CellSpec& spec, const std::string& key, const CellResult& r) {
  ojson j;
  j["key"] = key;
  j["task"] = to_string(spec.task);
  j["group"] = group_name(spec.group);
  j["variant"] = std::string(to_string(spec.setting.variant));
  j["alpha"] = spec.setting.alpha;
  j["seed"] = spec.seed;
  j["status"] = r.status;
  j["diagnostic"] = r.diagnostic;
  j["test_accuracy"] = r.test_accuracy;
  j["curvature_iso"] = r.curvature.iso;
  j["curvature_aniso"] = r.curvature.aniso;
  j["curvature_sqrt_embed"] = r.curvature.sqrt_embed;
  j["epochs"] = ojson::array();
  for (const auto& e : r.epochs) {
    j["epochs"].push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"test_acc", e.test_acc}});
  }
  return j.dump(1) + "\n";
}

class Manifest {
 public:
  Manifest(std::string path, const std::vector<CellSpec>& cells, const std::vector<std::string>& keys)
      : path_(std::move(path)) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      entries_.push_back({keys[i], cells[i], "pending", ""});
    }
  }

  void set(std::size_t i, const std::string& status, const std::string& diagnostic) {
    std::lock_guard lock(mu_);
    entries_[i].status = status;
    entries_[i].diagnostic = diagnostic;
    write_locked();
  }

  void write() {
    std::lock_guard lock(mu_);
    write_locked();
  }

 private:
  struct Entry {
    std::string key;
    CellSpec cell;
    std::string status;
    std::string diagnostic;
  };

  void write_locked() const {
    ojson j;
    j["cells"] = ojson::array();
    for (const auto& e : entries_) {
      ojson row{{"key", e.key},
                {"task", to_string(e.cell.task)},
                {"group", group_name(e.cell.group)},
                {"variant", std::string(to_string(e.cell.setting.variant))},
                {"alpha", e.cell.setting.alpha},
                {"seed", e.cell.seed},
                {"status", e.status}};
      if (!e.diagnostic.empty()) row["diagnostic"] = e.diagnostic;
      j["cells"].push_back(std::move(row));
    }
    write_file_atomic(path_, j.dump(1) + "\n");
  }

  std::string path_;
  std::vector<Entry> entries_;
  std::mutex mu_;
};

}  // namespace

bool load_cell(const ExperimentConfig& config, const CellSpec& cell, StoredCell* out) {
  const std::string key = cell_key(config, cell);
  const std::string path = cell_result_path(config, key);
  if (!fs::exists(path)) return false;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception&) {
    return false;
  }
  if (!out) return true;
  out->spec = cell;
  out->key = key;
  out->status = j.value("status", "error");
  out->diagnostic = j.value("diagnostic", "");
  out->test_accuracy = j.value("test_accuracy", 0.0);
  out->curvature.iso = j.value("curvature_iso", 0.0);
  out->curvature.aniso = j.value("curvature_aniso", std::vector<double>{});
  out->curvature.sqrt_embed = j.value("curvature_sqrt_embed", 0.0);
  out->epochs.clear();
  for (const auto& e : j.value("epochs", nlohmann::json::array())) {
    out->epochs.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(),
                           e.at("test_acc").get<double>()});
  }
  return true;
}

ExperimentSummary run_experiment(const ExperimentConfig& config, int max_new_cells,
                                 const std::function<void(const std::string&)>& log) {
  fs::create_directories(fs::path(config.output_dir) / "cells");
  write_file_atomic((fs::path(config.output_dir) / "resolved_config.json").string(),
                    experiment_config_json(config));

  const auto cells = experiment_cells(config);
  std::vector<std::string> keys;
  for (const auto& c : cells) keys.push_back(cell_key(config, c));

  ExperimentSummary summary;
  summary.total_cells = static_cast<int>(cells.size());
  Manifest manifest((fs::path(config.output_dir) / "manifest.json").string(), cells, keys);

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    StoredCell stored;
    if (load_cell(config, cells[i], &stored)) {
      manifest.set(i, stored.status, stored.diagnostic);
      ++summary.skipped;
    } else {
      pending.push_back(i);
    }
  }
  if (max_new_cells >= 0 && pending.size() > static_cast<std::size_t>(max_new_cells)) {
    pending.resize(max_new_cells);
  }
  manifest.write();

  std::mutex log_mu;
  for_each_parallel(pending.size(), config.workers, [&](std::size_t k) {
    const std::size_t i = pending[k];
    const CellSpec& cell = cells[i];
    const std::string label = to_string(cell.task) + "/" + cell.setting.label() + "/seed" +
                              std::to_string(cell.seed);
    try {
      const CellResult r = run_cell(sweep_spec_for(config, cell.task), cell.setting, cell.seed);
      save_checkpoint(cell_checkpoint_path(config, keys[i]), r.params);
      write_file_atomic(cell_result_path(config, keys[i]), cell_json(cell, keys[i], r));
      manifest.set(i, r.status, r.diagnostic);
      if (log) {
        std::lock_guard lock(log_mu);
        log(label + " " + r.status + " acc=" + format_number(r.test_accuracy) +
            " iso=" + format_number(r.curvature.iso));
      }
    } catch (const std::exception& e) {
      manifest.set(i, "error", e.what());
      if (log) {
        std::lock_guard lock(log_mu);
        log(label + " error: " + e.what());
      }
    }
  });
  summary.executed = static_cast<int>(pending.size());

  for (std::size_t i = 0; i < cells.size(); ++i) {
    StoredCell stored;
    if (!load_cell(config, cells[i], &stored)) {
      if (max_new_cells < 0) summary.failed.push_back(keys[i]);
    } else if (stored.status != "ok") {
      summary.failed.push_back(keys[i]);
    }
  }
  if (max_new_cells < 0) write_experiment_outputs(config);
  return summary;
}

// ---- output files ---------------------------------------------------------------

std::string records_csv(const std::vector<SweepRecord>& records) {
  std::ostringstream out;
  out << "task,variant,alpha,condition_number,seed,test_accuracy,curvature_iso,curvature_aniso,"
         "curvature_sqrt_embed,status\n";
  for (const auto& r : records) {
    out << r.task << ',' << r.variant << ',' << format_number(r.alpha) << ','
        << format_number(r.condition_number) << ',' << r.seed << ',' << format_number(r.test_accuracy) << ','
        << format_number(r.curvature_iso) << ',' << format_number(r.curvature_aniso) << ','
        << format_number(r.curvature_sqrt_embed) << ',' << r.status << '\n';
  }
  return out.str();
}

std::string records_jsonl(const std::vector<SweepRecord>& records) {
  std::ostringstream out;
  for (const auto& r : records) {
    ojson j{{"task", r.task},
            {"variant", r.variant},
            {"alpha", r.alpha},
            {"condition_number", r.condition_number},
            {"seed", r.seed},
            {"test_accuracy", r.test_accuracy},
            {"curvature_iso", r.curvature_iso},
            {"curvature_aniso", r.curvature_aniso},
            {"curvature_sqrt_embed", r.curvature_sqrt_embed},
            {"status", r.status}};
    out << j.dump() << '\n';
  }
  return out.str();
}

namespace {

struct Stats {
  double mean = 0.0;
  double std = 0.0;
  int n = 0;
};

Stats stats_of(const std::vector<double>& xs) {
  return Stats{mean(xs), sample_std(xs), static_cast<int>(xs.size())};
}

std::string run_id(const StoredCell& c) {
  return to_string(c.spec.task) + "/" + c.spec.setting.label() + "/seed" + std::to_string(c.spec.seed);
}

}  // namespace

void write_experiment_outputs(const ExperimentConfig& config) {
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  const auto cells = experiment_cells(config);
  std::vector<StoredCell> stored;
  for (const auto& c : cells) {
    StoredCell s;
    if (load_cell(config, c, &s)) stored.push_back(std::move(s));
  }

  std::vector<SweepRecord> records;
  std::ostringstream metrics;
  for (const auto& s : stored) {
    CellResult r;
    r.task = s.spec.task;
    r.setting = s.spec.setting;
    r.seed = s.spec.seed;
    r.status = s.status;
    r.test_accuracy = s.test_accuracy;
    r.curvature = s.curvature;
    const auto rec = cell_records(sweep_spec_for(config, s.spec.task), r);
    records.insert(records.end(), rec.begin(), rec.end());
    for (const auto& e : s.epochs) {
      ojson j{{"run_id", run_id(s)},
              {"task", to_string(s.spec.task)},
              {"variant", std::string(to_string(s.spec.setting.variant))},
              {"alpha", s.spec.setting.alpha},
              {"seed", s.spec.seed},
              {"epoch", e.epoch},
              {"train_loss", e.train_loss},
              {"test_acc", e.test_acc}};
      metrics << j.dump() << '\n';
    }
  }
  write_file_atomic((dir / "records.csv").string(), records_csv(records));
  write_file_atomic((dir / "records.jsonl").string(), records_jsonl(records));
  write_file_atomic((dir / "metrics.jsonl").string(), metrics.str());

  auto select = [&](TaskKind task, SweepGroup group) {
    std::vector<const StoredCell*> out;
    for (const auto& s : stored)
      if (s.spec.task == task && s.spec.group == group && s.status == "ok") out.push_back(&s);
    return out;
  };
  const std::size_t n_kappa = config.condition_numbers.size();

  const auto curved = select(TaskKind::curved, SweepGroup::strength);
  const bool has_curved =
      std::find(config.tasks.begin(), config.tasks.end(), TaskKind::curved) != config.tasks.end();
  if (has_curved) {
    std::ostringstream fig2, fig4, fig6;
    fig2 << "alpha,condition_number,n_seeds,curvature_iso_mean,curvature_iso_std,curvature_aniso_mean,"
            "curvature_aniso_std\n";
    fig6 << "alpha,condition_number,curvature_iso_mean,curvature_aniso_mean,aniso_over_iso\n";
    fig4 << "alpha,seed,test_accuracy,curvature_iso,curvature_sqrt_embed\n";
    for (double alpha : config.alphas) {
      std::vector<const StoredCell*> at;
      for (auto* c : curved)
        if (c->spec.setting.alpha == alpha) at.push_back(c);
      std::vector<double> iso;
      for (auto* c : at) iso.push_back(c->curvature.iso);
      const Stats si = stats_of(iso);
      for (std::size_t k = 0; k < n_kappa; ++k) {
        std::vector<double> an;
        for (auto* c : at)
          if (k < c->curvature.aniso.size()) an.push_back(c->curvature.aniso[k]);
        const Stats sa = stats_of(an);
        const std::string a = format_number(alpha), kap = format_number(config.condition_numbers[k]);
        fig2 << a << ',' << kap << ',' << si.n << ',' << format_number(si.mean) << ','
             << format_number(si.std) << ',' << format_number(sa.mean) << ',' << format_number(sa.std) << '\n';
        fig6 << a << ',' << kap << ',' << format_number(si.mean) << ',' << format_number(sa.mean) << ','
             << format_number(si.mean != 0.0 ? sa.mean / si.mean : 0.0) << '\n';
      }
      for (auto* c : at) {
        fig4 << format_number(alpha) << ',' << c->spec.seed << ',' << format_number(c->test_accuracy) << ','
             << format_number(c->curvature.iso) << ',' << format_number(c->curvature.sqrt_embed) << '\n';
      }
    }
    write_file_atomic((dir / "fig2_gate_vs_curvature.csv").string(), fig2.str());
    write_file_atomic((dir / "fig4_curvature_vs_accuracy.csv").string(), fig4.str());
    write_file_atomic((dir / "fig6_iso_vs_aniso.csv").string(), fig6.str());

    // Decision boundaries of the selected strengths at the boundary seed.
    std::ostringstream fig3;
    fig3 << "variant,alpha,seed,center_x,center_y,true_label,pred_label,logit_0,logit_1\n";
    DatasetSpec grid_spec = config.dataset;
    grid_spec.task = TaskKind::curved;
    for (double alpha : config.boundary.alphas) {
      const CellSpec cell{TaskKind::curved, SweepGroup::strength, {GateVariant::strength, alpha},
                          config.boundary.seed};
      const std::string ckpt = cell_checkpoint_path(config, cell_key(config, cell));
      if (!fs::exists(ckpt)) continue;
      const ModelParams params = load_checkpoint(ckpt);
      const std::string grid = grid_csv(latent_grid(grid_spec, config.boundary.resolution, &params));
      std::istringstream lines(grid);
      std::string line;
      std::getline(lines, line);  // header
      const std::string prefix = "strength," + format_number(alpha) + "," + std::to_string(cell.seed) + ",";
      while (std::getline(lines, line)) fig3 << prefix << line << '\n';
    }
    write_file_atomic((dir / "fig3_boundaries.csv").string(), fig3.str());

    if (!config.ablation_variants.empty()) {
      const auto abl = select(TaskKind::curved, SweepGroup::ablation);
      std::ostringstream fig5, fig5a;
      fig5 << "variant,n_seeds,accuracy_mean,accuracy_std,curvature_iso_mean,curvature_iso_std,"
              "curvature_sqrt_embed_mean,curvature_sqrt_embed_std\n";
      fig5a << "variant,condition_number,n_seeds,accuracy_mean,accuracy_std,curvature_aniso_mean,"
               "curvature_aniso_std\n";
      for (auto v : config.ablation_variants) {
        std::vector<double> acc, iso, sq;
        std::vector<std::vector<double>> an(n_kappa);
        for (auto* c : abl) {
          if (c->spec.setting.variant != v) continue;
          acc.push_back(c->test_accuracy);
          iso.push_back(c->curvature.iso);
          sq.push_back(c->curvature.sqrt_embed);
          for (std::size_t k = 0; k < n_kappa && k < c->curvature.aniso.size(); ++k)
            an[k].push_back(c->curvature.aniso[k]);
        }
        const Stats sa = stats_of(acc), si = stats_of(iso), ss = stats_of(sq);
        const std::string name(to_string(v));
        fig5 << name << ',' << sa.n << ',' << format_number(sa.mean) << ',' << format_number(sa.std) << ','
             << format_number(si.mean) << ',' << format_number(si.std) << ',' << format_number(ss.mean) << ','
             << format_number(ss.std) << '\n';
        for (std::size_t k = 0; k < n_kappa; ++k) {
          const Stats sk = stats_of(an[k]);
          fig5a << name << ',' << format_number(config.condition_numbers[k]) << ',' << sa.n << ','
                << format_number(sa.mean) << ',' << format_number(sa.std) << ',' << format_number(sk.mean)
                << ',' << format_number(sk.std) << '\n';
        }
      }
      write_file_atomic((dir / "fig5_ablation.csv").string(), fig5.str());
      write_file_atomic((dir / "fig5_ablation_aniso.csv").string(), fig5a.str());
    }
  }

  if (std::find(config.tasks.begin(), config.tasks.end(), TaskKind::linear) != config.tasks.end()) {
    const auto lin = select(TaskKind::linear, SweepGroup::strength);
    std::ostringstream tab;
    tab << "alpha,n_seeds,accuracy_mean,accuracy_std,curvature_iso_mean,curvature_iso_std\n";
    for (double alpha : config.alphas) {
      std::vector<double> acc, iso;
      for (auto* c : lin) {
        if (c->spec.setting.alpha != alpha) continue;
        acc.push_back(c->test_accuracy);
        iso.push_back(c->curvature.iso);
      }
      const Stats sa = stats_of(acc), si = stats_of(iso);
      tab << format_number(alpha) << ',' << sa.n << ',' << format_number(sa.mean) << ','
          << format_number(sa.std) << ',' << format_number(si.mean) << ',' << format_number(si.std) << '\n';
    }
    write_file_atomic((dir / "tableA4_linear_control.csv").string(), tab.str());
  }
}

}  // namespace gatedgeom

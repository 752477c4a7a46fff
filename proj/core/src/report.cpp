#include "gatedgeom/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "gatedgeom/errors.hpp"
#include "gatedgeom/format.hpp"
#include "json.hpp"

namespace gatedgeom {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

bool Report::all_pass() const {
  if (!complete) return false;
  return std::all_of(scorecard.begin(), scorecard.end(), [](const ScoreEntry& e) { return e.pass; });
}

namespace {

std::vector<const StoredCell*> pick(const std::vector<StoredCell>& cells, TaskKind task, SweepGroup group,
                                    const VariantSetting& setting) {
  std::vector<const StoredCell*> out;
  for (const auto& c : cells)
    if (c.spec.task == task && c.spec.group == group && c.spec.setting == setting && c.status == "ok")
      out.push_back(&c);
  return out;
}

template <typename F>
std::vector<double> column(const std::vector<const StoredCell*>& cells, F f) {
  std::vector<double> out;
  for (auto* c : cells) out.push_back(f(*c));
  return out;
}

double acc_of(const StoredCell& c) { return c.test_accuracy; }
double iso_of(const StoredCell& c) { return c.curvature.iso; }

bool has_alpha(const ExperimentConfig& config, double alpha) {
  return std::find(config.alphas.begin(), config.alphas.end(), alpha) != config.alphas.end();
}

bool has_task(const ExperimentConfig& config, TaskKind t) {
  return std::find(config.tasks.begin(), config.tasks.end(), t) != config.tasks.end();
}

VariantSetting strength(double alpha) { return {GateVariant::strength, alpha}; }

}  // namespace

std::vector<ScoreEntry> scorecard(const ExperimentConfig& config, const std::vector<StoredCell>& cells) {
  std::vector<ScoreEntry> out;
  const auto curved = [&](double a) { return pick(cells, TaskKind::curved, SweepGroup::strength, strength(a)); };

  if (has_task(config, TaskKind::curved)) {
    if (has_alpha(config, 0.0) && has_alpha(config, 1.0)) {
      const double a1 = mean(column(curved(1.0), acc_of));
      const double a0 = mean(column(curved(0.0), acc_of));
      out.push_back({"curved_gated_accuracy", "mean accuracy at alpha 1 minus alpha 0 (> 0)", a1 - a0, 0.0,
                     a1 - a0 > 0.0});
    }
    if (has_alpha(config, 0.0) && has_alpha(config, 1.5)) {
      const double k15 = mean(column(curved(1.5), iso_of));
      const double k0 = mean(column(curved(0.0), iso_of));
      out.push_back({"curved_gate_curvature", "mean iso curvature at alpha 1.5 minus alpha 0 (> 0)", k15 - k0,
                     0.0, k15 - k0 > 0.0});
    }

    std::vector<double> iso, acc;
    for (double a : config.alphas)
      for (auto* c : curved(a)) {
        iso.push_back(c->curvature.iso);
        acc.push_back(c->test_accuracy);
      }
    ScoreEntry p{"curved_pearson", "pearson(curvature_iso, accuracy) over (alpha, seed) (> 0.4)", 0.0, 0.4, false};
    try {
      p.value = pearson(iso, acc);
      p.pass = p.value > 0.4;
    } catch (const Error&) {
      p.value = std::nan("");
    }
    out.push_back(p);

    // The record layer repeats one iso value per condition number; compare the
    // rows it actually emits.
    const SweepSpec spec = sweep_spec_for(config, TaskKind::curved);
    double spread = 0.0;
    for (const auto& c : cells) {
      if (c.spec.task != TaskKind::curved || c.status != "ok") continue;
      CellResult r;
      r.task = c.spec.task;
      r.setting = c.spec.setting;
      r.seed = c.spec.seed;
      r.test_accuracy = c.test_accuracy;
      r.curvature = c.curvature;
      const auto recs = cell_records(spec, r);
      for (const auto& rec : recs) spread = std::max(spread, std::abs(rec.curvature_iso - recs.front().curvature_iso));
    }
    out.push_back({"iso_invariant_across_condition", "max iso difference across condition numbers (== 0)", spread,
                   0.0, spread == 0.0});

    // Alpha ordering of mean iso against mean aniso at each condition number.
    std::vector<double> iso_means;
    for (double a : config.alphas) iso_means.push_back(mean(column(curved(a), iso_of)));
    for (std::size_t k = 0; k < config.condition_numbers.size(); ++k) {
      std::vector<double> an;
      for (double a : config.alphas)
        an.push_back(mean(column(curved(a), [k](const StoredCell& c) {
          return k < c.curvature.aniso.size() ? c.curvature.aniso[k] : std::nan("");
        })));
      ScoreEntry s{"spearman_kappa_" + format_number(config.condition_numbers[k]),
                   "spearman of alpha ordering, iso vs aniso (>= 0.9)", 0.0, 0.9, false};
      try {
        s.value = spearman(iso_means, an);
        s.pass = s.value >= 0.9;
      } catch (const Error&) {
        s.value = std::nan("");
      }
      out.push_back(s);
    }

    if (!config.ablation_variants.empty()) {
      int full_rows = 0;
      for (auto v : config.ablation_variants) {
        const VariantSetting s{v, v == GateVariant::ungated ? 0.0 : 1.0};
        if (pick(cells, TaskKind::curved, SweepGroup::ablation, s).size() == config.seeds.size()) ++full_rows;
      }
      const double want = static_cast<double>(config.ablation_variants.size());
      out.push_back({"ablation_rows", "ablation variants with every seed present", static_cast<double>(full_rows),
                     want, full_rows == static_cast<int>(want)});
    }
  }

  if (has_task(config, TaskKind::linear)) {
    const auto linear = [&](double a) { return pick(cells, TaskKind::linear, SweepGroup::strength, strength(a)); };
    if (has_alpha(config, 0.0)) {
      const double a0 = mean(column(linear(0.0), acc_of));
      out.push_back({"linear_accuracy_band", "mean accuracy at alpha 0 within [0.94, 0.99]", a0, 0.94,
                     a0 >= 0.94 && a0 <= 0.99});
    }
    double lo = 1e300, hi = -1e300, var_sum = 0.0;
    for (double a : config.alphas) {
      const auto accs = column(linear(a), acc_of);
      const double m = mean(accs);
      lo = std::min(lo, m);
      hi = std::max(hi, m);
      const double sd = sample_std(accs);
      var_sum += sd * sd;
    }
    const double pooled = config.alphas.empty() ? 0.0 : std::sqrt(var_sum / static_cast<double>(config.alphas.size()));
    out.push_back({"linear_no_advantage", "max accuracy spread across alphas (< 2 x pooled seed std)", hi - lo,
                   2.0 * pooled, hi - lo < 2.0 * pooled});
  }
  return out;
}

Report build_report(const std::string& dir) {
  Report report;
  const fs::path cfg_path = fs::path(dir) / "resolved_config.json";
  if (!fs::exists(cfg_path)) {
    report.missing.push_back("resolved_config.json");
    return report;
  }
  ExperimentConfig config = load_experiment_config(cfg_path.string());
  config.output_dir = dir;

  std::vector<StoredCell> cells;
  for (const auto& spec : experiment_cells(config)) {
    StoredCell c;
    if (!load_cell(config, spec, &c)) {
      report.missing.push_back(cell_key(config, spec));
      continue;
    }
    if (c.status != "ok") report.missing.push_back(c.key);
    cells.push_back(std::move(c));
  }
  report.complete = report.missing.empty();

  std::vector<std::pair<TaskKind, SweepGroup>> groups;
  for (const auto& spec : experiment_cells(config)) {
    const std::string task = to_string(spec.task);
    const std::string group = spec.group == SweepGroup::strength ? "strength" : "ablation";
    const std::string label = spec.setting.label();
    const bool seen = std::any_of(report.aggregates.begin(), report.aggregates.end(), [&](const AggregateRow& r) {
      return r.task == task && r.group == group && r.setting == label;
    });
    if (seen) continue;
    const auto sel = pick(cells, spec.task, spec.group, spec.setting);
    AggregateRow row;
    row.task = task;
    row.group = group;
    row.setting = label;
    row.n = static_cast<int>(sel.size());
    const auto acc = column(sel, acc_of), iso = column(sel, iso_of);
    const auto sq = column(sel, [](const StoredCell& c) { return c.curvature.sqrt_embed; });
    row.accuracy_mean = mean(acc);
    row.accuracy_std = sample_std(acc);
    row.iso_mean = mean(iso);
    row.iso_std = sample_std(iso);
    row.sqrt_embed_mean = mean(sq);
    row.sqrt_embed_std = sample_std(sq);
    for (std::size_t k = 0; k < config.condition_numbers.size(); ++k) {
      std::vector<double> an;
      for (auto* c : sel)
        if (k < c->curvature.aniso.size()) an.push_back(c->curvature.aniso[k]);
      row.aniso_mean.push_back(mean(an));
      row.aniso_std.push_back(sample_std(an));
    }
    report.aggregates.push_back(std::move(row));
  }
  report.scorecard = scorecard(config, cells);
  return report;
}

namespace {

// NaN is not representable in JSON; write null instead.
ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

}  // namespace

std::string report_json(const Report& report) {
  ojson j;
  j["complete"] = report.complete;
  j["pass"] = report.all_pass();
  j["missing"] = report.missing;
  j["aggregates"] = ojson::array();
  for (const auto& r : report.aggregates) {
    ojson an_m = ojson::array(), an_s = ojson::array();
    for (double v : r.aniso_mean) an_m.push_back(number_or_null(v));
    for (double v : r.aniso_std) an_s.push_back(number_or_null(v));
    j["aggregates"].push_back({{"task", r.task},
                               {"group", r.group},
                               {"setting", r.setting},
                               {"n", r.n},
                               {"accuracy_mean", number_or_null(r.accuracy_mean)},
                               {"accuracy_std", number_or_null(r.accuracy_std)},
                               {"curvature_iso_mean", number_or_null(r.iso_mean)},
                               {"curvature_iso_std", number_or_null(r.iso_std)},
                               {"curvature_sqrt_embed_mean", number_or_null(r.sqrt_embed_mean)},
                               {"curvature_sqrt_embed_std", number_or_null(r.sqrt_embed_std)},
                               {"curvature_aniso_mean", an_m},
                               {"curvature_aniso_std", an_s}});
  }
  j["scorecard"] = ojson::array();
  for (const auto& e : report.scorecard) {
    j["scorecard"].push_back({{"id", e.id},
                              {"description", e.description},
                              {"value", number_or_null(e.value)},
                              {"threshold", e.threshold},
                              {"pass", e.pass}});
  }
  return j.dump(2) + "\n";
}

int write_report(const std::string& dir) {
  const Report report = build_report(dir);
  if (fs::exists(fs::path(dir) / "resolved_config.json")) {
    ExperimentConfig config = load_experiment_config((fs::path(dir) / "resolved_config.json").string());
    config.output_dir = dir;
    write_experiment_outputs(config);
  }
  if (fs::is_directory(dir)) write_file_atomic((fs::path(dir) / "summary.json").string(), report_json(report));
  return report.all_pass() ? 0 : 1;
}

}  // namespace gatedgeom

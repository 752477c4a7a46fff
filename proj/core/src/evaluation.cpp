#include "gatedgeom/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "gatedgeom/errors.hpp"
#include "gatedgeom/geometry.hpp"
#include "gatedgeom/parallel.hpp"
#include "gatedgeom/rng.hpp"

namespace gatedgeom {

ProxyAggregate parse_proxy_aggregate(const std::string& name) {
  if (name == "mean_of_norms") return ProxyAggregate::mean_of_norms;
  if (name == "norm_of_mean") return ProxyAggregate::norm_of_mean;
  throw ConfigError("unknown proxy aggregate '" + name + "'");
}

std::string to_string(ProxyAggregate a) {
  return a == ProxyAggregate::mean_of_norms ? "mean_of_norms" : "norm_of_mean";
}

ProxyInputMode parse_proxy_input_mode(const std::string& name) {
  if (name == "constant_sequence") return ProxyInputMode::constant_sequence;
  if (name == "noisy_tokens") return ProxyInputMode::noisy_tokens;
  throw ConfigError("unknown proxy input mode '" + name + "'");
}

std::string to_string(ProxyInputMode m) {
  return m == ProxyInputMode::constant_sequence ? "constant_sequence" : "noisy_tokens";
}

std::vector<Vec> proxy_directions(const ProxyConfig& config, int dim, std::uint64_t point_index) {
  if (config.n_directions < 1) throw ConfigError("n_directions must be positive");
  CounterRng rng(config.eval_seed, "proxy/directions", point_index);
  std::vector<Vec> dirs;
  dirs.reserve(config.n_directions);
  for (int k = 0; k < config.n_directions; ++k) {
    Vec v(dim);
    double n = 0.0;
    while (n < 1e-12) {
      for (int i = 0; i < dim; ++i) v[i] = rng.normal();
      n = v.norm();
    }
    dirs.push_back(v / n);
  }
  return dirs;
}

namespace {

// Second differences already divided by ε², optionally weighted by sqrt(P).
double aggregate_second_differences(const std::vector<Vec>& diffs, const Vec* sqrt_weights,
                                    ProxyAggregate aggregate) {
  if (diffs.empty()) return 0.0;
  if (aggregate == ProxyAggregate::mean_of_norms) {
    double total = 0.0;
    for (const auto& d : diffs) {
      total += sqrt_weights ? d.cwiseProduct(*sqrt_weights).norm() : d.norm();
    }
    return total / static_cast<double>(diffs.size());
  }
  Vec sum = Vec::Zero(diffs.front().size());
  for (const auto& d : diffs) sum += d;
  sum /= static_cast<double>(diffs.size());
  return sqrt_weights ? sum.cwiseProduct(*sqrt_weights).norm() : sum.norm();
}

std::vector<Vec> second_differences(const RepresentationFn& f, const Vec& x,
                                    const std::vector<Vec>& directions, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("proxy epsilon must be positive");
  const Vec f0 = f(x);
  std::vector<Vec> out;
  out.reserve(directions.size());
  for (const auto& v : directions) {
    Vec d = (f(x + epsilon * v) - 2.0 * f0 + f(x - epsilon * v)) / (epsilon * epsilon);
    if (!d.allFinite()) throw DomainError("non-finite representation in curvature proxy");
    out.push_back(std::move(d));
  }
  return out;
}

Vec sqrt_weights_for(const Vec& precision) {
  if ((precision.array() <= 0.0).any()) throw ConfigError("precision entries must be positive");
  return precision.cwiseSqrt();
}

}  // namespace

double curvature_proxy(const RepresentationFn& f, const Vec& x, const std::vector<Vec>& directions,
                       double epsilon, ProxyAggregate aggregate) {
  return aggregate_second_differences(second_differences(f, x, directions, epsilon), nullptr,
                                      aggregate);
}

double curvature_proxy(const RepresentationFn& f, const Vec& x, const ProxyConfig& config,
                       std::uint64_t point_index) {
  const auto dirs = proxy_directions(config, static_cast<int>(x.size()), point_index);
  return curvature_proxy(f, x, dirs, config.epsilon, config.aggregate);
}

double anisotropic_proxy(const RepresentationFn& f, const Vec& x, const std::vector<Vec>& directions,
                         double epsilon, const Vec& precision, ProxyAggregate aggregate) {
  const auto diffs = second_differences(f, x, directions, epsilon);
  if (!diffs.empty() && diffs.front().size() != precision.size()) {
    throw DimensionError("precision size does not match the representation");
  }
  const Vec w = sqrt_weights_for(precision);
  return aggregate_second_differences(diffs, &w, aggregate);
}

Vec sqrt_embedding(const Vec& logits) {
  const double m = logits.maxCoeff();
  Vec p = (logits.array() - m).exp().matrix();
  p /= p.sum();
  return 2.0 * p.cwiseSqrt();
}

double sqrt_embed_proxy(const ModelParams& model, const Vec& center, const ProxyConfig& config,
                        int seq_len, std::uint64_t point_index) {
  RepresentationFn f = [&](const Vec& c) {
    return sqrt_embedding(model_forward(constant_sequence(c, seq_len), model));
  };
  return curvature_proxy(f, center, config, point_index);
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw DimensionError("pearson needs equal-length samples");
  if (xs.size() < 2) throw PreconditionError("pearson needs at least two points", xs.size());
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw PreconditionError("correlation undefined for a zero-variance sample", std::min(sxx, syy));
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  return pearson(average_ranks(xs), average_ranks(ys));
}

std::vector<Eigen::Vector2d> evaluation_centers(const ProxyConfig& config, const DatasetSpec& data) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(config.eval_points);
  for (int i = 0; i < config.eval_points; ++i) {
    CounterRng rng(config.eval_seed, "eval/center", static_cast<std::uint64_t>(i));
    const double x = rng.uniform(data.box_lo, data.box_hi);
    const double y = rng.uniform(data.box_lo, data.box_hi);
    out.emplace_back(x, y);
  }
  return out;
}

ModelCurvature measure_model_curvature(const ModelParams& model, const ProxyConfig& config,
                                       const DatasetSpec& data,
                                       const std::vector<double>& condition_numbers) {
  const int n = data.seq_len;
  const int d = model.d_model();
  const double eps = config.epsilon;
  std::vector<Vec> sqrt_w;
  for (double kappa : condition_numbers) {
    sqrt_w.push_back(PrecisionSpec::log_spaced(d, kappa).weights(d).cwiseSqrt());
  }

  ModelCurvature out;
  out.aniso.assign(condition_numbers.size(), 0.0);
  const auto centers = evaluation_centers(config, data);
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const auto dirs = proxy_directions(config, 2, i);
    Mat base = constant_sequence(centers[i], n);
    if (config.input_mode == ProxyInputMode::noisy_tokens) {
      CounterRng rng(config.eval_seed, "eval/noise", i);
      for (int t = 0; t < n; ++t)
        for (int c = 0; c < 2; ++c) base(t, c) += data.noise_sigma * rng.normal();
    }
    // One batched pass: the base sequence, then +εv and -εv for every direction.
    const int rows = 1 + 2 * static_cast<int>(dirs.size());
    Mat stacked(rows * n, 2);
    stacked.topRows(n) = base;
    for (std::size_t k = 0; k < dirs.size(); ++k) {
      const Eigen::RowVector2d shift = eps * dirs[k].transpose();
      stacked.middleRows((1 + 2 * k) * n, n) = base.rowwise() + shift;
      stacked.middleRows((2 + 2 * k) * n, n) = base.rowwise() - shift;
    }
    const ForwardTrace trace = forward_trace(stacked, n, model);

    std::vector<Vec> rep_diffs, out_diffs;
    const Vec r0 = trace.pooled.row(0).transpose();
    const Vec e0 = sqrt_embedding(trace.logits.row(0).transpose());
    for (std::size_t k = 0; k < dirs.size(); ++k) {
      const Eigen::Index p = 1 + 2 * static_cast<Eigen::Index>(k);
      Vec dr = (trace.pooled.row(p).transpose() - 2.0 * r0 + trace.pooled.row(p + 1).transpose()) /
               (eps * eps);
      Vec de = (sqrt_embedding(trace.logits.row(p).transpose()) - 2.0 * e0 +
                sqrt_embedding(trace.logits.row(p + 1).transpose())) /
               (eps * eps);
      if (!dr.allFinite() || !de.allFinite()) {
        throw DomainError("non-finite representation in curvature proxy");
      }
      rep_diffs.push_back(std::move(dr));
      out_diffs.push_back(std::move(de));
    }
    out.iso += aggregate_second_differences(rep_diffs, nullptr, config.aggregate);
    for (std::size_t c = 0; c < sqrt_w.size(); ++c) {
      out.aniso[c] += aggregate_second_differences(rep_diffs, &sqrt_w[c], config.aggregate);
    }
    out.sqrt_embed += aggregate_second_differences(out_diffs, nullptr, config.aggregate);
  }
  const double count = static_cast<double>(std::max<std::size_t>(centers.size(), 1));
  out.iso /= count;
  for (auto& a : out.aniso) a /= count;
  out.sqrt_embed /= count;
  return out;
}

std::string VariantSetting::label() const {
  if (variant == GateVariant::strength) return "strength_" + format_alpha(alpha);
  return std::string(to_string(variant));
}

std::string format_alpha(double alpha) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", alpha);
  return buf;
}

std::vector<VariantSetting> strength_settings(const std::vector<double>& alphas) {
  std::vector<VariantSetting> out;
  for (double a : alphas) {
    if (!(a >= 0.0)) throw ConfigError("gate strength must be nonnegative");
    out.push_back({GateVariant::strength, a});
  }
  return out;
}

std::vector<VariantSetting> ablation_settings() {
  return {{GateVariant::ungated, 0.0},
          {GateVariant::silu, 1.0},
          {GateVariant::gated_sigmoid, 1.0},
          {GateVariant::gated_nonsparse, 1.0}};
}

CellResult run_cell(const SweepSpec& spec, const VariantSetting& setting, std::uint64_t seed) {
  DatasetSpec data_spec = spec.data;
  data_spec.task = spec.task;
  const Dataset data = generate(data_spec, seed);

  TrainConfig tc = spec.train;
  tc.model.variant = setting.variant;
  tc.model.alpha = setting.alpha;

  CellResult cell;
  cell.task = spec.task;
  cell.setting = setting;
  cell.seed = seed;
  TrainResult run = train(tc, data, seed);
  cell.epochs = run.epochs;
  cell.test_accuracy = run.test_accuracy;
  if (run.aborted) {
    cell.status = "aborted";
    cell.diagnostic = run.diagnostic;
    cell.params = std::move(run.params);
    return cell;
  }
  try {
    cell.curvature = measure_model_curvature(run.params, spec.proxy, data_spec, spec.condition_numbers);
  } catch (const Error& e) {
    cell.status = "proxy_failed";
    cell.diagnostic = e.what();
  }
  cell.params = std::move(run.params);
  return cell;
}

std::vector<SweepRecord> cell_records(const SweepSpec& spec, const CellResult& cell) {
  std::vector<SweepRecord> out;
  for (std::size_t c = 0; c < spec.condition_numbers.size(); ++c) {
    SweepRecord r;
    r.task = to_string(cell.task);
    r.variant = std::string(to_string(cell.setting.variant));
    r.alpha = cell.setting.alpha;
    r.condition_number = spec.condition_numbers[c];
    r.seed = cell.seed;
    r.test_accuracy = cell.test_accuracy;
    r.curvature_iso = cell.curvature.iso;
    r.curvature_aniso = c < cell.curvature.aniso.size() ? cell.curvature.aniso[c] : 0.0;
    r.curvature_sqrt_embed = cell.curvature.sqrt_embed;
    r.status = cell.status;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SweepRecord> run_sweep(const SweepSpec& spec, int workers) {
  struct Job {
    VariantSetting setting;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& s : spec.variants)
    for (auto seed : spec.seeds) jobs.push_back({s, seed});
  std::vector<std::vector<SweepRecord>> per_job(jobs.size());
  for_each_parallel(jobs.size(), workers, [&](std::size_t i) {
    per_job[i] = cell_records(spec, run_cell(spec, jobs[i].setting, jobs[i].seed));
  });
  std::vector<SweepRecord> out;
  for (auto& r : per_job) out.insert(out.end(), r.begin(), r.end());
  return out;
}

}  // namespace gatedgeom

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gatedgeom/attention.hpp"
#include "gatedgeom/data.hpp"
#include "gatedgeom/training.hpp"

namespace gatedgeom {

enum class ProxyAggregate {
  mean_of_norms,  // mean over directions of |second difference|
  norm_of_mean,   // |mean over directions of second difference|
};

enum class ProxyInputMode {
  constant_sequence,  // perturb the latent center, rebuild the constant sequence
  noisy_tokens,       // shift every token of a noisy sequence by the same offset
};

struct ProxyConfig {
  double epsilon = 1e-2;
  int n_directions = 64;
  int eval_points = 256;
  std::uint64_t eval_seed = 0;
  ProxyAggregate aggregate = ProxyAggregate::mean_of_norms;
  ProxyInputMode input_mode = ProxyInputMode::constant_sequence;
};

ProxyAggregate parse_proxy_aggregate(const std::string& name);
std::string to_string(ProxyAggregate a);
ProxyInputMode parse_proxy_input_mode(const std::string& name);
std::string to_string(ProxyInputMode m);

using RepresentationFn = std::function<Vec(const Vec&)>;

// n_directions unit vectors in R^dim from the stream (eval_seed, point_index).
std::vector<Vec> proxy_directions(const ProxyConfig& config, int dim, std::uint64_t point_index);

// Mean over directions v of |(f(x + εv) - 2 f(x) + f(x - εv)) / ε²|.
double curvature_proxy(const RepresentationFn& f, const Vec& x, const std::vector<Vec>& directions,
                       double epsilon, ProxyAggregate aggregate = ProxyAggregate::mean_of_norms);
double curvature_proxy(const RepresentationFn& f, const Vec& x, const ProxyConfig& config,
                       std::uint64_t point_index = 0);

// Same second differences measured in |u|_P = sqrt(u^T P u), P diagonal.
double anisotropic_proxy(const RepresentationFn& f, const Vec& x, const std::vector<Vec>& directions,
                         double epsilon, const Vec& precision,
                         ProxyAggregate aggregate = ProxyAggregate::mean_of_norms);

// x ↦ 2 sqrt(softmax(logits)), a point on the radius-2 sphere.
Vec sqrt_embedding(const Vec& logits);

// Proxy of the map center ↦ 2 sqrt(softmax(logits(constant sequence))).
double sqrt_embed_proxy(const ModelParams& model, const Vec& center, const ProxyConfig& config,
                        int seq_len, std::uint64_t point_index = 0);

// Sample Pearson r. Throws PreconditionError for fewer than two points or a
// zero variance.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);
// Pearson correlation of average ranks.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

double mean(const std::vector<double>& xs);
// Sample standard deviation (n - 1); 0 for fewer than two points.
double sample_std(const std::vector<double>& xs);

// Evaluation centers drawn uniformly from the task box on a dedicated stream.
std::vector<Eigen::Vector2d> evaluation_centers(const ProxyConfig& config, const DatasetSpec& data);

struct ModelCurvature {
  double iso = 0.0;
  std::vector<double> aniso;  // one per condition number
  double sqrt_embed = 0.0;
};

// Averages of the isotropic, anisotropic (log-spaced diagonal precision per
// condition number) and square-root-embedding proxies over the evaluation
// centers, applied to pooled_representation.
ModelCurvature measure_model_curvature(const ModelParams& model, const ProxyConfig& config,
                                       const DatasetSpec& data,
                                       const std::vector<double>& condition_numbers);

// ---- sweeps -----------------------------------------------------------------

struct VariantSetting {
  GateVariant variant = GateVariant::strength;
  double alpha = 0.0;

  // "strength" settings are named by alpha, the others by variant.
  std::string label() const;
  bool operator==(const VariantSetting&) const = default;
};

struct SweepRecord {
  std::string task;
  std::string variant;
  double alpha = 0.0;
  double condition_number = 0.0;
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;
  double curvature_iso = 0.0;
  double curvature_aniso = 0.0;
  double curvature_sqrt_embed = 0.0;
  std::string status = "ok";
};

struct SweepSpec {
  TaskKind task = TaskKind::curved;
  std::vector<VariantSetting> variants;
  std::vector<double> condition_numbers{2, 4, 8, 12, 20};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  DatasetSpec data;
  TrainConfig train;
  ProxyConfig proxy;
};

// Default gate-strength settings {0, 0.25, 0.5, 1.0, 1.5}.
std::vector<VariantSetting> strength_settings(const std::vector<double>& alphas = {0, 0.25, 0.5, 1.0, 1.5});
// {ungated, silu, gated_sigmoid, gated_nonsparse}, gated ones at strength 1.
std::vector<VariantSetting> ablation_settings();

struct CellResult {
  TaskKind task = TaskKind::curved;
  VariantSetting setting;
  std::uint64_t seed = 0;
  std::string status = "ok";
  std::string diagnostic;
  double test_accuracy = 0.0;
  ModelCurvature curvature;
  std::vector<EpochMetrics> epochs;
  ModelParams params;
};

// Trains one (setting, seed) run on the task generated from the same seed and
// measures every proxy on the shared evaluation centers.
CellResult run_cell(const SweepSpec& spec, const VariantSetting& setting, std::uint64_t seed);

// One record per condition number; the isotropic value is shared by all.
std::vector<SweepRecord> cell_records(const SweepSpec& spec, const CellResult& cell);

// Shortest "%g" rendering of a gate strength, used in labels and file names.
std::string format_alpha(double alpha);

// Runs every (setting, seed) cell on up to `workers` threads; output order is
// (setting, seed, condition number) regardless of scheduling.
std::vector<SweepRecord> run_sweep(const SweepSpec& spec, int workers = 1);

}  // namespace gatedgeom

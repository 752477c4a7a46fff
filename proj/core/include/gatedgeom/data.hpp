#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gatedgeom {

struct ModelParams;

enum class TaskKind { curved, linear };

TaskKind parse_task_kind(const std::string& name);
std::string to_string(TaskKind task);

// Label 1 iff sin(2.5 θ) + 0.6 (r - 1.2) > 0 with θ = atan2(c2, c1), r = |c|.
int curved_label(const Eigen::Vector2d& center);
// Label 1 iff w^T c > 0. Throws ConfigError for w = 0.
int linear_label(const Eigen::Vector2d& center, const Eigen::Vector2d& w);

struct TaskSample {
  Eigen::MatrixXd tokens;  // seq_len x 2
  Eigen::Vector2d center;
  int label = 0;
};

struct DatasetSpec {
  int n_train = 4000;
  int n_test = 1000;
  int seq_len = 8;
  double noise_sigma = 0.20;
  double box_lo = -2.0;
  double box_hi = 2.0;
  TaskKind task = TaskKind::curved;
  Eigen::Vector2d linear_w = Eigen::Vector2d(1.0, 1.0) / std::sqrt(2.0);
};

struct Dataset {
  std::vector<TaskSample> train;
  std::vector<TaskSample> test;
};

int label_for(const DatasetSpec& spec, const Eigen::Vector2d& center);

// Deterministic in (spec, seed). Centers and token noise come from separate
// per-sample streams, so noise_salt changes the noise and never the labels.
Dataset generate(const DatasetSpec& spec, std::uint64_t seed, std::uint64_t noise_salt = 0);

// Stacked tokens (N * seq_len x 2) and labels of a subset of samples.
Eigen::MatrixXd stack_tokens(const std::vector<TaskSample>& samples,
                             const std::vector<std::size_t>& indices);

struct GridPoint {
  Eigen::Vector2d center;
  int true_label = 0;
  std::optional<int> pred_label;
  std::optional<Eigen::Vector2d> logits;
};

// resolution x resolution centers spanning [lo, hi]^2 inclusive, x fastest.
// With a model, each center is classified from the constant sequence of
// seq_len copies of the center.
std::vector<GridPoint> latent_grid(const DatasetSpec& spec, int resolution,
                                   const ModelParams* model = nullptr);

// CSV: center_x, center_y, label, token_0_x, token_0_y, ...
std::string dataset_csv(const std::vector<TaskSample>& samples);
// CSV: center_x, center_y, true_label, pred_label, logit_0, logit_1
std::string grid_csv(const std::vector<GridPoint>& grid);

}  // namespace gatedgeom

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gatedgeom/attention.hpp"
#include "gatedgeom/data.hpp"

namespace gatedgeom {

// Per-parameter gradient accumulators with the layout of ModelParams.
using GradientTape = ModelParams;

struct AdamWConfig {
  double lr = 2e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  AdamWConfig hyper;
  std::int64_t step = 0;
  std::vector<Mat> m;
  std::vector<Mat> v;

  static OptimizerState init(const ModelParams& params, const AdamWConfig& hyper);
};

struct TrainConfig {
  int batch_size = 128;
  int epochs = 20;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  bool shuffle = true;
  AdamWConfig optimizer;
  ModelConfig model;
};

struct LossAndGrad {
  double loss = 0.0;
  GradientTape grads;
};

// Mean softmax cross-entropy over the batch.
double batch_loss(const Mat& stacked, int seq_len, const std::vector<int>& labels,
                  const ModelParams& params);

// Exact gradient of batch_loss with respect to every tensor in params.
LossAndGrad backward(const Mat& stacked, int seq_len, const std::vector<int>& labels,
                     const ModelParams& params);

// Decoupled weight decay, bias-corrected moments:
//   p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)
void adamw_step(ModelParams& params, const GradientTape& grads, OptimizerState& state);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, unit
// layernorm gain. Each tensor draws from its own stream of the seed.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double test_acc = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochMetrics> epochs;
  double test_accuracy = 0.0;
  bool aborted = false;
  std::string diagnostic;
};

double accuracy(const ModelParams& params, const std::vector<TaskSample>& samples);

// Deterministic in (config, data, seed). The model variant and gate strength
// come from config.model. on_epoch, when set, sees each epoch's metrics.
TrainResult train(const TrainConfig& config, const Dataset& data, std::uint64_t seed,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace gatedgeom

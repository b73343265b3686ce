#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "autocl/dataset.hpp"
#include "autocl/downstream.hpp"
#include "autocl/encoder.hpp"
#include "autocl/rng.hpp"
#include "autocl/space.hpp"

namespace autocl {

struct TrainConfig {
  std::size_t batch_size = 16;
  // Series tasks train on windows of this length cut from the train segment.
  std::size_t series_window = 256;
  // Longer inputs are randomly windowed to this length each epoch.
  std::size_t max_input_len = 2000;
};

struct DownstreamConfig {
  LogisticConfig logistic;
  std::size_t horizon = 48;
  std::vector<double> ridge_grid{0.1, 1.0, 10.0};
  // Features at time t come from the causal window [t - window + 1, t].
  std::size_t forecast_window = 64;
  std::size_t forecast_stride = 4;
  std::size_t anomaly_window = 32;
  std::size_t anomaly_delay = 7;
  std::size_t embed_chunk = 128;
};

// Applies one update given parameters and matching gradients.
using StepFn = std::function<void(std::vector<Tensor*>, const std::vector<const Tensor*>&)>;

// Minibatches (B x L x c) covering one epoch of the train split.
std::vector<Tensor> epoch_batches(const SplitData& train, TaskKind task, const TrainConfig& config, Rng& rng);

// Views, encoder, embedding transforms and strategy loss for one batch,
// followed by one optimizer step. Returns the loss.
double contrastive_step(EncoderParams& params, const Tensor& batch, const Strategy& s, const StepFn& step, Rng& rng);

// Mean loss over the epoch. Throws NumericError on a non-finite loss.
double train_epoch(EncoderParams& params, const SplitData& train, TaskKind task, const Strategy& s,
                   const StepFn& step, Rng& rng, const TrainConfig& config);

// Fresh encoder trained for `epochs` epochs with Adam.
EncoderParams pretrain(const EncoderConfig& config, std::uint64_t seed, const TaskData& data, const Strategy& s,
                       std::size_t epochs, double lr, const TrainConfig& train);

// Encoder features.
Tensor embed_instances(const EncoderParams& params, const Tensor& x, std::size_t chunk);
struct ForecastSet {
  Tensor features;  // n x d
  Tensor targets;   // n x (H * c)
};
ForecastSet forecast_set(const EncoderParams& params, const Tensor& series, const DownstreamConfig& config,
                         std::size_t stride);
std::vector<double> anomaly_scores(const EncoderParams& params, const Tensor& series, const DownstreamConfig& config);

struct Evaluation {
  double reward = 0.0;      // higher is better
  nlohmann::json metrics;   // [{task, metric, split, value}]
};

// Downstream fit on train, scored on val (or on test, if requested and
// present).
Evaluation evaluate_encoder(const EncoderParams& params, const TaskData& data, const DownstreamConfig& config,
                            Split split = Split::val);
double compute_reward(const EncoderParams& params, const TaskData& data, const DownstreamConfig& config);
double worst_reward(TaskKind task);

}  // namespace autocl

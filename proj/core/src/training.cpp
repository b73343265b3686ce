#include "autocl/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "autocl/augment.hpp"
#include "autocl/contrast.hpp"
#include "autocl/error.hpp"
#include "autocl/optim.hpp"

namespace autocl {
namespace {

Tensor gather(const Tensor& x, const std::vector<std::size_t>& rows, std::size_t start, std::size_t len) {
  const std::size_t T = x.dim(1), c = x.dim(2);
  Tensor out({rows.size(), len, c});
  for (std::size_t k = 0; k < rows.size(); ++k)
    std::copy_n(x.ptr() + (rows[k] * T + start) * c, len * c, out.ptr() + k * len * c);
  return out;
}

// Causal windows ending at each t in `ends`, zero-padded on the left. When
// `mask_last` is set the final timestep of every window is zeroed.
Tensor causal_windows(const Tensor& series, const std::vector<std::size_t>& ends, std::size_t W, bool mask_last) {
  const std::size_t c = series.dim(2);
  Tensor out({ends.size(), W, c});
  for (std::size_t k = 0; k < ends.size(); ++k) {
    const std::size_t t = ends[k];
    for (std::size_t j = 0; j < W; ++j) {
      if (t + j + 1 < W) continue;
      const std::size_t src = t + j + 1 - W;
      std::copy_n(series.ptr() + src * c, c, out.ptr() + (k * W + j) * c);
    }
    if (mask_last) std::fill_n(out.ptr() + (k * W + W - 1) * c, c, 0.0);
  }
  return out;
}

// Last-timestep embeddings of a batch of windows, encoded in chunks.
Tensor last_step_embeddings(const EncoderParams& params, const Tensor& windows, std::size_t chunk) {
  const std::size_t n = windows.dim(0), W = windows.dim(1), c = windows.dim(2), d = params.config.out_dim;
  Tensor out({n, d});
  for (std::size_t lo = 0; lo < n; lo += chunk) {
    const std::size_t len = std::min(chunk, n - lo);
    Tensor part({len, W, c});
    std::copy_n(windows.ptr() + lo * W * c, len * W * c, part.ptr());
    const Tensor h = encode(params, part);
    for (std::size_t k = 0; k < len; ++k) std::copy_n(h.ptr() + (k * W + W - 1) * d, d, out.ptr() + (lo + k) * d);
  }
  return out;
}

// [lo, hi) ranges of at most `size` items; a single leftover item joins the
// previous range so no batch has fewer than 2 instances.
std::vector<std::pair<std::size_t, std::size_t>> chunks(std::size_t n, std::size_t size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = std::min(n, lo + size);
    if (n - hi == 1) hi = n;
    out.emplace_back(lo, hi);
    lo = hi;
  }
  return out;
}

nlohmann::json metric(TaskKind task, const char* name, Split split, double value) {
  const char* s = split == Split::train ? "train" : split == Split::val ? "val" : "test";
  return {{"task", to_string(task)}, {"metric", name}, {"split", s}, {"value", value}};
}

}  // namespace

std::vector<Tensor> epoch_batches(const SplitData& train, TaskKind task, const TrainConfig& config, Rng& rng) {
  if (config.batch_size < 2) throw ConfigError("batch_size must be at least 2");
  std::vector<Tensor> batches;
  if (task == TaskKind::classification) {
    const std::size_t n = train.x.dim(0), T = train.x.dim(1);
    if (n < 2) throw DataError("need at least 2 training instances");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t len = std::min(T, config.max_input_len);
    for (const auto& [lo, hi] : chunks(n, config.batch_size)) {
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                          order.begin() + static_cast<std::ptrdiff_t>(hi));
      const std::size_t start = len < T ? std::uniform_int_distribution<std::size_t>(0, T - len)(rng) : 0;
      batches.push_back(gather(train.x, rows, start, len));
    }
    return batches;
  }
  const std::size_t L = train.x.dim(1);
  const std::size_t len = std::min({config.series_window, config.max_input_len, L});
  if (len < 2) throw DataError("training series too short");
  const std::size_t windows = std::max(config.batch_size, (L + len - 1) / len);
  std::uniform_int_distribution<std::size_t> offset(0, L - len);
  std::vector<std::size_t> starts(windows);
  for (auto& s : starts) s = offset(rng);
  const std::size_t c = train.x.dim(2);
  for (const auto& [lo, hi] : chunks(windows, config.batch_size)) {
    Tensor batch({hi - lo, len, c});
    for (std::size_t k = lo; k < hi; ++k)
      std::copy_n(train.x.ptr() + starts[k] * c, len * c, batch.ptr() + (k - lo) * len * c);
    batches.push_back(std::move(batch));
  }
  return batches;
}

double contrastive_step(EncoderParams& params, const Tensor& batch, const Strategy& s, const StepFn& step, Rng& rng) {
  Tape tape;
  const auto vars = bind_encoder(tape, params);
  const ViewPair vp = make_view_pair(batch, s, rng);
  Var h1 = encode(params.config, vars, tape.constant(vp.view1));
  Var h2 = encode(params.config, vars, tape.constant(vp.view2));
  h1 = transform_embeddings(h1, s, rng);
  h2 = transform_embeddings(h2, s, rng);
  Var c1 = slice(h1, 1, vp.align1, vp.common_len);
  Var c2 = slice(h2, 1, vp.align2, vp.common_len);
  Var loss = strategy_loss(c1, c2, s);
  const Gradients grads = tape.backward(loss);
  std::vector<const Tensor*> g;
  for (Var v : vars) g.push_back(&grads[v]);
  step(params.tensors(), g);
  return loss.value()[0];
}

double train_epoch(EncoderParams& params, const SplitData& train, TaskKind task, const Strategy& s,
                   const StepFn& step, Rng& rng, const TrainConfig& config) {
  const auto batches = epoch_batches(train, task, config, rng);
  double total = 0.0;
  for (const Tensor& b : batches) {
    total += contrastive_step(params, b, s, step, rng);
    for (const Tensor* t : std::as_const(params).tensors())
      if (!t->all_finite()) throw NumericError("encoder parameters diverged");
  }
  return total / static_cast<double>(batches.size());
}

EncoderParams pretrain(const EncoderConfig& config, std::uint64_t seed, const TaskData& data, const Strategy& s,
                       std::size_t epochs, double lr, const TrainConfig& train) {
  EncoderParams params = init_encoder(config, seed);
  Rng rng(derive_seed(seed, 0x7072));
  Adam adam(lr);
  const StepFn step = [&adam](std::vector<Tensor*> p, const std::vector<const Tensor*>& g) { adam.step(std::move(p), g); };
  for (std::size_t e = 0; e < epochs; ++e) train_epoch(params, data.train, data.task, s, step, rng, train);
  return params;
}

Tensor embed_instances(const EncoderParams& params, const Tensor& x, std::size_t chunk) {
  const std::size_t n = x.dim(0), T = x.dim(1), c = x.dim(2), d = params.config.out_dim;
  Tensor out({n, d});
  for (std::size_t lo = 0; lo < n; lo += chunk) {
    const std::size_t len = std::min(chunk, n - lo);
    Tensor part({len, T, c});
    std::copy_n(x.ptr() + lo * T * c, len * T * c, part.ptr());
    const Tensor e = instance_embed(encode(params, part));
    std::copy_n(e.ptr(), len * d, out.ptr() + lo * d);
  }
  return out;
}

ForecastSet forecast_set(const EncoderParams& params, const Tensor& series, const DownstreamConfig& config,
                         std::size_t stride) {
  const std::size_t L = series.dim(1), c = series.dim(2), H = config.horizon;
  if (H < 1) throw ConfigError("forecast horizon must be at least 1");
  if (L <= H + 1) throw DataError("series segment of length " + std::to_string(L) + " is too short for horizon " +
                                  std::to_string(H));
  std::vector<std::size_t> ends;
  for (std::size_t t = 0; t + H < L; t += std::max<std::size_t>(1, stride)) ends.push_back(t);
  ForecastSet set;
  set.features = last_step_embeddings(params, causal_windows(series, ends, config.forecast_window, false),
                                      config.embed_chunk);
  set.targets = Tensor({ends.size(), H * c});
  for (std::size_t k = 0; k < ends.size(); ++k)
    std::copy_n(series.ptr() + (ends[k] + 1) * c, H * c, set.targets.ptr() + k * H * c);
  return set;
}

std::vector<double> anomaly_scores(const EncoderParams& params, const Tensor& series, const DownstreamConfig& config) {
  const std::size_t L = series.dim(1), d = params.config.out_dim;
  std::vector<std::size_t> ends(L);
  std::iota(ends.begin(), ends.end(), 0);
  const Tensor full = last_step_embeddings(params, causal_windows(series, ends, config.anomaly_window, false),
                                           config.embed_chunk);
  const Tensor masked = last_step_embeddings(params, causal_windows(series, ends, config.anomaly_window, true),
                                             config.embed_chunk);
  std::vector<double> scores(L, 0.0);
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t k = 0; k < d; ++k) scores[t] += std::abs(full[t * d + k] - masked[t * d + k]);
  return scores;
}

Evaluation evaluate_encoder(const EncoderParams& params, const TaskData& data, const DownstreamConfig& config,
                            Split split) {
  if (split == Split::train) throw ConfigError("evaluation split must be val or test");
  if (split == Split::test && !data.test) throw ConfigError("test split is not available here");
  const SplitData& eval = split == Split::val ? data.val : *data.test;
  Evaluation ev;
  ev.metrics = nlohmann::json::array();
  switch (data.task) {
    case TaskKind::classification: {
      const Tensor tr = embed_instances(params, data.train.x, config.embed_chunk);
      const Tensor ev_x = embed_instances(params, eval.x, config.embed_chunk);
      const auto m = eval_classification(tr, data.train.labels, ev_x, eval.labels, data.n_classes, config.logistic);
      ev.reward = m.acc;
      ev.metrics.push_back(metric(data.task, "acc", split, m.acc));
      ev.metrics.push_back(metric(data.task, "macro_f1", split, m.macro_f1));
      break;
    }
    case TaskKind::forecasting: {
      const ForecastSet tr = forecast_set(params, data.train.x, config, config.forecast_stride);
      const ForecastSet va = forecast_set(params, data.val.x, config, 1);
      const ForecastSet te = split == Split::val ? va : forecast_set(params, eval.x, config, 1);
      const auto m = eval_forecasting(tr.features, tr.targets, va.features, va.targets, te.features, te.targets,
                                      config.ridge_grid);
      ev.reward = std::max(-m.mse, worst_reward(data.task));
      ev.metrics.push_back(metric(data.task, "mse", split, m.mse));
      ev.metrics.push_back(metric(data.task, "mae", split, m.mae));
      ev.metrics.push_back(metric(data.task, "ridge_lambda", split, m.lambda));
      if (m.fallback) ev.metrics.push_back(metric(data.task, "ridge_fallback", split, 1.0));
      break;
    }
    case TaskKind::anomaly: {
      const auto train_scores = anomaly_scores(params, data.train.x, config);
      const double threshold = anomaly_threshold(train_scores);
      const auto scores = anomaly_scores(params, eval.x, config);
      const auto m = eval_anomaly(scores, eval.labels, threshold, config.anomaly_delay);
      ev.reward = m.f1;
      ev.metrics.push_back(metric(data.task, "f1", split, m.f1));
      ev.metrics.push_back(metric(data.task, "precision", split, m.precision));
      ev.metrics.push_back(metric(data.task, "recall", split, m.recall));
      if (m.no_predictions) ev.metrics.push_back(metric(data.task, "no_predictions", split, 1.0));
      if (m.no_positives) ev.metrics.push_back(metric(data.task, "no_positives", split, 1.0));
      break;
    }
  }
  return ev;
}

double compute_reward(const EncoderParams& params, const TaskData& data, const DownstreamConfig& config) {
  return evaluate_encoder(params, data, config, Split::val).reward;
}

double worst_reward(TaskKind task) { return task == TaskKind::forecasting ? -100.0 : 0.0; }

}  // namespace autocl

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "autocl/tensor.hpp"

namespace autocl {

// B x T x d -> B x d, elementwise max over time.
Tensor instance_embed(const Tensor& h);

struct LogisticConfig {
  std::size_t epochs = 200;
  double lr = 0.1;
  double l2 = 1e-4;
};

struct ClassificationMetrics {
  double acc = 0.0;
  double macro_f1 = 0.0;
};

// Macro-F1 averages over all n_classes classes; a class that is neither
// predicted nor present scores 0.
ClassificationMetrics classification_metrics(std::span<const int> predicted, std::span<const int> truth,
                                             std::size_t n_classes);

// Multinomial logistic regression, full-batch gradient descent from zero on
// features standardized with training statistics. n_classes == 0 infers it
// from the labels.
ClassificationMetrics eval_classification(const Tensor& train_x, std::span<const int> train_y, const Tensor& eval_x,
                                          std::span<const int> eval_y, std::size_t n_classes = 0,
                                          const LogisticConfig& config = {});

struct RidgeFit {
  Tensor weights;                 // d x k
  std::vector<double> intercept;  // k
  double lambda = 0.0;
  bool fallback = false;          // solved with a larger lambda
};

// Ridge with an unpenalized intercept: centre X and Y, solve
// (XᵀX + λI) W = XᵀY, intercept = mean(Y) - mean(X) W.
RidgeFit fit_ridge(const Tensor& X, const Tensor& Y, double lambda);
Tensor predict_ridge(const RidgeFit& fit, const Tensor& X);

struct ForecastMetrics {
  double mse = 0.0;
  double mae = 0.0;
  double lambda = 0.0;
  bool fallback = false;
};

// Chooses lambda from `grid` by MSE on (select_x, select_y), refits nothing,
// and scores the chosen model on (eval_x, eval_y).
ForecastMetrics eval_forecasting(const Tensor& train_x, const Tensor& train_y, const Tensor& select_x,
                                 const Tensor& select_y, const Tensor& eval_x, const Tensor& eval_y,
                                 const std::vector<double>& grid = {0.1, 1.0, 10.0});

struct AnomalyMetrics {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool no_predictions = false;  // precision undefined, reported as 0
  bool no_positives = false;    // recall undefined, reported as 0
};

// mean + 3 * std of the scores.
double anomaly_threshold(std::span<const double> train_scores);

// A true segment counts as detected, in full, when a prediction falls within
// [start, start + delay] of it; otherwise all its points count as missed.
std::vector<std::uint8_t> delay_adjust(std::span<const std::uint8_t> predicted, std::span<const int> labels,
                                       std::size_t delay);

AnomalyMetrics anomaly_metrics(std::span<const std::uint8_t> predicted, std::span<const int> labels,
                               std::size_t delay);
AnomalyMetrics eval_anomaly(std::span<const double> scores, std::span<const int> labels, double threshold,
                            std::size_t delay = 7);

}  // namespace autocl

#include "autocl/downstream.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "autocl/error.hpp"

namespace autocl {
namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix to_matrix(const Tensor& t) {
  if (t.rank() != 2) throw DimensionError("expected a matrix, got " + shape_string(t.shape()));
  return Eigen::Map<const Matrix>(t.ptr(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
}

Tensor to_tensor(const Matrix& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  Eigen::Map<Matrix>(t.ptr(), m.rows(), m.cols()) = m;
  return t;
}

}  // namespace

Tensor instance_embed(const Tensor& h) {
  if (h.rank() != 3 || h.dim(1) == 0) throw DimensionError("instance_embed: expected B x T x d with T >= 1");
  const std::size_t B = h.dim(0), T = h.dim(1), d = h.dim(2);
  Tensor out({B, d});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t k = 0; k < d; ++k) {
      double m = h.at(b, 0, k);
      for (std::size_t t = 1; t < T; ++t) m = std::max(m, h.at(b, t, k));
      out.at(b, k) = m;
    }
  return out;
}

ClassificationMetrics classification_metrics(std::span<const int> predicted, std::span<const int> truth,
                                             std::size_t n_classes) {
  if (predicted.size() != truth.size() || truth.empty()) throw DimensionError("classification_metrics: size mismatch");
  std::vector<double> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto p = static_cast<std::size_t>(predicted[i]), y = static_cast<std::size_t>(truth[i]);
    if (p >= n_classes || y >= n_classes) throw DimensionError("classification_metrics: label out of range");
    if (p == y) {
      ++correct;
      tp[p] += 1;
    } else {
      fp[p] += 1;
      fn[y] += 1;
    }
  }
  double f1 = 0.0;
  for (std::size_t k = 0; k < n_classes; ++k) {
    const double denom = 2 * tp[k] + fp[k] + fn[k];
    f1 += denom > 0 ? 2 * tp[k] / denom : 0.0;
  }
  return {static_cast<double>(correct) / static_cast<double>(truth.size()), f1 / static_cast<double>(n_classes)};
}

ClassificationMetrics eval_classification(const Tensor& train_x, std::span<const int> train_y, const Tensor& eval_x,
                                          std::span<const int> eval_y, std::size_t n_classes,
                                          const LogisticConfig& config) {
  if (train_x.rank() != 2 || eval_x.rank() != 2 || train_x.dim(1) != eval_x.dim(1))
    throw DimensionError("eval_classification: feature matrices must share a width");
  if (train_x.dim(0) != train_y.size() || eval_x.dim(0) != eval_y.size() || train_y.empty() || eval_y.empty())
    throw DimensionError("eval_classification: one label per row required");
  if (n_classes == 0) {
    int mx = 0;
    for (int y : train_y) mx = std::max(mx, y);
    for (int y : eval_y) mx = std::max(mx, y);
    n_classes = static_cast<std::size_t>(mx) + 1;
  }
  {
    std::vector<bool> seen(n_classes, false);
    for (int y : train_y) {
      if (y < 0 || static_cast<std::size_t>(y) >= n_classes) throw DataError("training label out of range");
      seen[static_cast<std::size_t>(y)] = true;
    }
    if (std::count(seen.begin(), seen.end(), true) < 2) throw DataError("classification needs at least 2 training classes");
  }

  Matrix X = to_matrix(train_x);
  Matrix E = to_matrix(eval_x);
  const Eigen::RowVectorXd mu = X.colwise().mean();
  Eigen::RowVectorXd sd = ((X.rowwise() - mu).array().square().colwise().mean()).sqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j) sd[j] = std::max(sd[j], 1e-8);
  X = ((X.rowwise() - mu).array().rowwise() / sd.array()).matrix();
  E = ((E.rowwise() - mu).array().rowwise() / sd.array()).matrix();

  const auto n = X.rows(), d = X.cols(), K = static_cast<Eigen::Index>(n_classes);
  Matrix Y = Matrix::Zero(n, K);
  for (Eigen::Index i = 0; i < n; ++i) Y(i, train_y[static_cast<std::size_t>(i)]) = 1.0;
  Matrix W = Matrix::Zero(d, K);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(K);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Matrix Z = (X * W).rowwise() + b;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mx = Z.row(i).maxCoeff();
      Z.row(i) = (Z.row(i).array() - mx).exp();
      Z.row(i) /= Z.row(i).sum();
    }
    const Matrix G = (Z - Y) / static_cast<double>(n);
    W -= config.lr * (X.transpose() * G + config.l2 * W);
    b -= config.lr * G.colwise().sum();
  }
  const Matrix scores = (E * W).rowwise() + b;
  std::vector<int> predicted(static_cast<std::size_t>(E.rows()));
  for (Eigen::Index i = 0; i < E.rows(); ++i) {
    Eigen::Index arg = 0;
    scores.row(i).maxCoeff(&arg);
    predicted[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return classification_metrics(predicted, eval_y, n_classes);
}

RidgeFit fit_ridge(const Tensor& X, const Tensor& Y, double lambda) {
  if (X.rank() != 2 || Y.rank() != 2 || X.dim(0) != Y.dim(0) || X.dim(0) == 0)
    throw DimensionError("fit_ridge: X and Y need the same number of rows");
  if (!(lambda >= 0.0)) throw ConfigError("ridge lambda must be non-negative");
  const Matrix Xm = to_matrix(X), Ym = to_matrix(Y);
  const Eigen::RowVectorXd mx = Xm.colwise().mean(), my = Ym.colwise().mean();
  const Matrix Xc = Xm.rowwise() - mx, Yc = Ym.rowwise() - my;
  const Matrix XtY = Xc.transpose() * Yc;
  const Matrix gram = Xc.transpose() * Xc;

  RidgeFit fit;
  double lam = lambda;
  for (int attempt = 0; attempt < 3; ++attempt) {
    Matrix A = gram;
    A.diagonal().array() += lam;
    Eigen::LDLT<Matrix> ldlt(A);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      Matrix W = ldlt.solve(XtY);
      const double residual = (A * W - XtY).cwiseAbs().maxCoeff();
      const double scale = std::max(1.0, XtY.cwiseAbs().maxCoeff());
      if (W.allFinite() && residual <= 1e-6 * scale) {
        fit.weights = to_tensor(W);
        const Eigen::RowVectorXd c = my - mx * W;
        fit.intercept.assign(c.data(), c.data() + c.size());
        fit.lambda = lam;
        fit.fallback = attempt > 0;
        return fit;
      }
    }
    lam = std::max(lam, 1e-6) * 100.0;
  }
  throw NumericError("ridge system is singular even with lambda " + std::to_string(lam / 100.0));
}

Tensor predict_ridge(const RidgeFit& fit, const Tensor& X) {
  const Matrix W = to_matrix(fit.weights);
  const Matrix Xm = to_matrix(X);
  if (Xm.cols() != W.rows()) throw DimensionError("predict_ridge: feature width mismatch");
  Matrix P = Xm * W;
  for (Eigen::Index j = 0; j < P.cols(); ++j) P.col(j).array() += fit.intercept[static_cast<std::size_t>(j)];
  return to_tensor(P);
}

ForecastMetrics eval_forecasting(const Tensor& train_x, const Tensor& train_y, const Tensor& select_x,
                                 const Tensor& select_y, const Tensor& eval_x, const Tensor& eval_y,
                                 const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("ridge lambda grid is empty");
  auto errors = [](const Tensor& pred, const Tensor& truth) {
    if (pred.shape() != truth.shape()) throw DimensionError("forecast target shape mismatch");
    double se = 0.0, ae = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double e = pred[i] - truth[i];
      se += e * e;
      ae += std::abs(e);
    }
    const auto n = static_cast<double>(pred.size());
    return std::pair{se / n, ae / n};
  };
  RidgeFit best;
  double best_mse = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    RidgeFit fit = fit_ridge(train_x, train_y, lambda);
    const double mse = errors(predict_ridge(fit, select_x), select_y).first;
    if (mse < best_mse) {
      best_mse = mse;
      best = std::move(fit);
    }
  }
  if (!std::isfinite(best_mse)) throw NumericError("forecast validation error is not finite");
  const auto [mse, mae] = errors(predict_ridge(best, eval_x), eval_y);
  return {mse, mae, best.lambda, best.fallback};
}

double anomaly_threshold(std::span<const double> train_scores) {
  if (train_scores.empty()) throw DimensionError("anomaly_threshold: no scores");
  double mean = 0.0;
  for (double s : train_scores) mean += s;
  mean /= static_cast<double>(train_scores.size());
  double var = 0.0;
  for (double s : train_scores) var += (s - mean) * (s - mean);
  return mean + 3.0 * std::sqrt(var / static_cast<double>(train_scores.size()));
}

std::vector<std::uint8_t> delay_adjust(std::span<const std::uint8_t> predicted, std::span<const int> labels,
                                       std::size_t delay) {
  if (predicted.size() != labels.size()) throw DimensionError("delay_adjust: size mismatch");
  std::vector<std::uint8_t> out(predicted.begin(), predicted.end());
  std::size_t t = 0;
  while (t < labels.size()) {
    if (!labels[t]) {
      ++t;
      continue;
    }
    const std::size_t start = t;
    while (t < labels.size() && labels[t]) ++t;
    bool hit = false;
    for (std::size_t u = start; u < t && u <= start + delay; ++u) hit = hit || predicted[u];
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(start), out.begin() + static_cast<std::ptrdiff_t>(t), hit ? 1 : 0);
  }
  return out;
}

AnomalyMetrics anomaly_metrics(std::span<const std::uint8_t> predicted, std::span<const int> labels,
                               std::size_t delay) {
  const auto adjusted = delay_adjust(predicted, labels, delay);
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (adjusted[i] && labels[i]) tp += 1;
    else if (adjusted[i]) fp += 1;
    else if (labels[i]) fn += 1;
  }
  AnomalyMetrics m;
  m.no_predictions = tp + fp == 0;
  m.no_positives = tp + fn == 0;
  m.precision = m.no_predictions ? 0.0 : tp / (tp + fp);
  m.recall = m.no_positives ? 0.0 : tp / (tp + fn);
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

AnomalyMetrics eval_anomaly(std::span<const double> scores, std::span<const int> labels, double threshold,
                            std::size_t delay) {
  if (scores.size() != labels.size()) throw DimensionError("eval_anomaly: scores and labels must align");
  std::vector<std::uint8_t> predicted(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) predicted[i] = scores[i] > threshold ? 1 : 0;
  return anomaly_metrics(predicted, labels, delay);
}

}  // namespace autocl

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "autocl/downstream.hpp"
#include "autocl/error.hpp"
#include "oracles.hpp"

using namespace autocl;

TEST(InstanceEmbed, SingleStepIsIdentity) {
  std::mt19937_64 r(1);
  const Tensor h = oracle::random_tensor({3, 1, 4}, r);
  const Tensor e = instance_embed(h);
  ASSERT_EQ(e.shape(), (Shape{3, 4}));
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(e[i], h[i]);
}

TEST(InstanceEmbed, MaxOverTimeAndOrderInvariant) {
  std::mt19937_64 r(2);
  Tensor h = oracle::random_tensor({2, 6, 3}, r);
  h.at(0, 4, 1) = 9.0;
  h.at(1, 0, 2) = 7.0;
  const Tensor e = instance_embed(h);
  EXPECT_EQ(e.at(0, 1), 9.0);
  EXPECT_EQ(e.at(1, 2), 7.0);
  Tensor rev({2, 6, 3});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t c = 0; c < 3; ++c) rev.at(b, t, c) = h.at(b, 5 - t, c);
  EXPECT_EQ(instance_embed(rev), e);
}

TEST(Classification, MetricArithmetic) {
  const std::vector<int> pred{1, 1, 1, 1}, truth{0, 1, 0, 1};
  const auto m = classification_metrics(pred, truth, 2);
  EXPECT_DOUBLE_EQ(m.acc, 0.5);
  EXPECT_NEAR(m.macro_f1, 1.0 / 3.0, 1e-15);
}

TEST(Classification, SeparableBlobs) {
  std::mt19937_64 r(3);
  std::normal_distribution<double> n(0.0, 0.3);
  auto blob = [&](std::size_t count, Tensor& x, std::vector<int>& y) {
    x = Tensor({count, 4});
    y.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      y[i] = static_cast<int>(i % 2);
      for (std::size_t c = 0; c < 4; ++c) x.at(i, c) = n(r) + (y[i] ? 3.0 : -3.0);
    }
  };
  Tensor tx, ex;
  std::vector<int> ty, ey;
  blob(60, tx, ty);
  blob(40, ex, ey);
  const auto m = eval_classification(tx, ty, ex, ey);
  EXPECT_EQ(m.acc, 1.0);
  EXPECT_EQ(m.macro_f1, 1.0);
}

TEST(Classification, ShuffledLabelsAreChance) {
  double total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 r(seed);
    std::uniform_int_distribution<int> lab(0, 2);
    const Tensor tx = oracle::random_tensor({150, 5}, r), ex = oracle::random_tensor({300, 5}, r);
    std::vector<int> ty(150), ey(300);
    for (int& v : ty) v = lab(r);
    for (int& v : ey) v = lab(r);
    total += eval_classification(tx, ty, ex, ey, 3).acc;
  }
  EXPECT_NEAR(total / 20.0, 1.0 / 3.0, 0.05);
}

TEST(Ridge, RealizableTargets) {
  std::mt19937_64 r(4);
  const Tensor X = oracle::random_tensor({100, 5}, r);
  const Tensor W = oracle::random_tensor({5, 2}, r);
  Tensor Y({100, 2});
  for (std::size_t i = 0; i < 100; ++i)
    for (std::size_t k = 0; k < 2; ++k) {
      double acc = 0.25 * static_cast<double>(k + 1);
      for (std::size_t j = 0; j < 5; ++j) acc += X.at(i, j) * W.at(j, k);
      Y.at(i, k) = acc;
    }
  const ForecastMetrics m = eval_forecasting(X, Y, X, Y, X, Y, {1e-10});
  EXPECT_LT(m.mse, 1e-8);
}

TEST(Ridge, ZeroInputsPredictTheMean) {
  std::mt19937_64 r(5);
  const Tensor X({50, 3});
  const Tensor Y = oracle::random_tensor({50, 1}, r);
  double mean = 0, var = 0;
  for (double v : Y.data()) mean += v;
  mean /= 50;
  for (double v : Y.data()) var += (v - mean) * (v - mean);
  var /= 50;
  const RidgeFit fit = fit_ridge(X, Y, 1.0);
  EXPECT_NEAR(fit.intercept[0], mean, 1e-12);
  const ForecastMetrics m = eval_forecasting(X, Y, X, Y, X, Y);
  EXPECT_NEAR(m.mse, var, 1e-12);
}

TEST(Ridge, MatchesNormalEquations) {
  std::mt19937_64 r(6);
  const Tensor X = oracle::random_tensor({200, 8}, r);
  const Tensor Y = oracle::random_tensor({200, 3}, r);
  const double lambda = 0.5;
  const RidgeFit fit = fit_ridge(X, Y, lambda);

  std::vector<double> mx(8), my(3);
  for (std::size_t i = 0; i < 200; ++i) {
    for (std::size_t j = 0; j < 8; ++j) mx[j] += X.at(i, j) / 200.0;
    for (std::size_t k = 0; k < 3; ++k) my[k] += Y.at(i, k) / 200.0;
  }
  std::vector<std::vector<double>> A(8, std::vector<double>(8)), B(8, std::vector<double>(3));
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t a = 0; a < 8; ++a) {
      for (std::size_t b = 0; b < 8; ++b) A[a][b] += (X.at(i, a) - mx[a]) * (X.at(i, b) - mx[b]);
      for (std::size_t k = 0; k < 3; ++k) B[a][k] += (X.at(i, a) - mx[a]) * (Y.at(i, k) - my[k]);
    }
  for (std::size_t a = 0; a < 8; ++a) A[a][a] += lambda;
  const auto W = oracle::solve(A, B);
  for (std::size_t a = 0; a < 8; ++a)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(fit.weights.at(a, k), W[a][k], 1e-8);
  for (std::size_t k = 0; k < 3; ++k) {
    double b = my[k];
    for (std::size_t a = 0; a < 8; ++a) b -= mx[a] * W[a][k];
    EXPECT_NEAR(fit.intercept[k], b, 1e-8);
  }
}

TEST(Anomaly, PerfectPredictions) {
  std::vector<int> labels(50, 0);
  for (int i = 10; i < 15; ++i) labels[i] = 1;
  labels[30] = 1;
  std::vector<std::uint8_t> pred(labels.begin(), labels.end());
  const auto m = anomaly_metrics(pred, labels, 7);
  EXPECT_EQ(m.f1, 1.0);
}

TEST(Anomaly, NoPredictions) {
  std::vector<int> labels(20, 0);
  labels[5] = 1;
  const std::vector<std::uint8_t> pred(20, 0);
  const auto m = anomaly_metrics(pred, labels, 7);
  EXPECT_TRUE(m.no_predictions);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
}

TEST(Anomaly, DelayAdjustment) {
  std::vector<int> labels(30, 0);
  for (int i = 10; i <= 14; ++i) labels[i] = 1;
  std::vector<std::uint8_t> pred(30, 0);
  pred[12] = 1;
  const auto adj = delay_adjust(pred, labels, 3);
  for (int i = 10; i <= 14; ++i) EXPECT_EQ(adj[i], 1);
  EXPECT_EQ(anomaly_metrics(pred, labels, 3).recall, 1.0);
  // Outside the delay window the segment is missed.
  std::fill(pred.begin(), pred.end(), 0);
  pred[14] = 1;
  EXPECT_EQ(anomaly_metrics(pred, labels, 3).recall, 0.0);
}

TEST(Anomaly, ThresholdIsMeanPlusThreeStd) {
  const std::vector<double> s{1, 2, 3, 4, 5};
  EXPECT_NEAR(anomaly_threshold(s), 3.0 + 3.0 * std::sqrt(2.0), 1e-12);
}

TEST(Anomaly, ScoresThroughThreshold) {
  std::vector<double> scores(40, 0.1);
  std::vector<int> labels(40, 0);
  scores[20] = 5.0;
  labels[20] = 1;
  const auto m = eval_anomaly(scores, labels, 1.0, 0);
  EXPECT_EQ(m.f1, 1.0);
  EXPECT_EQ(m.precision, 1.0);
}

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "autocl/downstream.hpp"
#include "autocl/error.hpp"
#include "autocl/synth.hpp"
#include "oracles.hpp"

using namespace autocl;
namespace fs = std::filesystem;

namespace {

fs::path temp(const std::string& name) { return fs::temp_directory_path() / ("autocl_" + name); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::string cls_file(std::size_t n, std::size_t classes) {
  std::string s = "AUTOCL-CLS 1 " + std::to_string(n) + " 3 1\n";
  for (std::size_t i = 0; i < n; ++i) {
    s += "label " + std::to_string(i % classes) + "\n";
    for (int t = 0; t < 3; ++t) s += std::to_string(static_cast<double>(i) + 0.5 * t) + "\n";
  }
  return s;
}

}  // namespace

TEST(Dataset, SplitSizesAndStability) {
  const auto path = temp("ten.txt");
  write_text(path, cls_file(10, 1));
  const DatasetBundle a = load_dataset(path, TaskKind::classification, {0.7, 0.1, 0.2}, 3);
  const DatasetBundle b = load_dataset(path, TaskKind::classification, {0.7, 0.1, 0.2}, 3);
  EXPECT_EQ(a.train_idx.size(), 7u);
  EXPECT_EQ(a.val_idx.size(), 1u);
  EXPECT_EQ(a.test_idx.size(), 2u);
  EXPECT_EQ(a.train_idx, b.train_idx);
  EXPECT_EQ(a.test_idx, b.test_idx);
  std::set<std::size_t> all(a.train_idx.begin(), a.train_idx.end());
  all.insert(a.val_idx.begin(), a.val_idx.end());
  all.insert(a.test_idx.begin(), a.test_idx.end());
  EXPECT_EQ(all.size(), 10u);
  fs::remove(path);
}

TEST(Dataset, StratifiedSplits) {
  const DatasetBundle b = synth_classification(20, 16, 3, 0.5, 1);
  for (const auto* idx : {&b.train_idx, &b.val_idx, &b.test_idx}) {
    std::vector<int> count(3);
    for (std::size_t i : *idx) ++count[b.labels[i]];
    EXPECT_EQ(count[0], count[1]);
    EXPECT_EQ(count[1], count[2]);
  }
}

TEST(Dataset, ConstantChannelStandardizesToZero) {
  Tensor series({100, 2});
  for (std::size_t t = 0; t < 100; ++t) {
    series.at(t, 0) = 4.0;
    series.at(t, 1) = static_cast<double>(t);
  }
  const DatasetBundle b = make_series_bundle(TaskKind::forecasting, series, {}, false, default_ratios(TaskKind::forecasting));
  const SplitData tr = split_data(b, Split::train);
  for (std::size_t t = 0; t < tr.x.dim(1); ++t) EXPECT_EQ(tr.x.at(0, t, 0), 0.0);
  double m = 0;
  for (std::size_t t = 0; t < tr.x.dim(1); ++t) m += tr.x.at(0, t, 1);
  EXPECT_NEAR(m, 0.0, 1e-9);
}

TEST(Dataset, StatisticsFromTrainOnly) {
  Tensor series({100, 1});
  for (std::size_t t = 0; t < 100; ++t) series.at(t, 0) = t < 70 ? 1.0 + (t % 2) : 1000.0;
  const DatasetBundle b = make_series_bundle(TaskKind::forecasting, series, {}, false, {0.7, 0.1, 0.2});
  EXPECT_EQ(b.train_end, 70u);
  EXPECT_NEAR(b.mean[0], 1.5, 1e-12);
  EXPECT_NEAR(b.stdev[0], 0.5, 1e-12);
}

TEST(Dataset, WriteLoadWriteIsByteIdentical) {
  const auto f1 = temp("rt1.txt"), f2 = temp("rt2.txt"), f3 = temp("rt3.txt"), f4 = temp("rt4.txt");
  write_dataset(f1, synth_classification(4, 8, 2, 0.5, 2));
  write_dataset(f2, load_dataset(f1, TaskKind::classification, {0.5, 0.25, 0.25}, 1));
  EXPECT_EQ(slurp(f1), slurp(f2));
  write_dataset(f3, synth_anomaly(300, 0.02, 3));
  write_dataset(f4, load_dataset(f3, TaskKind::anomaly, default_ratios(TaskKind::anomaly), 1));
  EXPECT_EQ(slurp(f3), slurp(f4));
  for (const auto& f : {f1, f2, f3, f4}) fs::remove(f);
}

TEST(Dataset, ParseErrorsCarryLineNumbers) {
  const auto path = temp("bad.txt");
  auto message = [&](const std::string& body) {
    write_text(path, body);
    try {
      load_dataset(path, TaskKind::classification, {}, 0);
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("AUTOCL-CLS 1 1 2 1\nlabel 0\n1.0\nabc\n").find("line 4"), std::string::npos);
  EXPECT_NE(message("AUTOCL-CLS 1 1 2 1\nlabel 0\n1.0\n").find("line 4"), std::string::npos);
  EXPECT_NE(message("AUTOCL-XYZ 1 1 2 1\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("AUTOCL-CLS 1 2 1 1\nlabel 0\n1\nlabel 2\n1\n").find("gaps"), std::string::npos);
  EXPECT_THROW(load_dataset(temp("missing.txt"), TaskKind::classification, {}, 0), DataError);
  fs::remove(path);
}

TEST(Dataset, RatioValidation) {
  EXPECT_THROW((SplitRatios{0.5, 0.5, 0.5}).validate(), ConfigError);
  EXPECT_THROW(parse_task("regression"), ConfigError);
  EXPECT_EQ(parse_task("forecast"), TaskKind::forecasting);
}

TEST(Dataset, SearchDataHasNoTestSplit) {
  const DatasetBundle b = synth_classification(10, 16, 2, 0.5, 1);
  EXPECT_FALSE(search_data(b).test.has_value());
  ASSERT_TRUE(report_data(b).test.has_value());
  EXPECT_EQ(report_data(b).test->labels.size(), b.test_idx.size());
}

TEST(Synth, ClassificationBalancedAndDeterministic) {
  const DatasetBundle a = synth_classification(12, 32, 4, 0.5, 7);
  EXPECT_EQ(a.instances, synth_classification(12, 32, 4, 0.5, 7).instances);
  std::vector<int> count(4);
  for (int l : a.labels) ++count[l];
  for (int c : count) EXPECT_EQ(c, 12);
  EXPECT_THROW(synth_classification(5, 32, 1, 0.5, 0), ConfigError);
}

TEST(Synth, NoiselessClassesSeparableBySpectrum) {
  // Mean magnitude spectrum per class; nearest-centroid classifier.
  const std::size_t T = 64, K = 3;
  const DatasetBundle b = synth_classification(20, T, K, 0.0, 4);
  auto spectrum = [&](std::size_t i) {
    std::vector<double> mag(T / 2 + 1);
    for (std::size_t k = 0; k < mag.size(); ++k) {
      double re = 0, im = 0;
      for (std::size_t t = 0; t < T; ++t) {
        re += b.instances.at(i, t, 0) * std::cos(2 * M_PI * static_cast<double>(k * t) / T);
        im -= b.instances.at(i, t, 0) * std::sin(2 * M_PI * static_cast<double>(k * t) / T);
      }
      mag[k] = std::hypot(re, im);
    }
    return mag;
  };
  std::vector<std::vector<double>> centroid(K, std::vector<double>(T / 2 + 1));
  for (std::size_t i : b.train_idx) {
    const auto s = spectrum(i);
    for (std::size_t k = 0; k < s.size(); ++k) centroid[b.labels[i]][k] += s[k];
  }
  std::size_t right = 0;
  for (std::size_t i : b.test_idx) {
    const auto s = spectrum(i);
    double best = 1e300;
    int arg = -1;
    for (std::size_t c = 0; c < K; ++c) {
      double n = std::accumulate(centroid[c].begin(), centroid[c].end(), 0.0), d = 0;
      for (std::size_t k = 0; k < s.size(); ++k) {
        const double diff = s[k] - centroid[c][k] / n * std::accumulate(s.begin(), s.end(), 0.0);
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    right += arg == b.labels[i] ? 1 : 0;
  }
  EXPECT_EQ(right, b.test_idx.size());
}

TEST(Synth, ForecastContiguousAndPredictable) {
  const DatasetBundle b = synth_forecast(2000, 5, true);
  EXPECT_EQ(b.series, synth_forecast(2000, 5, true).series);
  EXPECT_LT(b.train_end, b.val_end);
  EXPECT_LT(b.val_end, b.length());
  EXPECT_THROW(synth_forecast(999, 0), ConfigError);
  // Ridge on 64 lags predicting the next value.
  const std::size_t L = 64;
  auto rows = [&](std::size_t lo, std::size_t hi, Tensor& X, Tensor& Y) {
    const std::size_t n = hi - lo - L;
    X = Tensor({n, L});
    Y = Tensor({n, 1});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < L; ++j) X.at(i, j) = b.series.at(lo + i + j, 0);
      Y.at(i, 0) = b.series.at(lo + i + L, 0);
    }
  };
  Tensor tx, ty, ex, ey;
  rows(0, b.train_end, tx, ty);
  rows(b.val_end - L, b.length(), ex, ey);
  const RidgeFit fit = fit_ridge(tx, ty, 1e-8);
  const Tensor pred = predict_ridge(fit, ex);
  double mse = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) mse += (pred[i] - ey[i]) * (pred[i] - ey[i]);
  EXPECT_LT(mse / static_cast<double>(pred.size()), 1e-3);
}

TEST(Synth, AnomalyRateAndDetector) {
  const std::size_t T = 5000;
  const DatasetBundle b = synth_anomaly(T, 0.02, 6, true);
  EXPECT_EQ(b.labels, synth_anomaly(T, 0.02, 6, true).labels);
  const double frac = std::accumulate(b.labels.begin(), b.labels.end(), 0.0) / static_cast<double>(T);
  EXPECT_NEAR(frac, 0.02, 1.0 / T);
  EXPECT_THROW(synth_anomaly(T, 0.06, 0), ConfigError);

  // z-score of the deviation from a rolling median, with a robust scale of
  // the series itself.
  const std::size_t W = 5;
  std::vector<double> all(b.series.data().begin(), b.series.data().end());
  std::nth_element(all.begin(), all.begin() + T / 2, all.end());
  const double med = all[T / 2];
  for (double& v : all) v = std::abs(v - med);
  std::nth_element(all.begin(), all.begin() + T / 2, all.end());
  const double sigma = all[T / 2] / 0.6745;
  std::vector<std::uint8_t> pred(T);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> win;
    for (std::size_t u = t < W ? 0 : t - W; u <= std::min(T - 1, t + W); ++u) win.push_back(b.series.at(u, 0));
    std::nth_element(win.begin(), win.begin() + win.size() / 2, win.end());
    pred[t] = std::abs(b.series.at(t, 0) - win[win.size() / 2]) > 6.0 * sigma ? 1 : 0;
  }
  EXPECT_GT(anomaly_metrics(pred, b.labels, 7).f1, 0.9);
}

TEST(Synth, ByName) {
  EXPECT_EQ(synth_by_name("classification", 1).task, TaskKind::classification);
  EXPECT_EQ(synth_by_name("forecast", 1).task, TaskKind::forecasting);
  EXPECT_EQ(synth_by_name("anomaly", 1).task, TaskKind::anomaly);
  EXPECT_THROW(synth_by_name("weather", 1), ConfigError);
}

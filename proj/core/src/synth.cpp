#include "autocl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "autocl/error.hpp"
#include "autocl/rng.hpp"

namespace autocl {

DatasetBundle synth_classification(std::size_t n_per_class, std::size_t T, std::size_t n_classes, double noise,
                                   std::uint64_t seed) {
  if (n_classes < 2) throw ConfigError("synth_classification needs at least 2 classes");
  if (n_per_class < 1 || T < 2) throw ConfigError("synth_classification needs n_per_class >= 1 and T >= 2");
  Rng rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> eps(0.0, noise > 0.0 ? noise : 1.0);
  const std::size_t n = n_per_class * n_classes;
  Tensor x({n, T, 1});
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % n_classes;
    labels[i] = static_cast<int>(k);
    const double cycles = 8.0 * static_cast<double>(k + 1);
    const double ph = phase(rng);
    for (std::size_t t = 0; t < T; ++t) {
      double v = std::sin(2.0 * std::numbers::pi * cycles * static_cast<double>(t) / static_cast<double>(T) + ph);
      if (noise > 0.0) v += eps(rng);
      x.at(i, t, 0) = v;
    }
  }
  return make_classification_bundle(std::move(x), std::move(labels), default_ratios(TaskKind::classification),
                                    derive_seed(seed, 1));
}

DatasetBundle synth_forecast(std::size_t T_total, std::uint64_t seed, bool noiseless) {
  if (T_total < 1000) throw ConfigError("synth_forecast needs T_total >= 1000");
  Rng rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> innovation(0.0, 0.3);
  const double p1 = phase(rng), p2 = phase(rng);
  Tensor x({T_total, 1});
  double ar = 0.0;
  for (std::size_t t = 0; t < T_total; ++t) {
    const double tt = static_cast<double>(t);
    double v = 0.002 * tt + std::sin(2.0 * std::numbers::pi * tt / 24.0 + p1) +
               0.6 * std::sin(2.0 * std::numbers::pi * tt / 168.0 + p2);
    if (!noiseless) {
      ar = 0.7 * ar + innovation(rng);
      v += ar;
    }
    x.at(t, 0) = v;
  }
  return make_series_bundle(TaskKind::forecasting, std::move(x), {}, false, default_ratios(TaskKind::forecasting));
}

DatasetBundle synth_anomaly(std::size_t T_total, double anomaly_rate, std::uint64_t seed, bool noiseless) {
  if (!(anomaly_rate > 0.0 && anomaly_rate <= 0.05)) throw ConfigError("anomaly_rate must lie in (0, 0.05]");
  if (T_total < 100) throw ConfigError("synth_anomaly needs T_total >= 100");
  Rng rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> eps(0.0, 0.1);
  const double p1 = phase(rng), p2 = phase(rng);
  Tensor x({T_total, 1});
  for (std::size_t t = 0; t < T_total; ++t) {
    const double tt = static_cast<double>(t);
    x.at(t, 0) = std::sin(2.0 * std::numbers::pi * tt / 50.0 + p1) +
                 0.5 * std::sin(2.0 * std::numbers::pi * tt / 170.0 + p2) + (noiseless ? 0.0 : eps(rng));
  }
  double mean = 0.0, var = 0.0;
  for (double v : x.data()) mean += v;
  mean /= static_cast<double>(T_total);
  for (double v : x.data()) var += (v - mean) * (v - mean);
  const double sigma = std::sqrt(var / static_cast<double>(T_total));

  // Anomalous points are injected until exactly round(rate * T) are labelled;
  // level shifts cover 3..5 consecutive points, spikes a single point. Injected
  // points keep a gap from each other so segments stay distinct.
  const auto target = static_cast<std::size_t>(std::llround(anomaly_rate * static_cast<double>(T_total)));
  std::vector<int> labels(T_total, 0);
  std::uniform_int_distribution<std::size_t> where(10, T_total - 10);
  std::uniform_real_distribution<double> magnitude(8.0, 10.0);
  std::bernoulli_distribution is_shift(0.3), negative(0.5);
  std::uniform_int_distribution<std::size_t> shift_len(3, 5);
  std::size_t injected = 0;
  for (std::size_t attempt = 0; injected < target && attempt < 100 * T_total; ++attempt) {
    const std::size_t start = where(rng);
    std::size_t len = is_shift(rng) ? shift_len(rng) : 1;
    len = std::min(len, target - injected);
    const double amp = (negative(rng) ? -1.0 : 1.0) * magnitude(rng) * sigma;
    if (start + len + 3 >= T_total) continue;
    bool clear = true;
    for (std::size_t t = start - 3; t < start + len + 3; ++t) clear = clear && labels[t] == 0;
    if (!clear) continue;
    for (std::size_t t = start; t < start + len; ++t) {
      x.at(t, 0) += amp;
      labels[t] = 1;
    }
    injected += len;
  }
  return make_series_bundle(TaskKind::anomaly, std::move(x), std::move(labels), true,
                            default_ratios(TaskKind::anomaly));
}

DatasetBundle synth_by_name(const std::string& name, std::uint64_t seed) {
  if (name == "classification") return synth_classification(150, 128, 3, 0.5, seed);
  if (name == "forecast" || name == "forecasting") return synth_forecast(2000, seed);
  if (name == "anomaly") return synth_anomaly(2000, 0.02, seed);
  throw ConfigError("unknown synthetic dataset \"" + name + "\"");
}

}  // namespace autocl

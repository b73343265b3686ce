#include "autocl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "autocl/error.hpp"
#include "autocl/rng.hpp"

namespace autocl {
namespace {

constexpr double kStdFloor = 1e-8;

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view token, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size() || !std::isfinite(v))
    throw DataError("line " + std::to_string(line) + ": bad number \"" + std::string(token) + "\"");
  return v;
}

long long parse_int(std::string_view token, std::size_t line) {
  long long v = 0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size())
    throw DataError("line " + std::to_string(line) + ": bad integer \"" + std::string(token) + "\"");
  return v;
}

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}
  std::vector<std::string_view> next(const char* what) {
    if (!std::getline(in_, line_)) throw DataError("line " + std::to_string(number_ + 1) + ": expected " + what);
    ++number_;
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    return tokens(line_);
  }
  std::size_t number() const { return number_; }

 private:
  std::istream& in_;
  std::string line_;
  std::size_t number_ = 0;
};

void compute_stats(DatasetBundle& b, const std::vector<const double*>& rows) {
  const std::size_t c = b.channels();
  b.mean.assign(c, 0.0);
  b.stdev.assign(c, 1.0);
  if (rows.empty()) return;
  for (const double* r : rows)
    for (std::size_t ch = 0; ch < c; ++ch) b.mean[ch] += r[ch];
  for (double& m : b.mean) m /= static_cast<double>(rows.size());
  std::vector<double> var(c, 0.0);
  for (const double* r : rows)
    for (std::size_t ch = 0; ch < c; ++ch) var[ch] += (r[ch] - b.mean[ch]) * (r[ch] - b.mean[ch]);
  for (std::size_t ch = 0; ch < c; ++ch)
    b.stdev[ch] = std::max(std::sqrt(var[ch] / static_cast<double>(rows.size())), kStdFloor);
}

void check_labels(const std::vector<int>& labels, std::size_t& n_classes) {
  std::set<int> seen(labels.begin(), labels.end());
  if (seen.empty()) throw DataError("no labels");
  if (*seen.begin() < 0) throw DataError("negative class label");
  n_classes = static_cast<std::size_t>(*seen.rbegin()) + 1;
  if (seen.size() != n_classes)
    throw DataError("class labels must cover 0.." + std::to_string(n_classes - 1) + " without gaps");
}

}  // namespace

std::string to_string(TaskKind task) {
  switch (task) {
    case TaskKind::classification: return "classification";
    case TaskKind::forecasting: return "forecast";
    case TaskKind::anomaly: return "anomaly";
  }
  return "?";
}

TaskKind parse_task(const std::string& name) {
  if (name == "classification") return TaskKind::classification;
  if (name == "forecast" || name == "forecasting") return TaskKind::forecasting;
  if (name == "anomaly") return TaskKind::anomaly;
  throw ConfigError("unknown task \"" + name + "\"");
}

void SplitRatios::validate() const {
  if (train <= 0.0 || val < 0.0 || test < 0.0 || std::abs(train + val + test - 1.0) > 1e-6)
    throw ConfigError("split ratios must be non-negative, with a positive train share, and sum to 1");
}

SplitRatios default_ratios(TaskKind task) {
  switch (task) {
    case TaskKind::classification: return {0.7, 0.1, 0.2};
    case TaskKind::forecasting: return {0.6, 0.2, 0.2};
    case TaskKind::anomaly: return {0.45, 0.05, 0.5};
  }
  return {};
}

std::size_t DatasetBundle::channels() const {
  return task == TaskKind::classification ? instances.dim(2) : series.dim(1);
}

std::size_t DatasetBundle::length() const {
  return task == TaskKind::classification ? instances.dim(1) : series.dim(0);
}

DatasetBundle make_classification_bundle(Tensor instances, std::vector<int> labels, const SplitRatios& ratios,
                                         std::uint64_t seed) {
  ratios.validate();
  if (instances.rank() != 3 || instances.dim(0) != labels.size() || instances.dim(1) == 0 || instances.dim(2) == 0)
    throw DataError("classification data must be n x T x c with one label per instance");
  DatasetBundle b;
  b.task = TaskKind::classification;
  b.instances = std::move(instances);
  b.labels = std::move(labels);
  b.has_labels = true;
  check_labels(b.labels, b.n_classes);

  // Shuffle within each class, then deal classes round-robin so every prefix
  // of the order is close to stratified.
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> by_class(b.n_classes);
  for (std::size_t i = 0; i < b.labels.size(); ++i) by_class[static_cast<std::size_t>(b.labels[i])].push_back(i);
  for (auto& members : by_class) std::shuffle(members.begin(), members.end(), rng);
  std::vector<std::size_t> order;
  for (std::size_t round = 0; order.size() < b.labels.size(); ++round)
    for (const auto& members : by_class)
      if (round < members.size()) order.push_back(members[round]);

  const std::size_t n = order.size();
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.train));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.val)));
  b.train_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  b.val_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                   order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  b.test_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  for (auto* idx : {&b.train_idx, &b.val_idx, &b.test_idx}) std::sort(idx->begin(), idx->end());

  const std::size_t T = b.instances.dim(1), c = b.instances.dim(2);
  std::vector<const double*> rows;
  for (std::size_t i : b.train_idx)
    for (std::size_t t = 0; t < T; ++t) rows.push_back(b.instances.ptr() + (i * T + t) * c);
  compute_stats(b, rows);
  return b;
}

DatasetBundle make_series_bundle(TaskKind task, Tensor series, std::vector<int> labels, bool has_labels,
                                 const SplitRatios& ratios) {
  ratios.validate();
  if (task == TaskKind::classification) throw DataError("series data cannot back a classification task");
  if (series.rank() != 2 || series.dim(0) < 2 || series.dim(1) == 0) throw DataError("series must be T x c");
  if (has_labels && labels.size() != series.dim(0)) throw DataError("series labels must have one entry per timestep");
  if (task == TaskKind::anomaly && !has_labels) throw DataError("anomaly data needs a label column");
  for (int l : labels)
    if (l != 0 && l != 1) throw DataError("series labels must be 0 or 1");
  DatasetBundle b;
  b.task = task;
  b.series = std::move(series);
  b.labels = std::move(labels);
  b.has_labels = has_labels;
  const std::size_t T = b.series.dim(0);
  b.train_end = static_cast<std::size_t>(std::llround(static_cast<double>(T) * ratios.train));
  b.val_end = std::min(T, static_cast<std::size_t>(std::llround(static_cast<double>(T) * (ratios.train + ratios.val))));
  if (b.train_end < 2) throw DataError("train split too short");
  std::vector<const double*> rows;
  for (std::size_t t = 0; t < b.train_end; ++t) rows.push_back(b.series.ptr() + t * b.series.dim(1));
  compute_stats(b, rows);
  return b;
}

SplitData split_data(const DatasetBundle& b, Split split) {
  const std::size_t c = b.channels();
  auto standardize = [&](const double* src, double* dst, std::size_t rows) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t ch = 0; ch < c; ++ch) dst[r * c + ch] = (src[r * c + ch] - b.mean[ch]) / b.stdev[ch];
  };
  SplitData out;
  if (b.task == TaskKind::classification) {
    const auto& idx = split == Split::train ? b.train_idx : split == Split::val ? b.val_idx : b.test_idx;
    const std::size_t T = b.instances.dim(1);
    out.x = Tensor({idx.size(), T, c});
    for (std::size_t k = 0; k < idx.size(); ++k) {
      standardize(b.instances.ptr() + idx[k] * T * c, out.x.ptr() + k * T * c, T);
      out.labels.push_back(b.labels[idx[k]]);
    }
    return out;
  }
  const std::size_t lo = split == Split::train ? 0 : split == Split::val ? b.train_end : b.val_end;
  const std::size_t hi = split == Split::train ? b.train_end : split == Split::val ? b.val_end : b.length();
  out.x = Tensor({1, hi - lo, c});
  standardize(b.series.ptr() + lo * c, out.x.ptr(), hi - lo);
  if (b.has_labels) out.labels.assign(b.labels.begin() + static_cast<std::ptrdiff_t>(lo),
                                      b.labels.begin() + static_cast<std::ptrdiff_t>(hi));
  return out;
}

TaskData search_data(const DatasetBundle& b) {
  TaskData d;
  d.task = b.task;
  d.n_classes = b.n_classes;
  d.train = split_data(b, Split::train);
  d.val = split_data(b, Split::val);
  return d;
}

TaskData report_data(const DatasetBundle& b) {
  TaskData d = search_data(b);
  d.test = split_data(b, Split::test);
  return d;
}

DatasetBundle load_dataset(const std::filesystem::path& path, TaskKind task, const SplitRatios& ratios,
                           std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  LineReader reader(in);
  const auto header = reader.next("a header");
  if (header.empty()) throw DataError("line 1: empty header");
  const bool cls = header[0] == "AUTOCL-CLS";
  if (!cls && header[0] != "AUTOCL-SER") throw DataError("line 1: unknown format \"" + std::string(header[0]) + "\"");
  if (header.size() != 5 || header[1] != "1") throw DataError("line 1: malformed header");
  if (cls != (task == TaskKind::classification))
    throw DataError(path.string() + ": " + std::string(header[0]) + " file does not fit task " + to_string(task));

  auto dim = [&](std::string_view tok) {
    const long long v = parse_int(tok, 1);
    if (v <= 0) throw DataError("line 1: dimensions must be positive");
    return static_cast<std::size_t>(v);
  };
  auto read_row = [&](double* dst, std::size_t c, int* label) {
    const auto toks = reader.next("a data row");
    const std::size_t want = c + (label ? 1 : 0);
    if (toks.size() != want)
      throw DataError("line " + std::to_string(reader.number()) + ": expected " + std::to_string(want) + " fields");
    for (std::size_t ch = 0; ch < c; ++ch) dst[ch] = parse_number(toks[ch], reader.number());
    if (label) {
      const long long l = parse_int(toks[c], reader.number());
      if (l != 0 && l != 1) throw DataError("line " + std::to_string(reader.number()) + ": label must be 0 or 1");
      *label = static_cast<int>(l);
    }
  };

  if (cls) {
    const std::size_t n = dim(header[2]), T = dim(header[3]), c = dim(header[4]);
    Tensor x({n, T, c});
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto toks = reader.next("a label line");
      if (toks.size() != 2 || toks[0] != "label")
        throw DataError("line " + std::to_string(reader.number()) + ": expected \"label <int>\"");
      const long long l = parse_int(toks[1], reader.number());
      if (l < 0 || l > 1'000'000) throw DataError("line " + std::to_string(reader.number()) + ": label out of range");
      labels[i] = static_cast<int>(l);
      for (std::size_t t = 0; t < T; ++t) read_row(x.ptr() + (i * T + t) * c, c, nullptr);
    }
    return make_classification_bundle(std::move(x), std::move(labels), ratios, seed);
  }
  const std::size_t T = dim(header[2]), c = dim(header[3]);
  const long long has = parse_int(header[4], 1);
  if (has != 0 && has != 1) throw DataError("line 1: has_labels must be 0 or 1");
  Tensor x({T, c});
  std::vector<int> labels(has ? T : 0);
  for (std::size_t t = 0; t < T; ++t) read_row(x.ptr() + t * c, c, has ? &labels[t] : nullptr);
  return make_series_bundle(task, std::move(x), std::move(labels), has == 1, ratios);
}

void write_dataset(const std::filesystem::path& path, const DatasetBundle& b) {
  std::ostringstream out;
  const std::size_t c = b.channels();
  auto row = [&](const double* v, const int* label) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      if (ch) out << ' ';
      out << format_number(v[ch]);
    }
    if (label) out << ' ' << *label;
    out << '\n';
  };
  if (b.task == TaskKind::classification) {
    const std::size_t n = b.instances.dim(0), T = b.instances.dim(1);
    out << "AUTOCL-CLS 1 " << n << ' ' << T << ' ' << c << '\n';
    for (std::size_t i = 0; i < n; ++i) {
      out << "label " << b.labels[i] << '\n';
      for (std::size_t t = 0; t < T; ++t) row(b.instances.ptr() + (i * T + t) * c, nullptr);
    }
  } else {
    const std::size_t T = b.series.dim(0);
    out << "AUTOCL-SER 1 " << T << ' ' << c << ' ' << (b.has_labels ? 1 : 0) << '\n';
    for (std::size_t t = 0; t < T; ++t) row(b.series.ptr() + t * c, b.has_labels ? &b.labels[t] : nullptr);
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot write " + path.string());
  file << out.str();
}

}  // namespace autocl

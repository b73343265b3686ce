#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "autocl/tensor.hpp"

namespace autocl {

enum class TaskKind { classification, forecasting, anomaly };

std::string to_string(TaskKind task);
// Accepts classification, forecast, forecasting, anomaly.
TaskKind parse_task(const std::string& name);

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;

  void validate() const;
};

SplitRatios default_ratios(TaskKind task);

// Raw data plus split assignment and train-split channel statistics.
struct DatasetBundle {
  TaskKind task = TaskKind::classification;

  Tensor instances;          // classification: n x T x c
  Tensor series;             // forecasting / anomaly: T x c
  std::vector<int> labels;   // per instance, or per timestep when has_labels
  bool has_labels = false;
  std::size_t n_classes = 0;

  std::vector<std::size_t> train_idx, val_idx, test_idx;  // classification
  std::size_t train_end = 0, val_end = 0;                 // series: [0, train_end), [train_end, val_end), rest

  std::vector<double> mean, stdev;  // per channel, train split only

  std::size_t channels() const;
  std::size_t length() const;  // T of an instance, or series length
};

enum class Split { train, val, test };

// Standardized split contents. Classification: B x T x c and one label per
// instance. Series: 1 x L x c and one label per timestep (if any).
struct SplitData {
  Tensor x;
  std::vector<int> labels;
};

SplitData split_data(const DatasetBundle& bundle, Split split);

// What a downstream evaluation may see. Search builds this without the test
// split; only reporting fills `test`.
struct TaskData {
  TaskKind task = TaskKind::classification;
  std::size_t n_classes = 0;
  SplitData train, val;
  std::optional<SplitData> test;

  std::size_t channels() const { return train.x.dim(2); }
};

TaskData search_data(const DatasetBundle& bundle);
TaskData report_data(const DatasetBundle& bundle);

// Split and standardize in-memory data.
DatasetBundle make_classification_bundle(Tensor instances, std::vector<int> labels, const SplitRatios& ratios,
                                         std::uint64_t seed);
DatasetBundle make_series_bundle(TaskKind task, Tensor series, std::vector<int> labels, bool has_labels,
                                 const SplitRatios& ratios);

// Text formats:
//   AUTOCL-CLS 1 <n> <T> <c>, then per instance "label <k>" and T rows of c values
//   AUTOCL-SER 1 <T> <c> <has_labels>, then T rows of c values (+ 0|1 label)
DatasetBundle load_dataset(const std::filesystem::path& path, TaskKind task, const SplitRatios& ratios,
                           std::uint64_t seed);
void write_dataset(const std::filesystem::path& path, const DatasetBundle& bundle);

}  // namespace autocl

#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "autocl/space.hpp"

namespace autocl {

struct ScoredStrategy {
  Strategy strategy;
  double score = 0.0;  // validation score on its own task
};

// Validation score of a strategy on each of the three tasks.
using TaskScorer = std::function<std::array<double, 3>(const Strategy&)>;

struct GgsResult {
  Strategy strategy;
  std::array<std::size_t, 3> triple{};  // position in each top-K list
  std::size_t shared = 0;              // branches on which the triple agrees
  std::array<double, 3> scores{};      // scores of the returned strategy
  nlohmann::json decisions = nlohmann::json::array();
};

// Number of branches on which all three strategies pick the same option.
std::size_t agreement(const Strategy& a, const Strategy& b, const Strategy& c);

// Composes a strategy that transfers across three tasks from each task's
// top-K list. Shared options of the most agreeing triple are kept; each
// remaining branch takes the option (among those seen in the triple) whose
// per-task drop from the best option stays within drop_threshold.
GgsResult compose_ggs(const std::array<std::vector<ScoredStrategy>, 3>& topk, double drop_threshold,
                      const TaskScorer& scorer);

}  // namespace autocl

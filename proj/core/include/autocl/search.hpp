#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autocl/controller.hpp"
#include "autocl/dataset.hpp"
#include "autocl/encoder.hpp"
#include "autocl/training.hpp"

namespace autocl {

struct SearchConfig {
  double alpha = 10.0;
  double epsilon = 0.001;
  std::size_t max_iters = 500;
  double encoder_lr = 0.001;        // phase-1 SGD on the copied encoder
  double controller_lr = 0.0001;
  std::size_t pretrain_epochs = 10; // M, phase 2
  double pretrain_lr = 0.001;       // phase-2 Adam
  std::size_t workers = 1;          // K
  std::uint64_t seed = 0;
  bool reward_filtering = true;
  std::size_t controller_dim = 320;
  EncoderConfig encoder;
  TrainConfig train;
  DownstreamConfig downstream;
  SpaceRestriction restriction;

  void validate() const;
};

// Every field that affects results (seed included).
nlohmann::json config_json(const SearchConfig& config);

double default_epsilon(TaskKind task);
SearchConfig default_search_config(TaskKind task);

// Filtered reward with a running-max baseline: alpha * (R - R* + epsilon).
double filtered_reward(double reward, double best, double alpha, double epsilon);

struct Candidate {
  Strategy strategy;
  double reward = 0.0;
  std::size_t step = 0;
};

struct StepRecord {
  std::size_t step = 0;
  Strategy strategy;
  double raw_reward = 0.0;
  double delta = 0.0;
  bool accepted = false;
  bool diverged = false;
  double running_max = 0.0;
  double wallclock_ms = 0.0;
};

nlohmann::json to_json_line(const StepRecord& r);

// Scores a strategy on behalf of the search. `current` is the encoder kept by
// the search (null when the environment does not train one).
class Environment {
 public:
  struct Probe {
    double reward = 0.0;
    bool diverged = false;
    std::optional<EncoderParams> params;  // trained copy
  };
  virtual ~Environment() = default;
  virtual Probe probe(const EncoderParams* current, const Strategy& s, Rng& rng) = 0;
};

// One epoch of SGD on a copy of the current encoder, then the validation
// reward of the copy. A diverging epoch scores worst_reward(task).
class TaskEnvironment : public Environment {
 public:
  TaskEnvironment(TaskData data, const SearchConfig& config) : data_(std::move(data)), config_(config) {}
  Probe probe(const EncoderParams* current, const Strategy& s, Rng& rng) override;
  const TaskData& data() const { return data_; }

 private:
  TaskData data_;
  SearchConfig config_;
};

struct SearchState {
  ControllerParams controller;
  std::optional<EncoderParams> encoder;
  double best_reward = 0.0;  // R*
  bool has_reward = false;
  std::size_t step = 0;
  std::vector<Candidate> candidates;
  Rng rng;
};

SearchState init_search(const SearchConfig& config, bool with_encoder = true);
StepRecord phase1_step(SearchState& state, Environment& env, const SearchConfig& config);

struct SearchResult {
  std::vector<Candidate> candidates;
  std::vector<StepRecord> trace;
  SearchState state;
  std::string warning;  // set when no candidate was accepted
};

SearchResult run_candidate_search(const SearchConfig& config, Environment& env, bool with_encoder = true);
SearchResult run_candidate_search(const SearchConfig& config, const TaskData& data);

struct RankedCandidate {
  std::size_t index = 0;  // position in the candidate list
  Strategy strategy;
  double val_score = 0.0;
  bool failed = false;
  std::string error;
  double wallclock_ms = 0.0;
};

struct EvaluationResult {
  std::vector<RankedCandidate> ranked;   // by val_score desc, then index; failures last
  std::optional<EncoderParams> best_encoder;
  std::optional<double> test_score;      // top entry only
};

// Scores candidate i with seed derive_seed(seed, strategy_id(strategy)), so a
// strategy gets the same score wherever it sits in the list. Returns the
// validation score and optionally the trained encoder.
using CandidateScorer = std::function<std::pair<double, std::optional<EncoderParams>>(
    const Strategy& s, std::size_t index, std::uint64_t seed)>;

EvaluationResult evaluate_candidates(const std::vector<Candidate>& candidates, std::size_t workers,
                                     std::uint64_t seed, const CandidateScorer& scorer);
// Fresh encoder, M epochs of Adam, validation score. Ranking never sees the
// test split; when `data` carries one, only the top entry is scored on it.
EvaluationResult evaluate_candidates(const std::vector<Candidate>& candidates, const SearchConfig& config,
                                     const TaskData& data);

}  // namespace autocl

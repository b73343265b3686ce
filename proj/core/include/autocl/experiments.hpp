#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autocl/search.hpp"

namespace autocl {

struct ExperimentConfig {
  SearchConfig search;  // seed is replaced per run
  std::size_t per_class = 150;
  std::size_t length = 128;
  std::size_t classes = 3;
  double noise = 0.5;
  std::string trace_dir;  // per-run trace.jsonl files go here when set
};

struct ArmRun {
  std::uint64_t seed = 0;
  std::vector<double> raw_rewards;
  std::vector<double> running_max;
  double final_encoder_score = 0.0;  // validation score of the encoder held at the end
  double best_score = 0.0;           // final running max
  std::size_t candidates = 0;
  double wallclock_ms = 0.0;
  std::string trace_file;
};

struct Arm {
  std::string name;
  std::string config_hash;
  std::vector<ArmRun> runs;
  double wallclock_ms = 0.0;
};

struct ExperimentReport {
  std::string id;
  std::vector<Arm> arms;
  nlohmann::json verdicts = nlohmann::json::object();
  nlohmann::json details = nlohmann::json::object();
};

nlohmann::json to_json(const ExperimentReport& r);

// FNV-1a of the compact JSON dump.
std::string config_hash(const nlohmann::json& config);

// Filtered vs. unfiltered search. Verdict: the filtered arm ends with the
// better encoder on average.
ExperimentReport run_filter_ablation(const std::vector<std::uint64_t>& seeds, const ExperimentConfig& config);

// Phase 1 with one-epoch probes vs. probes that pretrain a fresh encoder for
// M epochs. Verdict: speedup of at least 5.
ExperimentReport run_speed_ablation(std::size_t iters, const ExperimentConfig& config, std::uint64_t seed = 0);

// Augmentation-only space vs. the full space. Verdict: the full space finds
// at least as good a strategy on average.
ExperimentReport run_space_ablation(const std::vector<std::uint64_t>& seeds, const ExperimentConfig& config);

}  // namespace autocl

#include "autocl/experiments.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include "autocl/error.hpp"
#include "autocl/synth.hpp"

namespace autocl {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

TaskData experiment_data(const ExperimentConfig& c, std::uint64_t seed) {
  return search_data(synth_classification(c.per_class, c.length, c.classes, c.noise, seed));
}

std::string write_trace(const ExperimentConfig& c, const std::string& arm, std::uint64_t seed,
                        const std::vector<StepRecord>& trace) {
  if (c.trace_dir.empty()) return {};
  const std::filesystem::path dir = std::filesystem::path(c.trace_dir) / arm;
  std::filesystem::create_directories(dir);
  const std::filesystem::path file = dir / ("seed_" + std::to_string(seed) + ".jsonl");
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file.string());
  for (const auto& r : trace) out << to_json_line(r).dump() << '\n';
  return file.string();
}

ArmRun run_arm(const ExperimentConfig& c, const SearchConfig& sc, const std::string& arm, std::uint64_t seed,
               Environment& env, const TaskData& data) {
  const auto start = Clock::now();
  SearchResult res = run_candidate_search(sc, env, true);
  ArmRun run;
  run.seed = seed;
  run.wallclock_ms = ms_since(start);
  for (const auto& r : res.trace) {
    run.raw_rewards.push_back(r.raw_reward);
    run.running_max.push_back(r.running_max);
  }
  run.best_score = res.trace.empty() ? worst_reward(data.task) : res.trace.back().running_max;
  run.final_encoder_score = compute_reward(*res.state.encoder, data, sc.downstream);
  run.candidates = res.candidates.size();
  run.trace_file = write_trace(c, arm, seed, res.trace);
  return run;
}

double mean_of(const Arm& arm, double ArmRun::*field) {
  if (arm.runs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : arm.runs) s += r.*field;
  return s / static_cast<double>(arm.runs.size());
}

// Scores a probe by pretraining a fresh encoder for M epochs.
class FullPretrainEnvironment : public Environment {
 public:
  FullPretrainEnvironment(const TaskData& data, const SearchConfig& config) : data_(data), config_(config) {}
  Probe probe(const EncoderParams*, const Strategy& s, Rng& rng) override {
    Probe p;
    try {
      EncoderParams enc = pretrain(config_.encoder, rng(), data_, s, config_.pretrain_epochs, config_.pretrain_lr,
                                   config_.train);
      p.reward = compute_reward(enc, data_, config_.downstream);
      p.params = std::move(enc);
    } catch (const NumericError&) {
      p.diverged = true;
      p.reward = worst_reward(data_.task);
    }
    return p;
  }

 private:
  const TaskData& data_;
  SearchConfig config_;
};

void require_seeds(const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() < 5) throw ConfigError("ablation needs at least 5 seeds");
}

}  // namespace

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json to_json(const ExperimentReport& r) {
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& a : r.arms) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& run : a.runs)
      runs.push_back({{"seed", run.seed},
                      {"raw_rewards", run.raw_rewards},
                      {"running_max", run.running_max},
                      {"final_encoder_score", run.final_encoder_score},
                      {"best_score", run.best_score},
                      {"candidates", run.candidates},
                      {"wallclock_ms", run.wallclock_ms},
                      {"trace_file", run.trace_file}});
    arms.push_back({{"name", a.name}, {"config_hash", a.config_hash}, {"wallclock_ms", a.wallclock_ms},
                    {"runs", runs}});
  }
  return {{"id", r.id}, {"arms", arms}, {"verdicts", r.verdicts}, {"details", r.details}};
}

ExperimentReport run_filter_ablation(const std::vector<std::uint64_t>& seeds, const ExperimentConfig& config) {
  require_seeds(seeds);
  ExperimentReport rep;
  rep.id = "filter_ablation";
  for (bool filtering : {true, false}) {
    Arm arm;
    arm.name = filtering ? "filtered" : "unfiltered";
    SearchConfig sc = config.search;
    sc.reward_filtering = filtering;
    for (std::uint64_t seed : seeds) {
      sc.seed = seed;
      const TaskData data = experiment_data(config, seed);
      TaskEnvironment env(data, sc);
      arm.runs.push_back(run_arm(config, sc, arm.name, seed, env, data));
      arm.wallclock_ms += arm.runs.back().wallclock_ms;
    }
    sc.seed = 0;
    arm.config_hash = config_hash(config_json(sc));
    rep.arms.push_back(std::move(arm));
  }
  const double f = mean_of(rep.arms[0], &ArmRun::final_encoder_score);
  const double u = mean_of(rep.arms[1], &ArmRun::final_encoder_score);
  bool monotone = true;
  for (const auto& run : rep.arms[0].runs)
    for (std::size_t i = 1; i < run.running_max.size(); ++i) monotone &= run.running_max[i] >= run.running_max[i - 1];
  rep.details = {{"filtered_mean", f}, {"unfiltered_mean", u},
                 {"filtered_best_mean", mean_of(rep.arms[0], &ArmRun::best_score)},
                 {"unfiltered_best_mean", mean_of(rep.arms[1], &ArmRun::best_score)}};
  rep.verdicts = {{"filtered_better", f > u}, {"running_max_monotone", monotone}};
  return rep;
}

ExperimentReport run_speed_ablation(std::size_t iters, const ExperimentConfig& config, std::uint64_t seed) {
  if (iters < 50) throw ConfigError("speed ablation needs at least 50 iterations");
  ExperimentReport rep;
  rep.id = "speed_ablation";
  SearchConfig sc = config.search;
  sc.max_iters = iters;
  sc.seed = seed;
  const TaskData data = experiment_data(config, seed);
  for (bool full : {false, true}) {
    Arm arm;
    arm.name = full ? "full_pretrain" : "one_epoch";
    std::unique_ptr<Environment> env;
    if (full)
      env = std::make_unique<FullPretrainEnvironment>(data, sc);
    else
      env = std::make_unique<TaskEnvironment>(data, sc);
    arm.runs.push_back(run_arm(config, sc, arm.name, seed, *env, data));
    arm.wallclock_ms = arm.runs.back().wallclock_ms;
    arm.config_hash = config_hash(config_json(sc));
    rep.arms.push_back(std::move(arm));
  }
  const double speedup = rep.arms[1].wallclock_ms / std::max(rep.arms[0].wallclock_ms, 1e-9);
  rep.details = {{"one_epoch_ms", rep.arms[0].wallclock_ms},
                 {"full_pretrain_ms", rep.arms[1].wallclock_ms},
                 {"speedup", speedup},
                 {"pretrain_epochs", sc.pretrain_epochs}};
  rep.verdicts = {{"speedup_at_least_5", speedup >= 5.0},
                  {"both_nonempty", rep.arms[0].runs[0].candidates > 0 && rep.arms[1].runs[0].candidates > 0}};
  return rep;
}

ExperimentReport run_space_ablation(const std::vector<std::uint64_t>& seeds, const ExperimentConfig& config) {
  require_seeds(seeds);
  ExperimentReport rep;
  rep.id = "space_ablation";
  for (bool restricted : {false, true}) {
    Arm arm;
    arm.name = restricted ? "data_aug_only" : "full_space";
    SearchConfig sc = config.search;
    if (restricted) sc.restriction = SpaceRestriction::data_aug_only();
    for (std::uint64_t seed : seeds) {
      sc.seed = seed;
      const TaskData data = experiment_data(config, seed);
      TaskEnvironment env(data, sc);
      arm.runs.push_back(run_arm(config, sc, arm.name, seed, env, data));
      arm.wallclock_ms += arm.runs.back().wallclock_ms;
    }
    sc.seed = 0;
    arm.config_hash = config_hash(config_json(sc));
    rep.arms.push_back(std::move(arm));
  }
  const double full = mean_of(rep.arms[0], &ArmRun::best_score);
  const double aug = mean_of(rep.arms[1], &ArmRun::best_score);
  nlohmann::json deltas = nlohmann::json::array();
  for (std::size_t i = 0; i < seeds.size(); ++i)
    deltas.push_back({{"seed", seeds[i]}, {"delta", rep.arms[0].runs[i].best_score - rep.arms[1].runs[i].best_score}});
  rep.details = {{"full_space_mean", full}, {"data_aug_only_mean", aug}, {"per_seed", deltas}};
  rep.verdicts = {{"full_space_at_least_as_good", full >= aug}};
  return rep;
}

}  // namespace autocl

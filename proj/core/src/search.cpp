#include "autocl/search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "autocl/error.hpp"
#include "autocl/optim.hpp"

namespace autocl {
namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

void SearchConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(encoder_lr > 0.0) || !(controller_lr > 0.0) || !(pretrain_lr > 0.0))
    throw ConfigError("learning rates must be positive");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (controller_dim < 1) throw ConfigError("controller_dim must be positive");
  if (train.max_input_len < 2) throw ConfigError("max_input_len must be at least 2");
  encoder.validate();
}

nlohmann::json config_json(const SearchConfig& c) {
  nlohmann::json allowed = nlohmann::json::array();
  for (std::size_t b = 0; b < kBranchCount; ++b) allowed.push_back(c.restriction.allowed(b));
  const auto& d = c.downstream;
  return {{"alpha", c.alpha},
          {"epsilon", c.epsilon},
          {"max_iters", c.max_iters},
          {"encoder_lr", c.encoder_lr},
          {"controller_lr", c.controller_lr},
          {"pretrain_epochs", c.pretrain_epochs},
          {"pretrain_lr", c.pretrain_lr},
          {"workers", c.workers},
          {"seed", c.seed},
          {"reward_filtering", c.reward_filtering},
          {"controller_dim", c.controller_dim},
          {"encoder", c.encoder},
          {"train",
           {{"batch_size", c.train.batch_size},
            {"series_window", c.train.series_window},
            {"max_input_len", c.train.max_input_len}}},
          {"downstream",
           {{"logistic", {{"lr", d.logistic.lr}, {"epochs", d.logistic.epochs}, {"l2", d.logistic.l2}}},
            {"horizon", d.horizon},
            {"ridge_grid", d.ridge_grid},
            {"forecast_window", d.forecast_window},
            {"forecast_stride", d.forecast_stride},
            {"anomaly_window", d.anomaly_window},
            {"anomaly_delay", d.anomaly_delay}}},
          {"allowed", allowed}};
}

double default_epsilon(TaskKind task) { return task == TaskKind::forecasting ? 0.0001 : 0.001; }

SearchConfig default_search_config(TaskKind task) {
  SearchConfig c;
  c.epsilon = default_epsilon(task);
  return c;
}

double filtered_reward(double reward, double best, double alpha, double epsilon) {
  return alpha * (reward - best + epsilon);
}

nlohmann::json to_json_line(const StepRecord& r) {
  return {{"step", r.step}, {"strategy", r.strategy}, {"raw_reward", r.raw_reward},
          {"delta", r.delta}, {"accepted", r.accepted}, {"wallclock_ms", r.wallclock_ms}};
}

Environment::Probe TaskEnvironment::probe(const EncoderParams* current, const Strategy& s, Rng& rng) {
  if (!current) throw ConfigError("TaskEnvironment needs an encoder");
  Probe p;
  EncoderParams copy = *current;
  const Sgd sgd{config_.encoder_lr};
  const StepFn step = [&sgd](std::vector<Tensor*> params, const std::vector<const Tensor*>& g) {
    sgd.step(std::move(params), g);
  };
  try {
    train_epoch(copy, data_.train, data_.task, s, step, rng, config_.train);
    p.reward = compute_reward(copy, data_, config_.downstream);
    if (!std::isfinite(p.reward)) throw NumericError("non-finite reward");
  } catch (const NumericError&) {
    p.diverged = true;
    p.reward = worst_reward(data_.task);
    return p;
  }
  p.params = std::move(copy);
  return p;
}

SearchState init_search(const SearchConfig& config, bool with_encoder) {
  config.validate();
  SearchState st;
  st.controller = init_controller(config.controller_dim, derive_seed(config.seed, 1));
  if (with_encoder) st.encoder = init_encoder(config.encoder, derive_seed(config.seed, 2));
  st.rng.seed(derive_seed(config.seed, 3));
  return st;
}

StepRecord phase1_step(SearchState& state, Environment& env, const SearchConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  StepRecord rec;
  rec.step = ++state.step;
  const ControllerSample sample = sample_strategy(state.controller, state.rng, config.restriction);
  rec.strategy = sample.strategy;

  Rng probe_rng(derive_seed(config.seed, 1'000'000 + rec.step));
  Environment::Probe probe = env.probe(state.encoder ? &*state.encoder : nullptr, sample.strategy, probe_rng);
  rec.raw_reward = probe.reward;
  rec.diverged = probe.diverged;

  if (config.reward_filtering) {
    const double baseline = state.has_reward ? state.best_reward : probe.reward;
    rec.delta = filtered_reward(probe.reward, baseline, config.alpha, config.epsilon);
    rec.accepted = rec.delta > 0.0;
  } else {
    rec.delta = probe.reward;
    rec.accepted = true;
  }
  reinforce_update(state.controller, sample, rec.delta, config.controller_lr);

  if (rec.accepted) {
    if (probe.params) state.encoder = std::move(*probe.params);
    auto same = std::find_if(state.candidates.begin(), state.candidates.end(),
                             [&](const Candidate& c) { return c.strategy == sample.strategy; });
    if (same == state.candidates.end()) {
      state.candidates.push_back({sample.strategy, probe.reward, rec.step});
    } else if (probe.reward > same->reward) {
      same->reward = probe.reward;
      same->step = rec.step;
    }
  }
  state.best_reward = state.has_reward ? std::max(state.best_reward, probe.reward) : probe.reward;
  state.has_reward = true;
  rec.running_max = state.best_reward;
  rec.wallclock_ms = elapsed_ms(start);
  return rec;
}

SearchResult run_candidate_search(const SearchConfig& config, Environment& env, bool with_encoder) {
  SearchResult res;
  res.state = init_search(config, with_encoder);
  for (std::size_t i = 0; i < config.max_iters; ++i) res.trace.push_back(phase1_step(res.state, env, config));
  res.candidates = res.state.candidates;
  if (res.candidates.empty()) res.warning = "no strategy was accepted; fall back to ggs_preset";
  return res;
}

SearchResult run_candidate_search(const SearchConfig& config, const TaskData& data) {
  TaskData view = data;
  view.test.reset();
  TaskEnvironment env(std::move(view), config);
  return run_candidate_search(config, env, true);
}

EvaluationResult evaluate_candidates(const std::vector<Candidate>& candidates, std::size_t workers,
                                     std::uint64_t seed, const CandidateScorer& scorer) {
  if (candidates.empty()) throw ConfigError("no candidates to evaluate");
  const std::size_t n = candidates.size();
  std::vector<RankedCandidate> results(n);
  std::vector<std::optional<EncoderParams>> encoders(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto start = std::chrono::steady_clock::now();
      RankedCandidate& r = results[i];
      r.index = i;
      r.strategy = candidates[i].strategy;
      try {
        auto [score, enc] = scorer(r.strategy, i, derive_seed(seed, strategy_id(r.strategy)));
        if (!std::isfinite(score)) throw NumericError("non-finite validation score");
        r.val_score = score;
        encoders[i] = std::move(enc);
      } catch (const std::exception& e) {
        r.failed = true;
        r.error = e.what();
      }
      r.wallclock_ms = elapsed_ms(start);
    }
  };
  const std::size_t k = std::clamp<std::size_t>(workers, 1, n);
  if (k == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < k; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::stable_sort(results.begin(), results.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.failed != b.failed) return !a.failed;
    if (a.failed) return a.index < b.index;
    if (a.val_score != b.val_score) return a.val_score > b.val_score;
    return a.index < b.index;
  });
  EvaluationResult out;
  if (!results.front().failed) out.best_encoder = std::move(encoders[results.front().index]);
  out.ranked = std::move(results);
  return out;
}

EvaluationResult evaluate_candidates(const std::vector<Candidate>& candidates, const SearchConfig& config,
                                     const TaskData& data) {
  config.validate();
  TaskData view = data;
  view.test.reset();
  const CandidateScorer scorer = [&](const Strategy& s, std::size_t, std::uint64_t seed) {
    EncoderParams enc = pretrain(config.encoder, seed, view, s, config.pretrain_epochs, config.pretrain_lr,
                                 config.train);
    const double score = compute_reward(enc, view, config.downstream);
    return std::pair{score, std::optional<EncoderParams>(std::move(enc))};
  };
  EvaluationResult out = evaluate_candidates(candidates, config.workers, config.seed, scorer);
  if (out.best_encoder && data.test)
    out.test_score = evaluate_encoder(*out.best_encoder, data, config.downstream, Split::test).reward;
  return out;
}

}  // namespace autocl

// autocl: strategy search, candidate evaluation, pretraining, GGS
// composition, reporting and ablations from the command line.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "autocl/checkpoint.hpp"
#include "autocl/error.hpp"
#include "autocl/experiments.hpp"
#include "autocl/ggs.hpp"
#include "autocl/search.hpp"
#include "autocl/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace autocl;

namespace {

struct Common {
  std::string task = "classification";
  std::string data;
  std::uint64_t seed = 0;
  std::size_t depth = 10, hidden = 64, out_dim = 320;
  std::size_t epochs = 10;
};

void add_encoder_opts(CLI::App* app, Common& c) {
  app->add_option("--depth", c.depth, "Residual blocks in the encoder");
  app->add_option("--hidden", c.hidden, "Encoder hidden channels");
  app->add_option("--out-dim", c.out_dim, "Embedding dimension");
}

std::uint64_t effective_seed(std::uint64_t flag) {
  if (const char* env = std::getenv("AUTOCL_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("AUTOCL_SEED is not an integer: ") + env);
    }
  }
  return flag;
}

DatasetBundle load_bundle(const std::string& spec, TaskKind task, std::uint64_t seed) {
  if (spec.empty()) throw ConfigError("--data is required");
  if (spec.rfind("synth:", 0) == 0) {
    DatasetBundle b = synth_by_name(spec.substr(6), seed);
    if (b.task != task) throw DataError("dataset " + spec + " does not match task " + to_string(task));
    return b;
  }
  return load_dataset(spec, task, default_ratios(task), seed);
}

SearchConfig search_config(const Common& c, TaskKind task) {
  SearchConfig sc = default_search_config(task);
  sc.seed = c.seed;
  sc.encoder.depth = c.depth;
  sc.encoder.hidden = c.hidden;
  sc.encoder.out_dim = c.out_dim;
  sc.pretrain_epochs = c.epochs;
  return sc;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Strategy read_strategy(const std::string& spec) {
  if (spec == "ggs") return ggs_preset();
  if (spec == "default") return default_strategy();
  json j = read_json(spec);
  if (j.is_object() && j.contains("strategy")) j = j["strategy"];
  try {
    return validate(j.get<Strategy>());
  } catch (const json::exception& e) {
    throw ConfigError(spec + ": " + e.what());
  }
}

// Values recorded by `search` and reused by later stages.
struct Meta {
  Common common;
  fs::path dir;
};

Meta read_meta(const fs::path& dir) {
  const json j = read_json(dir / "meta.json");
  Meta m;
  m.dir = dir;
  m.common.task = j.at("task").get<std::string>();
  m.common.data = j.at("data").get<std::string>();
  m.common.seed = j.at("seed").get<std::uint64_t>();
  const json& e = j.at("config").at("encoder");
  m.common.depth = e.at("depth").get<std::size_t>();
  m.common.hidden = e.at("hidden").get<std::size_t>();
  m.common.out_dim = e.at("out_dim").get<std::size_t>();
  m.common.epochs = j.at("config").at("pretrain_epochs").get<std::size_t>();
  return m;
}

int cmd_search(Common c, std::size_t iters, bool no_filter, bool aug_only, const fs::path& out) {
  c.seed = effective_seed(c.seed);
  const TaskKind task = parse_task(c.task);
  SearchConfig sc = search_config(c, task);
  sc.max_iters = iters;
  sc.reward_filtering = !no_filter;
  if (aug_only) sc.restriction = SpaceRestriction::data_aug_only();
  const TaskData data = search_data(load_bundle(c.data, task, c.seed));

  fs::create_directories(out);
  const SearchResult res = run_candidate_search(sc, data);
  std::ofstream trace(out / "trace.jsonl");
  for (const auto& r : res.trace) trace << to_json_line(r).dump() << '\n';
  json cands = json::array();
  for (const auto& cand : res.candidates)
    cands.push_back({{"strategy", cand.strategy}, {"reward", cand.reward}, {"step", cand.step}});
  write_json(out / "candidates.json", cands);
  write_json(out / "meta.json",
             {{"task", to_string(task)}, {"data", c.data}, {"seed", c.seed}, {"config", config_json(sc)}});
  save_controller(out / "controller.ckpt", res.state.controller);
  if (!res.warning.empty()) std::cerr << "warning: " << res.warning << '\n';
  std::cout << "steps " << res.trace.size() << ", candidates " << res.candidates.size() << ", best reward "
            << (res.trace.empty() ? 0.0 : res.trace.back().running_max) << '\n';
  return 0;
}

int cmd_evaluate(const fs::path& candidates_path, std::size_t workers, std::optional<std::size_t> epochs,
                 const fs::path& out) {
  Meta m = read_meta(candidates_path.parent_path().empty() ? fs::path(".") : candidates_path.parent_path());
  if (epochs) m.common.epochs = *epochs;
  const TaskKind task = parse_task(m.common.task);
  SearchConfig sc = search_config(m.common, task);
  sc.workers = workers;

  std::vector<Candidate> cands;
  for (const json& j : read_json(candidates_path)) {
    Candidate c;
    c.strategy = validate(j.at("strategy").get<Strategy>());
    c.reward = j.value("reward", 0.0);
    c.step = j.value("step", std::size_t{0});
    cands.push_back(c);
  }
  if (cands.empty()) throw ConfigError("candidate set is empty; use `pretrain --strategy ggs` instead");

  const TaskData data = search_data(load_bundle(m.common.data, task, m.common.seed));
  const EvaluationResult res = evaluate_candidates(cands, sc, data);
  json ranked = json::array();
  for (const auto& r : res.ranked) {
    json e = {{"index", r.index}, {"strategy", r.strategy}, {"val_score", r.val_score}, {"failed", r.failed},
              {"wallclock_ms", r.wallclock_ms}};
    if (r.failed) e["error"] = r.error;
    ranked.push_back(e);
  }
  if (res.test_score && !ranked.empty()) ranked[0]["test_score"] = *res.test_score;
  fs::create_directories(out);
  write_json(out / "ranking.json", ranked);
  json meta = read_json(m.dir / "meta.json");
  meta["config"] = config_json(sc);
  write_json(out / "meta.json", meta);
  if (res.best_encoder) save_encoder(out / "best.ckpt", *res.best_encoder);
  std::cout << "evaluated " << res.ranked.size() << " candidates";
  if (!res.ranked.empty() && !res.ranked.front().failed) std::cout << ", best val " << res.ranked.front().val_score;
  if (res.test_score) std::cout << ", test " << *res.test_score;
  std::cout << '\n';
  return 0;
}

int cmd_pretrain(Common c, const std::string& strategy, const fs::path& out) {
  c.seed = effective_seed(c.seed);
  const TaskKind task = parse_task(c.task);
  const SearchConfig sc = search_config(c, task);
  const Strategy s = read_strategy(strategy);
  const TaskData data = search_data(load_bundle(c.data, task, c.seed));
  const EncoderParams enc = pretrain(sc.encoder, c.seed, data, s, sc.pretrain_epochs, sc.pretrain_lr, sc.train);
  save_encoder(out, enc);
  const Evaluation ev = evaluate_encoder(enc, data, sc.downstream, Split::val);
  std::cout << ev.metrics.dump() << '\n';
  return 0;
}

int cmd_ggs(std::size_t k, const std::vector<std::string>& dirs, double drop, const fs::path& out) {
  if (dirs.size() != 3) throw ConfigError("--from takes exactly three directories");
  std::array<std::vector<ScoredStrategy>, 3> topk;
  std::array<Meta, 3> metas;
  std::array<TaskData, 3> datas;
  for (std::size_t t = 0; t < 3; ++t) {
    const fs::path dir = dirs[t];
    metas[t] = read_meta(dir);
    const bool ranked = fs::exists(dir / "ranking.json");
    const json list = read_json(dir / (ranked ? "ranking.json" : "candidates.json"));
    std::vector<ScoredStrategy> all;
    for (const json& j : list) {
      if (j.value("failed", false)) continue;
      all.push_back({validate(j.at("strategy").get<Strategy>()), j.at(ranked ? "val_score" : "reward").get<double>()});
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const ScoredStrategy& a, const ScoredStrategy& b) { return a.score > b.score; });
    if (all.size() > k) all.resize(k);
    topk[t] = std::move(all);
    const TaskKind task = parse_task(metas[t].common.task);
    datas[t] = search_data(load_bundle(metas[t].common.data, task, metas[t].common.seed));
  }
  const TaskScorer scorer = [&](const Strategy& s) {
    std::array<double, 3> r{};
    for (std::size_t t = 0; t < 3; ++t) {
      const SearchConfig sc = search_config(metas[t].common, datas[t].task);
      try {
        const EncoderParams enc =
            pretrain(sc.encoder, metas[t].common.seed, datas[t], s, sc.pretrain_epochs, sc.pretrain_lr, sc.train);
        r[t] = compute_reward(enc, datas[t], sc.downstream);
      } catch (const NumericError&) {
        r[t] = worst_reward(datas[t].task);
      }
    }
    return r;
  };
  const GgsResult g = compose_ggs(topk, drop, scorer);
  write_json(out, {{"strategy", g.strategy},
                   {"triple", g.triple},
                   {"shared", g.shared},
                   {"scores", g.scores},
                   {"decisions", g.decisions}});
  std::cout << "shared " << g.shared << " of " << kBranchCount << " branches\n";
  return 0;
}

int cmd_report(const fs::path& checkpoint, Common c, const std::string& out) {
  c.seed = effective_seed(c.seed);
  const TaskKind task = parse_task(c.task);
  const EncoderParams enc = load_encoder(checkpoint);
  const TaskData data = report_data(load_bundle(c.data, task, c.seed));
  if (enc.config.in_channels != data.channels()) throw DataError("checkpoint channel count does not match data");
  const Evaluation ev = evaluate_encoder(enc, data, DownstreamConfig{}, Split::test);
  const json j = {{"task", to_string(task)}, {"data", c.data}, {"metrics", ev.metrics}};
  if (out.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json(out, j);
  return 0;
}

int cmd_ablate(const std::string& mode, Common c, std::size_t n_seeds, std::size_t iters, const std::string& out) {
  c.seed = effective_seed(c.seed);
  ExperimentConfig ec;
  ec.search = search_config(c, TaskKind::classification);
  ec.search.max_iters = iters;
  if (!out.empty()) ec.trace_dir = (fs::path(out).parent_path() / "traces").string();
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n_seeds; ++i) seeds.push_back(c.seed + i);
  ExperimentReport rep;
  if (mode == "no-filter")
    rep = run_filter_ablation(seeds, ec);
  else if (mode == "full-pretrain")
    rep = run_speed_ablation(iters, ec, c.seed);
  else if (mode == "data-aug-only")
    rep = run_space_ablation(seeds, ec);
  else
    throw ConfigError("unknown ablation mode " + mode);
  const json j = to_json(rep);
  if (out.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json(out, j);
  std::cout << "verdicts " << rep.verdicts.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Automated contrastive learning strategy search for time series"};
  app.require_subcommand(1);

  Common common;
  std::size_t iters = 500;
  bool no_filter = false, aug_only = false;
  std::string out;
  auto* search = app.add_subcommand("search", "Phase 1: sample and probe strategies");
  search->add_option("--task", common.task)->check(CLI::IsMember({"classification", "forecast", "forecasting", "anomaly"}));
  search->add_option("--data", common.data, "Dataset path or synth:<name>")->required();
  search->add_option("--iters", iters);
  search->add_option("--seed", common.seed);
  search->add_option("--pretrain-iters", common.epochs, "Epochs of full pretraining recorded for phase 2");
  search->add_flag("--no-filter", no_filter, "Use the raw reward and accept every probe");
  search->add_flag("--data-aug-only", aug_only, "Search augmentation branches only");
  search->add_option("--out", out)->required();
  add_encoder_opts(search, common);

  std::string candidates;
  std::size_t workers = 1;
  std::optional<std::size_t> epochs;
  auto* evaluate = app.add_subcommand("evaluate", "Phase 2: pretrain and rank candidates");
  evaluate->add_option("--candidates", candidates)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--workers", workers);
  evaluate->add_option("--pretrain-iters", epochs, "Pretraining epochs per candidate");
  evaluate->add_option("--out", out)->required();

  std::string strategy;
  auto* pretrain_cmd = app.add_subcommand("pretrain", "Pretrain an encoder with one strategy");
  pretrain_cmd->add_option("--strategy", strategy, "Strategy JSON file, ggs or default")->required();
  pretrain_cmd->add_option("--task", common.task);
  pretrain_cmd->add_option("--data", common.data)->required();
  pretrain_cmd->add_option("--seed", common.seed);
  pretrain_cmd->add_option("--pretrain-iters", common.epochs);
  pretrain_cmd->add_option("--out", out)->required();
  add_encoder_opts(pretrain_cmd, common);

  std::size_t topk = 5;
  std::vector<std::string> from;
  double drop = 0.01;
  auto* ggs = app.add_subcommand("ggs", "Compose a strategy shared by three tasks");
  ggs->add_option("--topk", topk);
  ggs->add_option("--from", from)->required()->expected(3);
  ggs->add_option("--drop-threshold", drop);
  ggs->add_option("--out", out)->required();

  std::string checkpoint;
  auto* report = app.add_subcommand("report", "Test-split metrics of a checkpoint");
  report->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  report->add_option("--data", common.data)->required();
  report->add_option("--task", common.task);
  report->add_option("--seed", common.seed);
  report->add_option("--out", out);

  std::string mode;
  std::size_t n_seeds = 5;
  auto* ablate = app.add_subcommand("ablate", "Ablation arms on synthetic classification");
  ablate->add_option("--mode", mode)->required()->check(CLI::IsMember({"no-filter", "full-pretrain", "data-aug-only"}));
  ablate->add_option("--seeds", n_seeds);
  ablate->add_option("--iters", iters);
  ablate->add_option("--seed", common.seed);
  ablate->add_option("--pretrain-iters", common.epochs);
  ablate->add_option("--out", out);
  add_encoder_opts(ablate, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*search) return cmd_search(common, iters, no_filter, aug_only, out);
    if (*evaluate) return cmd_evaluate(candidates, workers, epochs, out);
    if (*pretrain_cmd) return cmd_pretrain(common, strategy, out);
    if (*ggs) return cmd_ggs(topk, from, drop, out);
    if (*report) return cmd_report(checkpoint, common, out);
    if (*ablate) return cmd_ablate(mode, common, n_seeds, iters, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

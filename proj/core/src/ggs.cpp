#include "autocl/ggs.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "autocl/error.hpp"

namespace autocl {

std::size_t agreement(const Strategy& a, const Strategy& b, const Strategy& c) {
  const ActionIndices ia = encode(a), ib = encode(b), ic = encode(c);
  std::size_t n = 0;
  for (std::size_t i = 0; i < kBranchCount; ++i) n += (ia[i] == ib[i] && ib[i] == ic[i]) ? 1 : 0;
  return n;
}

GgsResult compose_ggs(const std::array<std::vector<ScoredStrategy>, 3>& topk, double drop_threshold,
                      const TaskScorer& scorer) {
  for (const auto& set : topk) {
    if (set.empty()) throw ConfigError("compose_ggs needs at least one strategy per task");
    if (set.size() > 32) throw ConfigError("compose_ggs supports at most 32 strategies per task");
  }
  if (!(drop_threshold >= 0.0)) throw ConfigError("drop_threshold must be non-negative");

  std::array<std::vector<ActionIndices>, 3> idx;
  for (std::size_t t = 0; t < 3; ++t)
    for (const auto& s : topk[t]) idx[t].push_back(encode(s.strategy));

  // Lexicographic scan keeps the earliest triple on full ties.
  GgsResult res;
  double best_sum = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t i = 0; i < idx[0].size(); ++i)
    for (std::size_t j = 0; j < idx[1].size(); ++j)
      for (std::size_t k = 0; k < idx[2].size(); ++k) {
        std::size_t shared = 0;
        for (std::size_t b = 0; b < kBranchCount; ++b)
          shared += (idx[0][i][b] == idx[1][j][b] && idx[1][j][b] == idx[2][k][b]) ? 1 : 0;
        const double sum = topk[0][i].score + topk[1][j].score + topk[2][k].score;
        if (!found || shared > res.shared || (shared == res.shared && sum > best_sum)) {
          found = true;
          res.shared = shared;
          best_sum = sum;
          res.triple = {i, j, k};
        }
      }

  const std::array<ActionIndices, 3> tri{idx[0][res.triple[0]], idx[1][res.triple[1]], idx[2][res.triple[2]]};
  ActionIndices draft = tri[0];

  std::map<ActionIndices, std::array<double, 3>> cache;
  auto score_of = [&](const ActionIndices& a) {
    const ActionIndices key = encode(decode(a));
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, scorer(decode(key))).first;
    return it->second;
  };

  for (std::size_t b = 0; b < kBranchCount; ++b) {
    if (tri[0][b] == tri[1][b] && tri[1][b] == tri[2][b]) continue;
    std::vector<std::size_t> options;
    for (const auto& t : tri)
      if (std::find(options.begin(), options.end(), t[b]) == options.end()) options.push_back(t[b]);

    std::vector<std::array<double, 3>> scores;
    std::array<double, 3> best;
    best.fill(-std::numeric_limits<double>::infinity());
    for (std::size_t o : options) {
      ActionIndices trial = draft;
      trial[b] = o;
      scores.push_back(score_of(trial));
      for (std::size_t t = 0; t < 3; ++t) best[t] = std::max(best[t], scores.back()[t]);
    }

    std::size_t pick = 0;
    bool any_survivor = false;
    double pick_total = std::numeric_limits<double>::infinity();
    double pick_max = std::numeric_limits<double>::infinity();
    nlohmann::json opts = nlohmann::json::array();
    for (std::size_t n = 0; n < options.size(); ++n) {
      double total = 0.0, worst = 0.0;
      for (std::size_t t = 0; t < 3; ++t) {
        const double drop = best[t] - scores[n][t];
        total += drop;
        worst = std::max(worst, drop);
      }
      const bool survives = worst <= drop_threshold;
      opts.push_back({{"option", option_label(b, options[n])}, {"scores", scores[n]}, {"survives", survives}});
      if (survives) {
        if (!any_survivor || total < pick_total) {
          pick = n;
          pick_total = total;
        }
        any_survivor = true;
      } else if (!any_survivor && worst < pick_max) {
        pick = n;
        pick_max = worst;
      }
    }
    draft[b] = options[pick];
    res.decisions.push_back({{"branch", std::string(space_spec()[b].name)},
                             {"chosen", option_label(b, options[pick])},
                             {"options", opts}});
  }

  res.strategy = decode(draft);
  res.scores = score_of(draft);
  return res;
}

}  // namespace autocl

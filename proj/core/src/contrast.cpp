#include "autocl/contrast.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "autocl/error.hpp"

namespace autocl {
namespace {

constexpr double kTripletMargin = 1.0;

Var scaled_scores(Var a, Var c, const Strategy& s) {
  return scale(pairwise_similarity(a, c, s.sim), 1.0 / s.temperature);
}

// Mean contrastive loss over the usable rows of G score matrices.
LossTerm masked_loss(Var scores, const PairMask& pos, const PairMask& neg, LossType type) {
  const std::size_t G = scores.shape()[0];
  if (type == LossType::infonce) {
    const std::size_t rows = contrastive_row_count(pos, neg);
    if (rows == 0 || G == 0) return {};
    return {scale(sum(contrastive_nll(scores, pos, neg)), 1.0 / static_cast<double>(G * rows)), false};
  }
  const std::size_t triples = triplet_count(pos, neg);
  if (triples == 0 || G == 0) return {};
  return {scale(triplet_hinge(scores, pos, neg, kTripletMargin), 1.0 / static_cast<double>(G * triples)), false};
}

void require_pair(Var h1, Var h2) {
  if (h1.shape().size() != 3 || h1.shape() != h2.shape())
    throw DimensionError("contrast: views must share a B x T x d shape, got " + shape_string(h1.shape()) +
                         " and " + shape_string(h2.shape()));
}

LossTerm contrast_term(Var h1, Var h2, const Strategy& s, Pairing pairing, bool adjacency, LossType type) {
  require_pair(h1, h2);
  const std::size_t B = h1.shape()[0], T = h1.shape()[1];
  const std::array<Var, 2> views{h1, h2};
  if (pairing == Pairing::instance) {
    if (B < 2) return {};
    Var z = permute(concat(views, 0), {1, 0, 2});  // T x 2B x d
    const auto [pos, neg] = instance_masks(B);
    return masked_loss(scaled_scores(z, z, s), pos, neg, type);
  }
  if (T < 2) return {};
  Var z = concat(views, 1);  // B x 2T x d
  const auto [pos, neg] = temporal_masks(T, adjacency);
  return masked_loss(scaled_scores(z, z, s), pos, neg, type);
}

LossTerm stack_cross_scale(const ScaleStack& stack, const Strategy& s) {
  std::vector<Var> terms;
  for (std::size_t lvl = 0; lvl + 1 < stack.levels.size(); ++lvl) {
    const std::size_t fine = stack.length(lvl), coarse = stack.length(lvl + 1);
    PairMask pos(coarse, fine), neg(coarse, fine);
    for (std::size_t t = 0; t < coarse; ++t) {
      const auto [lo, hi] = stack.parent_window(lvl + 1, t);
      for (std::size_t j = 0; j < fine; ++j) {
        if (j >= lo && j < hi) pos.set(t, j);
        else neg.set(t, j);
      }
    }
    LossTerm term = masked_loss(scaled_scores(stack.levels[lvl + 1], stack.levels[lvl], s), pos, neg, s.loss_type);
    if (!term.skipped) terms.push_back(term.value);
  }
  if (terms.empty()) return {};
  Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return {scale(total, 1.0 / static_cast<double>(terms.size())), false};
}

}  // namespace

std::pair<std::size_t, std::size_t> ScaleStack::parent_window(std::size_t s, std::size_t t) const {
  if (s == 0 || s >= levels.size() || kernel == 0) throw DimensionError("parent_window: level has no parent");
  const std::size_t lo = t * kernel;
  return {lo, std::min(lo + kernel, length(s - 1))};
}

ScaleStack hierarchical_scales(Var h, int kernel, PoolOp pool) {
  if (h.shape().size() != 3) throw DimensionError("hierarchical_scales: expected B x T x d");
  const auto& kernels = kernel_grid();
  if (std::find(kernels.begin(), kernels.end(), kernel) == kernels.end()) throw ConfigError("kernel off grid");
  ScaleStack stack;
  stack.kernel = static_cast<std::size_t>(kernel);
  stack.levels.push_back(h);
  if (kernel == 0) return stack;
  while (stack.levels.back().shape()[1] > 1) stack.levels.push_back(pool1d(stack.levels.back(), stack.kernel, pool));
  return stack;
}

double similarity(std::span<const double> a, std::span<const double> b, SimilarityKind kind) {
  if (a.size() != b.size()) throw DimensionError("similarity: vectors differ in length");
  double dotp = 0.0, na = 0.0, nb = 0.0, dist = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dotp += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
    dist += (a[i] - b[i]) * (a[i] - b[i]);
  }
  switch (kind) {
    case SimilarityKind::dot: return dotp;
    case SimilarityKind::cos: return dotp / (std::sqrt(na) * std::sqrt(nb) + 1e-12);
    case SimilarityKind::dist: return -std::sqrt(dist);
  }
  return 0.0;
}

std::pair<PairMask, PairMask> instance_masks(std::size_t B) {
  const std::size_t n = 2 * B;
  PairMask pos(n, n), neg(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t inst = r % B;
    for (std::size_t c = 0; c < n; ++c) {
      if (c == r) continue;
      if (c % B == inst) pos.set(r, c);
      else neg.set(r, c);
    }
  }
  return {pos, neg};
}

std::pair<PairMask, PairMask> temporal_masks(std::size_t T, bool adjacency) {
  const std::size_t n = 2 * T;
  PairMask pos(n, n), neg(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t view = r / T, t = r % T;
    auto near = [&](std::size_t u) { return u == t || (adjacency && (u + 1 == t || t + 1 == u)); };
    pos.set(r, (1 - view) * T + t);
    for (std::size_t u = 0; u < T; ++u) {
      if (adjacency && u != t && near(u)) pos.set(r, view * T + u);
      if (!near(u)) {
        neg.set(r, u);
        neg.set(r, T + u);
      }
    }
  }
  return {pos, neg};
}

LossTerm infonce_loss(Var h1, Var h2, const Strategy& s, Pairing pairing, bool adjacency) {
  return contrast_term(h1, h2, s, pairing, adjacency, LossType::infonce);
}

LossTerm triplet_loss(Var h1, Var h2, const Strategy& s, Pairing pairing, bool adjacency) {
  return contrast_term(h1, h2, s, pairing, adjacency, LossType::triplet);
}

LossTerm pair_loss(Var h1, Var h2, const Strategy& s, Pairing pairing, bool adjacency) {
  return contrast_term(h1, h2, s, pairing, adjacency, s.loss_type);
}

LossTerm cross_scale_loss(const ScaleStack& stack1, const ScaleStack& stack2, const Strategy& s) {
  std::vector<Var> parts;
  for (const ScaleStack* st : {&stack1, &stack2}) {
    LossTerm t = stack_cross_scale(*st, s);
    if (!t.skipped) parts.push_back(t.value);
  }
  if (parts.empty()) return {};
  Var total = parts.size() == 1 ? parts[0] : add(parts[0], parts[1]);
  return {scale(total, 1.0 / static_cast<double>(parts.size())), false};
}

Var strategy_loss(Var h1, Var h2, const Strategy& s) {
  require_pair(h1, h2);
  const ScaleStack stack1 = hierarchical_scales(h1, s.kernel, s.pool);
  const ScaleStack stack2 = hierarchical_scales(h2, s.kernel, s.pool);

  std::vector<Var> level_terms;
  for (std::size_t lvl = 0; lvl < stack1.levels.size(); ++lvl) {
    Var a = stack1.levels[lvl], b = stack2.levels[lvl];
    LossTerm inst = pair_loss(a, b, s, Pairing::instance, false);
    LossTerm temp = s.temporal ? pair_loss(a, b, s, Pairing::temporal, s.adjacent) : LossTerm{};
    if (!inst.skipped && !temp.skipped) level_terms.push_back(add(inst.value, temp.value));
    else if (!inst.skipped) level_terms.push_back(inst.value);
    else if (!temp.skipped) level_terms.push_back(temp.value);
  }
  std::vector<Var> parts;
  if (!level_terms.empty()) {
    Var total = level_terms[0];
    for (std::size_t i = 1; i < level_terms.size(); ++i) total = add(total, level_terms[i]);
    parts.push_back(scale(total, 1.0 / static_cast<double>(level_terms.size())));
  }
  if (s.cross_scale) {
    LossTerm cs = cross_scale_loss(stack1, stack2, s);
    if (!cs.skipped) parts.push_back(cs.value);
  }
  if (parts.empty()) throw ConfigError("no contrast aspects applicable");
  return parts.size() == 1 ? parts[0] : add(parts[0], parts[1]);
}

}  // namespace autocl

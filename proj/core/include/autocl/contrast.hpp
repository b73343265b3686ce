#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "autocl/ops.hpp"
#include "autocl/space.hpp"

namespace autocl {

// levels[0] is the input; levels[s] pools levels[s-1] with stride `kernel`
// until the length reaches 1. kernel == 0 gives a single level.
struct ScaleStack {
  std::vector<Var> levels;
  std::size_t kernel = 0;

  // Source window [first, second) at level s-1 of position t at level s >= 1.
  std::pair<std::size_t, std::size_t> parent_window(std::size_t s, std::size_t t) const;
  std::size_t length(std::size_t s) const { return levels.at(s).shape()[1]; }
};

ScaleStack hierarchical_scales(Var h, int kernel, PoolOp pool);

// dot: a.b, cos: a.b / (|a||b| + 1e-12), dist: -|a - b|.
double similarity(std::span<const double> a, std::span<const double> b, SimilarityKind kind);

enum class Pairing { instance, temporal };

// A loss term, or a flag that it does not apply to the given shapes.
struct LossTerm {
  Var value;
  bool skipped = true;
};

// Pair masks over the stacked anchors. Instance pairing scores the 2B rows
// [h1[0..B), h2[0..B)] at each timestep; temporal pairing scores the 2T rows
// [h1[i, 0..T), h2[i, 0..T)] of each instance.
std::pair<PairMask, PairMask> instance_masks(std::size_t B);
std::pair<PairMask, PairMask> temporal_masks(std::size_t T, bool adjacency);

// h1, h2: B x T x d. Averaged over anchors of both views.
LossTerm infonce_loss(Var h1, Var h2, const Strategy& s, Pairing pairing, bool adjacency);
// Margin-1 hinge on sim/tau, averaged over all (anchor, positive, negative).
LossTerm triplet_loss(Var h1, Var h2, const Strategy& s, Pairing pairing, bool adjacency);
LossTerm pair_loss(Var h1, Var h2, const Strategy& s, Pairing pairing, bool adjacency);

// Coarse anchors against the fine positions they were pooled from; other
// positions of the same instance are negatives.
LossTerm cross_scale_loss(const ScaleStack& stack1, const ScaleStack& stack2, const Strategy& s);

// h1, h2 are the common segments of the two views. Mean over scale levels of
// the instance (and temporal) terms, plus the cross-scale term if enabled.
Var strategy_loss(Var h1, Var h2, const Strategy& s);

}  // namespace autocl

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "autocl/contrast.hpp"
#include "autocl/error.hpp"
#include <nlohmann/json.hpp>
#include "oracles.hpp"

using namespace autocl;

namespace {

Strategy with(SimilarityKind k, double tau, LossType type = LossType::infonce) {
  Strategy s = default_strategy();
  s.sim = k;
  s.temperature = tau;
  s.loss_type = type;
  return s;
}

constexpr SimilarityKind kKinds[] = {SimilarityKind::dot, SimilarityKind::cos, SimilarityKind::dist};
constexpr double kTaus[] = {0.1, 0.5, 1.0};

bool usable(std::size_t B, std::size_t T, bool temporal) { return temporal ? T >= 2 : B >= 2; }

}  // namespace

TEST(Similarity, Examples) {
  const std::vector<double> a{1, 0}, b{0, 1}, c{0.3, -2.0};
  EXPECT_EQ(similarity(c, c, SimilarityKind::dist), 0.0);
  EXPECT_EQ(similarity(a, b, SimilarityKind::dot), 0.0);
  EXPECT_EQ(similarity(a, b, SimilarityKind::cos), 0.0);
  EXPECT_NEAR(similarity(a, b, SimilarityKind::dist), -std::sqrt(2.0), 1e-15);
  const std::vector<double> x{0.4, -1.1, 2.0}, y{1.5, 0.2, -0.7};
  std::vector<double> x2, y3;
  for (double v : x) x2.push_back(2 * v);
  for (double v : y) y3.push_back(3 * v);
  EXPECT_NEAR(similarity(x2, y3, SimilarityKind::cos), similarity(x, y, SimilarityKind::cos), 1e-12);
}

TEST(Scales, LevelLengths) {
  Tape tape;
  auto lengths = [&](std::size_t T, int k) {
    const ScaleStack s = hierarchical_scales(tape.constant(Tensor({1, T, 2})), k, PoolOp::avg);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < s.levels.size(); ++i) out.push_back(s.length(i));
    return out;
  };
  EXPECT_EQ(lengths(8, 0), (std::vector<std::size_t>{8}));
  EXPECT_EQ(lengths(8, 2), (std::vector<std::size_t>{8, 4, 2, 1}));
  EXPECT_EQ(lengths(10, 3), (std::vector<std::size_t>{10, 4, 2, 1}));
  EXPECT_EQ(lengths(16, 5), (std::vector<std::size_t>{16, 4, 1}));
  EXPECT_THROW(lengths(8, 4), ConfigError);
}

TEST(InfoNce, TwoByOneExample) {
  Tape tape;
  Tensor h({2, 1, 2});
  h[0] = 1.0;
  h[3] = 1.0;
  const LossTerm l = infonce_loss(tape.constant(h), tape.constant(h), with(SimilarityKind::dot, 1.0),
                                  Pairing::instance, false);
  ASSERT_FALSE(l.skipped);
  const double closed = std::log(1.0 + 2.0 / std::exp(1.0));
  EXPECT_NEAR(l.value.value()[0], closed, 1e-12);
  EXPECT_NEAR(l.value.value()[0], oracle::infonce(h, h, SimilarityKind::dot, 1.0, false, false), 1e-12);
}

TEST(InfoNce, MatchesLoopOracle) {
  std::mt19937_64 r(1);
  for (int trial = 0; trial < 20; ++trial)
    for (std::size_t B : {1u, 2u, 3u})
      for (std::size_t T : {1u, 2u, 5u, 8u})
        for (SimilarityKind k : kKinds)
          for (double tau : kTaus)
            for (int mode = 0; mode < 3; ++mode) {
              if (trial > 0 && (T != 8 || B != 3)) continue;
              const bool temporal = mode > 0, adj = mode == 2;
              Tape tape;
              const Tensor a = oracle::random_tensor({B, T, 4}, r), b = oracle::random_tensor({B, T, 4}, r);
              const LossTerm l = infonce_loss(tape.constant(a), tape.constant(b), with(k, tau),
                                              temporal ? Pairing::temporal : Pairing::instance, adj);
              if (!usable(B, T, temporal) || (adj && T == 2)) {
                if (adj && T == 2) EXPECT_TRUE(l.skipped);
                if (!usable(B, T, temporal)) EXPECT_TRUE(l.skipped);
                continue;
              }
              ASSERT_FALSE(l.skipped);
              EXPECT_NEAR(l.value.value()[0], oracle::infonce(a, b, k, tau, temporal, adj), 1e-10)
                  << B << "x" << T << " mode " << mode;
            }
}

TEST(InfoNce, MatchedViewsBeatShuffledViews) {
  std::mt19937_64 r(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor a = oracle::random_tensor({4, 3, 4}, r, -3.0, 3.0);
    Tensor shuffled({4, 3, 4});
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 12; ++j) shuffled[i * 12 + j] = a[((i + 1) % 4) * 12 + j];
    Tape tape;
    const Strategy s = with(SimilarityKind::dist, 1.0);
    const double good = infonce_loss(tape.constant(a), tape.constant(a), s, Pairing::instance, false).value.value()[0];
    const double bad =
        infonce_loss(tape.constant(a), tape.constant(shuffled), s, Pairing::instance, false).value.value()[0];
    ASSERT_LT(good, bad) << trial;
  }
}

TEST(InfoNce, HighTemperatureLimit) {
  std::mt19937_64 r(3);
  const Tensor a = oracle::random_tensor({3, 4, 2}, r), b = oracle::random_tensor({3, 4, 2}, r);
  Tape tape;
  const double v = infonce_loss(tape.constant(a), tape.constant(b), with(SimilarityKind::cos, 100.0),
                                Pairing::instance, false).value.value()[0];
  // One positive, four negatives per anchor.
  const double limit = -std::log(1.0 / 5.0);
  EXPECT_NEAR(v, limit, 0.05 * limit);
}

TEST(Triplet, MarginSatisfiedGivesZero) {
  Tape tape;
  Tensor h({2, 1, 2});
  h[0] = 10.0;
  h[3] = 10.0;
  const LossTerm l = triplet_loss(tape.constant(h), tape.constant(h), with(SimilarityKind::dot, 1.0),
                                  Pairing::instance, false);
  EXPECT_EQ(l.value.value()[0], 0.0);
}

TEST(Triplet, DegenerateEqualsMargin) {
  Tape tape;
  const Tensor h({3, 2, 2}, 0.7);
  for (SimilarityKind k : kKinds) {
    const LossTerm l = triplet_loss(tape.constant(h), tape.constant(h), with(k, 0.5), Pairing::instance, false);
    EXPECT_NEAR(l.value.value()[0], 1.0, 1e-12);
  }
}

TEST(Triplet, MatchesLoopOracle) {
  std::mt19937_64 r(4);
  for (std::size_t B : {2u, 3u})
    for (std::size_t T : {3u, 4u, 8u})
      for (SimilarityKind k : kKinds)
        for (double tau : kTaus)
          for (int mode = 0; mode < 3; ++mode) {
            const bool temporal = mode > 0, adj = mode == 2;
            Tape tape;
            const Tensor a = oracle::random_tensor({B, T, 2}, r), b = oracle::random_tensor({B, T, 2}, r);
            const LossTerm l = triplet_loss(tape.constant(a), tape.constant(b), with(k, tau, LossType::triplet),
                                            temporal ? Pairing::temporal : Pairing::instance, adj);
            ASSERT_FALSE(l.skipped);
            EXPECT_NEAR(l.value.value()[0], oracle::triplet(a, b, k, tau, temporal, adj), 1e-10);
          }
}

TEST(CrossScale, KernelZeroIsSkipped) {
  Tape tape;
  const Var h = tape.constant(Tensor({2, 4, 2}, 1.0));
  const ScaleStack st = hierarchical_scales(h, 0, PoolOp::avg);
  EXPECT_TRUE(cross_scale_loss(st, st, with(SimilarityKind::dot, 1.0)).skipped);
}

TEST(CrossScale, MatchesLoopOracle) {
  std::mt19937_64 r(5);
  for (std::size_t B : {1u, 3u})
    for (std::size_t T : {4u, 7u, 8u})
      for (int kernel : {2, 3, 5})
        for (PoolOp pool : {PoolOp::avg, PoolOp::max})
          for (SimilarityKind k : kKinds)
            for (LossType type : {LossType::infonce, LossType::triplet}) {
              Tape tape;
              const Tensor a = oracle::random_tensor({B, T, 4}, r), b = oracle::random_tensor({B, T, 4}, r);
              const Strategy s = with(k, 0.5, type);
              const LossTerm l = cross_scale_loss(hierarchical_scales(tape.constant(a), kernel, pool),
                                                  hierarchical_scales(tape.constant(b), kernel, pool), s);
              double total = 0;
              std::size_t used = 0;
              for (const Tensor* h : {&a, &b}) {
                bool ok = false;
                const double v = oracle::cross_scale_stack(
                    oracle::scale_levels(*h, static_cast<std::size_t>(kernel), pool == PoolOp::max), kernel, k, 0.5,
                    type == LossType::triplet, ok);
                if (ok) {
                  total += v;
                  ++used;
                }
              }
              ASSERT_EQ(l.skipped, used == 0);
              if (used) EXPECT_NEAR(l.value.value()[0], total / static_cast<double>(used), 1e-10);
            }
}

TEST(CrossScale, AlignedWindowsBeatPermutedWindows) {
  std::mt19937_64 r(6);
  for (int trial = 0; trial < 100; ++trial) {
    // Constant per window of two: the coarse level equals its positives.
    const Tensor base = oracle::random_tensor({1, 4, 3}, r, -2.0, 2.0);
    Tensor h({1, 8, 3}), perm({1, 8, 3});
    for (std::size_t t = 0; t < 8; ++t)
      for (std::size_t c = 0; c < 3; ++c) {
        h.at(0, t, c) = base.at(0, t / 2, c);
        perm.at(0, t, c) = base.at(0, (t / 2 + 1 + t % 2) % 4, c);
      }
    Tape tape;
    const Strategy s = with(SimilarityKind::dist, 1.0);
    auto loss = [&](const Tensor& x) {
      const ScaleStack st = hierarchical_scales(tape.constant(x), 2, PoolOp::avg);
      return cross_scale_loss(st, st, s).value.value()[0];
    };
    ASSERT_LT(loss(h), loss(perm)) << trial;
  }
}

TEST(StrategyLoss, ReducesToInstanceInfoNce) {
  std::mt19937_64 r(7);
  Tape tape;
  const Var a = tape.constant(oracle::random_tensor({3, 5, 4}, r));
  const Var b = tape.constant(oracle::random_tensor({3, 5, 4}, r));
  const Strategy s = with(SimilarityKind::cos, 0.5);
  EXPECT_EQ(strategy_loss(a, b, s).value()[0], infonce_loss(a, b, s, Pairing::instance, false).value.value()[0]);
}

TEST(StrategyLoss, GgsComposition) {
  std::mt19937_64 r(8);
  const Tensor a = oracle::random_tensor({4, 16, 8}, r), b = oracle::random_tensor({4, 16, 8}, r);
  const Strategy s = ggs_preset();
  Tape tape;
  const double got = strategy_loss(tape.constant(a), tape.constant(b), s).value()[0];
  const auto la = oracle::scale_levels(a, 5, false), lb = oracle::scale_levels(b, 5, false);
  ASSERT_EQ(la.size(), 3u);
  double want = 0;
  for (std::size_t i = 0; i < 3; ++i) want += oracle::infonce(la[i], lb[i], s.sim, s.temperature, false, false);
  EXPECT_NEAR(got, want / 3.0, 1e-10);
}

TEST(StrategyLoss, FullCompositionOracle) {
  std::mt19937_64 r(9);
  const Tensor a = oracle::random_tensor({3, 8, 4}, r), b = oracle::random_tensor({3, 8, 4}, r);
  Strategy s = with(SimilarityKind::dot, 0.5, LossType::triplet);
  s.temporal = true;
  s.cross_scale = true;
  s.adjacent = true;
  s.kernel = 2;
  s.pool = PoolOp::max;
  Tape tape;
  const double got = strategy_loss(tape.constant(a), tape.constant(b), s).value()[0];
  const auto la = oracle::scale_levels(a, 2, true), lb = oracle::scale_levels(b, 2, true);
  double levels = 0;
  for (std::size_t i = 0; i < la.size(); ++i) {
    levels += oracle::triplet(la[i], lb[i], s.sim, 0.5, false, false);
    // Temporal adjacency needs three positions for a negative to remain.
    if (la[i].dim(1) >= 3) levels += oracle::triplet(la[i], lb[i], s.sim, 0.5, true, true);
  }
  bool ok1 = false, ok2 = false;
  const double cs = 0.5 * (oracle::cross_scale_stack(la, 2, s.sim, 0.5, true, ok1) +
                           oracle::cross_scale_stack(lb, 2, s.sim, 0.5, true, ok2));
  ASSERT_TRUE(ok1 && ok2);
  EXPECT_NEAR(got, levels / static_cast<double>(la.size()) + cs, 1e-10);
}

TEST(StrategyLoss, FiniteAndPositiveFuzz) {
  std::mt19937_64 r(10);
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Strategy s = random_strategy(rng);
    Tape tape;
    const Var a = tape.constant(oracle::random_tensor({3, 6, 4}, r));
    const Var b = tape.constant(oracle::random_tensor({3, 6, 4}, r));
    const double v = strategy_loss(a, b, s).value()[0];
    ASSERT_TRUE(std::isfinite(v)) << nlohmann::json(s).dump();
    ASSERT_GT(v, 0.0) << nlohmann::json(s).dump();
  }
}

TEST(StrategyLoss, BatchPermutationInvariant) {
  std::mt19937_64 r(12);
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    const Strategy s = random_strategy(rng);
    const Tensor a = oracle::random_tensor({3, 6, 4}, r), b = oracle::random_tensor({3, 6, 4}, r);
    Tensor pa({3, 6, 4}), pb({3, 6, 4});
    const std::size_t perm[3] = {2, 0, 1};
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t j = 0; j < 24; ++j) {
        pa[k * 24 + j] = a[perm[k] * 24 + j];
        pb[k * 24 + j] = b[perm[k] * 24 + j];
      }
    Tape tape;
    EXPECT_NEAR(strategy_loss(tape.constant(a), tape.constant(b), s).value()[0],
                strategy_loss(tape.constant(pa), tape.constant(pb), s).value()[0], 1e-10);
  }
}

TEST(StrategyLoss, MismatchedShapes) {
  Tape tape;
  EXPECT_THROW(strategy_loss(tape.constant(Tensor({2, 3, 4})), tape.constant(Tensor({2, 4, 4})), default_strategy()),
               DimensionError);
}

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "autocl/controller.hpp"
#include "autocl/error.hpp"
#include "autocl/ops.hpp"

using namespace autocl;

namespace {

double joint_prob(const BranchProbs& p, const ActionIndices& idx) {
  double j = 1.0;
  for (std::size_t k = 0; k < kBranchCount; ++k) j *= p[k][idx[k]];
  return j;
}

}  // namespace

TEST(Controller, BranchWidths) {
  const ControllerParams p = init_controller(320, 0);
  ASSERT_EQ(p.branch_w.size(), kBranchCount);
  const BranchProbs probs = branch_probs(p);
  for (std::size_t k = 0; k < kBranchCount; ++k) {
    EXPECT_EQ(p.branch_w[k].shape(), (Shape{320, space_spec()[k].options}));
    EXPECT_EQ(probs[k].size(), space_spec()[k].options);
  }
}

TEST(Controller, InitDeterministic) {
  EXPECT_EQ(init_controller(16, 5), init_controller(16, 5));
  EXPECT_NE(init_controller(16, 5), init_controller(16, 6));
  EXPECT_THROW(init_controller(0, 1), ConfigError);
}

TEST(Controller, InitialDistributionsNearUniform) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const BranchProbs probs = branch_probs(init_controller(320, seed));
    for (const auto& p : probs) {
      if (p.size() < 3) continue;
      ASSERT_LT(*std::max_element(p.begin(), p.end()), 2.0 / static_cast<double>(p.size())) << seed;
    }
  }
}

TEST(Controller, ProbabilitiesSumToOne) {
  const ControllerParams p = init_controller(32, 1);
  for (const auto& v : branch_probs(p)) EXPECT_NEAR(std::accumulate(v.begin(), v.end(), 0.0), 1.0, 1e-12);
  EXPECT_EQ(branch_probs(p), branch_probs(p));
}

TEST(Controller, ZeroBranchWeightsAreUniform) {
  ControllerParams p = init_controller(32, 2);
  for (auto& w : p.branch_w) w.fill(0.0);
  const BranchProbs probs = branch_probs(p);
  for (const auto& v : probs)
    for (double x : v) EXPECT_EQ(x, 1.0 / static_cast<double>(v.size()));
}

TEST(Controller, RestrictionZeroesDisallowedOptions) {
  const ControllerParams p = init_controller(32, 3);
  SpaceRestriction r;
  r.allow_only(kTemperature, {1, 3});
  const BranchProbs probs = branch_probs(p, r);
  EXPECT_EQ(probs[kTemperature][0], 0.0);
  EXPECT_EQ(probs[kTemperature][2], 0.0);
  EXPECT_NEAR(probs[kTemperature][1] + probs[kTemperature][3], 1.0, 1e-12);
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto s = sample_strategy(p, rng, r);
    EXPECT_TRUE(s.indices[kTemperature] == 1 || s.indices[kTemperature] == 3);
  }
}

TEST(Controller, SamplingDeterministicAndConsistent) {
  const ControllerParams p = init_controller(32, 5);
  Rng a(9), b(9);
  const BranchProbs probs = branch_probs(p);
  for (int i = 0; i < 50; ++i) {
    const ControllerSample x = sample_strategy(p, a), y = sample_strategy(p, b);
    EXPECT_EQ(x.indices, y.indices);
    EXPECT_EQ(x.strategy, decode(x.indices));
    const double lp = std::accumulate(x.log_probs.begin(), x.log_probs.end(), 0.0);
    EXPECT_NEAR(lp, std::log(joint_prob(probs, x.indices)), 1e-10);
  }
}

TEST(Controller, OneHotBranchesAlwaysSampleTheSameStrategy) {
  ControllerParams p = init_controller(16, 6);
  const ActionIndices want = encode(ggs_preset());
  for (std::size_t k = 0; k < kBranchCount; ++k) {
    p.branch_w[k].fill(0.0);
    p.branch_b[k].fill(-1000.0);
    p.branch_b[k][want[k]] = 1000.0;
  }
  Rng rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_strategy(p, rng).strategy, ggs_preset());
}

// Shared parameters couple the branches, so per-branch monotonicity holds at
// the default width; the joint probability moves the right way at any width.
TEST(Reinforce, PositiveDeltaRaisesEveryChosenProbability) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ControllerParams p = init_controller(320, seed);
    Rng rng(seed);
    const ControllerSample s = sample_strategy(p, rng);
    const BranchProbs before = branch_probs(p);
    reinforce_update(p, s, 1.0, 1e-3);
    const BranchProbs after = branch_probs(p);
    for (std::size_t k = 0; k < kBranchCount; ++k) EXPECT_GT(after[k][s.indices[k]], before[k][s.indices[k]]);
  }
}

TEST(Reinforce, NegativeDeltaLowersEveryChosenProbability) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ControllerParams p = init_controller(320, seed);
    Rng rng(seed + 100);
    const ControllerSample s = sample_strategy(p, rng);
    const BranchProbs before = branch_probs(p);
    reinforce_update(p, s, -1.0, 1e-3);
    const BranchProbs after = branch_probs(p);
    for (std::size_t k = 0; k < kBranchCount; ++k) EXPECT_LT(after[k][s.indices[k]], before[k][s.indices[k]]);
  }
}

TEST(Reinforce, JointProbabilityFollowsDeltaAtAnyWidth) {
  for (std::size_t dim : {4u, 16u, 64u})
    for (std::uint64_t seed = 0; seed < 20; ++seed)
      for (double delta : {1.0, -1.0}) {
        ControllerParams p = init_controller(dim, seed);
        Rng rng(seed);
        const ControllerSample s = sample_strategy(p, rng);
        const double before = joint_prob(branch_probs(p), s.indices);
        reinforce_update(p, s, delta, 1e-3);
        const double after = joint_prob(branch_probs(p), s.indices);
        EXPECT_GT((after - before) * delta, 0.0) << dim << " " << seed;
      }
}

TEST(Reinforce, ZeroDeltaLeavesParams) {
  ControllerParams p = init_controller(32, 7);
  const ControllerParams before = p;
  Rng rng(1);
  reinforce_update(p, sample_strategy(p, rng), 0.0, 0.5);
  EXPECT_EQ(p, before);
}

TEST(Reinforce, StepMatchesTapeGradient) {
  ControllerParams p = init_controller(12, 8);
  Rng rng(2);
  const ControllerSample s = sample_strategy(p, rng);
  Tape tape;
  const auto vars = bind_controller(tape, p);
  const Gradients g = backward(controller_log_prob(vars, s.indices));
  EXPECT_NEAR(controller_log_prob(vars, s.indices).value()[0],
              std::accumulate(s.log_probs.begin(), s.log_probs.end(), 0.0), 1e-12);

  const ControllerParams before = p;
  const double delta = 0.7, lr = 0.01;
  reinforce_update(p, s, delta, lr);
  const auto old = before.tensors();
  const auto now = p.tensors();
  ASSERT_EQ(now.size(), vars.size());
  for (std::size_t i = 0; i < now.size(); ++i)
    for (std::size_t j = 0; j < now[i]->size(); ++j)
      ASSERT_NEAR((*now[i])[j], (*old[i])[j] + lr * delta * g[vars[i]][j], 1e-12) << i << "," << j;
}

TEST(Controller, CheckpointRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "autocl_controller.ckpt";
  ControllerParams p = init_controller(10, 9);
  Rng rng(3);
  reinforce_update(p, sample_strategy(p, rng), 1.0, 0.1);
  save_controller(path, p);
  EXPECT_EQ(load_controller(path), p);
  std::filesystem::remove(path);
}

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "autocl/rng.hpp"
#include "autocl/space.hpp"
#include "autocl/tape.hpp"

namespace autocl {

// Policy network: hidden = tanh(W e), p_k = softmax(hidden . branch_w[k] + branch_b[k]).
struct ControllerParams {
  std::size_t dim = 0;
  Tensor e;                        // d
  Tensor W;                        // d x d
  std::vector<Tensor> branch_w;    // d x n_k
  std::vector<Tensor> branch_b;    // n_k

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  friend bool operator==(const ControllerParams&, const ControllerParams&) = default;
};

ControllerParams init_controller(std::size_t dim, std::uint64_t seed);

using BranchProbs = std::vector<std::vector<double>>;

struct ControllerForward {
  std::vector<double> hidden;
  BranchProbs probs;
};

// Options outside `restriction` get probability 0.
ControllerForward controller_forward(const ControllerParams& params, const SpaceRestriction& restriction = {});
BranchProbs branch_probs(const ControllerParams& params, const SpaceRestriction& restriction = {});

struct ControllerSample {
  Strategy strategy;                           // canonical
  ActionIndices indices{};                     // raw draws
  std::array<double, kBranchCount> log_probs{};
  ControllerForward forward;                   // activations at sampling time
};

ControllerSample sample_strategy(const ControllerParams& params, Rng& rng, const SpaceRestriction& restriction = {});

// One ascent step on delta * sum_k log p_k(a_k), using the activations cached
// in `sample`.
void reinforce_update(ControllerParams& params, const ControllerSample& sample, double delta, double lr);

// sum_k log p_k(indices[k]) built on a tape, for gradient cross-checks.
Var controller_log_prob(const std::vector<Var>& params, const ActionIndices& indices);
std::vector<Var> bind_controller(Tape& tape, const ControllerParams& params);

void save_controller(const std::filesystem::path& path, const ControllerParams& params);
ControllerParams load_controller(const std::filesystem::path& path);

}  // namespace autocl

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "autocl/ops.hpp"
#include "autocl/rng.hpp"

namespace autocl {

enum class Norm { none, layer, l2 };
enum class LossType { infonce, triplet };

// One point of the contrastive-learning strategy space.
struct Strategy {
  double resize_p = 0.0;
  double rescale_p = 0.0;
  double jitter_p = 0.0;
  double point_mask_p = 0.0;
  double freq_mask_p = 0.0;
  double crop_p = 0.0;
  int aug_order = 1;

  double emb_jitter_p = 0.0;
  double emb_mask_p = 0.0;
  Norm norm = Norm::none;

  bool instance = true;
  bool temporal = false;
  bool cross_scale = false;
  int kernel = 0;
  PoolOp pool = PoolOp::avg;
  bool adjacent = false;

  LossType loss_type = LossType::infonce;
  SimilarityKind sim = SimilarityKind::dot;
  double temperature = 1.0;

  friend bool operator==(const Strategy&, const Strategy&) = default;
};

inline constexpr std::size_t kBranchCount = 18;
using ActionIndices = std::array<std::size_t, kBranchCount>;

// Branch order of the action vector.
enum Branch : std::size_t {
  kResize, kRescale, kJitter, kPointMask, kFreqMask, kCrop, kAugOrder,
  kEmbJitter, kEmbMask, kNorm,
  kTemporal, kCrossScale, kKernel, kPool, kAdjacent,
  kLossType, kSim, kTemperature,
};

struct BranchSpec {
  std::string_view name;
  std::size_t options;
};

const std::array<BranchSpec, kBranchCount>& space_spec();
// Grid of strength values shared by every p-field: 0.0, 0.1, ..., 0.9, 0.95.
const std::array<double, 11>& p_grid();
const std::array<double, 5>& temperature_grid();
const std::array<int, 4>& kernel_grid();

// Human-readable label for option `option` of branch `branch`.
std::string option_label(std::size_t branch, std::size_t option);

// Throws ConfigError naming the first off-grid field.
ActionIndices encode(const Strategy& s);
// Builds the canonical strategy for an index vector.
Strategy decode(const ActionIndices& idx);
// Grid check plus canonicalization.
Strategy validate(const Strategy& s);
Strategy canonical(Strategy s);
// Mixed-radix number of the canonical index vector; distinct for distinct
// canonical strategies.
std::uint64_t strategy_id(const Strategy& s);

enum class SpaceMode { nominal, full };
std::uint64_t space_size(SpaceMode mode);
inline constexpr std::uint64_t kAugmentationOptions = 8'857'805;  // 5 * 11^6

Strategy default_strategy();
Strategy ggs_preset();

// Allowed option indices per branch. The default allows everything.
class SpaceRestriction {
 public:
  SpaceRestriction();

  static SpaceRestriction full() { return {}; }
  // Every branch pinned to the options of `s`.
  static SpaceRestriction pinned(const Strategy& s);
  // Augmentation branches free, everything else pinned to `rest`.
  static SpaceRestriction data_aug_only(const Strategy& rest = default_strategy());

  void allow_only(std::size_t branch, std::vector<std::size_t> options);
  const std::vector<std::size_t>& allowed(std::size_t branch) const { return allowed_[branch]; }
  bool allows(std::size_t branch, std::size_t option) const;
  bool allows(const ActionIndices& idx) const;
  std::uint64_t size() const;

  // Every allowed strategy, in lexicographic index order (size() must be small).
  std::vector<Strategy> enumerate(std::size_t limit = 100000) const;

 private:
  std::array<std::vector<std::size_t>, kBranchCount> allowed_;
};

Strategy random_strategy(std::uint64_t seed);
Strategy random_strategy(Rng& rng, const SpaceRestriction& restriction = {});

// Exact field names, lowercase enum strings, unknown keys rejected.
void to_json(nlohmann::json& j, const Strategy& s);
void from_json(const nlohmann::json& j, Strategy& s);
std::string to_string(Norm n);
std::string to_string(LossType l);
std::string to_string(SimilarityKind k);
std::string to_string(PoolOp p);

}  // namespace autocl

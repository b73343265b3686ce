#include "autocl/space.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <set>

#include "autocl/error.hpp"

namespace autocl {
namespace {

constexpr std::array<double, 11> kPGrid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95};
constexpr std::array<double, 5> kTemperatures{0.01, 0.1, 1.0, 10.0, 100.0};
constexpr std::array<int, 4> kKernels{0, 2, 3, 5};

constexpr std::array<BranchSpec, kBranchCount> kSpec{{
    {"resize_p", 11}, {"rescale_p", 11}, {"jitter_p", 11}, {"point_mask_p", 11},
    {"freq_mask_p", 11}, {"crop_p", 11}, {"aug_order", 5},
    {"emb_jitter_p", 11}, {"emb_mask_p", 11}, {"norm", 3},
    {"temporal", 2}, {"cross_scale", 2}, {"kernel", 4}, {"pool", 2}, {"adjacent", 2},
    {"loss_type", 2}, {"sim", 3}, {"temperature", 5},
}};

std::size_t p_index(double v, std::string_view field) {
  for (std::size_t i = 0; i < kPGrid.size(); ++i)
    if (std::abs(v - kPGrid[i]) < 1e-9) return i;
  throw ConfigError(std::string(field) + " off grid");
}

std::size_t temperature_index(double v) {
  for (std::size_t i = 0; i < kTemperatures.size(); ++i)
    if (std::abs(v - kTemperatures[i]) <= 1e-9 * kTemperatures[i]) return i;
  throw ConfigError("temperature off grid");
}

template <typename E, std::size_t N>
E enum_from(const nlohmann::json& j, const char* field, const std::array<std::pair<E, const char*>, N>& names) {
  if (!j.is_string()) throw ConfigError(std::string(field) + " must be a string");
  const auto& s = j.get_ref<const std::string&>();
  for (const auto& [value, name] : names)
    if (s == name) return value;
  throw ConfigError(std::string(field) + " has unknown value \"" + s + "\"");
}

constexpr std::array<std::pair<Norm, const char*>, 3> kNormNames{{{Norm::none, "none"}, {Norm::layer, "layer"}, {Norm::l2, "l2"}}};
constexpr std::array<std::pair<LossType, const char*>, 2> kLossNames{{{LossType::infonce, "infonce"}, {LossType::triplet, "triplet"}}};
constexpr std::array<std::pair<SimilarityKind, const char*>, 3> kSimNames{
    {{SimilarityKind::dot, "dot"}, {SimilarityKind::cos, "cos"}, {SimilarityKind::dist, "dist"}}};
constexpr std::array<std::pair<PoolOp, const char*>, 2> kPoolNames{{{PoolOp::avg, "avg"}, {PoolOp::max, "max"}}};

}  // namespace

const std::array<BranchSpec, kBranchCount>& space_spec() { return kSpec; }
const std::array<double, 11>& p_grid() { return kPGrid; }
const std::array<double, 5>& temperature_grid() { return kTemperatures; }
const std::array<int, 4>& kernel_grid() { return kKernels; }

std::string to_string(Norm n) { return kNormNames[static_cast<std::size_t>(n)].second; }
std::string to_string(LossType l) { return kLossNames[static_cast<std::size_t>(l)].second; }
std::string to_string(SimilarityKind k) { return kSimNames[static_cast<std::size_t>(k)].second; }
std::string to_string(PoolOp p) { return kPoolNames[static_cast<std::size_t>(p)].second; }

std::string option_label(std::size_t branch, std::size_t option) {
  if (branch >= kBranchCount || option >= kSpec[branch].options) throw ConfigError("option index out of range");
  auto fmt = [](double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (s.back() == '.') s.pop_back();
    return s;
  };
  switch (branch) {
    case kAugOrder: return std::to_string(option + 1);
    case kNorm: return kNormNames[option].second;
    case kTemporal: case kCrossScale: case kAdjacent: return option ? "true" : "false";
    case kKernel: return std::to_string(kKernels[option]);
    case kPool: return kPoolNames[option].second;
    case kLossType: return kLossNames[option].second;
    case kSim: return kSimNames[option].second;
    case kTemperature: return fmt(kTemperatures[option]);
    default: return fmt(kPGrid[option]);
  }
}

ActionIndices encode(const Strategy& s) {
  ActionIndices idx{};
  idx[kResize] = p_index(s.resize_p, "resize_p");
  idx[kRescale] = p_index(s.rescale_p, "rescale_p");
  idx[kJitter] = p_index(s.jitter_p, "jitter_p");
  idx[kPointMask] = p_index(s.point_mask_p, "point_mask_p");
  idx[kFreqMask] = p_index(s.freq_mask_p, "freq_mask_p");
  idx[kCrop] = p_index(s.crop_p, "crop_p");
  if (s.aug_order < 1 || s.aug_order > 5) throw ConfigError("aug_order off grid");
  idx[kAugOrder] = static_cast<std::size_t>(s.aug_order - 1);
  idx[kEmbJitter] = p_index(s.emb_jitter_p, "emb_jitter_p");
  idx[kEmbMask] = p_index(s.emb_mask_p, "emb_mask_p");
  idx[kNorm] = static_cast<std::size_t>(s.norm);
  idx[kTemporal] = s.temporal ? 1 : 0;
  idx[kCrossScale] = s.cross_scale ? 1 : 0;
  const auto k = std::find(kKernels.begin(), kKernels.end(), s.kernel);
  if (k == kKernels.end()) throw ConfigError("kernel off grid");
  idx[kKernel] = static_cast<std::size_t>(k - kKernels.begin());
  idx[kPool] = static_cast<std::size_t>(s.pool);
  idx[kAdjacent] = s.adjacent ? 1 : 0;
  idx[kLossType] = static_cast<std::size_t>(s.loss_type);
  idx[kSim] = static_cast<std::size_t>(s.sim);
  idx[kTemperature] = temperature_index(s.temperature);
  if (idx[kNorm] > 2 || idx[kPool] > 1 || idx[kLossType] > 1 || idx[kSim] > 2)
    throw ConfigError("enum field out of range");
  return idx;
}

std::uint64_t strategy_id(const Strategy& s) {
  const ActionIndices idx = encode(canonical(s));
  std::uint64_t id = 0;
  for (std::size_t b = 0; b < kBranchCount; ++b) id = id * kSpec[b].options + idx[b];
  return id;
}

Strategy decode(const ActionIndices& idx) {
  for (std::size_t b = 0; b < kBranchCount; ++b)
    if (idx[b] >= kSpec[b].options)
      throw ConfigError(std::string(kSpec[b].name) + " index " + std::to_string(idx[b]) + " out of range");
  Strategy s;
  s.resize_p = kPGrid[idx[kResize]];
  s.rescale_p = kPGrid[idx[kRescale]];
  s.jitter_p = kPGrid[idx[kJitter]];
  s.point_mask_p = kPGrid[idx[kPointMask]];
  s.freq_mask_p = kPGrid[idx[kFreqMask]];
  s.crop_p = kPGrid[idx[kCrop]];
  s.aug_order = static_cast<int>(idx[kAugOrder]) + 1;
  s.emb_jitter_p = kPGrid[idx[kEmbJitter]];
  s.emb_mask_p = kPGrid[idx[kEmbMask]];
  s.norm = static_cast<Norm>(idx[kNorm]);
  s.temporal = idx[kTemporal] == 1;
  s.cross_scale = idx[kCrossScale] == 1;
  s.kernel = kKernels[idx[kKernel]];
  s.pool = static_cast<PoolOp>(idx[kPool]);
  s.adjacent = idx[kAdjacent] == 1;
  s.loss_type = static_cast<LossType>(idx[kLossType]);
  s.sim = static_cast<SimilarityKind>(idx[kSim]);
  s.temperature = kTemperatures[idx[kTemperature]];
  return canonical(s);
}

Strategy canonical(Strategy s) {
  s.instance = true;
  if (!s.temporal) s.adjacent = false;
  if (s.kernel == 0) s.cross_scale = false;
  return s;
}

Strategy validate(const Strategy& s) {
  // Round-trip through the grid so values are snapped to their exact grid
  // representation.
  return decode(encode(s));
}

std::uint64_t space_size(SpaceMode mode) {
  const std::uint64_t embedding = 3ULL * 11 * 11;
  const std::uint64_t pairs = mode == SpaceMode::nominal ? 32 : 128;
  const std::uint64_t losses = 2ULL * 3 * 5;
  return kAugmentationOptions * embedding * pairs * losses;
}

Strategy default_strategy() { return Strategy{}; }

Strategy ggs_preset() {
  Strategy s;
  s.resize_p = 0.2;
  s.rescale_p = 0.3;
  s.jitter_p = 0.0;
  s.point_mask_p = 0.2;
  s.freq_mask_p = 0.0;
  s.crop_p = 0.2;
  s.aug_order = 3;
  s.emb_jitter_p = 0.7;
  s.emb_mask_p = 0.1;
  s.norm = Norm::none;
  s.instance = true;
  s.temporal = false;
  s.cross_scale = false;
  s.kernel = 5;
  s.pool = PoolOp::avg;
  s.adjacent = false;
  s.loss_type = LossType::infonce;
  s.sim = SimilarityKind::dist;
  s.temperature = 1.0;
  return s;
}

SpaceRestriction::SpaceRestriction() {
  for (std::size_t b = 0; b < kBranchCount; ++b) {
    allowed_[b].resize(kSpec[b].options);
    for (std::size_t o = 0; o < kSpec[b].options; ++o) allowed_[b][o] = o;
  }
}

SpaceRestriction SpaceRestriction::pinned(const Strategy& s) {
  SpaceRestriction r;
  const ActionIndices idx = encode(s);
  for (std::size_t b = 0; b < kBranchCount; ++b) r.allowed_[b] = {idx[b]};
  return r;
}

SpaceRestriction SpaceRestriction::data_aug_only(const Strategy& rest) {
  SpaceRestriction r = pinned(rest);
  for (std::size_t b = kResize; b <= kAugOrder; ++b) r.allow_only(b, SpaceRestriction().allowed(b));
  return r;
}

void SpaceRestriction::allow_only(std::size_t branch, std::vector<std::size_t> options) {
  if (branch >= kBranchCount) throw ConfigError("branch index out of range");
  if (options.empty()) throw ConfigError(std::string(kSpec[branch].name) + ": restriction leaves no options");
  std::set<std::size_t> unique(options.begin(), options.end());
  for (std::size_t o : unique)
    if (o >= kSpec[branch].options) throw ConfigError(std::string(kSpec[branch].name) + ": option out of range");
  allowed_[branch].assign(unique.begin(), unique.end());
}

bool SpaceRestriction::allows(std::size_t branch, std::size_t option) const {
  const auto& a = allowed_[branch];
  return std::find(a.begin(), a.end(), option) != a.end();
}

bool SpaceRestriction::allows(const ActionIndices& idx) const {
  for (std::size_t b = 0; b < kBranchCount; ++b)
    if (!allows(b, idx[b])) return false;
  return true;
}

std::uint64_t SpaceRestriction::size() const {
  std::uint64_t n = 1;
  for (const auto& a : allowed_) n *= a.size();
  return n;
}

std::vector<Strategy> SpaceRestriction::enumerate(std::size_t limit) const {
  if (size() > limit) throw ConfigError("restricted space too large to enumerate");
  std::vector<Strategy> out;
  std::array<std::size_t, kBranchCount> pos{};
  while (true) {
    ActionIndices idx{};
    for (std::size_t b = 0; b < kBranchCount; ++b) idx[b] = allowed_[b][pos[b]];
    out.push_back(decode(idx));
    std::size_t b = kBranchCount;
    while (b-- > 0) {
      if (++pos[b] < allowed_[b].size()) break;
      pos[b] = 0;
    }
    if (b == static_cast<std::size_t>(-1)) break;
  }
  return out;
}

Strategy random_strategy(std::uint64_t seed) {
  Rng rng(seed);
  return random_strategy(rng);
}

Strategy random_strategy(Rng& rng, const SpaceRestriction& restriction) {
  ActionIndices idx{};
  for (std::size_t b = 0; b < kBranchCount; ++b) {
    const auto& opts = restriction.allowed(b);
    std::uniform_int_distribution<std::size_t> pick(0, opts.size() - 1);
    idx[b] = opts[pick(rng)];
  }
  return decode(idx);
}

void to_json(nlohmann::json& j, const Strategy& s) {
  j = nlohmann::json{
      {"resize_p", s.resize_p},
      {"rescale_p", s.rescale_p},
      {"jitter_p", s.jitter_p},
      {"point_mask_p", s.point_mask_p},
      {"freq_mask_p", s.freq_mask_p},
      {"crop_p", s.crop_p},
      {"aug_order", s.aug_order},
      {"emb_jitter_p", s.emb_jitter_p},
      {"emb_mask_p", s.emb_mask_p},
      {"norm", to_string(s.norm)},
      {"instance", s.instance},
      {"temporal", s.temporal},
      {"cross_scale", s.cross_scale},
      {"kernel", s.kernel},
      {"pool", to_string(s.pool)},
      {"adjacent", s.adjacent},
      {"loss_type", to_string(s.loss_type)},
      {"sim", to_string(s.sim)},
      {"temperature", s.temperature},
  };
}

void from_json(const nlohmann::json& j, Strategy& s) {
  if (!j.is_object()) throw ConfigError("strategy must be a JSON object");
  static const std::set<std::string> kFields{
      "resize_p", "rescale_p", "jitter_p", "point_mask_p", "freq_mask_p", "crop_p", "aug_order",
      "emb_jitter_p", "emb_mask_p", "norm", "instance", "temporal", "cross_scale", "kernel", "pool",
      "adjacent", "loss_type", "sim", "temperature"};
  for (const auto& [key, value] : j.items())
    if (!kFields.count(key)) throw ConfigError("unknown strategy field \"" + key + "\"");
  for (const auto& key : kFields)
    if (!j.contains(key)) throw ConfigError("missing strategy field \"" + key + "\"");

  auto number = [&](const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number()) throw ConfigError(std::string(key) + " must be a number");
    return v.get<double>();
  };
  auto integer = [&](const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ConfigError(std::string(key) + " must be an integer");
    return v.get<int>();
  };
  auto boolean = [&](const char* key) {
    const auto& v = j.at(key);
    if (!v.is_boolean()) throw ConfigError(std::string(key) + " must be a boolean");
    return v.get<bool>();
  };

  Strategy r;
  r.resize_p = number("resize_p");
  r.rescale_p = number("rescale_p");
  r.jitter_p = number("jitter_p");
  r.point_mask_p = number("point_mask_p");
  r.freq_mask_p = number("freq_mask_p");
  r.crop_p = number("crop_p");
  r.aug_order = integer("aug_order");
  r.emb_jitter_p = number("emb_jitter_p");
  r.emb_mask_p = number("emb_mask_p");
  r.norm = enum_from(j.at("norm"), "norm", kNormNames);
  if (!boolean("instance")) throw ConfigError("instance must be true");
  r.temporal = boolean("temporal");
  r.cross_scale = boolean("cross_scale");
  r.kernel = integer("kernel");
  r.pool = enum_from(j.at("pool"), "pool", kPoolNames);
  r.adjacent = boolean("adjacent");
  r.loss_type = enum_from(j.at("loss_type"), "loss_type", kLossNames);
  r.sim = enum_from(j.at("sim"), "sim", kSimNames);
  r.temperature = number("temperature");
  s = validate(r);
}

}  // namespace autocl

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "autocl/rng.hpp"
#include "autocl/space.hpp"
#include "autocl/tape.hpp"

namespace autocl {

struct EncoderConfig {
  std::size_t in_channels = 1;
  std::size_t depth = 10;
  std::size_t hidden = 64;
  std::size_t out_dim = 320;
  // Block i uses dilation 2^(i mod dilation_cycle).
  std::size_t dilation_cycle = 8;

  void validate() const;
  std::size_t dilation(std::size_t block) const { return std::size_t{1} << (block % dilation_cycle); }
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

// Linear in -> hidden, `depth` residual blocks h + relu(conv_i(h)) with kernel
// 3, linear hidden -> out.
struct EncoderParams {
  EncoderConfig config;
  Tensor in_w, in_b;
  std::vector<Tensor> conv_w, conv_b;
  Tensor out_w, out_b;

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  std::size_t parameter_count() const;
  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

EncoderParams init_encoder(const EncoderConfig& config, std::uint64_t seed);

// Leaves for every parameter tensor, in tensors() order.
std::vector<Var> bind_encoder(Tape& tape, const EncoderParams& params, bool trainable = true);

// x: B x T x in_channels -> B x T x out_dim.
Var encode(const EncoderConfig& config, const std::vector<Var>& params, Var x);
// Forward pass without gradient bookkeeping.
Tensor encode(const EncoderParams& params, const Tensor& x);

// Embedding jitter, then timestep mask, then per-vector normalization.
Var transform_embeddings(Var h, const Strategy& s, Rng& rng);

}  // namespace autocl

#include "autocl/encoder.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <random>

#include "autocl/error.hpp"
#include "autocl/ops.hpp"

namespace autocl {
namespace {

constexpr std::size_t kConvKernel = 3;

Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

}  // namespace

void EncoderConfig::validate() const {
  if (in_channels < 1 || depth < 1 || hidden < 1 || out_dim < 1)
    throw ConfigError("encoder dimensions must be positive");
  if (dilation_cycle < 1 || dilation_cycle > 30) throw ConfigError("encoder dilation_cycle must lie in [1, 30]");
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"in_channels", c.in_channels}, {"depth", c.depth}, {"hidden", c.hidden},
       {"out_dim", c.out_dim}, {"dilation_cycle", c.dilation_cycle}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  c.in_channels = j.at("in_channels").get<std::size_t>();
  c.depth = j.at("depth").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.out_dim = j.at("out_dim").get<std::size_t>();
  c.dilation_cycle = j.value("dilation_cycle", std::size_t{8});
  c.validate();
}

std::vector<Tensor*> EncoderParams::tensors() {
  std::vector<Tensor*> out{&in_w, &in_b};
  for (std::size_t i = 0; i < conv_w.size(); ++i) {
    out.push_back(&conv_w[i]);
    out.push_back(&conv_b[i]);
  }
  out.push_back(&out_w);
  out.push_back(&out_b);
  return out;
}

std::vector<const Tensor*> EncoderParams::tensors() const {
  std::vector<const Tensor*> out;
  for (Tensor* t : const_cast<EncoderParams*>(this)->tensors()) out.push_back(t);
  return out;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

EncoderParams init_encoder(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  EncoderParams p;
  p.config = config;
  const std::size_t c = config.in_channels, h = config.hidden, o = config.out_dim;
  p.in_w = glorot({c, h}, c, h, rng);
  p.in_b = Tensor({h});
  for (std::size_t i = 0; i < config.depth; ++i) {
    p.conv_w.push_back(glorot({kConvKernel, h, h}, kConvKernel * h, kConvKernel * h, rng));
    p.conv_b.emplace_back(Shape{h});
  }
  p.out_w = glorot({h, o}, h, o, rng);
  p.out_b = Tensor({o});
  return p;
}

std::vector<Var> bind_encoder(Tape& tape, const EncoderParams& params, bool trainable) {
  std::vector<Var> vars;
  for (const Tensor* t : params.tensors()) vars.push_back(tape.leaf(*t, trainable));
  return vars;
}

Var encode(const EncoderConfig& config, const std::vector<Var>& params, Var x) {
  if (params.size() != 4 + 2 * config.depth) throw DimensionError("encode: parameter count does not match config");
  const Shape& xs = x.shape();
  if (xs.size() != 3 || xs[2] != config.in_channels) {
    throw DimensionError("encode: expected B x T x " + std::to_string(config.in_channels) + ", got " +
                         shape_string(xs));
  }
  Var h = linear(x, params[0], params[1]);
  for (std::size_t i = 0; i < config.depth; ++i) {
    Var conv = conv1d_dilated(h, params[2 + 2 * i], params[3 + 2 * i], config.dilation(i));
    h = add(h, relu(conv));
  }
  return linear(h, params[2 + 2 * config.depth], params[3 + 2 * config.depth]);
}

Tensor encode(const EncoderParams& params, const Tensor& x) {
  Tape tape;
  const auto vars = bind_encoder(tape, params, false);
  return encode(params.config, vars, tape.constant(x)).value();
}

Var transform_embeddings(Var h, const Strategy& s, Rng& rng) {
  const Tensor& hv = h.value();
  if (hv.rank() != 3) throw DimensionError("transform_embeddings: expected B x T x d");
  Tape& tape = *h.tape();
  if (s.emb_jitter_p > 0.0) {
    std::normal_distribution<double> noise(0.0, s.emb_jitter_p);
    Tensor n(hv.shape());
    for (double& v : n.data()) v = noise(rng);
    h = add_const(h, n);
  }
  if (s.emb_mask_p > 0.0) {
    std::bernoulli_distribution drop(s.emb_mask_p);
    const std::size_t d = hv.dim(2);
    Tensor keep(hv.shape(), 1.0);
    for (std::size_t r = 0; r < hv.dim(0) * hv.dim(1); ++r)
      if (drop(rng)) std::fill_n(keep.ptr() + r * d, d, 0.0);
    h = mul_const(h, keep);
  }
  switch (s.norm) {
    case Norm::none: break;
    case Norm::layer: {
      const std::size_t d = hv.dim(2);
      h = layer_norm(h, tape.constant(Tensor({d}, 1.0)), tape.constant(Tensor({d}, 0.0)));
      break;
    }
    case Norm::l2: h = l2_normalize(h); break;
  }
  return h;
}

}  // namespace autocl

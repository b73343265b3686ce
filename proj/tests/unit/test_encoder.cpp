#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "autocl/checkpoint.hpp"
#include "autocl/encoder.hpp"
#include "autocl/error.hpp"
#include "autocl/grad_check.hpp"
#include "autocl/ops.hpp"
#include "oracles.hpp"

using namespace autocl;

namespace {

EncoderConfig tiny() {
  EncoderConfig c;
  c.in_channels = 2;
  c.depth = 2;
  c.hidden = 4;
  c.out_dim = 6;
  return c;
}

EncoderParams with_random_biases(EncoderParams p, std::uint64_t seed) {
  std::mt19937_64 r(seed);
  p.in_b = oracle::random_tensor(p.in_b.shape(), r, -0.5, 0.5);
  for (auto& b : p.conv_b) b = oracle::random_tensor(b.shape(), r, -0.5, 0.5);
  p.out_b = oracle::random_tensor(p.out_b.shape(), r, -0.5, 0.5);
  return p;
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t B = x.dim(0), T = x.dim(1), n = x.dim(2), m = w.dim(1);
  Tensor y({B, T, m});
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t o = 0; o < m; ++o) {
        double acc = b[o];
        for (std::size_t k = 0; k < n; ++k) acc += x.at(i, t, k) * w.at(k, o);
        y.at(i, t, o) = acc;
      }
  return y;
}

Tensor encoder_oracle(const EncoderParams& p, const Tensor& x) {
  Tensor h = dense(x, p.in_w, p.in_b);
  for (std::size_t i = 0; i < p.config.depth; ++i) {
    const Tensor c = oracle::conv1d(h, p.conv_w[i], p.conv_b[i], std::size_t{1} << (i % p.config.dilation_cycle));
    for (std::size_t k = 0; k < h.size(); ++k) h[k] += std::max(0.0, c[k]);
  }
  return dense(h, p.out_w, p.out_b);
}

}  // namespace

TEST(Encoder, InitDeterministic) {
  EXPECT_EQ(init_encoder(tiny(), 3), init_encoder(tiny(), 3));
  EXPECT_NE(init_encoder(tiny(), 3), init_encoder(tiny(), 4));
}

TEST(Encoder, DefaultShapes) {
  const EncoderParams p = init_encoder(EncoderConfig{}, 0);
  EXPECT_EQ(p.in_w.shape(), (Shape{1, 64}));
  ASSERT_EQ(p.conv_w.size(), 10u);
  for (const auto& w : p.conv_w) EXPECT_EQ(w.shape(), (Shape{3, 64, 64}));
  EXPECT_EQ(p.out_w.shape(), (Shape{64, 320}));
  EXPECT_EQ(p.parameter_count(), 64u + 64 + 10 * (3 * 64 * 64 + 64) + 64 * 320 + 320);
}

TEST(Encoder, InitWithinGlorotBound) {
  const EncoderParams p = init_encoder(EncoderConfig{}, 1);
  const double a_in = std::sqrt(6.0 / 65.0), a_conv = std::sqrt(6.0 / 384.0), a_out = std::sqrt(6.0 / 384.0);
  for (double v : p.in_w.data()) EXPECT_LT(std::abs(v), a_in);
  for (const auto& w : p.conv_w)
    for (double v : w.data()) ASSERT_LT(std::abs(v), a_conv);
  for (double v : p.out_w.data()) ASSERT_LT(std::abs(v), a_out);
}

TEST(Encoder, RejectsBadConfig) {
  EncoderConfig c = tiny();
  c.depth = 0;
  EXPECT_THROW(init_encoder(c, 0), ConfigError);
  EXPECT_THROW(encode(init_encoder(tiny(), 0), Tensor({1, 4, 3})), DimensionError);
}

TEST(Encoder, MatchesLoopOracle) {
  EncoderConfig c = tiny();
  c.depth = 5;
  c.dilation_cycle = 3;
  const EncoderParams p = with_random_biases(init_encoder(c, 7), 8);
  std::mt19937_64 r(9);
  const Tensor x = oracle::random_tensor({3, 11, 2}, r);
  EXPECT_LT(oracle::max_abs_diff(encode(p, x), encoder_oracle(p, x)), 1e-12);
}

TEST(Encoder, OutputShapeForAnyLength) {
  const EncoderParams p = init_encoder(tiny(), 0);
  for (std::size_t T : {1u, 2u, 7u, 33u}) EXPECT_EQ(encode(p, Tensor({2, T, 2}, 0.3)).shape(), (Shape{2, T, 6}));
}

TEST(Encoder, NoCrossBatchMixing) {
  const EncoderParams p = with_random_biases(init_encoder(tiny(), 2), 3);
  std::mt19937_64 r(4);
  const Tensor one = oracle::random_tensor({1, 9, 2}, r);
  Tensor x({4, 9, 2});
  const Tensor other = oracle::random_tensor({1, 9, 2}, r);
  for (std::size_t i = 0; i < 18; ++i) {
    x[i] = one[i];
    x[18 + i] = other[i];
    x[36 + i] = one[i];
    x[54 + i] = other[i];
  }
  const Tensor h = encode(p, x);
  for (std::size_t i = 0; i < 9 * 6; ++i) {
    EXPECT_EQ(h[i], h[2 * 54 + i]);
    EXPECT_EQ(h[54 + i], h[3 * 54 + i]);
  }
  // Permuting the batch permutes the output.
  Tensor swapped({4, 9, 2});
  const std::size_t perm[4] = {2, 0, 3, 1};
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t i = 0; i < 18; ++i) swapped[b * 18 + i] = x[perm[b] * 18 + i];
  const Tensor hs = encode(p, swapped);
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t i = 0; i < 54; ++i) EXPECT_EQ(hs[b * 54 + i], h[perm[b] * 54 + i]);
}

TEST(Encoder, ParameterGradients) {
  const EncoderParams p = with_random_biases(init_encoder(tiny(), 11), 12);
  std::mt19937_64 r(13);
  const Tensor x = oracle::random_tensor({2, 6, 2}, r);
  const auto params = p.tensors();
  for (std::size_t k = 0; k < params.size(); ++k) {
    ScalarFn f = [&](Tape& tape, Var leaf) {
      std::vector<Var> vars;
      for (std::size_t j = 0; j < params.size(); ++j) vars.push_back(j == k ? leaf : tape.constant(*params[j]));
      return sum(encode(p.config, vars, tape.constant(x)));
    };
    EXPECT_LT(grad_check(f, *params[k]), 1e-4) << "parameter " << k;
  }
}

TEST(Embeddings, DisabledIsIdentity) {
  std::mt19937_64 r(1);
  Tape tape;
  const Var h = tape.constant(oracle::random_tensor({2, 5, 3}, r));
  Rng rng(0);
  EXPECT_EQ(transform_embeddings(h, default_strategy(), rng).value(), h.value());
}

TEST(Embeddings, L2GivesUnitVectors) {
  std::mt19937_64 r(2);
  Tape tape;
  const Var h = tape.constant(oracle::random_tensor({3, 7, 5}, r));
  Strategy s = default_strategy();
  s.norm = Norm::l2;
  Rng rng(0);
  const Tensor y = transform_embeddings(h, s, rng).value();
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t t = 0; t < 7; ++t) {
      double n = 0;
      for (std::size_t c = 0; c < 5; ++c) n += y.at(b, t, c) * y.at(b, t, c);
      EXPECT_NEAR(std::sqrt(n), 1.0, 1e-9);
    }
}

TEST(Embeddings, LayerNormTwoValues) {
  Tape tape;
  Tensor v({1, 1, 2});
  v[0] = 1.0;
  v[1] = 3.0;
  Strategy s = default_strategy();
  s.norm = Norm::layer;
  Rng rng(0);
  const Tensor y = transform_embeddings(tape.constant(v), s, rng).value();
  EXPECT_NEAR(y[0], -1.0, 1e-3);
  EXPECT_NEAR(y[1], 1.0, 1e-3);
}

TEST(Embeddings, MaskZeroesWholeVectors) {
  Tape tape;
  const Var h = tape.constant(Tensor({4, 500, 3}, 1.0));
  Strategy s = default_strategy();
  s.emb_mask_p = 0.3;
  Rng rng(5);
  const Tensor y = transform_embeddings(h, s, rng).value();
  std::size_t zero = 0;
  for (std::size_t r = 0; r < 2000; ++r) {
    EXPECT_EQ(y[3 * r] == 0.0, y[3 * r + 2] == 0.0);
    zero += y[3 * r] == 0.0 ? 1 : 0;
  }
  // 2000 Bernoulli(0.3) draws: 4 sigma is about 0.041.
  EXPECT_NEAR(zero / 2000.0, 0.3, 0.041);
}

TEST(Embeddings, JitterStd) {
  Tape tape;
  const Var h = tape.constant(Tensor({10, 1000, 10}));
  Strategy s = default_strategy();
  s.emb_jitter_p = 0.7;
  Rng rng(6);
  const Tensor y = transform_embeddings(h, s, rng).value();
  double v = 0;
  for (double a : y.data()) v += a * a;
  EXPECT_NEAR(std::sqrt(v / static_cast<double>(y.size())), 0.7, 0.005);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto path = std::filesystem::temp_directory_path() / "autocl_test_encoder.ckpt";
  const EncoderParams p = with_random_biases(init_encoder(tiny(), 21), 22);
  save_encoder(path, p);
  EXPECT_EQ(load_encoder(path), p);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto dir = std::filesystem::temp_directory_path();
  EXPECT_THROW(load_encoder(dir / "autocl_missing.ckpt"), DataError);
  const auto junk = dir / "autocl_junk.ckpt";
  std::ofstream(junk) << "not a checkpoint";
  EXPECT_THROW(load_encoder(junk), DataError);

  const auto path = dir / "autocl_trunc.ckpt";
  save_encoder(path, init_encoder(tiny(), 1));
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 9);
  EXPECT_THROW(load_encoder(path), DataError);

  write_container(path, "model", nlohmann::json::object(), {});
  EXPECT_THROW(load_encoder(path), DataError);
  std::filesystem::remove(junk);
  std::filesystem::remove(path);
}

#include "autocl/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fftw3.h>
#include <mutex>
#include <numeric>
#include <random>
#include <string>

#include "autocl/error.hpp"

namespace autocl {
namespace {

using A = Augmentation;

const std::array<std::array<A, 6>, 5> kOrders{{
    {A::resize, A::rescale, A::freq_mask, A::jitter, A::point_mask, A::crop},
    {A::resize, A::rescale, A::freq_mask, A::jitter, A::crop, A::point_mask},
    {A::resize, A::rescale, A::freq_mask, A::crop, A::jitter, A::point_mask},
    {A::resize, A::rescale, A::crop, A::freq_mask, A::jitter, A::point_mask},
    {A::resize, A::crop, A::rescale, A::freq_mask, A::jitter, A::point_mask},
}};

// The FFTW planner is not thread-safe; plan execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void require_batch(const Tensor& x, const char* op) {
  if (x.rank() != 3) throw DimensionError(std::string(op) + ": expected B x T x c, got " + shape_string(x.shape()));
}

void check_p(double p, const char* op) {
  if (!(p >= 0.0 && p <= 0.95 + 1e-12)) throw ConfigError(std::string(op) + ": p must lie in [0, 0.95]");
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n), bins_(n / 2 + 1) {
    in_ = fftw_alloc_real(n_);
    out_ = fftw_alloc_complex(bins_);
    std::lock_guard lock(planner_mutex());
    const int len = static_cast<int>(n_);
    forward_ = fftw_plan_dft_r2c_1d(len, in_, out_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(len, out_, in_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(forward_);
      fftw_destroy_plan(inverse_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t bins() const { return bins_; }
  double* real() { return in_; }

  void forward() { fftw_execute(forward_); }
  void zero_bin(std::size_t k) { out_[k][0] = out_[k][1] = 0.0; }
  // c2r destroys its input and is unnormalized.
  void inverse() {
    fftw_execute(inverse_);
    for (std::size_t i = 0; i < n_; ++i) in_[i] /= static_cast<double>(n_);
  }

 private:
  std::size_t n_, bins_;
  double* in_;
  fftw_complex* out_;
  fftw_plan forward_, inverse_;
};

}  // namespace

const std::array<Augmentation, 6>& augmentation_order(int aug_order) {
  if (aug_order < 1 || aug_order > 5) throw ConfigError("aug_order off grid");
  return kOrders[static_cast<std::size_t>(aug_order - 1)];
}

std::vector<double> resample_linear(std::span<const double> series, std::size_t length) {
  if (series.empty() || length == 0) throw DimensionError("resample_linear: empty series");
  std::vector<double> out(length);
  const std::size_t n = series.size();
  if (n == 1 || length == 1) {
    std::fill(out.begin(), out.end(), series[0]);
    return out;
  }
  const double ratio = static_cast<double>(n - 1) / static_cast<double>(length - 1);
  for (std::size_t i = 0; i < length; ++i) {
    const double pos = static_cast<double>(i) * ratio;
    const auto lo = std::min(static_cast<std::size_t>(pos), n - 2);
    const double frac = pos - static_cast<double>(lo);
    out[i] = series[lo] * (1.0 - frac) + series[lo + 1] * frac;
  }
  return out;
}

Tensor time_warp(const Tensor& x, std::span<const std::size_t> lengths) {
  require_batch(x, "time_warp");
  const std::size_t B = x.dim(0), T = x.dim(1), c = x.dim(2);
  if (lengths.size() != B) throw DimensionError("time_warp: one length per instance required");
  Tensor out(x.shape());
  std::vector<double> series(T);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t t = 0; t < T; ++t) series[t] = x.at(b, t, ch);
      const auto back = resample_linear(resample_linear(series, lengths[b]), T);
      for (std::size_t t = 0; t < T; ++t) out.at(b, t, ch) = back[t];
    }
  return out;
}

Tensor resize(const Tensor& x, double p, Rng& rng) {
  require_batch(x, "resize");
  check_p(p, "resize");
  if (p == 0.0) return x;
  const std::size_t T = x.dim(1);
  if (T < 2) throw DataError("resize needs at least 2 timesteps");
  std::normal_distribution<double> noise(0.0, p);
  std::vector<std::size_t> lengths(x.dim(0));
  for (auto& len : lengths) {
    const double n = std::clamp(noise(rng), -0.5, 0.5);
    len = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(static_cast<double>(T) * (1.0 + n))));
  }
  return time_warp(x, lengths);
}

Tensor scale_instances(const Tensor& x, std::span<const double> factors) {
  require_batch(x, "rescale");
  if (factors.size() != x.dim(0)) throw DimensionError("scale_instances: one factor per instance required");
  Tensor out = x;
  const std::size_t per = x.dim(1) * x.dim(2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factors[i / per];
  return out;
}

Tensor rescale(const Tensor& x, double p, Rng& rng) {
  require_batch(x, "rescale");
  check_p(p, "rescale");
  if (p == 0.0) return x;
  std::normal_distribution<double> noise(0.0, p);
  std::vector<double> factors(x.dim(0));
  for (double& f : factors) f = 1.0 + noise(rng);
  return scale_instances(x, factors);
}

Tensor jitter(const Tensor& x, double p, Rng& rng) {
  require_batch(x, "jitter");
  check_p(p, "jitter");
  if (p == 0.0) return x;
  std::normal_distribution<double> noise(0.0, p);
  Tensor out = x;
  for (double& v : out.data()) v += noise(rng);
  return out;
}

Tensor mask_timesteps(const Tensor& x, std::span<const std::uint8_t> mask) {
  require_batch(x, "mask_timesteps");
  const std::size_t BT = x.dim(0) * x.dim(1), c = x.dim(2);
  if (mask.size() != BT) throw DimensionError("mask_timesteps: mask must have B*T entries");
  Tensor out = x;
  for (std::size_t r = 0; r < BT; ++r)
    if (mask[r]) std::fill_n(out.ptr() + r * c, c, 0.0);
  return out;
}

Tensor point_mask(const Tensor& x, double p, Rng& rng) {
  require_batch(x, "point_mask");
  check_p(p, "point_mask");
  if (p == 0.0) return x;
  std::bernoulli_distribution drop(p);
  std::vector<std::uint8_t> mask(x.dim(0) * x.dim(1));
  for (auto& m : mask) m = drop(rng) ? 1 : 0;
  return mask_timesteps(x, mask);
}

Tensor mask_frequencies(const Tensor& x, std::span<const std::size_t> bins) {
  require_batch(x, "mask_frequencies");
  const std::size_t B = x.dim(0), T = x.dim(1), c = x.dim(2);
  RealFft fft(T);
  for (std::size_t k : bins)
    if (k >= fft.bins()) throw DimensionError("mask_frequencies: bin " + std::to_string(k) + " out of range");
  Tensor out(x.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t t = 0; t < T; ++t) fft.real()[t] = x.at(b, t, ch);
      fft.forward();
      for (std::size_t k : bins) fft.zero_bin(k);
      fft.inverse();
      for (std::size_t t = 0; t < T; ++t) out.at(b, t, ch) = fft.real()[t];
    }
  return out;
}

Tensor freq_mask(const Tensor& x, double p, Rng& rng) {
  require_batch(x, "freq_mask");
  check_p(p, "freq_mask");
  if (p == 0.0) return x;
  const std::size_t B = x.dim(0), T = x.dim(1), c = x.dim(2);
  RealFft fft(T);
  const std::size_t nbins = fft.bins();
  const auto count = static_cast<std::size_t>(std::floor(p * static_cast<double>(nbins) + 1e-9));
  std::vector<std::size_t> order(nbins);
  Tensor out(x.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::iota(order.begin(), order.end(), 0);
      // Partial Fisher-Yates: the first `count` entries are a uniform subset.
      for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, nbins - 1);
        std::swap(order[i], order[pick(rng)]);
      }
      for (std::size_t t = 0; t < T; ++t) fft.real()[t] = x.at(b, t, ch);
      fft.forward();
      for (std::size_t i = 0; i < count; ++i) fft.zero_bin(order[i]);
      fft.inverse();
      for (std::size_t t = 0; t < T; ++t) out.at(b, t, ch) = fft.real()[t];
    }
  return out;
}

CropWindow sample_crop(std::size_t T, double p, Rng& rng) {
  if (T == 0) throw DataError("crop of an empty series");
  if (!(p > 0.0 && p <= 0.95 + 1e-12)) throw ConfigError("crop: p must lie in (0, 0.95]");
  const std::size_t overlap =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(p * static_cast<double>(T))));
  CropWindow w{};
  w.t2 = std::uniform_int_distribution<std::size_t>(0, T - overlap)(rng);
  w.t1 = std::uniform_int_distribution<std::size_t>(0, w.t2)(rng);
  w.t1_end = w.t2 + overlap;
  w.t2_end = std::uniform_int_distribution<std::size_t>(w.t1_end, T)(rng);
  return w;
}

ViewPair crop_views(const Tensor& x, const CropWindow& w) {
  require_batch(x, "crop");
  const std::size_t B = x.dim(0), T = x.dim(1), c = x.dim(2);
  if (!(w.t1 <= w.t2 && w.t2 < w.t1_end && w.t1_end <= w.t2_end && w.t2_end <= T))
    throw DimensionError("crop window out of order");
  auto cut = [&](std::size_t lo, std::size_t hi) {
    Tensor v({B, hi - lo, c});
    for (std::size_t b = 0; b < B; ++b)
      std::copy_n(x.ptr() + (b * T + lo) * c, (hi - lo) * c, v.ptr() + b * (hi - lo) * c);
    return v;
  };
  ViewPair vp;
  vp.view1 = cut(w.t1, w.t1_end);
  vp.view2 = cut(w.t2, w.t2_end);
  vp.align1 = w.t2 - w.t1;
  vp.align2 = 0;
  vp.common_len = w.t1_end - w.t2;
  return vp;
}

ViewPair random_crop(const Tensor& x, double p, Rng& rng) {
  require_batch(x, "crop");
  return crop_views(x, sample_crop(x.dim(1), p, rng));
}

Tensor apply_augmentation(Augmentation a, const Tensor& x, const Strategy& s, Rng& rng) {
  switch (a) {
    case A::resize: return resize(x, s.resize_p, rng);
    case A::rescale: return rescale(x, s.rescale_p, rng);
    case A::jitter: return jitter(x, s.jitter_p, rng);
    case A::point_mask: return point_mask(x, s.point_mask_p, rng);
    case A::freq_mask: return freq_mask(x, s.freq_mask_p, rng);
    case A::crop: break;
  }
  throw ConfigError("crop is applied through make_view_pair");
}

ViewPair make_view_pair(const Tensor& x, const Strategy& s, Rng& rng, ViewTrace* trace) {
  require_batch(x, "make_view_pair");
  const auto& order = augmentation_order(s.aug_order);
  const auto crop_at = static_cast<std::size_t>(std::find(order.begin(), order.end(), A::crop) - order.begin());

  auto run = [&](Tensor v, std::size_t from, std::size_t to) {
    for (std::size_t i = from; i < to; ++i)
      if (order[i] != A::crop) v = apply_augmentation(order[i], v, s, rng);
    return v;
  };

  ViewPair vp;
  if (s.crop_p > 0.0) {
    const Tensor shared = run(x, 0, crop_at);
    vp = random_crop(shared, s.crop_p, rng);
    if (trace) {
      trace->crop_view1 = vp.view1;
      trace->crop_view2 = vp.view2;
    }
    vp.view1 = run(std::move(vp.view1), crop_at + 1, order.size());
    vp.view2 = run(std::move(vp.view2), crop_at + 1, order.size());
  } else {
    vp.view1 = run(x, 0, order.size());
    vp.view2 = run(x, 0, order.size());
    vp.common_len = x.dim(1);
    if (trace) {
      trace->crop_view1 = vp.view1;
      trace->crop_view2 = vp.view2;
    }
  }
  return vp;
}

}  // namespace autocl

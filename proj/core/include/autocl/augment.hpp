#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "autocl/rng.hpp"
#include "autocl/space.hpp"
#include "autocl/tensor.hpp"

namespace autocl {

// Two augmented views of a batch. view1[:, align1 : align1 + common_len] and
// view2[:, align2 : align2 + common_len] cover the same source timesteps.
struct ViewPair {
  Tensor view1;
  Tensor view2;
  std::size_t align1 = 0;
  std::size_t align2 = 0;
  std::size_t common_len = 0;
};

enum class Augmentation { resize, rescale, jitter, point_mask, freq_mask, crop };

// Application order for aug_order 1..5.
const std::array<Augmentation, 6>& augmentation_order(int aug_order);

// All augmentations take B x T x c input and are the identity at p == 0.
Tensor resize(const Tensor& x, double p, Rng& rng);
Tensor rescale(const Tensor& x, double p, Rng& rng);
Tensor jitter(const Tensor& x, double p, Rng& rng);
Tensor point_mask(const Tensor& x, double p, Rng& rng);
Tensor freq_mask(const Tensor& x, double p, Rng& rng);

struct CropWindow {
  std::size_t t1, t2, t1_end, t2_end;  // view1 = [t1, t1_end), view2 = [t2, t2_end)
};
CropWindow sample_crop(std::size_t T, double p, Rng& rng);
ViewPair crop_views(const Tensor& x, const CropWindow& w);
ViewPair random_crop(const Tensor& x, double p, Rng& rng);

// Building blocks, exposed for direct testing.
// Linear interpolation with aligned endpoints: out[i] = in at i*(n-1)/(m-1).
std::vector<double> resample_linear(std::span<const double> series, std::size_t length);
// Resample instance b to lengths[b] and back to T along the time axis.
Tensor time_warp(const Tensor& x, std::span<const std::size_t> lengths);
// x[b] * factors[b].
Tensor scale_instances(const Tensor& x, std::span<const double> factors);
// Zero the listed one-sided rfft bins of every (instance, channel) series.
Tensor mask_frequencies(const Tensor& x, std::span<const std::size_t> bins);
// Zero timestep t of instance b wherever mask[b * T + t] is set.
Tensor mask_timesteps(const Tensor& x, std::span<const std::uint8_t> mask);

// Views right after cropping, before any later augmentation.
struct ViewTrace {
  Tensor crop_view1;
  Tensor crop_view2;
};

// Augmentations ahead of the crop in the chosen order transform the batch once
// and feed both views; the crop then cuts both views from the same indices;
// augmentations after it are drawn per view. Without crop every augmentation is
// drawn per view over the full length.
ViewPair make_view_pair(const Tensor& x, const Strategy& s, Rng& rng, ViewTrace* trace = nullptr);

Tensor apply_augmentation(Augmentation a, const Tensor& x, const Strategy& s, Rng& rng);

}  // namespace autocl

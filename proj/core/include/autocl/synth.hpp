#pragma once

#include <cstddef>
#include <cstdint>

#include "autocl/dataset.hpp"

namespace autocl {

// Class k is a sine with (k + 1) * 8 cycles over T, random phase, plus
// Gaussian noise of standard deviation `noise`.
DatasetBundle synth_classification(std::size_t n_per_class, std::size_t T, std::size_t n_classes, double noise,
                                   std::uint64_t seed);

// Linear trend, daily- and weekly-like seasonal terms and AR(1) noise,
// univariate. `noiseless` drops the AR(1) term.
DatasetBundle synth_forecast(std::size_t T_total, std::uint64_t seed, bool noiseless = false);

// Smooth seasonal base with injected spikes and short level shifts whose
// amplitude is at least 6 standard deviations of the base. Labels mark the
// injected points.
DatasetBundle synth_anomaly(std::size_t T_total, double anomaly_rate, std::uint64_t seed, bool noiseless = false);

// Resolves "synth:classification|forecast|anomaly" with the defaults used by
// the CLI.
DatasetBundle synth_by_name(const std::string& name, std::uint64_t seed);

}  // namespace autocl

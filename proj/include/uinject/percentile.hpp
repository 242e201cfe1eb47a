#pragma once

// Empirical gamma-percentile of a sample set and the rule that routes its
// gradient through the one or two selected samples.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "uinject/rng.hpp"

namespace uinject {

struct PercentileSelection {
  double gamma = 0.0;          // percent, in (0, 100)
  std::size_t rank_low = 0;    // 0-based positions in ascending order
  std::size_t rank_high = 0;
  std::size_t sample_low = 0;  // original indices of those positions
  std::size_t sample_high = 0;
  double interp_weight = 0.0;  // in [0, 1)
  double value = 0.0;
};

// Target fractional 1-based rank t = L*gamma/100. t <= 1 selects the minimum;
// otherwise the value interpolates between the floor(t)-th and ceil(t)-th
// lowest samples with weight t - floor(t). Ties keep their original order.
PercentileSelection empirical_percentile(std::span<const double> samples, double gamma);

struct SampleWeight {
  std::size_t sample;
  double weight;
};

// d(value)/d(sample): (1 - w) on the low sample, w on the high one. Zero
// weights are dropped, so the no-interpolation case yields a single entry.
std::vector<SampleWeight> percentile_gradient(const PercentileSelection& selection);

struct ConvergenceProbe {
  double mean_estimate = 0.0;
  double bias = 0.0;  // mean_estimate - true_value
};

// Mean over trials of the empirical percentile of L fresh draws.
ConvergenceProbe percentile_convergence_probe(const std::function<double(Rng&)>& sampler,
                                              double gamma, double true_value, std::size_t L,
                                              std::size_t trials, Rng& rng);

}  // namespace uinject

#include "uinject/percentile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uinject/error.hpp"

namespace uinject {

PercentileSelection empirical_percentile(std::span<const double> samples, double gamma) {
  const std::size_t n = samples.size();
  if (n == 0) throw_usage("empirical percentile of an empty sample set");
  if (!(gamma > 0.0 && gamma < 100.0)) throw_usage("percentile gamma must lie in (0, 100)");
  for (double s : samples) {
    if (std::isnan(s)) throw_numeric("NaN in percentile samples (diverged utility evaluation)");
  }

  const double t = static_cast<double>(n) * gamma / 100.0;
  std::size_t rank_low = 0;
  std::size_t rank_high = 0;
  double weight = 0.0;
  if (t > 1.0) {
    const double floor_t = std::floor(t);
    rank_low = static_cast<std::size_t>(floor_t) - 1;
    rank_high = std::min(static_cast<std::size_t>(std::ceil(t)), n) - 1;
    weight = t - floor_t;
  }

  // (value, index) ordering is exactly the stable-sort order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto less = [&](std::size_t a, std::size_t b) {
    return samples[a] < samples[b] || (samples[a] == samples[b] && a < b);
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(rank_low), order.end(),
                   less);
  std::size_t high_index = order[rank_low];
  if (rank_high != rank_low) {
    high_index = *std::min_element(order.begin() + static_cast<std::ptrdiff_t>(rank_low) + 1,
                                   order.end(), less);
  }

  PercentileSelection sel;
  sel.gamma = gamma;
  sel.rank_low = rank_low;
  sel.rank_high = rank_high;
  sel.sample_low = order[rank_low];
  sel.sample_high = high_index;
  sel.interp_weight = weight;
  const double low = samples[sel.sample_low];
  const double high = samples[sel.sample_high];
  // lerp form keeps the value exact when both samples are equal
  sel.value = weight == 0.0 ? low : low + weight * (high - low);
  return sel;
}

std::vector<SampleWeight> percentile_gradient(const PercentileSelection& selection) {
  std::vector<SampleWeight> weights;
  if (selection.interp_weight == 0.0 || selection.sample_low == selection.sample_high) {
    weights.push_back({selection.sample_low, 1.0});
    return weights;
  }
  weights.push_back({selection.sample_low, 1.0 - selection.interp_weight});
  weights.push_back({selection.sample_high, selection.interp_weight});
  return weights;
}

ConvergenceProbe percentile_convergence_probe(const std::function<double(Rng&)>& sampler,
                                              double gamma, double true_value, std::size_t L,
                                              std::size_t trials, Rng& rng) {
  if (L == 0 || trials == 0) throw_usage("convergence probe needs L >= 1 and trials >= 1");
  std::vector<double> draws(L);
  double sum = 0.0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    for (double& d : draws) d = sampler(rng);
    sum += empirical_percentile(draws, gamma).value;
  }
  ConvergenceProbe probe;
  probe.mean_estimate = sum / static_cast<double>(trials);
  probe.bias = probe.mean_estimate - true_value;
  return probe;
}

}  // namespace uinject

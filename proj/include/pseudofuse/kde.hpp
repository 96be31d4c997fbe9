#pragma once

#include <cstddef>
#include <vector>

namespace pseudofuse {

/// Scalar samples with non-negative weights and a shared Gaussian bandwidth.
struct WeightedSamples {
  std::vector<double> values;
  std::vector<double> weights;
  double bandwidth = 1.0;
};

/// Throws std::invalid_argument on empty/mismatched samples, negative
/// weights, all-zero weights or non-positive bandwidth.
void validate(const WeightedSamples& s);

/// (1/h) * sum_i w_i * K((x - x_i)/h) with the standard Gaussian kernel.
double density_at(const WeightedSamples& s, double x);

struct PeakSample {
  double value = 0.0;
  std::size_t index = 0;
};

/// Density evaluated at every sample location; returns the sample with the
/// maximum density. Ties break by larger weight, then by lower index.
PeakSample peak_sample(const WeightedSamples& s);

/// Value of peak_sample.
double weighted_peak_stat(const WeightedSamples& s);

}  // namespace pseudofuse

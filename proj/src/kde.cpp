#include "pseudofuse/kde.hpp"

#include <cmath>
#include <stdexcept>

namespace pseudofuse {

namespace {

inline double gaussian_kernel(double u) {
  return std::exp(-0.5 * u * u) / std::sqrt(2.0 * 3.14159265358979323846);
}

}  // namespace

void validate(const WeightedSamples& s) {
  if (s.values.empty()) throw std::invalid_argument("WeightedSamples: no samples");
  if (s.values.size() != s.weights.size())
    throw std::invalid_argument("WeightedSamples: values/weights length mismatch");
  if (!(s.bandwidth > 0.0)) throw std::invalid_argument("WeightedSamples: bandwidth must be > 0");
  bool any_positive = false;
  for (double w : s.weights) {
    if (w < 0.0) throw std::invalid_argument("WeightedSamples: negative weight");
    if (w > 0.0) any_positive = true;
  }
  if (!any_positive) throw std::invalid_argument("WeightedSamples: all weights are zero");
}

double density_at(const WeightedSamples& s, double x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double u = (x - s.values[i]) / s.bandwidth;
    acc += s.weights[i] * gaussian_kernel(u);
  }
  return acc / s.bandwidth;
}

PeakSample peak_sample(const WeightedSamples& s) {
  validate(s);
  std::size_t best = 0;
  double best_density = density_at(s, s.values[0]);
  for (std::size_t i = 1; i < s.values.size(); ++i) {
    const double d = density_at(s, s.values[i]);
    if (d > best_density || (d == best_density && s.weights[i] > s.weights[best])) {
      best = i;
      best_density = d;
    }
  }
  return {s.values[best], best};
}

double weighted_peak_stat(const WeightedSamples& s) { return peak_sample(s).value; }

}  // namespace pseudofuse

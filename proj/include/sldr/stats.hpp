#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "sldr/errors.hpp"

namespace sldr {

// Linear-interpolation quantile (the "type 7" rule) of an unsorted sample.
inline double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw ArgumentError("quantile: empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

inline double median(std::span<const double> values) {
  return quantile(values, 0.5);
}

struct Spread {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;

  double iqr() const { return q75 - q25; }
};

inline Spread spread(std::span<const double> values) {
  return {quantile(values, 0.5), quantile(values, 0.25), quantile(values, 0.75)};
}

// Trapezoidal area under a curve sampled at unit spacing.
inline double area_under_curve(std::span<const double> ys) {
  double a = 0.0;
  for (std::size_t i = 1; i < ys.size(); ++i) a += 0.5 * (ys[i - 1] + ys[i]);
  return a;
}

}  // namespace sldr

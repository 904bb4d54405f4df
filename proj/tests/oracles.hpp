#pragma once

// Independent reference computations shared by the test suites.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sldr/numerics.hpp"

namespace sldr::testing {

// Plain nested-loop evaluation of a dense network, no Eigen products.
inline std::vector<double> scalar_forward(const MlpParams& p, const std::vector<double>& x) {
  std::vector<double> a = x;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const DenseLayer& L = p.layers[l];
    std::vector<double> z(static_cast<std::size_t>(L.weight.rows()));
    for (Eigen::Index r = 0; r < L.weight.rows(); ++r) {
      double acc = L.bias(r);
      for (Eigen::Index c = 0; c < L.weight.cols(); ++c)
        acc += L.weight(r, c) * a[static_cast<std::size_t>(c)];
      const Activation act =
          l + 1 == p.layers.size() ? p.output_activation : p.hidden_activation;
      if (act == Activation::kRelu) acc = std::max(acc, 0.0);
      if (act == Activation::kTanh) acc = std::tanh(acc);
      z[static_cast<std::size_t>(r)] = acc;
    }
    a = std::move(z);
  }
  return a;
}

inline std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// Visits every scalar parameter of a network by reference.
inline void for_each_parameter(MlpParams& p, const std::function<void(double&)>& f) {
  for (DenseLayer& l : p.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) f(l.weight.data()[i]);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) f(l.bias.data()[i]);
  }
}

inline std::vector<double> flatten(const GradientBundle& g) {
  std::vector<double> out;
  for (const DenseLayer& l : g.layers) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

// Central differences of `objective` with respect to every parameter of `p`.
inline std::vector<double> finite_difference(MlpParams p,
                                             const std::function<double(const MlpParams&)>& objective,
                                             double h = 1e-6) {
  std::vector<double> out;
  MlpParams* self = &p;
  for_each_parameter(p, [&](double& w) {
    const double keep = w;
    w = keep + h;
    const double up = objective(*self);
    w = keep - h;
    const double down = objective(*self);
    w = keep;
    out.push_back((up - down) / (2.0 * h));
  });
  return out;
}

// Entry-wise relative error. The scale is floored so entries whose true value
// is near zero are judged against the difference quotient's rounding noise.
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b,
                                 double floor = 1e-3) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

// Kolmogorov-Smirnov statistic of a sample against Uniform(lo, hi).
inline double ks_uniform(std::vector<double> xs, double lo, double hi) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = (xs[i] - lo) / (hi - lo);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace sldr::testing

#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "sldr/errors.hpp"
#include "sldr/numerics.hpp"

namespace sldr {

// Running mean / standard deviation over every vector seen so far.
// normalize() returns clip((x - mean) / max(std, eps), +-clip_range).
struct RunningNormalizer {
  double count = 0.0;
  Vector sum;
  Vector sum_sq;
  double clip_range = 5.0;
  double eps = 1e-2;

  RunningNormalizer() = default;
  explicit RunningNormalizer(int dim, double clip = 5.0, double epsilon = 1e-2)
      : sum(Vector::Zero(dim)), sum_sq(Vector::Zero(dim)),
        clip_range(clip), eps(epsilon) {}

  int dim() const { return static_cast<int>(sum.size()); }

  Vector mean() const {
    if (count <= 0.0) return Vector::Zero(dim());
    return sum / count;
  }

  Vector stddev() const {
    Vector out(dim());
    if (count <= 0.0) {
      out.setConstant(1.0);
      return out;
    }
    for (int i = 0; i < dim(); ++i) {
      const double m = sum(i) / count;
      const double var = std::max(sum_sq(i) / count - m * m, 0.0);
      out(i) = std::max(std::sqrt(var), eps);
    }
    return out;
  }

  friend bool operator==(const RunningNormalizer& a,
                         const RunningNormalizer& b) {
    return a.count == b.count && a.sum == b.sum && a.sum_sq == b.sum_sq &&
           a.clip_range == b.clip_range && a.eps == b.eps;
  }
};

inline void normalizer_update_inplace(RunningNormalizer& n,
                                      std::span<const Vector> batch) {
  for (const Vector& x : batch) {
    if (x.size() != n.dim())
      throw ShapeError("normalizer_update: vector of length " +
                       std::to_string(x.size()) + ", expected " +
                       std::to_string(n.dim()));
  }
  for (const Vector& x : batch) {
    n.sum += x;
    n.sum_sq += x.cwiseProduct(x);
    n.count += 1.0;
  }
}

inline RunningNormalizer normalizer_update(const RunningNormalizer& n,
                                           std::span<const Vector> batch) {
  RunningNormalizer out = n;
  normalizer_update_inplace(out, batch);
  return out;
}

// Normalizes each column of `x`.
inline Matrix normalize_batch(const RunningNormalizer& n, const Matrix& x) {
  if (x.rows() != n.dim())
    throw ShapeError("normalize: input has " + std::to_string(x.rows()) +
                     " rows, normalizer expects " + std::to_string(n.dim()));
  const Vector mean = n.mean();
  const Vector std = n.stddev();
  Matrix out = (x.colwise() - mean).array().colwise() / std.array();
  return out.cwiseMax(-n.clip_range).cwiseMin(n.clip_range);
}

inline Vector normalize(const RunningNormalizer& n, const Vector& x) {
  return normalize_batch(n, Matrix(x)).col(0);
}

}  // namespace sldr

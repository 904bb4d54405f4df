#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sldr/normalizer.hpp"
#include "sldr/rng.hpp"

using namespace sldr;

namespace {

std::vector<Vector> scalars(std::initializer_list<double> xs) {
  std::vector<Vector> out;
  for (double x : xs) out.push_back(Vector::Constant(1, x));
  return out;
}

RunningNormalizer with_stats(double mean, double std, double clip = 5.0) {
  // Two samples mean +- std reproduce the requested moments exactly.
  RunningNormalizer n(1, clip, 1e-2);
  const auto b = scalars({mean - std, mean + std});
  normalizer_update_inplace(n, b);
  return n;
}

}  // namespace

TEST(Normalizer, BatchStatisticsMatchDirectComputation) {
  const RunningNormalizer n = normalizer_update(RunningNormalizer(1), scalars({1, 2, 3}));
  EXPECT_DOUBLE_EQ(n.mean()(0), 2.0);
  EXPECT_NEAR(n.stddev()(0), std::sqrt(2.0 / 3.0), 1e-15);
}

TEST(Normalizer, SequentialUpdatesEqualOneUpdate) {
  const RunningNormalizer a =
      normalizer_update(normalizer_update(RunningNormalizer(1), scalars({1, 2})), scalars({3}));
  const RunningNormalizer b = normalizer_update(RunningNormalizer(1), scalars({1, 2, 3}));
  EXPECT_EQ(a, b);
}

TEST(Normalizer, EmptyBatchIsNoOp) {
  const RunningNormalizer n = normalizer_update(RunningNormalizer(1), scalars({4, 5}));
  EXPECT_EQ(normalizer_update(n, {}), n);
}

TEST(Normalizer, AnyPartitionGivesSameStatistics) {
  Rng rng(3);
  std::vector<Vector> data;
  for (int i = 0; i < 64; ++i) {
    Vector v(3);
    for (int j = 0; j < 3; ++j) v(j) = rng.normal(1.0, 2.0);
    data.push_back(v);
  }
  const RunningNormalizer whole = normalizer_update(RunningNormalizer(3), data);
  RunningNormalizer parts(3);
  for (std::size_t i = 0; i < data.size(); i += 16)
    normalizer_update_inplace(parts, std::span<const Vector>(data).subspan(i, 16));
  EXPECT_LT((whole.mean() - parts.mean()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((whole.stddev() - parts.stddev()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Normalizer, StdIsFlooredByEps) {
  const RunningNormalizer n = normalizer_update(RunningNormalizer(1), scalars({7, 7, 7}));
  EXPECT_EQ(n.stddev()(0), 1e-2);
}

TEST(Normalize, IdentityStatistics) {
  const RunningNormalizer n = with_stats(0.0, 1.0);
  EXPECT_DOUBLE_EQ(normalize(n, Vector::Constant(1, 0.3))(0), 0.3);
  EXPECT_DOUBLE_EQ(normalize(n, Vector::Constant(1, -4.0))(0), -4.0);
}

TEST(Normalize, Centering) {
  EXPECT_DOUBLE_EQ(normalize(with_stats(2.0, 1.0), Vector::Constant(1, 2.0))(0), 0.0);
}

TEST(Normalize, ClipsToRange) {
  EXPECT_DOUBLE_EQ(normalize(with_stats(0.0, 0.1), Vector::Constant(1, 10.0))(0), 5.0);
  EXPECT_DOUBLE_EQ(normalize(with_stats(0.0, 0.1), Vector::Constant(1, -10.0))(0), -5.0);
}

TEST(Normalize, MatchesScalarFormulaAndStaysBounded) {
  Rng rng(4);
  RunningNormalizer n(4, 5.0, 1e-2);
  std::vector<Vector> data;
  for (int i = 0; i < 50; ++i) {
    Vector v(4);
    v << rng.normal(0, 1), rng.normal(3, 0.001), rng.uniform(-1, 1), rng.normal(-2, 5);
    data.push_back(v);
  }
  normalizer_update_inplace(n, data);
  for (int k = 0; k < 200; ++k) {
    Vector x(4);
    for (int j = 0; j < 4; ++j) x(j) = rng.uniform(-30, 30);
    const Vector y = normalize(n, x);
    for (int j = 0; j < 4; ++j) {
      double s = 0, s2 = 0;
      for (const Vector& d : data) {
        s += d(j);
        s2 += d(j) * d(j);
      }
      const double m = s / 50.0;
      const double sd = std::max(std::sqrt(std::max(s2 / 50.0 - m * m, 0.0)), 1e-2);
      const double ref = std::clamp((x(j) - m) / sd, -5.0, 5.0);
      EXPECT_NEAR(y(j), ref, 1e-12);
      EXPECT_LE(std::abs(y(j)), 5.0);
    }
  }
}

TEST(Normalize, DimensionMismatchIsShapeError) {
  const RunningNormalizer n(3);
  EXPECT_THROW(normalize(n, Vector::Zero(2)), ShapeError);
  std::vector<Vector> bad{Vector::Zero(2)};
  EXPECT_THROW(normalizer_update(n, bad), ShapeError);
}

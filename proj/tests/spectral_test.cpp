#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "phi42/besov.hpp"
#include "phi42/field_io.hpp"
#include "phi42/spectral.hpp"
#include "phi42/stats.hpp"
#include "test_support.hpp"

namespace phi42 {
namespace {

using testing::max_abs_diff;
using testing::random_field;

constexpr double kPi = std::numbers::pi;

TEST(TorusGrid, RejectsInvalidGeometry) {
  EXPECT_THROW(TorusGrid(2.0 * kPi, 4), ValidationError);
  EXPECT_THROW(TorusGrid(0.0, 4), ValidationError);
  EXPECT_THROW(TorusGrid(2.0, -1), ValidationError);
  EXPECT_THROW(TorusGrid(2.0, 4, 17), ValidationError);
  EXPECT_THROW(TorusGrid(2.0, 4, 16), ValidationError);
  EXPECT_NO_THROW(TorusGrid(2.0, 4, 18));
  EXPECT_GE(TorusGrid::default_resolution(16), 66);
  EXPECT_EQ(TorusGrid::default_resolution(4), 18);
}

TEST(Eigenvalues, MatchClosedForms) {
  const TorusGrid any(1.3, 2);
  EXPECT_DOUBLE_EQ(eigenvalue_lambda(any, {0, 0}), -1.0);
  EXPECT_DOUBLE_EQ(eigenvalue_nu(any, {0, 0}), 2.0);
  const TorusGrid grid(kPi, 2);
  EXPECT_NEAR(eigenvalue_lambda(grid, {1, 0}), 3.0, 1e-14);
  EXPECT_NEAR(eigenvalue_lambda(grid, {1, 1}), 7.0, 1e-14);
  EXPECT_NEAR(eigenvalue_nu(grid, {1, 0}), 6.0, 1e-14);
  for (std::size_t i = 0; i < grid.mode_count(); ++i) {
    const Mode k = grid.mode(i);
    EXPECT_DOUBLE_EQ(eigenvalue_nu(grid, k) - eigenvalue_lambda(grid, k), 3.0);
  }
  EXPECT_THROW(eigenvalue_lambda(grid, {3, 0}), std::out_of_range);
  EXPECT_THROW(eigenvalue_nu(grid, {0, -3}), std::out_of_range);
}

TEST(Eigenvalues, SupNormVariant) {
  const TorusGrid grid(kPi, 2, 0, EigenNorm::sup);
  EXPECT_NEAR(eigenvalue_lambda(grid, {1, 1}), 3.0, 1e-14);
  EXPECT_NEAR(eigenvalue_lambda(grid, {2, 1}), 15.0, 1e-14);
}

TEST(Eigenvalues, LambdaZeroIsTheOnlyNegativeOneAndOrderIsMonotone) {
  for (double length : {0.5, 1.0, 2.0, 3.0, 5.0, 6.2}) {
    const TorusGrid grid(length, 5);
    int negative = 0;
    for (std::size_t i = 0; i < grid.mode_count(); ++i) {
      const Mode a = grid.mode(i);
      if (eigenvalue_lambda(grid, a) < 0.0) ++negative;
      for (std::size_t j = 0; j < grid.mode_count(); ++j) {
        const Mode b = grid.mode(j);
        if (euclidean_norm_sq(a) < euclidean_norm_sq(b)) {
          EXPECT_LT(eigenvalue_lambda(grid, a), eigenvalue_lambda(grid, b));
        }
      }
    }
    EXPECT_EQ(negative, 1) << "L=" << length;
  }
}

TEST(Transforms, ConstantHasOnlyZeroMode) {
  const TorusGrid grid(2.0, 4);
  std::vector<double> values(grid.point_count(), 0.75);
  const SpectralField f = to_spectral(grid, values);
  EXPECT_NEAR(f.at({0, 0}).real(), 0.75, 1e-15);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (grid.mode(i) == Mode{0, 0}) continue;
    EXPECT_LT(std::abs(f[i]), 1e-15);
  }
  EXPECT_NEAR(field_mean(f), 0.75, 1e-15);
}

TEST(Transforms, CosineRoundTripIsExact) {
  const TorusGrid grid(2.0, 6);
  const SpectralField f = SpectralField::cosine(grid, {2, -3}, 1.7, 0.3);
  const CollocationField u = to_physical(f);
  const int m = grid.resolution();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double phase = 2.0 * kPi * (2.0 * i - 3.0 * j) / m + 0.3;
      ASSERT_NEAR(u(i, j), 1.7 * std::cos(phase), 1e-12);
    }
  }
  EXPECT_LT(max_abs_diff(to_spectral(grid, u), f), 1e-12);
}

TEST(Transforms, RandomFieldsRoundTripAndSatisfyParseval) {
  const TorusGrid grid(1.7, 8);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SpectralField f = random_field(grid, seed, 1.0);
    const CollocationField u = to_physical(f);
    const SpectralField back = to_spectral(grid, u);
    EXPECT_LT(max_abs_diff(back, f), 1e-12 * f.max_abs_coeff());
    // Quadrature oracle: trapezoidal mean of u^2 over the periodic grid.
    double mean_square = 0.0;
    for (double x : u.values) mean_square += x * x;
    mean_square /= static_cast<double>(u.values.size());
    const double coeff_sum = f.l2_norm_sq() / (grid.length() * grid.length());
    EXPECT_NEAR(mean_square, coeff_sum, 1e-12 * coeff_sum);
  }
}

TEST(Transforms, MismatchedSizesAreRejected) {
  const TorusGrid grid(2.0, 3);
  std::vector<double> values(grid.point_count() + 1, 0.0);
  EXPECT_THROW(to_spectral(grid, values), std::invalid_argument);
}

TEST(Transforms, HermitianFieldsStayReal) {
  const TorusGrid grid(2.5, 6);
  SpectralField f = random_field(grid, 11, 0.5);
  ASSERT_TRUE(f.is_hermitian());
  // A Hermitian-preserving sequence: projection, scaling, sums, pointwise cube.
  f = project(f, 4) * 1.3 + random_field(grid, 12, 2.0);
  f = map_pointwise(f, [](double x) { return x * x * x - x; });
  EXPECT_TRUE(f.is_hermitian(1e-12));
  double max_imag = 0.0;
  for (const Complex& z : to_physical_complex(f)) max_imag = std::max(max_imag, std::abs(z.imag()));
  EXPECT_LT(max_imag, 1e-10);

  SpectralField broken = f;
  broken.at({1, 2}) += Complex{0.0, 0.5};
  EXPECT_FALSE(broken.is_hermitian());
}

TEST(FieldMean, ConstantsModesAndSums) {
  const TorusGrid grid(2.0, 3);
  EXPECT_DOUBLE_EQ(field_mean(SpectralField::constant(grid, -0.4)), -0.4);
  EXPECT_DOUBLE_EQ(field_mean(SpectralField::cosine(grid, {1, 2}, 3.0)), 0.0);
  EXPECT_DOUBLE_EQ(field_mean(SpectralField::constant(grid, 2.5) + SpectralField::cosine(grid, {0, 1}, 1.0)), 2.5);
}

TEST(Projection, CutoffIdempotenceAndSelfAdjointness) {
  const TorusGrid grid(2.0, 6);
  EXPECT_EQ(project(SpectralField::cosine(grid, {3, 0}, 1.0), 2).max_abs_coeff(), 0.0);
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const SpectralField f = random_field(grid, seed, 0.0);
    const SpectralField g = random_field(grid, seed + 100, 0.0);
    for (int n : {0, 2, 5, 6}) {
      const SpectralField p = project(f, n);
      EXPECT_EQ(max_abs_diff(project(p, n), p), 0.0);
      const Complex lhs = inner_product(project(f, n), g);
      const Complex rhs = inner_product(f, project(g, n));
      EXPECT_NEAR(std::abs(lhs - rhs), 0.0, 1e-12 * std::abs(lhs) + 1e-14);
    }
  }
  EXPECT_THROW(project(random_field(grid, 1, 0.0), 7), ValidationError);
}

TEST(Projection, ErrorDecaysWithTheSmoothnessGap) {
  // f has |c_k| ~ |k|^{-3}; in B^{-1/2}_{2,2} the truncation tail scales like
  // N^{1 - 3 - 1/2} = N^{-2.5}, so the fitted exponent must be about -2.5 and
  // in particular below -lambda for lambda = 2.
  const TorusGrid grid(2.0, 64);
  const DyadicPartition partition(grid);
  const SpectralField f = random_field(grid, 3, 3.0);
  std::vector<double> log_n, log_err;
  for (int n : {4, 8, 16, 32}) {
    const double err = besov_norm(project(f, n) - f, partition, -0.5, 2.0, 2.0);
    log_n.push_back(std::log(n));
    log_err.push_back(std::log(err));
  }
  const LinearFit fit = fit_line(log_n, log_err);
  EXPECT_NEAR(fit.slope, -2.5, 0.35);
  EXPECT_LT(fit.slope, -2.0);
}

TEST(FieldIo, CsvAndBinarySnapshotsRoundTrip) {
  const TorusGrid grid(1.9, 5);
  const SpectralField f = random_field(grid, 21, 1.0);
  std::stringstream csv;
  write_field_csv(csv, f);
  const SpectralField from_csv = read_field_csv(csv);
  EXPECT_EQ(from_csv.grid(), grid);
  EXPECT_EQ(max_abs_diff(from_csv, f), 0.0);

  std::stringstream bin;
  write_field_binary(bin, f);
  EXPECT_EQ(bin.str().size(), 16u + 8u + 16u * grid.mode_count());
  const SpectralField from_bin = read_field_binary(bin);
  EXPECT_EQ(max_abs_diff(from_bin, f), 0.0);

  std::stringstream bad("k1,k2,re,im\n0,0,oops\n");
  EXPECT_THROW(read_field_csv(bad, 2.0), ValidationError);
}

}  // namespace
}  // namespace phi42

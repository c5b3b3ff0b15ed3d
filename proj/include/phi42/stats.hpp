#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "phi42/error.hpp"

namespace phi42 {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

inline Estimate mean_estimate(std::span<const double> xs) {
  Estimate e;
  e.count = xs.size();
  if (xs.empty()) return e;
  CompensatedSum s;
  for (double x : xs) s.add(x);
  e.mean = s.value() / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    CompensatedSum v;
    for (double x : xs) v.add((x - e.mean) * (x - e.mean));
    e.std_error = std::sqrt(v.value() / static_cast<double>(xs.size() - 1) /
                          static_cast<double>(xs.size()));
  }
  return e;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
  double r_squared = 0.0;
};

/// Weighted least squares y ~ a + b x; empty weights means unit weights.
/// Standard errors follow from the weights when they are inverse variances,
/// and from the residual scatter otherwise.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y,
                          std::span<const double> weights = {}, bool inverse_variance = false) {
  require(x.size() == y.size() && x.size() >= 2, "line fit needs >= 2 matching points");
  require(weights.empty() || weights.size() == x.size(), "weight count mismatch");
  const std::size_t n = x.size();
  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w(i);
    sx += w(i) * x[i];
    sy += w(i) * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w(i) * (x[i] - mx) * (x[i] - mx);
    sxy += w(i) * (x[i] - mx) * (y[i] - my);
    syy += w(i) * (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, "line fit abscissae are degenerate");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    rss += w(i) * r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - rss / syy : 1.0;
  double sigma2 = 1.0;
  if (!inverse_variance) sigma2 = n > 2 ? rss / static_cast<double>(n - 2) : 0.0;
  fit.slope_stderr = std::sqrt(sigma2 / sxx);
  fit.intercept_stderr = std::sqrt(sigma2 * (1.0 / sw + mx * mx / sxx));
  return fit;
}

inline double median(std::vector<double> xs) {
  require(!xs.empty(), "median of an empty sample");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace phi42

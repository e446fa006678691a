#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <gsl/gsl_cdf.h>

namespace spwarp::stats {

inline double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double sd(std::span<const double> v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct Moments {
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

/// Moment-ratio skewness and excess kurtosis (population central moments).
inline Moments moments(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double m = mean(v);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = x - m;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  return {m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

/// Linear-interpolation quantile (R type 7) of an already sorted sample.
inline double sorted_quantile(std::span<const double> sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  return sorted_quantile(v, p);
}

/// min / 1st quartile / median / mean / 3rd quartile / max, as R's summary().
struct Summary {
  double min = 0, q1 = 0, median = 0, mean = 0, q3 = 0, max = 0;
};

inline Summary summarize(std::vector<double> v) {
  Summary s;
  if (v.empty()) return s;
  s.mean = stats::mean(v);
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.q1 = sorted_quantile(v, 0.25);
  s.median = sorted_quantile(v, 0.5);
  s.q3 = sorted_quantile(v, 0.75);
  return s;
}

inline double normal_quantile(double p) { return gsl_cdf_ugaussian_Pinv(p); }
inline double normal_cdf(double z) { return gsl_cdf_ugaussian_P(z); }
inline double normal_pdf(double z) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

/// Two-sided p-value of a z statistic.
inline double two_sided_p(double z) { return 2.0 * gsl_cdf_ugaussian_Q(std::abs(z)); }

}  // namespace spwarp::stats

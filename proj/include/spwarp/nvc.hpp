#pragma once

// Natural cubic spline basis for non-spatially varying coefficients.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spwarp/error.hpp"
#include "spwarp/stats.hpp"

namespace spwarp {

/// Truncated-power natural cubic spline (linear beyond the boundary knots).
/// The constant is dropped; every column is standardized on the training values.
class NaturalSplineBasis {
 public:
  NaturalSplineBasis() = default;

  static NaturalSplineBasis fit(std::span<const double> x, int n_knots = 5) {
    if (x.size() < 3) throw data_error("spline basis needs at least 3 values");
    NaturalSplineBasis b;
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    b.lo_ = sorted.front();
    b.hi_ = sorted.back();
    for (int k = 0; k < n_knots; ++k) {
      // knots placed at 0.05 ... 0.95 quantiles
      const double p = 0.05 + 0.9 * k / std::max(1, n_knots - 1);
      b.knots_.push_back(stats::sorted_quantile(sorted, p));
    }
    b.knots_.erase(std::unique(b.knots_.begin(), b.knots_.end()), b.knots_.end());
    if (b.knots_.size() < 3) b.knots_.clear();  // too few distinct values: linear only

    const auto raw_cols = b.raw_size();
    Eigen::MatrixXd raw(static_cast<Eigen::Index>(x.size()), raw_cols);
    for (std::size_t i = 0; i < x.size(); ++i) raw.row(static_cast<Eigen::Index>(i)) = b.raw(x[i]);
    b.mean_ = raw.colwise().mean();
    b.sd_.resize(raw_cols);
    for (Eigen::Index j = 0; j < raw_cols; ++j) {
      const double s = std::sqrt((raw.col(j).array() - b.mean_(j)).square().sum() /
                                 static_cast<double>(raw.rows() - 1));
      b.sd_(j) = s;
      if (s > 1e-12 * std::max(1.0, std::abs(b.mean_(j)))) b.keep_.push_back(j);
    }
    if (b.keep_.empty()) throw data_error("covariate is constant; no varying coefficient possible");
    return b;
  }

  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(keep_.size()); }
  const std::vector<double>& knots() const noexcept { return knots_; }
  double lower() const noexcept { return lo_; }
  double upper() const noexcept { return hi_; }
  bool outside(double x) const noexcept { return x < lo_ || x > hi_; }

  Eigen::RowVectorXd evaluate(double x) const {
    const Eigen::RowVectorXd r = raw(x);
    Eigen::RowVectorXd out(size());
    for (Eigen::Index c = 0; c < size(); ++c) {
      const auto j = keep_[static_cast<std::size_t>(c)];
      out(c) = (r(j) - mean_(j)) / sd_(j);
    }
    return out;
  }

  Eigen::RowVectorXd derivative(double x) const {
    const Eigen::RowVectorXd r = raw_derivative(x);
    Eigen::RowVectorXd out(size());
    for (Eigen::Index c = 0; c < size(); ++c) {
      const auto j = keep_[static_cast<std::size_t>(c)];
      out(c) = r(j) / sd_(j);
    }
    return out;
  }

  // serialization access
  struct State {
    std::vector<double> knots;
    double lo = 0, hi = 0;
    std::vector<double> mean, sd;
    std::vector<Eigen::Index> keep;
  };
  State state() const {
    return {knots_, lo_, hi_, std::vector<double>(mean_.data(), mean_.data() + mean_.size()),
            std::vector<double>(sd_.data(), sd_.data() + sd_.size()), keep_};
  }
  static NaturalSplineBasis from_state(const State& s) {
    NaturalSplineBasis b;
    b.knots_ = s.knots;
    b.lo_ = s.lo;
    b.hi_ = s.hi;
    b.mean_ = Eigen::Map<const Eigen::RowVectorXd>(s.mean.data(), static_cast<Eigen::Index>(s.mean.size()));
    b.sd_ = Eigen::Map<const Eigen::RowVectorXd>(s.sd.data(), static_cast<Eigen::Index>(s.sd.size()));
    b.keep_ = s.keep;
    return b;
  }

 private:
  Eigen::Index raw_size() const noexcept {
    return knots_.empty() ? 1 : static_cast<Eigen::Index>(knots_.size()) - 1;
  }

  static double cube_plus(double t) { return t > 0.0 ? t * t * t : 0.0; }
  static double square_plus(double t) { return t > 0.0 ? t * t : 0.0; }

  double d_k(double x, std::size_t k) const {
    const double last = knots_.back();
    return (cube_plus(x - knots_[k]) - cube_plus(x - last)) / (last - knots_[k]);
  }
  double d_k_prime(double x, std::size_t k) const {
    const double last = knots_.back();
    return 3.0 * (square_plus(x - knots_[k]) - square_plus(x - last)) / (last - knots_[k]);
  }

  Eigen::RowVectorXd raw(double x) const {
    Eigen::RowVectorXd r(raw_size());
    r(0) = x;
    if (!knots_.empty()) {
      const std::size_t kk = knots_.size();
      const double dlast = d_k(x, kk - 2);
      for (std::size_t k = 0; k + 2 < kk; ++k) r(static_cast<Eigen::Index>(k) + 1) = d_k(x, k) - dlast;
    }
    return r;
  }

  Eigen::RowVectorXd raw_derivative(double x) const {
    Eigen::RowVectorXd r(raw_size());
    r(0) = 1.0;
    if (!knots_.empty()) {
      const std::size_t kk = knots_.size();
      const double dlast = d_k_prime(x, kk - 2);
      for (std::size_t k = 0; k + 2 < kk; ++k)
        r(static_cast<Eigen::Index>(k) + 1) = d_k_prime(x, k) - dlast;
    }
    return r;
  }

  std::vector<double> knots_;
  double lo_ = 0.0, hi_ = 0.0;
  Eigen::RowVectorXd mean_, sd_;
  std::vector<Eigen::Index> keep_;
};

}  // namespace spwarp

#pragma once

// Post-fit analysis: marginal effects, implied response density and moments,
// significance buckets of varying coefficients.

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spwarp/estimator.hpp"
#include "spwarp/quantiles.hpp"
#include "spwarp/stats.hpp"

namespace spwarp {

// ------------------------------------------------------- point predictions

/// Original-scale point prediction from a likelihood-scale value. Count
/// regimes without SAL layers use the lognormal mean; everything else uses
/// the median chain^-1(z).
inline double point_prediction(const FittedModel& m, double z_chain, double log_offset, double noise_var) {
  if (m.spec.transform.regime() == 'd')
    return std::exp(z_chain + log_offset + 0.5 * noise_var) - m.spec.count_delta;
  return m.chain.inverse(z_chain, log_offset);
}

// --------------------------------------------------------- marginal effects

struct MarginalEffects {
  std::vector<std::string> names;   // every fixed column; the intercept is NaN
  Eigen::MatrixXd effects;          // rows x names
  std::vector<stats::Summary> summary;
  std::string recommended = "median";
};

/// dz_i / dx_{i,k} for every fixed column (NaN for the intercept).
inline Eigen::MatrixXd linear_slopes(const FittedModel& m) {
  const auto& lay = m.layout;
  const Eigen::Index n = m.data.rows(), p = lay.X.cols();
  Eigen::MatrixXd d(n, p);
  d.col(0).setConstant(kNaN);
  for (Eigen::Index j = 1; j < p; ++j) {
    const bool is_x = j <= lay.n_x;
    for (Eigen::Index i = 0; i < n; ++i) {
      double slope = (m.spec.varying && is_x) ? m.svc_estimate(i, j) : m.coef(j);
      if (is_x) {
        for (const auto& b : lay.blocks) {
          if (b.kind != BlockKind::nvc || b.covariate != j) continue;
          const double xv = m.data.x(i, j - 1);
          const auto& sp = lay.splines[static_cast<std::size_t>(j - 1)];
          slope += xv * sp.derivative(xv).dot(m.coef.segment(p + b.offset, b.size));
        }
      }
      d(i, j) = slope;
    }
  }
  return d;
}

/// dy_i/dx_ik with the residual of observation i held fixed:
/// slope_ik / chain'(y_i).
inline MarginalEffects marginal_effects(const FittedModel& m) {
  MarginalEffects me;
  me.names = m.layout.fixed_names;
  me.effects = linear_slopes(m);
  const Eigen::Index n = m.data.rows();
  const bool count = m.spec.transform.is_count();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lo = count ? m.log_offset(i) : 0.0;
    const auto fv = m.chain.forward_one(m.data.y[static_cast<std::size_t>(i)], lo);
    me.effects.row(i) *= std::exp(-fv.log_deriv);
  }
  for (Eigen::Index j = 0; j < me.effects.cols(); ++j) {
    if (j == 0) {
      me.summary.emplace_back(stats::Summary{kNaN, kNaN, kNaN, kNaN, kNaN, kNaN});
      continue;
    }
    std::vector<double> col(me.effects.col(j).data(), me.effects.col(j).data() + n);
    me.summary.push_back(stats::summarize(std::move(col)));
  }
  return me;
}

// ------------------------------------------------ implied distribution of y

/// Reference distribution z ~ N(mean, sd^2) on the chain's output scale.
struct ReferenceDistribution {
  double mean = 0.0;
  double sd = 1.0;
  double log_offset = 0.0;
};

/// mean = average fitted linear predictor; variance = residual variance plus
/// the across-site variance of the predicted random part Z * gamma.
inline ReferenceDistribution reference_distribution(const FittedModel& m) {
  const Eigen::Index n = m.data.rows();
  ReferenceDistribution r;
  double lin = 0.0, lo = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double off = m.log_offset(i);
    (m.spec.transform.is_count() ? lo : lin) += off;
  }
  r.mean = m.fitted_z.mean() + lin / static_cast<double>(n);
  r.log_offset = lo / static_cast<double>(n);
  const double noise = m.sigma2 * m.weights.cwiseInverse().mean();
  double random = 0.0;
  if (m.layout.Z.cols() > 0) {
    const Eigen::VectorXd u = m.layout.Z * m.gamma();
    random = (u.array() - u.mean()).square().mean();
  }
  r.sd = std::sqrt(noise + random);
  return r;
}

struct DensityCurve {
  std::vector<double> y;
  std::vector<double> density;

  double trapezoid() const {
    double s = 0.0;
    for (std::size_t k = 1; k < y.size(); ++k) s += 0.5 * (density[k] + density[k - 1]) * (y[k] - y[k - 1]);
    return s;
  }
};

/// f(y) = phi((chain(y) - mean) / sd) / sd * dchain/dy on a grid covering
/// [y_lo, y_hi] and mean +- 3.5 sd.
inline DensityCurve density_curve(const TransformChain& chain, const ReferenceDistribution& ref,
                                  double y_lo, double y_hi, int grid_size = 512) {
  if (grid_size < 2) throw config_error("density grid needs at least 2 points");
  double z_lo = ref.mean - 3.5 * ref.sd, z_hi = ref.mean + 3.5 * ref.sd;
  try {
    z_lo = std::min(z_lo, chain.forward(y_lo, ref.log_offset));
    z_hi = std::max(z_hi, chain.forward(y_hi, ref.log_offset));
  } catch (const Error&) {
    // observed bounds outside the chain's domain: keep the reference span
  }
  DensityCurve c;
  for (int k = 0; k < grid_size; ++k) {
    const double z = z_lo + (z_hi - z_lo) * k / (grid_size - 1);
    bool clamped = false;
    const double y = chain.inverse(z, ref.log_offset, &clamped);
    if (clamped || !std::isfinite(y) || (!c.y.empty() && y <= c.y.back())) continue;
    const double dydz = chain.inverse_deriv(z, ref.log_offset);
    const double u = (z - ref.mean) / ref.sd;
    c.y.push_back(y);
    c.density.push_back(stats::normal_pdf(u) / ref.sd / dydz);
  }
  return c;
}

inline DensityCurve estimated_density(const FittedModel& m, int grid_size = 512) {
  const auto [lo, hi] = std::minmax_element(m.data.y.begin(), m.data.y.end());
  return density_curve(m.chain, reference_distribution(m), *lo, *hi, grid_size);
}

inline constexpr int kMomentDraws = 1'000'000;

/// Skewness / excess kurtosis of chain^-1(z), z ~ N(mean, sd^2), by stratified
/// Monte Carlo: z_i = mean + sd * Phi^-1((i + u_i) / N).
inline stats::Moments implied_moments(const TransformChain& chain, const ReferenceDistribution& ref,
                                      std::uint64_t seed, int draws = kMomentDraws) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> y(static_cast<std::size_t>(draws));
  for (int i = 0; i < draws; ++i) {
    double u = (i + unif(rng)) / draws;
    u = std::clamp(u, 1e-300, 1.0 - 1e-16);
    y[static_cast<std::size_t>(i)] = chain.inverse(ref.mean + ref.sd * stats::normal_quantile(u), ref.log_offset);
  }
  return stats::moments(y);
}

inline stats::Moments distribution_moments(const FittedModel& m, std::uint64_t seed = 1,
                                           int draws = kMomentDraws) {
  return implied_moments(m.chain, reference_distribution(m), seed, draws);
}

// ------------------------------------------------------------- significance

struct SignificanceCounts {
  std::string name;
  // not significant, 10%, 5%, 1%
  std::array<Eigen::Index, 4> counts{0, 0, 0, 0};
};

inline std::array<Eigen::Index, 4> significance_buckets(const Eigen::VectorXd& p_values) {
  std::array<Eigen::Index, 4> c{0, 0, 0, 0};
  for (Eigen::Index i = 0; i < p_values.size(); ++i) {
    const double p = p_values(i);
    if (p < 0.01) ++c[3];
    else if (p < 0.05) ++c[2];
    else if (p < 0.10) ++c[1];
    else ++c[0];
  }
  return c;
}

inline std::vector<SignificanceCounts> significance_summary(const FittedModel& m) {
  std::vector<SignificanceCounts> out;
  for (Eigen::Index c = 0; c < m.svc_p.cols(); ++c)
    out.push_back({m.varying_names[static_cast<std::size_t>(c)], significance_buckets(m.svc_p.col(c))});
  return out;
}

}  // namespace spwarp

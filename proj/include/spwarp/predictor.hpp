#pragma once

// Out-of-sample prediction at new sites.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spwarp/estimator.hpp"
#include "spwarp/inference.hpp"
#include "spwarp/proximity_basis.hpp"
#include "spwarp/quantiles.hpp"

namespace spwarp {

/// Covariates of the prediction sites, columns ordered as in the model.
struct PredictionInput {
  Eigen::MatrixXd x;
  Eigen::MatrixXd xconst;
  std::vector<std::string> group;  // optional level per row
  std::vector<double> offset;      // optional
  std::vector<double> weights;     // optional count precision weights (default exp(z) * offset)
};

struct PredictOptions {
  bool compute_quantile = true;
  bool include_noise = true;  // add residual variance to pred_transG_se
};

struct PredictionResult {
  Eigen::VectorXd pred, pred_transG, pred_transG_se, xb, sf_residual;
  Eigen::MatrixXd quantiles;  // rows x kQuantileProbs
  Eigen::VectorXd len95;
  std::vector<char> clamped;          // inverse hit a domain boundary
  std::vector<char> outside_spline;   // a varying covariate left its training range
  std::vector<std::string> warnings;

  Eigen::Index rows() const noexcept { return pred.size(); }
};

inline PredictionResult predict_oos(const FittedModel& m, const PredictionInput& in,
                                    const Eigen::MatrixXd& basis0, const PredictOptions& opt = {}) {
  const auto& lay = m.layout;
  const Eigen::Index rows = basis0.rows();
  const auto p = static_cast<Eigen::Index>(lay.fixed_names.size());
  const Eigen::Index nxc = static_cast<Eigen::Index>(m.data.xconst_names.size());
  if (in.x.cols() != lay.n_x || in.xconst.cols() != nxc)
    throw data_error("prediction covariates do not match the model");
  if ((lay.n_x && in.x.rows() != rows) || (nxc && in.xconst.rows() != rows))
    throw data_error("prediction covariates and basis have different row counts");
  if (basis0.cols() != m.basis.rank()) throw data_error("extended basis has the wrong number of columns");
  if (!in.offset.empty() && static_cast<Eigen::Index>(in.offset.size()) != rows)
    throw data_error("prediction offset has the wrong length");

  PredictionResult r;
  r.pred.resize(rows);
  r.pred_transG.resize(rows);
  r.pred_transG_se.resize(rows);
  r.xb.resize(rows);
  r.sf_residual.resize(rows);
  r.len95.resize(rows);
  r.quantiles.resize(rows, opt.compute_quantile ? static_cast<Eigen::Index>(kQuantileProbs.size()) : 0);
  r.clamped.assign(static_cast<std::size_t>(rows), 0);
  r.outside_spline.assign(static_cast<std::size_t>(rows), 0);

  const bool count = m.spec.transform.is_count();
  const Eigen::VectorXd b = m.beta();
  const Eigen::VectorXd g = m.gamma();
  bool unknown_group = false;
  for (Eigen::Index i = 0; i < rows; ++i) {
    Eigen::RowVectorXd xf(p);
    xf(0) = 1.0;
    if (lay.n_x) xf.segment(1, lay.n_x) = in.x.row(i);
    if (nxc) xf.tail(nxc) = in.xconst.row(i);
    int group = -1;
    if (!in.group.empty() && !lay.group_levels.empty()) {
      const auto& lvl = in.group[static_cast<std::size_t>(i)];
      const auto it = std::find(lay.group_levels.begin(), lay.group_levels.end(), lvl);
      if (it == lay.group_levels.end()) unknown_group = true;
      else group = static_cast<int>(it - lay.group_levels.begin());
    }
    const Eigen::RowVectorXd xr = lay.n_x ? Eigen::RowVectorXd(in.x.row(i)) : Eigen::RowVectorXd(0);
    for (std::size_t k = 0; k < lay.splines.size(); ++k)
      if (lay.splines[k].outside(xr(static_cast<Eigen::Index>(k)))) r.outside_spline[static_cast<std::size_t>(i)] = 1;
    const Eigen::RowVectorXd zr = lay.random_row(xr, basis0.row(i), group);

    Eigen::RowVectorXd a(p + zr.size());
    a << xf, zr;
    r.xb(i) = xf.dot(b);
    r.sf_residual(i) = zr.dot(g);
    r.pred_transG(i) = r.xb(i) + r.sf_residual(i);

    const double log_off = in.offset.empty() ? 0.0 : std::log(in.offset[static_cast<std::size_t>(i)]);
    const double lo = count ? log_off : 0.0;
    const double z_chain = r.pred_transG(i) + (count ? 0.0 : log_off);
    double w = 1.0;
    if (count)
      w = in.weights.empty() ? std::exp(z_chain + lo) : in.weights[static_cast<std::size_t>(i)];
    const double noise = m.sigma2 / w;
    const double fit_var = std::max(0.0, a.dot(m.cov * a.transpose()));
    r.pred_transG_se(i) = std::sqrt(fit_var + (opt.include_noise ? noise : 0.0));
    r.pred(i) = point_prediction(m, z_chain, lo, noise);

    if (opt.compute_quantile) {
      const auto q = predictive_quantiles(z_chain, r.pred_transG_se(i), m.chain, lo);
      for (std::size_t k = 0; k < q.values.size(); ++k) r.quantiles(i, static_cast<Eigen::Index>(k)) = q.values[k];
      r.clamped[static_cast<std::size_t>(i)] = q.clamped;
      r.len95(i) = r.quantiles(i, 13) - r.quantiles(i, 1);
    } else {
      r.len95(i) = kNaN;
    }
  }
  if (unknown_group) r.warnings.emplace_back("unknown group level in prediction data: group effect set to 0");
  for (char o : r.outside_spline)
    if (o) {
      r.warnings.emplace_back("covariate outside the spline range: linear extrapolation used");
      break;
    }
  return r;
}

inline PredictionResult predict_oos(const FittedModel& m, const PredictionInput& in,
                                    const ExtendedBasis& basis0, const PredictOptions& opt = {}) {
  return predict_oos(m, in, basis0.vectors0, opt);
}

}  // namespace spwarp

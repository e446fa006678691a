#pragma once

// Generalized spatial regression: transformed response, Moran-eigenvector
// spatial processes, spatially / non-spatially varying coefficients, group
// effects and offsets, fitted by restricted likelihood jointly with the chain.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spwarp/error.hpp"
#include "spwarp/gaussianize.hpp"
#include "spwarp/nvc.hpp"
#include "spwarp/optimize.hpp"
#include "spwarp/proximity_basis.hpp"
#include "spwarp/quantiles.hpp"
#include "spwarp/reml.hpp"
#include "spwarp/stats.hpp"
#include "spwarp/transform.hpp"

namespace spwarp {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Observations in model form.
struct Dataset {
  std::vector<double> y;
  Eigen::MatrixXd x;  // varying-coefficient covariates (resf_vc) or plain covariates (resf)
  std::vector<std::string> x_names;
  Eigen::MatrixXd xconst;  // constant-coefficient covariates
  std::vector<std::string> xconst_names;
  std::vector<std::string> group;  // per-row level labels; empty = no group effects
  std::string group_name = "xgroup";
  std::vector<double> offset;        // empty = no offset
  std::vector<Eigen::Index> site;    // row -> basis site; empty = row i is site i
  std::vector<std::string> row_ids;  // optional, echoed in outputs

  Eigen::Index rows() const noexcept { return static_cast<Eigen::Index>(y.size()); }
  Eigen::Index site_of(Eigen::Index i) const {
    return site.empty() ? i : site[static_cast<std::size_t>(i)];
  }

  /// `basis_sites` < 0 skips the join check (empty basis).
  void validate(Eigen::Index basis_sites) const {
    const Eigen::Index n = rows();
    if (n == 0) throw data_error("no data rows");
    if (x.cols() > 0 && x.rows() != n) throw data_error("x has the wrong number of rows");
    if (xconst.cols() > 0 && xconst.rows() != n) throw data_error("xconst has the wrong number of rows");
    if (static_cast<Eigen::Index>(x_names.size()) != x.cols() ||
        static_cast<Eigen::Index>(xconst_names.size()) != xconst.cols())
      throw config_error("covariate names do not match covariate columns");
    for (const auto& a : x_names)
      for (const auto& b : xconst_names)
        if (a == b) throw config_error("column '" + a + "' is both varying and constant");
    if (!group.empty() && static_cast<Eigen::Index>(group.size()) != n)
      throw data_error("group column has the wrong length");
    if (!offset.empty()) {
      if (static_cast<Eigen::Index>(offset.size()) != n) throw data_error("offset has the wrong length");
      for (std::size_t i = 0; i < offset.size(); ++i)
        if (!(offset[i] > 0.0))
          throw data_error("non-positive offset at row " + std::to_string(i + 1));
    }
    if (basis_sites < 0) {
    } else if (!site.empty()) {
      if (static_cast<Eigen::Index>(site.size()) != n) throw data_error("site index has the wrong length");
      for (auto s : site)
        if (s < 0 || s >= basis_sites) throw data_error("site index outside the basis");
    } else if (basis_sites != n) {
      throw data_error("basis has " + std::to_string(basis_sites) + " sites but data has " +
                       std::to_string(n) + " rows");
    }
    for (std::size_t i = 0; i < y.size(); ++i)
      if (!std::isfinite(y[i])) throw data_error("non-finite response at row " + std::to_string(i + 1));
    if (!x.allFinite() || !xconst.allFinite()) throw data_error("non-finite covariate value");
  }
};

struct ModelSpec {
  bool varying = false;  // spatially varying coefficients on x
  bool nvc = false;      // non-spatially varying coefficients on x
  TransformSpec transform;
  double count_delta = kDefaultCountDelta;
  bool select_processes = true;  // BIC-based switching of varying processes
  bool spatial = true;           // false forces every spatial variance to 0
};

struct FitOptions {
  OptimizerOptions optimizer;
  int max_selection_rounds = 4;
  bool strict_convergence = false;
};

/// Fixed and random design of one model.
struct ModelLayout {
  std::vector<std::string> fixed_names;
  Eigen::MatrixXd X;
  Eigen::MatrixXd Z;
  std::vector<RandomBlock> blocks;
  std::vector<NaturalSplineBasis> splines;  // one per x column when nvc is on
  std::vector<std::string> group_levels;
  std::vector<int> group_index;  // per row
  Eigen::Index n_x = 0;          // columns of x

  Eigen::Index random_size() const noexcept {
    Eigen::Index q = 0;
    for (const auto& b : blocks) q += b.size;
    return q;
  }

  /// Varying-coefficient values (1, x_1..x_K) of a row.
  static Eigen::RowVectorXd varying_values(const Eigen::RowVectorXd& x_row) {
    Eigen::RowVectorXd v(x_row.size() + 1);
    v << 1.0, x_row;
    return v;
  }

  /// Random-design row for given covariates, basis row and group index (-1 = unknown).
  Eigen::RowVectorXd random_row(const Eigen::RowVectorXd& x_row, const Eigen::RowVectorXd& e_row,
                                int group) const {
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(random_size());
    const Eigen::RowVectorXd v = varying_values(x_row);
    for (const auto& b : blocks) {
      switch (b.kind) {
        case BlockKind::spatial:
          out.segment(b.offset, b.size) = v(b.covariate) * e_row;
          break;
        case BlockKind::nvc: {
          const double xv = v(b.covariate);
          out.segment(b.offset, b.size) = xv * splines[static_cast<std::size_t>(b.covariate - 1)].evaluate(xv);
          break;
        }
        case BlockKind::group: {
          const int g = static_cast<int>(group_levels.size());
          if (group >= 0 && group < g - 1) out(b.offset + group) = 1.0;
          if (group == g - 1) out.segment(b.offset, b.size).setConstant(-1.0);
          break;
        }
      }
    }
    return out;
  }
};

inline ModelLayout build_layout(const Dataset& d, const EigenBasis& basis, const ModelSpec& spec) {
  ModelLayout lay;
  const Eigen::Index n = d.rows();
  lay.n_x = d.x.cols();
  lay.fixed_names.emplace_back("(Intercept)");
  for (const auto& s : d.x_names) lay.fixed_names.push_back(s);
  for (const auto& s : d.xconst_names) lay.fixed_names.push_back(s);
  lay.X.resize(n, 1 + d.x.cols() + d.xconst.cols());
  lay.X.col(0).setOnes();
  if (d.x.cols()) lay.X.middleCols(1, d.x.cols()) = d.x;
  if (d.xconst.cols()) lay.X.rightCols(d.xconst.cols()) = d.xconst;

  const Eigen::Index L = basis.rank();
  Eigen::Index q = 0;
  auto add = [&](BlockKind k, std::string label, int cov, Eigen::Index size) {
    RandomBlock b;
    b.kind = k;
    b.label = std::move(label);
    b.covariate = cov;
    b.offset = q;
    b.size = size;
    if (k == BlockKind::spatial) b.eigenvalues = basis.values;
    lay.blocks.push_back(std::move(b));
    q += size;
  };
  if (L > 0) {
    add(BlockKind::spatial, "(Intercept)", 0, L);
    if (spec.varying)
      for (Eigen::Index k = 0; k < d.x.cols(); ++k)
        add(BlockKind::spatial, d.x_names[static_cast<std::size_t>(k)], static_cast<int>(k) + 1, L);
  }
  if (spec.nvc) {
    if (!spec.varying) throw config_error("non-spatially varying coefficients require varying mode");
    for (Eigen::Index k = 0; k < d.x.cols(); ++k) {
      std::vector<double> col(d.x.col(k).data(), d.x.col(k).data() + n);
      lay.splines.push_back(NaturalSplineBasis::fit(col));
      add(BlockKind::nvc, d.x_names[static_cast<std::size_t>(k)], static_cast<int>(k) + 1,
          lay.splines.back().size());
    }
  }
  if (!d.group.empty()) {
    for (const auto& g : d.group)
      if (std::find(lay.group_levels.begin(), lay.group_levels.end(), g) == lay.group_levels.end())
        lay.group_levels.push_back(g);
    if (lay.group_levels.size() < 2) throw data_error("group column needs at least 2 levels");
    for (const auto& g : d.group)
      lay.group_index.push_back(static_cast<int>(
          std::find(lay.group_levels.begin(), lay.group_levels.end(), g) - lay.group_levels.begin()));
    add(BlockKind::group, d.group_name, -1, static_cast<Eigen::Index>(lay.group_levels.size()) - 1);
  }

  lay.Z.resize(n, q);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd xr = d.x.cols() ? Eigen::RowVectorXd(d.x.row(i)) : Eigen::RowVectorXd(0);
    const Eigen::RowVectorXd er = L ? Eigen::RowVectorXd(basis.vectors.row(d.site_of(i))) : Eigen::RowVectorXd(0);
    lay.Z.row(i) = lay.random_row(xr, er, lay.group_index.empty() ? -1 : lay.group_index[static_cast<std::size_t>(i)]);
  }
  return lay;
}

/// Restricted likelihood as a function of the free parameters
/// [per active block: log tau (, alpha)] ++ [chain parameters].
class ModelProblem {
 public:
  ModelProblem(const Dataset& data, const ModelLayout& layout, const ModelSpec& spec,
               std::vector<char> active)
      : data_(&data), layout_(&layout), spec_(spec), active_(std::move(active)),
        param_(spec.transform, spec.count_delta) {
    const Eigen::Index n = data.rows();
    weights_ = spec.transform.is_count() ? count_weights(data.y, spec.count_delta)
                                         : Eigen::VectorXd::Ones(n);
    design_ = MixedModelDesign(layout.X, layout.Z, weights_);
    if (!data.offset.empty()) {
      std::vector<double> lo(data.offset.size());
      for (std::size_t i = 0; i < lo.size(); ++i) lo[i] = std::log(data.offset[i]);
      (spec.transform.is_count() ? chain_log_offset_ : linear_offset_) = std::move(lo);
    }
  }

  const ChainParameterization& chain_param() const noexcept { return param_; }
  const MixedModelDesign& design() const noexcept { return design_; }
  const std::vector<char>& active() const noexcept { return active_; }
  std::span<const double> chain_log_offset() const noexcept { return chain_log_offset_; }
  std::span<const double> linear_offset() const noexcept { return linear_offset_; }

  int var_size() const noexcept {
    int k = 0;
    for (std::size_t b = 0; b < active_.size(); ++b)
      if (active_[b]) k += layout_->blocks[b].has_alpha() ? 2 : 1;
    return k;
  }
  int size() const noexcept { return var_size() + param_.size(); }

  /// Per-block (tau, alpha); inactive blocks get tau = 0.
  void unpack(const Eigen::VectorXd& theta, std::vector<double>& tau, std::vector<double>& alpha) const {
    tau.assign(active_.size(), 0.0);
    alpha.assign(active_.size(), kNaN);
    int k = 0;
    for (std::size_t b = 0; b < active_.size(); ++b) {
      if (!active_[b]) continue;
      tau[b] = std::exp(std::clamp(theta(k++), kLogTauMin, kLogTauMax));
      if (layout_->blocks[b].has_alpha()) alpha[b] = std::clamp(theta(k++), kAlphaMin, kAlphaMax);
    }
  }

  Eigen::VectorXd scales(const Eigen::VectorXd& theta) const {
    std::vector<double> tau, alpha;
    unpack(theta, tau, alpha);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(layout_->Z.cols());
    for (std::size_t b = 0; b < active_.size(); ++b) {
      const auto& blk = layout_->blocks[b];
      if (!active_[b]) continue;
      if (blk.has_alpha())
        s.segment(blk.offset, blk.size) = spatial_scales(blk.eigenvalues, tau[b], alpha[b]);
      else
        s.segment(blk.offset, blk.size).setConstant(tau[b]);
    }
    return s;
  }

  TransformChain chain(const Eigen::VectorXd& theta) const {
    return param_.build(theta.tail(param_.size()), data_->y, chain_log_offset_);
  }

  WorkingResponse working(const TransformChain& chain) const {
    return make_working_response(chain, spec_.transform, data_->y, chain_log_offset_, linear_offset_);
  }

  /// -2 * restricted log-likelihood including the transformation Jacobian.
  double neg2(const Eigen::VectorXd& theta) const {
    const auto wr = working(chain(theta));
    if (!wr.z.allFinite() || !std::isfinite(wr.log_jacobian))
      return std::numeric_limits<double>::infinity();
    return design_.neg2_loglik(wr.z, scales(theta)) - 2.0 * wr.log_jacobian;
  }

  double restricted_loglik(const Eigen::VectorXd& theta) const {
    const double v = neg2(theta);
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "restricted likelihood is not finite at parameters [" << theta.transpose() << "]";
      throw numeric_error(msg.str());
    }
    return -0.5 * v;
  }

  /// Clamp penalties of the variance and chain parameters.
  double bound_penalty(const Eigen::VectorXd& theta) const {
    double pen = param_.bound_penalty(theta.tail(param_.size()));
    int k = 0;
    for (std::size_t b = 0; b < active_.size(); ++b) {
      if (!active_[b]) continue;
      pen += outside_sq(theta(k++), kLogTauMin, kLogTauMax);
      if (layout_->blocks[b].has_alpha()) pen += outside_sq(theta(k++), kAlphaMin, kAlphaMax);
    }
    return pen;
  }

  Objective objective() const {
    return [this](const Eigen::VectorXd& t) {
      try {
        return neg2(t) + bound_penalty(t);
      } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
      }
    };
  }

  /// Central differences in the variance parameters, analytic in the chain parameters.
  Gradient gradient(double fd_step) const {
    return [this, fd_step](const Eigen::VectorXd& t) -> Eigen::VectorXd {
      const Objective f = objective();
      Eigen::VectorXd g(t.size());
      Eigen::VectorXd tp = t;
      for (int i = 0; i < var_size(); ++i) {
        const double h = fd_step * std::max(1.0, std::abs(t(i)));
        tp(i) = t(i) + h;
        const double fp = f(tp);
        tp(i) = t(i) - h;
        const double fm = f(tp);
        tp(i) = t(i);
        g(i) = (fp - fm) / (2.0 * h);
      }
      const auto np = static_cast<Eigen::Index>(param_.size());
      if (np == 0) return g;
      try {
        const Eigen::VectorXd c = t.tail(np);
        const auto wj = working_jacobian(param_, c, data_->y, chain_log_offset_, linear_offset_);
        g.tail(np) = wj.dz.transpose() * design_.neg2_loglik_gradient(wj.z, scales(t)) -
                     2.0 * wj.dlog_jacobian + param_.bound_penalty_gradient(c);
      } catch (const Error&) {
        g.setConstant(kNaN);
      }
      return g;
    };
  }

  /// Default variance parameters for the active blocks.
  Eigen::VectorXd default_var() const {
    Eigen::VectorXd v(var_size());
    int k = 0;
    for (std::size_t b = 0; b < active_.size(); ++b) {
      if (!active_[b]) continue;
      v(k++) = std::log(0.5);
      if (layout_->blocks[b].has_alpha()) v(k++) = 1.0;
    }
    return v;
  }

  /// Variance parameters of `from` (another activity pattern) mapped onto this one.
  Eigen::VectorXd remap_var(const ModelProblem& from, const Eigen::VectorXd& theta) const {
    std::vector<double> tau, alpha;
    from.unpack(theta, tau, alpha);
    Eigen::VectorXd v(var_size());
    int k = 0;
    for (std::size_t b = 0; b < active_.size(); ++b) {
      if (!active_[b]) continue;
      v(k++) = from.active_[b] ? std::log(tau[b]) : std::log(0.5);
      if (layout_->blocks[b].has_alpha()) v(k++) = from.active_[b] ? alpha[b] : 1.0;
    }
    return v;
  }

 private:
  static constexpr double kLogTauMin = -15.0, kLogTauMax = 8.0;
  static constexpr double kAlphaMin = -10.0, kAlphaMax = 20.0;

  const Dataset* data_;
  const ModelLayout* layout_;
  ModelSpec spec_;
  std::vector<char> active_;
  ChainParameterization param_;
  Eigen::VectorXd weights_;
  MixedModelDesign design_;
  std::vector<double> chain_log_offset_, linear_offset_;
};

// ------------------------------------------------------------------ results

struct CoefficientRow {
  std::string name;
  double estimate = 0, se = 0, t = 0, p = 0;
};

struct ProcessSummary {
  std::string label;
  BlockKind kind = BlockKind::spatial;
  bool active = false;
  double tau = 0.0;        // relative SD (process SD / residual SD)
  double random_se = 0.0;  // process SD on the response scale
  double alpha = kNaN;
  double moran_ratio = kNaN;  // Moran.I / max(Moran.I)
};

struct GroupEffect {
  std::string level;
  double estimate = 0, se = kNaN, t = kNaN;
};

struct InfoCriteria {
  double rloglik = 0, aic = 0, bic = 0;
  int p = 0;
  Eigen::Index n_eff = 0;
};

struct FitStatistics {
  double resid_se = 0, adj_r2_cond = 0;
  double dispersion = kNaN, deviance_explained = kNaN;  // count regimes
};

struct NullModel {
  std::string label;
  double loglik = 0, aic = 0, bic = 0;
  int p = 0;
};

struct FittedModel {
  ModelSpec spec;
  Dataset data;
  ModelLayout layout;
  std::vector<char> active;
  Eigen::VectorXd theta;  // optimizer parameters at the optimum
  TransformChain chain;

  Eigen::VectorXd coef;  // [b; gamma] on the reporting scale
  Eigen::MatrixXd cov;   // posterior covariance of coef
  double sigma2 = 0;     // residual variance on the reporting scale
  Eigen::VectorXd scales;  // per random coefficient SD relative to sigma
  std::vector<ProcessSummary> processes;
  std::vector<GroupEffect> group_effects;
  std::vector<CoefficientRow> coefficients;

  // varying coefficients (rows x (1 + n_x)), only when spec.varying
  std::vector<std::string> varying_names;
  Eigen::MatrixXd svc_estimate, svc_se, svc_p;

  // in-sample
  Eigen::VectorXd fitted_z, xb, se_z, pred, weights;
  Eigen::MatrixXd pred_quantile;
  std::vector<char> quantile_clamped;

  InfoCriteria criteria;
  FitStatistics stats;
  NullModel null_model;
  EigenBasis basis;
  bool converged = true;
  double grad_norm = 0.0;
  std::vector<std::string> warnings;

  Eigen::Index n_fixed() const noexcept { return static_cast<Eigen::Index>(layout.fixed_names.size()); }
  Eigen::VectorXd beta() const { return coef.head(n_fixed()); }
  Eigen::VectorXd gamma() const { return coef.tail(coef.size() - n_fixed()); }
  double log_offset(Eigen::Index i) const {
    return data.offset.empty() ? 0.0 : std::log(data.offset[static_cast<std::size_t>(i)]);
  }
};

// --------------------------------------------------------------- fit pieces

namespace detail {

inline int process_param_count(const RandomBlock& b) { return b.has_alpha() ? 2 : 1; }

inline int declared_parameter_count(const ModelLayout& lay, const std::vector<char>& active,
                                    const TransformChain& chain) {
  int p = static_cast<int>(lay.X.cols()) + 1;
  for (std::size_t b = 0; b < active.size(); ++b)
    if (active[b]) p += process_param_count(lay.blocks[b]);
  return p + chain.free_parameter_count();
}

inline OptimizerResult best_of(const ModelProblem& prob, const std::vector<Eigen::VectorXd>& starts,
                               const OptimizerOptions& opt) {
  const Objective f = prob.objective();
  const Gradient g = prob.gradient(opt.fd_step);
  OptimizerResult best;
  for (const auto& s : starts) {
    auto r = minimize(f, s, opt, g);
    if (r.value < best.value) best = std::move(r);
  }
  return best;
}

inline Eigen::VectorXd concat(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

/// Staged joint optimization of variance and chain parameters.
inline OptimizerResult optimize_stages(const Dataset& data, const ModelLayout& lay, const ModelSpec& spec,
                                       const std::vector<char>& active, const FitOptions& opt) {
  const int target = spec.transform.tr_num;
  OptimizerResult prev;
  Eigen::VectorXd prev_chain;
  for (int d = 0; d <= target; ++d) {
    ModelSpec stage = spec;
    stage.transform.tr_num = d;
    const ModelProblem prob(data, lay, stage, active);
    const auto& param = prob.chain_param();
    const Eigen::VectorXd var = d == 0 ? prob.default_var() : Eigen::VectorXd(prev.x.head(prob.var_size()));

    std::vector<Eigen::VectorXd> starts;
    if (d == 0) {
      starts.push_back(concat(var, param.identity()));
      if (param.size() > 0) {
        const auto lin = fit_chain(data.y, stage.transform, lay.X, prob.chain_log_offset(),
                                   spec.count_delta, {opt.optimizer});
        starts.push_back(concat(var, lin.theta));
      }
    } else {
      starts.push_back(concat(var, param.extend(prev_chain)));
      if (d == target) {
        const auto lin = fit_chain(data.y, stage.transform, lay.X, prob.chain_log_offset(),
                                   spec.count_delta, {opt.optimizer});
        starts.push_back(concat(var, lin.theta));
      }
    }
    prev = best_of(prob, starts, opt.optimizer);
    prev_chain = prev.x.tail(param.size());
  }
  return prev;
}

}  // namespace detail

/// Fits the model; `spec.varying` selects the varying-coefficient variant.
inline FittedModel fit_model(const Dataset& data, const EigenBasis& basis, const ModelSpec& spec,
                             const FitOptions& opt = {}) {
  spec.transform.validate();
  data.validate(basis.rank() > 0 ? basis.sites() : -1);
  if (data.rows() < data.x.cols() + data.xconst.cols() + 3)
    throw data_error("too few observations for the number of covariates");
  for (std::size_t i = 0; i < data.y.size(); ++i) {
    const double v = data.y[i];
    if (spec.transform.is_count() && (v < 0.0 || v != std::floor(v)))
      throw data_error("count response must be a non-negative integer (row " + std::to_string(i + 1) + ")");
    if (spec.transform.y_nonneg && v < 0.0)
      throw data_error("negative response at row " + std::to_string(i + 1));
  }

  FittedModel m;
  m.spec = spec;
  m.data = data;
  m.basis = basis;
  m.layout = build_layout(data, basis, spec);
  const auto& lay = m.layout;
  if (!data.offset.empty() && !spec.transform.is_count())
    m.warnings.emplace_back("offset used with a continuous response: log(offset) enters the linear predictor");

  if (const auto bad = collinear_columns(lay.X, lay.fixed_names); !bad.empty()) {
    std::string msg = "design matrix is rank deficient; collinear columns:";
    for (const auto& b : bad) msg += " " + b;
    throw data_error(msg);
  }

  std::vector<char> active(lay.blocks.size(), 1);
  if (!spec.spatial)
    for (std::size_t b = 0; b < active.size(); ++b)
      if (lay.blocks[b].kind == BlockKind::spatial) active[b] = 0;

  auto best = detail::optimize_stages(m.data, lay, spec, active, opt);

  // Backward switching of varying processes by BIC.
  if (spec.varying && spec.select_processes) {
    const double log_n = std::log(static_cast<double>(data.rows()));
    for (int round = 0; round < opt.max_selection_rounds; ++round) {
      bool changed = false;
      for (;;) {
        const ModelProblem cur(m.data, lay, spec, active);
        const double base = best.value;
        double best_gain = 0.0;
        std::size_t drop = active.size();
        for (std::size_t b = 0; b < active.size(); ++b) {
          if (!active[b] || lay.blocks[b].kind == BlockKind::group) continue;
          auto trial_active = active;
          trial_active[b] = 0;
          const ModelProblem trial(m.data, lay, spec, trial_active);
          const Eigen::VectorXd t = detail::concat(trial.remap_var(cur, best.x),
                                                   best.x.tail(cur.chain_param().size()));
          const double gain = base - trial.objective()(t) +
                              detail::process_param_count(lay.blocks[b]) * log_n;
          if (gain > best_gain) {
            best_gain = gain;
            drop = b;
          }
        }
        if (drop == active.size()) break;
        const ModelProblem prev_prob(m.data, lay, spec, active);
        active[drop] = 0;
        const ModelProblem next(m.data, lay, spec, active);
        best.x = detail::concat(next.remap_var(prev_prob, best.x), best.x.tail(next.chain_param().size()));
        best.value = next.objective()(best.x);
        changed = true;
      }
      if (!changed) break;
      const ModelProblem next(m.data, lay, spec, active);
      auto r = minimize(next.objective(), best.x, opt.optimizer, next.gradient(opt.optimizer.fd_step));
      if (r.value <= best.value) best = std::move(r);
    }
  }

  m.active = active;
  m.theta = best.x;
  m.converged = best.converged;
  m.grad_norm = best.grad_norm;
  if (!best.converged) {
    std::ostringstream msg;
    msg << "optimizer did not converge (gradient norm " << best.grad_norm << ")";
    if (opt.strict_convergence) throw ConvergenceFailure(msg.str(), best.x, best.grad_norm);
    m.warnings.push_back(msg.str());
  }

  // ---- solution on the reporting scale
  const ModelProblem prob(m.data, lay, spec, active);
  m.chain = prob.chain(best.x);
  const auto wr = prob.working(m.chain);
  const Eigen::VectorXd s = prob.scales(best.x);
  const auto sol = prob.design().solve(wr.reported, s);
  const Eigen::Index p = lay.X.cols(), q = lay.Z.cols(), n = data.rows();
  Eigen::VectorXd dvec(p + q);
  dvec << Eigen::VectorXd::Ones(p), s;
  m.coef = dvec.cwiseProduct(sol.coef);
  m.scales = s;
  m.sigma2 = sol.sigma2;
  m.cov = m.sigma2 * (dvec.asDiagonal() * sol.m_inverse * dvec.asDiagonal());
  m.weights = prob.design().weights();

  const Eigen::MatrixXd& A = prob.design().design();
  m.fitted_z = A * m.coef;
  m.xb = lay.X * m.coef.head(p);

  // ---- criteria
  m.criteria.rloglik = prob.restricted_loglik(best.x);
  m.criteria.p = detail::declared_parameter_count(lay, active, m.chain);
  m.criteria.n_eff = n;
  m.criteria.aic = -2.0 * m.criteria.rloglik + 2.0 * m.criteria.p;
  m.criteria.bic = -2.0 * m.criteria.rloglik + m.criteria.p * std::log(static_cast<double>(n));

  const Eigen::VectorXd resid = wr.reported - m.fitted_z;
  const double sse = (m.weights.array() * resid.array().square()).sum();
  const double wmean = (m.weights.array() * wr.reported.array()).sum() / m.weights.sum();
  const double sst = (m.weights.array() * (wr.reported.array() - wmean).square()).sum();
  m.stats.resid_se = std::sqrt(sse / static_cast<double>(n - p));
  m.stats.adj_r2_cond = 1.0 - (sse / static_cast<double>(n - p)) / (sst / static_cast<double>(n - 1));

  // Reported variance scale is the residual variance without the penalty term.
  const double s2 = m.stats.resid_se * m.stats.resid_se;
  if (s2 > 0.0 && m.sigma2 > 0.0) m.cov *= s2 / m.sigma2;
  m.sigma2 = s2;

  // ---- coefficients
  for (Eigen::Index k = 0; k < p; ++k) {
    CoefficientRow r;
    r.name = lay.fixed_names[static_cast<std::size_t>(k)];
    r.estimate = m.coef(k);
    r.se = std::sqrt(m.cov(k, k));
    r.t = r.estimate / r.se;
    r.p = stats::two_sided_p(r.t);
    m.coefficients.push_back(r);
  }

  // ---- processes
  std::vector<double> tau, alpha;
  prob.unpack(best.x, tau, alpha);
  const double sigma = std::sqrt(m.sigma2);
  for (std::size_t b = 0; b < lay.blocks.size(); ++b) {
    const auto& blk = lay.blocks[b];
    ProcessSummary ps;
    ps.label = blk.label;
    ps.kind = blk.kind;
    ps.active = active[b];
    ps.tau = tau[b];
    ps.random_se = sigma * tau[b];
    if (active[b] && blk.kind == BlockKind::spatial) {
      ps.alpha = alpha[b];
      const Eigen::VectorXd g = m.coef.segment(p + blk.offset, blk.size);
      const double gg = g.squaredNorm();
      if (gg > 0.0) ps.moran_ratio = g.dot(blk.eigenvalues.cwiseProduct(g)) / (blk.eigenvalues(0) * gg);
    }
    m.processes.push_back(ps);

    if (blk.kind == BlockKind::group) {
      double sum = 0.0;
      for (Eigen::Index g = 0; g < blk.size; ++g) {
        GroupEffect e;
        e.level = lay.group_levels[static_cast<std::size_t>(g)];
        const Eigen::Index j = p + blk.offset + g;
        e.estimate = m.coef(j);
        e.se = std::sqrt(m.cov(j, j));
        e.t = e.estimate / e.se;
        sum += e.estimate;
        m.group_effects.push_back(e);
      }
      GroupEffect last;
      last.level = lay.group_levels.back();
      last.estimate = -sum;
      m.group_effects.push_back(last);
    }
  }

  // ---- varying coefficients
  if (spec.varying) {
    const Eigen::Index kv = 1 + lay.n_x;
    m.varying_names.assign(lay.fixed_names.begin(), lay.fixed_names.begin() + kv);
    m.svc_estimate.resize(n, kv);
    m.svc_se.resize(n, kv);
    m.svc_p.resize(n, kv);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < kv; ++c) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(p + q);
        a(c) = 1.0;
        for (const auto& blk : lay.blocks) {
          if (blk.covariate != c) continue;
          if (blk.kind == BlockKind::spatial)
            a.segment(p + blk.offset, blk.size) = basis.vectors.row(data.site_of(i)).transpose();
          else if (blk.kind == BlockKind::nvc)
            a.segment(p + blk.offset, blk.size) =
                lay.splines[static_cast<std::size_t>(c - 1)].evaluate(data.x(i, c - 1)).transpose();
        }
        const double est = a.dot(m.coef);
        const double se = std::sqrt(std::max(0.0, a.dot(m.cov * a)));
        m.svc_estimate(i, c) = est;
        m.svc_se(i, c) = se;
        m.svc_p(i, c) = se > 0.0 ? stats::two_sided_p(est / se) : (est == 0.0 ? 1.0 : 0.0);
      }
    }
  }

  // ---- in-sample predictions and quantiles
  const Eigen::VectorXd fit_var = (A * m.cov).cwiseProduct(A).rowwise().sum();
  m.se_z.resize(n);
  m.pred.resize(n);
  m.pred_quantile.resize(n, static_cast<Eigen::Index>(kQuantileProbs.size()));
  m.quantile_clamped.assign(static_cast<std::size_t>(n), 0);
  const bool count = spec.transform.is_count();
  const auto lin_off = prob.linear_offset();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double noise = m.sigma2 / m.weights(i);
    m.se_z(i) = std::sqrt(noise + std::max(0.0, fit_var(i)));
    const double z_chain = m.fitted_z(i) + (lin_off.empty() ? 0.0 : lin_off[static_cast<std::size_t>(i)]);
    const double lo = count ? m.log_offset(i) : 0.0;
    if (spec.transform.regime() == 'd')
      m.pred(i) = std::exp(z_chain + lo + 0.5 * noise) - spec.count_delta;
    else
      m.pred(i) = m.chain.inverse(z_chain, lo);
    const auto qr = predictive_quantiles(z_chain, m.se_z(i), m.chain, lo);
    for (std::size_t k = 0; k < qr.values.size(); ++k)
      m.pred_quantile(i, static_cast<Eigen::Index>(k)) = qr.values[k];
    m.quantile_clamped[static_cast<std::size_t>(i)] = qr.clamped;
  }

  // ---- count statistics
  if (count) {
    m.stats.dispersion = m.stats.resid_se * m.stats.resid_se;
    double dev = 0.0, dev0 = 0.0, sy = 0.0, so = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      sy += data.y[static_cast<std::size_t>(i)];
      so += data.offset.empty() ? 1.0 : data.offset[static_cast<std::size_t>(i)];
    }
    auto unit = [](double y, double mu) {
      mu = std::max(mu, 1e-10);
      return 2.0 * ((y > 0.0 ? y * std::log(y / mu) : 0.0) - (y - mu));
    };
    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = data.y[static_cast<std::size_t>(i)];
      const double off = data.offset.empty() ? 1.0 : data.offset[static_cast<std::size_t>(i)];
      dev += unit(y, m.pred(i));
      dev0 += unit(y, off * sy / so);
    }
    m.stats.deviance_explained = 100.0 * (1.0 - dev / dev0);
  }

  // ---- null model
  {
    NullModel& nm = m.null_model;
    nm.p = static_cast<int>(p) + 1;
    if (count) {
      nm.label = data.offset.empty() ? "glm( y ~ x, family = poisson )"
                                     : "glm( y ~ x, offset = log( offset ), family = poisson )";
      TransformChain log_chain({CountLogLayer{spec.count_delta}});
      const auto w0 = make_working_response(log_chain, TransformSpec{YType::count, false, 0}, data.y,
                                            prob.chain_log_offset(), {});
      const MixedModelDesign d0(lay.X, Eigen::MatrixXd(n, 0), m.weights);
      nm.loglik = -0.5 * d0.neg2_loglik(w0.z, Eigen::VectorXd(0));
    } else {
      nm.label = data.xconst.cols() ? "lm( y ~ x + xconst )" : "lm( y ~ x )";
      Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(data.y.data(), n);
      if (!lin_off.empty()) yv -= Eigen::Map<const Eigen::VectorXd>(lin_off.data(), n);
      const Eigen::VectorXd b = lay.X.colPivHouseholderQr().solve(yv);
      const double rss = (yv - lay.X * b).squaredNorm();
      const double nn = static_cast<double>(n);
      nm.loglik = -0.5 * nn * (1.0 + std::log(2.0 * std::numbers::pi * rss / nn));
    }
    nm.aic = -2.0 * nm.loglik + 2.0 * nm.p;
    nm.bic = -2.0 * nm.loglik + nm.p * std::log(static_cast<double>(n));
  }
  return m;
}

/// Constant-coefficient model (no varying coefficients on x).
inline FittedModel fit_resf(const Dataset& data, const EigenBasis& basis, ModelSpec spec,
                            const FitOptions& opt = {}) {
  spec.varying = false;
  spec.nvc = false;
  return fit_model(data, basis, spec, opt);
}

/// Spatially (and optionally non-spatially) varying coefficients on x.
inline FittedModel fit_resf_vc(const Dataset& data, const EigenBasis& basis, ModelSpec spec,
                               const FitOptions& opt = {}) {
  spec.varying = true;
  return fit_model(data, basis, spec, opt);
}

inline InfoCriteria info_criteria(const FittedModel& m) { return m.criteria; }
inline FitStatistics fit_statistics(const FittedModel& m) { return m.stats; }

/// Restricted log-likelihood of a fitted model at arbitrary parameters.
inline double restricted_loglik(const FittedModel& m, const Eigen::VectorXd& theta) {
  const ModelProblem prob(m.data, m.layout, m.spec, m.active);
  return prob.restricted_loglik(theta);
}

}  // namespace spwarp

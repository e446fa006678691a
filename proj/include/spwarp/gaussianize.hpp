#pragma once

// Parameterization and fitting of transformation chains ("gaussianization").

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spwarp/error.hpp"
#include "spwarp/optimize.hpp"
#include "spwarp/reml.hpp"
#include "spwarp/stats.hpp"
#include "spwarp/transform.hpp"

namespace spwarp {

/// Maps an unconstrained vector to a chain for a given regime.
///
/// Layout: [lambda] + (theta1, log theta2, log theta3, theta4) per inner SAL
/// layer + (log theta3, theta4) for the final SAL layer, whose location and
/// scale are absorbed by the standardization that follows it.
class ChainParameterization {
 public:
  // clamps applied in `build`
  static constexpr double kLambdaBound = 5.0;
  static constexpr double kLocationBound = 20.0;
  static constexpr double kLogScaleBound = 6.0;
  static constexpr double kLogTailBound = 4.0;

  ChainParameterization() = default;
  explicit ChainParameterization(TransformSpec spec, double delta = kDefaultCountDelta)
      : spec_(spec), delta_(delta) {
    spec_.validate();
    if (!(delta_ > 0.0)) throw config_error("count delta must be positive");
  }

  const TransformSpec& spec() const noexcept { return spec_; }
  double delta() const noexcept { return delta_; }

  int size() const noexcept {
    const int d = spec_.tr_num;
    return (spec_.has_boxcox() ? 1 : 0) + (d > 0 ? 4 * (d - 1) + 2 : 0);
  }

  std::vector<std::string> names() const {
    std::vector<std::string> n;
    if (spec_.has_boxcox()) n.emplace_back("boxcox_lambda");
    for (int d = 1; d < spec_.tr_num; ++d) {
      const auto s = "sal" + std::to_string(d) + "_";
      for (const char* t : {"theta1", "log_theta2", "log_theta3", "theta4"}) n.push_back(s + t);
    }
    if (spec_.tr_num > 0) {
      const auto s = "sal" + std::to_string(spec_.tr_num) + "_";
      n.push_back(s + "log_theta3");
      n.push_back(s + "theta4");
    }
    return n;
  }

  /// Parameters of the identity-like chain (lambda = 1, every SAL layer identity).
  Eigen::VectorXd identity() const { return Eigen::VectorXd::Zero(size()) + boxcox_unit(); }

  /// Lift a parameter vector fitted with tr_num - 1 layers: the old final
  /// layer becomes an inner layer and an identity final layer is appended.
  Eigen::VectorXd extend(const Eigen::VectorXd& prev) const {
    if (spec_.tr_num == 0) throw config_error("cannot extend a chain without SAL layers");
    Eigen::VectorXd out = identity();
    const int bc = spec_.has_boxcox() ? 1 : 0;
    if (bc) out(0) = prev(0);
    const int d_prev = spec_.tr_num - 1;
    if (d_prev > 0) {
      const int inner_prev = 4 * (d_prev - 1);
      out.segment(bc, inner_prev) = prev.segment(bc, inner_prev);
      // old final (log theta3, theta4) -> inner (0, 0, log theta3, theta4)
      out(bc + inner_prev + 0) = 0.0;
      out(bc + inner_prev + 1) = 0.0;
      out(bc + inner_prev + 2) = prev(bc + inner_prev + 0);
      out(bc + inner_prev + 3) = prev(bc + inner_prev + 1);
    }
    return out;
  }

  /// Penalty for parameters beyond the clamps applied in `build`.
  double bound_penalty(const Eigen::VectorXd& theta) const {
    double pen = 0.0;
    int k = 0;
    if (spec_.has_boxcox()) pen += outside_sq(theta(k++), -kLambdaBound, kLambdaBound);
    for (int d = 1; d <= spec_.tr_num; ++d) {
      if (d < spec_.tr_num) {
        pen += outside_sq(theta(k++), -kLocationBound, kLocationBound);
        pen += outside_sq(theta(k++), -kLogScaleBound, kLogScaleBound);
      }
      pen += outside_sq(theta(k++), -kLogTailBound, kLogTailBound);
      pen += outside_sq(theta(k++), -kLocationBound, kLocationBound);
    }
    return pen;
  }

  Eigen::VectorXd bound_penalty_gradient(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
    int k = 0;
    auto add = [&](double bound) {
      g(k) = outside_sq_derivative(theta(k), -bound, bound);
      ++k;
    };
    if (spec_.has_boxcox()) add(kLambdaBound);
    for (int d = 1; d <= spec_.tr_num; ++d) {
      if (d < spec_.tr_num) {
        add(kLocationBound);
        add(kLogScaleBound);
      }
      add(kLogTailBound);
      add(kLocationBound);
    }
    return g;
  }

  /// Build the chain; standardization constants are taken from the training response.
  TransformChain build(const Eigen::VectorXd& theta, std::span<const double> y,
                       std::span<const double> log_offset = {}) const {
    TransformChain chain;
    std::vector<double> v(y.begin(), y.end());
    int k = 0;
    auto apply = [&](const TransformLayer& layer) {
      TransformChain single({layer});
      for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = single.forward(v[i], log_offset.empty() ? 0.0 : log_offset[i]);
      chain.push_back(layer);
    };

    if (spec_.is_count()) apply(CountLogLayer{delta_});
    if (spec_.has_boxcox()) apply(BoxCoxLayer{std::clamp(theta(k++), -kLambdaBound, kLambdaBound)});
    if (spec_.tr_num > 0) {
      apply(StandardizeLayer{stats::mean(v), stats::sd(v)});
      for (int d = 1; d <= spec_.tr_num; ++d) {
        SALLayer s;
        if (d < spec_.tr_num) {
          s.params.theta1 = std::clamp(theta(k++), -kLocationBound, kLocationBound);
          s.params.theta2 = std::exp(std::clamp(theta(k++), -kLogScaleBound, kLogScaleBound));
        } else {
          s.fixed_affine = true;
        }
        s.params.theta3 = std::exp(std::clamp(theta(k++), -kLogTailBound, kLogTailBound));
        s.params.theta4 = std::clamp(theta(k++), -kLocationBound, kLocationBound);
        apply(s);
      }
      apply(StandardizeLayer{stats::mean(v), stats::sd(v)});
    }
    return chain;
  }

 private:
  Eigen::VectorXd boxcox_unit() const {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(size());
    if (spec_.has_boxcox()) u(0) = 1.0;
    return u;
  }

  TransformSpec spec_;
  double delta_ = kDefaultCountDelta;
};

/// Precision weights of the log-Gaussian count approximation (Var log y ~ 1/(y + delta)).
inline Eigen::VectorXd count_weights(std::span<const double> y, double delta) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) w(static_cast<Eigen::Index>(i)) = y[i] + delta;
  return w;
}

/// Response on the likelihood scale plus the log-Jacobian entering the likelihood.
struct WorkingResponse {
  Eigen::VectorXd z;         // likelihood-scale response (offset removed)
  Eigen::VectorXd reported;  // reporting-scale response (offset removed)
  double log_jacobian = 0.0;
};

/// Applies the chain; the count layer's Jacobian is left out (count likelihoods
/// live on the working log scale) and the Box-Cox-only regime is standardized
/// inside the likelihood so the criterion is invariant to affine rescaling.
inline WorkingResponse make_working_response(const TransformChain& chain, const TransformSpec& spec,
                                             std::span<const double> y,
                                             std::span<const double> chain_log_offset,
                                             std::span<const double> linear_offset) {
  const auto n = static_cast<Eigen::Index>(y.size());
  WorkingResponse w;
  w.reported.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    const auto f = chain.forward_one(y[iu], chain_log_offset.empty() ? 0.0 : chain_log_offset[iu]);
    w.log_jacobian += f.log_deriv - f.count_log_deriv;
    w.reported(i) = f.z - (linear_offset.empty() ? 0.0 : linear_offset[iu]);
  }
  w.z = w.reported;
  if (spec.regime() == 'a') {
    const double m = w.z.mean();
    const double s = std::sqrt((w.z.array() - m).square().sum() / static_cast<double>(n - 1));
    w.z = (w.z.array() - m) / s;
    w.log_jacobian -= static_cast<double>(n) * std::log(s);
  }
  return w;
}

/// Working response together with its derivatives in the chain parameters.
struct WorkingJacobian {
  Eigen::VectorXd z;
  double log_jacobian = 0.0;
  Eigen::MatrixXd dz;              // n x P
  Eigen::VectorXd dlog_jacobian;   // P
};

namespace detail {

// (v - mean) / sd applied to the values and their parameter derivatives.
template <class Jac>
void standardize_with_jacobian(Eigen::VectorXd& v, Jac& J, double& lj, Eigen::VectorXd& dlj) {
  const auto n = static_cast<double>(v.size());
  const double m = v.mean();
  const Eigen::VectorXd c = v.array() - m;
  const double s = std::sqrt(c.squaredNorm() / (n - 1.0));
  const Eigen::RowVectorXd dm = J.colwise().mean();
  const Eigen::RowVectorXd ds = (c.transpose() * J) / ((n - 1.0) * s);
  v = c / s;
  J.rowwise() -= dm;
  J /= s;
  J -= v * (ds / s);
  lj -= n * std::log(s);
  dlj -= n * ds.transpose() / s;
}

}  // namespace detail

/// Same quantities as make_working_response(param.build(theta, ...)) plus
/// d z / d theta and d log-Jacobian / d theta, by a forward pass. With
/// derivatives off only z and the log-Jacobian are filled.
inline WorkingJacobian working_jacobian(const ChainParameterization& param, const Eigen::VectorXd& theta,
                                        std::span<const double> y, std::span<const double> chain_log_offset,
                                        std::span<const double> linear_offset, bool derivatives = true) {
  using P = ChainParameterization;
  const TransformSpec& spec = param.spec();
  const auto n = static_cast<Eigen::Index>(y.size());
  const auto np = derivatives ? static_cast<Eigen::Index>(param.size()) : Eigen::Index{0};
  WorkingJacobian out;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = y[static_cast<std::size_t>(i)];
  using RowJac = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowJac J = RowJac::Zero(n, np);
  double lj = 0.0;
  Eigen::VectorXd dlj = Eigen::VectorXd::Zero(np);
  auto inside = [](double t, double b) { return t >= -b && t <= b ? 1.0 : 0.0; };

  if (spec.is_count()) {
    for (Eigen::Index i = 0; i < n; ++i)
      v(i) = count_forward(v(i), param.delta()) -
             (chain_log_offset.empty() ? 0.0 : chain_log_offset[static_cast<std::size_t>(i)]);
  }
  int k = 0;
  if (spec.has_boxcox()) {
    const double lambda = std::clamp(theta(k), -P::kLambdaBound, P::kLambdaBound);
    const double act = inside(theta(k), P::kLambdaBound);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double yi = v(i);
      const double out_v = boxcox_forward(yi, lambda);
      lj += boxcox_log_deriv(yi, lambda);
      v(i) = out_v;
      if (!derivatives) continue;
      const double l = std::log(yi);
      double dlam;
      if (std::abs(lambda) < 1e-6) dlam = 0.5 * l * l + lambda * l * l * l / 3.0;
      else dlam = (l * std::exp(lambda * l) * lambda - std::expm1(lambda * l)) / (lambda * lambda);
      const double dv = std::exp((lambda - 1.0) * l);
      dlj += ((lambda - 1.0) / yi) * J.row(i).transpose();
      dlj(k) += act * l;
      J.row(i) *= dv;
      J(i, k) += act * dlam;
    }
    ++k;
  }
  if (spec.tr_num > 0) {
    detail::standardize_with_jacobian(v, J, lj, dlj);
    for (int d = 1; d <= spec.tr_num; ++d) {
      const bool inner = d < spec.tr_num;
      double t1 = 0.0, t2 = 1.0, a1 = 0.0, a2 = 0.0;
      int k1 = -1, k2 = -1;
      if (inner) {
        k1 = k;
        t1 = std::clamp(theta(k), -P::kLocationBound, P::kLocationBound);
        a1 = inside(theta(k++), P::kLocationBound);
        k2 = k;
        t2 = std::exp(std::clamp(theta(k), -P::kLogScaleBound, P::kLogScaleBound));
        a2 = inside(theta(k++), P::kLogScaleBound);
      }
      const int k3 = k;
      const double t3 = std::exp(std::clamp(theta(k), -P::kLogTailBound, P::kLogTailBound));
      const double a3 = inside(theta(k++), P::kLogTailBound);
      const int k4 = k;
      const double t4 = std::clamp(theta(k), -P::kLocationBound, P::kLocationBound);
      const double a4 = inside(theta(k++), P::kLocationBound);
      const double log_scale = std::log(t2) + std::log(t3);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double x = v(i);
        const double asv = std::asinh(x);
        const double u = t3 * asv - t4;
        const double sh = std::sinh(u);
        lj += log_scale + detail::log_cosh(u) - 0.5 * std::log1p(x * x);
        v(i) = t1 + t2 * sh;
        if (!derivatives) continue;
        const double ch = std::cosh(u), th = std::tanh(u);
        const double r2 = 1.0 + x * x;
        const double dv = t2 * ch * t3 / std::sqrt(r2);
        const double dl = th * t3 / std::sqrt(r2) - x / r2;
        dlj += dl * J.row(i).transpose();
        J.row(i) *= dv;
        if (inner) {
          J(i, k1) += a1;
          J(i, k2) += a2 * t2 * sh;
          dlj(k2) += a2;
        }
        J(i, k3) += a3 * t2 * ch * t3 * asv;
        J(i, k4) -= a4 * t2 * ch;
        dlj(k3) += a3 * (1.0 + th * t3 * asv);
        dlj(k4) -= a4 * th;
      }
    }
    detail::standardize_with_jacobian(v, J, lj, dlj);
  }
  if (!linear_offset.empty())
    for (Eigen::Index i = 0; i < n; ++i) v(i) -= linear_offset[static_cast<std::size_t>(i)];
  if (spec.regime() == 'a') detail::standardize_with_jacobian(v, J, lj, dlj);
  out.z = std::move(v);
  out.log_jacobian = lj;
  out.dz = J;
  out.dlog_jacobian = std::move(dlj);
  return out;
}

/// Result of one stage of the layer-by-layer fit.
struct ChainStage {
  int tr_num = 0;
  TransformChain chain;
  Eigen::VectorXd theta;
  double loglik = 0.0;
};

struct ChainFit {
  TransformChain chain;
  Eigen::VectorXd theta;
  double loglik = 0.0;  // restricted log-likelihood including the Jacobian
  double grad_norm = 0.0;
  bool converged = true;
  std::vector<ChainStage> stages;  // D = 0 .. tr_num
};

struct ConvergenceFailure : Error {
  ConvergenceFailure(const std::string& what, Eigen::VectorXd best, double grad)
      : Error(ErrorKind::numeric, what), best_theta(std::move(best)), grad_norm(grad) {}
  Eigen::VectorXd best_theta;
  double grad_norm;
};

struct FitChainOptions {
  OptimizerOptions optimizer;
  bool throw_on_nonconvergence = false;
  int screen_iter = 60;  // per-start budget before the best start is refined
};

/// Fits the chain by maximizing the restricted likelihood of the linear model
/// z = X b + e on the transformed scale. SAL layers are added one at a time,
/// each stage warm-started from the previous one.
inline ChainFit fit_chain(std::span<const double> y, const TransformSpec& spec,
                          const Eigen::MatrixXd& x, std::span<const double> log_offset = {},
                          double delta = kDefaultCountDelta, const FitChainOptions& opt = {}) {
  spec.validate();
  if (static_cast<Eigen::Index>(y.size()) != x.rows())
    throw data_error("response and design row counts differ");
  for (double v : y) {
    if (!std::isfinite(v)) throw data_error("non-finite response value");
    if ((spec.is_count() || spec.y_nonneg) && v < 0.0)
      throw data_error("negative response in a non-negative regime");
  }

  const Eigen::VectorXd w = spec.is_count() ? count_weights(y, delta)
                                            : Eigen::VectorXd::Ones(x.rows());
  const MixedModelDesign design(x, Eigen::MatrixXd(x.rows(), 0), w);
  const Eigen::VectorXd no_scales(0);

  auto objective_for = [&](const ChainParameterization& param) {
    return [&, param](const Eigen::VectorXd& theta) {
      try {
        const auto wr = working_jacobian(param, theta, y, log_offset, {}, false);
        if (!wr.z.allFinite() || !std::isfinite(wr.log_jacobian))
          return std::numeric_limits<double>::infinity();
        return design.neg2_loglik(wr.z, no_scales) - 2.0 * wr.log_jacobian + param.bound_penalty(theta);
      } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
      }
    };
  };
  auto gradient_for = [&](const ChainParameterization& param) {
    return [&, param](const Eigen::VectorXd& theta) -> Eigen::VectorXd {
      try {
        const auto wj = working_jacobian(param, theta, y, log_offset, {});
        return wj.dz.transpose() * design.neg2_loglik_gradient(wj.z, no_scales) - 2.0 * wj.dlog_jacobian +
               param.bound_penalty_gradient(theta);
      } catch (const Error&) {
        return Eigen::VectorXd::Constant(theta.size(), std::numeric_limits<double>::quiet_NaN());
      }
    };
  };

  ChainFit fit;
  Eigen::VectorXd theta;
  const int d_target = spec.tr_num;
  for (int d = 0; d <= d_target; ++d) {
    TransformSpec stage = spec;
    stage.tr_num = d;
    const ChainParameterization param(stage, delta);
    const Objective f = objective_for(param);
    const Gradient grad = gradient_for(param);

    std::vector<Eigen::VectorXd> starts;
    if (d == 0) {
      starts.push_back(param.identity());
      if (stage.has_boxcox()) {
        Eigen::VectorXd s = param.identity();
        s(0) = 0.0;
        starts.push_back(s);
      }
    } else {
      const Eigen::VectorXd warm = param.extend(theta);
      starts.push_back(warm);
      for (double skew : {-0.5, 0.5}) {
        Eigen::VectorXd s = warm;
        s(s.size() - 1) = skew;
        starts.push_back(s);
      }
      Eigen::VectorXd heavy = warm;
      heavy(heavy.size() - 2) = std::log(0.6);
      starts.push_back(heavy);
    }

    // short screening run from every start, full run from the best
    OptimizerResult best;
    OptimizerOptions screen = opt.optimizer;
    screen.max_iter = opt.screen_iter;
    screen.max_rounds = 1;
    for (const auto& s : starts) {
      auto r = starts.size() > 1 ? minimize(f, s, screen, grad) : OptimizerResult{s, f(s)};
      if (r.value < best.value) best = r;
    }
    best = minimize(f, best.x, opt.optimizer, grad);
    theta = best.x;
    fit.loglik = -0.5 * (best.value - param.bound_penalty(theta));
    fit.grad_norm = best.grad_norm;
    fit.converged = best.converged;
    fit.chain = param.build(theta, y, log_offset);
    fit.stages.push_back({d, fit.chain, theta, fit.loglik});
  }
  fit.theta = theta;
  if (!fit.converged && opt.throw_on_nonconvergence) {
    std::ostringstream msg;
    msg << "transformation fit did not converge (gradient norm " << fit.grad_norm << ")";
    throw ConvergenceFailure(msg.str(), theta, fit.grad_norm);
  }
  return fit;
}

}  // namespace spwarp

#pragma once

// Unconstrained minimization backed by GSL multimin (BFGS2 with
// central-difference gradients, Nelder-Mead simplex as a restart).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>

#include <Eigen/Dense>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

namespace spwarp {

struct OptimizerOptions {
  double rel_tol = 1e-8;     // relative objective change
  int max_iter = 500;
  double fd_step = 1e-5;     // relative finite-difference step
  double initial_step = 0.1; // first line-search / simplex step
  int polish_per_dim = 30;   // simplex iterations per parameter when gradients are exact
  int max_rounds = 4;        // BFGS + simplex alternations
};

struct OptimizerResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  double grad_norm = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  bool converged = false;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Squared distance of v outside [lo, hi]. Objectives whose parameters are
/// clamped add this so an optimizer is pushed back to the bound instead of
/// drifting over the flat region beyond it.
inline double outside_sq(double v, double lo, double hi) {
  const double e = v < lo ? lo - v : (v > hi ? v - hi : 0.0);
  return e * e;
}

inline double outside_sq_derivative(double v, double lo, double hi) {
  return v < lo ? -2.0 * (lo - v) : (v > hi ? 2.0 * (v - hi) : 0.0);
}

/// Optional analytic gradient; an empty function or a non-finite result falls
/// back to central differences.
using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

namespace detail {

struct GslContext {
  const Objective* f;
  double fd_step;
  const Gradient* grad = nullptr;
  int evals = 0;
};

inline Eigen::VectorXd to_eigen(const gsl_vector* v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v->size));
  for (std::size_t i = 0; i < v->size; ++i) x(static_cast<Eigen::Index>(i)) = gsl_vector_get(v, i);
  return x;
}

inline double safe_eval(const Objective& f, const Eigen::VectorXd& x) {
  const double v = f(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::max() / 4;
}

inline double gsl_f(const gsl_vector* v, void* params) {
  auto* ctx = static_cast<GslContext*>(params);
  ++ctx->evals;
  return safe_eval(*ctx->f, to_eigen(v));
}

inline Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, double rel) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + h;
    const double fp = safe_eval(f, xp);
    xp(i) = x(i) - h;
    const double fm = safe_eval(f, xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline Eigen::VectorXd gradient(const Objective& f, const Gradient* grad, const Eigen::VectorXd& x, double rel) {
  if (grad && *grad) {
    Eigen::VectorXd g = (*grad)(x);
    if (g.size() == x.size() && g.allFinite()) return g;
  }
  return central_gradient(f, x, rel);
}

inline void gsl_df(const gsl_vector* v, void* params, gsl_vector* df) {
  auto* ctx = static_cast<GslContext*>(params);
  const Eigen::VectorXd g = gradient(*ctx->f, ctx->grad, to_eigen(v), ctx->fd_step);
  for (Eigen::Index i = 0; i < g.size(); ++i) gsl_vector_set(df, static_cast<std::size_t>(i), g(i));
}

inline void gsl_fdf(const gsl_vector* v, void* params, double* f, gsl_vector* df) {
  *f = gsl_f(v, params);
  gsl_df(v, params, df);
}

struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
using VectorPtr = std::unique_ptr<gsl_vector, VectorDeleter>;

inline VectorPtr make_vector(const Eigen::VectorXd& x) {
  VectorPtr v(gsl_vector_alloc(static_cast<std::size_t>(x.size())));
  for (Eigen::Index i = 0; i < x.size(); ++i) gsl_vector_set(v.get(), static_cast<std::size_t>(i), x(i));
  return v;
}

inline bool small_change(double prev, double cur, double tol) {
  return std::abs(prev - cur) <= tol * std::max(1.0, std::abs(cur));
}

inline OptimizerResult run_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                                const OptimizerOptions& opt, const Gradient* grad = nullptr) {
  GslContext ctx{&f, opt.fd_step, grad};
  gsl_multimin_function_fdf fn;
  fn.n = static_cast<std::size_t>(x0.size());
  fn.f = &gsl_f;
  fn.df = &gsl_df;
  fn.fdf = &gsl_fdf;
  fn.params = &ctx;

  auto x = make_vector(x0);
  std::unique_ptr<gsl_multimin_fdfminimizer, decltype(&gsl_multimin_fdfminimizer_free)> s(
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, fn.n),
      &gsl_multimin_fdfminimizer_free);
  gsl_multimin_fdfminimizer_set(s.get(), &fn, x.get(), opt.initial_step, 0.1);

  OptimizerResult r;
  double prev = s->f;
  int stable = 0;
  for (r.iterations = 1; r.iterations <= opt.max_iter; ++r.iterations) {
    const int status = gsl_multimin_fdfminimizer_iterate(s.get());
    if (status != GSL_SUCCESS) break;  // no progress: caller may restart
    if (small_change(prev, s->f, opt.rel_tol)) {
      if (++stable >= 2) {
        r.converged = true;
        break;
      }
    } else {
      stable = 0;
    }
    prev = s->f;
  }
  r.x = to_eigen(s->x);
  r.value = s->f;
  return r;
}

inline OptimizerResult run_simplex(const Objective& f, const Eigen::VectorXd& x0,
                                   const OptimizerOptions& opt, int max_iter) {
  GslContext ctx{&f, opt.fd_step};
  gsl_multimin_function fn;
  fn.n = static_cast<std::size_t>(x0.size());
  fn.f = &gsl_f;
  fn.params = &ctx;

  auto x = make_vector(x0);
  VectorPtr step(gsl_vector_alloc(fn.n));
  gsl_vector_set_all(step.get(), opt.initial_step);
  std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> s(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, fn.n),
      &gsl_multimin_fminimizer_free);
  gsl_multimin_fminimizer_set(s.get(), &fn, x.get(), step.get());

  OptimizerResult r;
  constexpr int window = 100;
  double window_start = s->fval;
  for (r.iterations = 1; r.iterations <= max_iter; ++r.iterations) {
    if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()), 1e-7) == GSL_SUCCESS) {
      r.converged = true;
      break;
    }
    // a simplex crawling along a ridge shrinks slowly; stop once it no longer pays
    if (r.iterations % window == 0) {
      if (small_change(window_start, s->fval, opt.rel_tol)) {
        r.converged = true;
        break;
      }
      window_start = s->fval;
    }
  }
  r.x = to_eigen(s->x);
  r.value = s->fval;
  return r;
}

}  // namespace detail

/// Quasi-Newton minimization; alternates simplex restarts with BFGS until the
/// objective stops improving.
inline OptimizerResult minimize(const Objective& f, const Eigen::VectorXd& x0,
                                const OptimizerOptions& opt = {}, const Gradient& grad = {}) {
  gsl_set_error_handler_off();
  OptimizerResult best;
  best.x = x0;
  best.value = detail::safe_eval(f, x0);
  if (x0.size() == 0) {
    best.converged = true;
    best.grad_norm = 0.0;
    return best;
  }

  int total_iter = 0;
  for (int round = 0; round < opt.max_rounds; ++round) {
    const double before = best.value;
    auto r = detail::run_bfgs(f, best.x, opt, &grad);
    total_iter += r.iterations;
    if (r.value < best.value) best = r;
    // Polish with a simplex from the current point; BFGS on numerical gradients
    // can stall on flat ridges. With exact gradients the simplex only has to
    // kick BFGS off saddles, so it is kept short.
    const int polish = grad ? std::min(opt.max_iter, opt.polish_per_dim * static_cast<int>(x0.size()))
                            : opt.max_iter * 4;
    auto s = detail::run_simplex(f, best.x, opt, polish);
    total_iter += s.iterations;
    if (s.value < best.value) best = s;
    if (detail::small_change(before, best.value, opt.rel_tol) && round > 0) {
      best.converged = true;
      break;
    }
  }
  best.iterations = total_iter;
  best.grad_norm = detail::gradient(f, &grad, best.x, opt.fd_step).norm();
  return best;
}

}  // namespace spwarp

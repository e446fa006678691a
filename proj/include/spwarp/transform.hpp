#pragma once

// Invertible response transformations: Box-Cox, sinh-arcsinh-linear (SAL),
// started-log for counts, and affine standardization, composed into a chain.

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "spwarp/error.hpp"

namespace spwarp {

enum class YType { continuous, count };

/// Declarative transformation regime, one key per `nongauss_y`-style argument.
struct TransformSpec {
  YType y_type = YType::continuous;
  bool y_nonneg = false;
  int tr_num = 0;  // number of SAL layers

  void validate() const {
    if (tr_num < 0) throw config_error("tr_num must be non-negative");
  }

  bool is_count() const noexcept { return y_type == YType::count; }
  bool has_boxcox() const noexcept { return !is_count() && y_nonneg; }
  bool is_gaussian() const noexcept { return !is_count() && !y_nonneg && tr_num == 0; }

  /// Regime letter: (a) Box-Cox, (b) SAL, (c) Box-Cox+SAL, (d) count, (e) count+SAL;
  /// 'g' for the untransformed Gaussian model.
  char regime() const noexcept {
    if (is_count()) return tr_num == 0 ? 'd' : 'e';
    if (y_nonneg) return tr_num == 0 ? 'a' : 'c';
    return tr_num == 0 ? 'g' : 'b';
  }
};

// ---------------------------------------------------------------- Box-Cox

inline double boxcox_forward(double y, double lambda) {
  if (!(y >= 0.0)) throw data_error("Box-Cox requires non-negative y");
  if (y == 0.0 && lambda <= 0.0) throw data_error("Box-Cox requires y > 0 when lambda <= 0");
  if (lambda == 0.0) return std::log(y);
  return std::expm1(lambda * std::log(y)) / lambda;
}

inline double boxcox_log_deriv(double y, double lambda) {
  return (lambda - 1.0) * std::log(y);
}

/// Inverse Box-Cox. Arguments outside the image of the forward map are
/// clamped to the boundary; `clamped` is set when that happens.
inline double boxcox_inverse(double z, double lambda, bool* clamped = nullptr) {
  if (lambda == 0.0) return std::exp(z);
  double base = 1.0 + lambda * z;
  constexpr double floor = std::numeric_limits<double>::epsilon();
  if (base < floor) {
    if (clamped) *clamped = true;
    if (lambda > 0.0) return 0.0;
    base = floor;
  }
  return std::exp(std::log(base) / lambda);
}

// ---------------------------------------------------------------- SAL

struct SALParams {
  double theta1 = 0.0;  // location
  double theta2 = 1.0;  // scale, > 0
  double theta3 = 1.0;  // tail, > 0
  double theta4 = 0.0;  // skew

  void validate() const {
    if (!(theta2 > 0.0) || !(theta3 > 0.0))
      throw config_error("SAL parameters require theta2 > 0 and theta3 > 0");
  }
};

inline double sal_forward(double y, const SALParams& p) {
  return p.theta1 + p.theta2 * std::sinh(p.theta3 * std::asinh(y) - p.theta4);
}

inline double sal_inverse(double z, const SALParams& p) {
  return std::sinh((std::asinh((z - p.theta1) / p.theta2) + p.theta4) / p.theta3);
}

namespace detail {
// log(cosh(a)) without overflow
inline double log_cosh(double a) {
  const double t = std::abs(a);
  return t + std::log1p(std::exp(-2.0 * t)) - std::log(2.0);
}
}  // namespace detail

inline double sal_log_deriv(double y, const SALParams& p) {
  return std::log(p.theta2) + std::log(p.theta3) +
         detail::log_cosh(p.theta3 * std::asinh(y) - p.theta4) - 0.5 * std::log1p(y * y);
}

inline double sal_deriv(double y, const SALParams& p) { return std::exp(sal_log_deriv(y, p)); }

// ---------------------------------------------------------------- counts

inline constexpr double kDefaultCountDelta = 0.5;

inline double count_forward(double y, double delta = kDefaultCountDelta) {
  if (!(y >= 0.0)) throw data_error("count response must be non-negative");
  return std::log(y + delta);
}

inline double count_inverse(double z, double delta = kDefaultCountDelta, bool* clamped = nullptr) {
  const double y = std::exp(z) - delta;
  if (y < 0.0) {
    if (clamped) *clamped = true;
    return 0.0;
  }
  return y;
}

// ---------------------------------------------------------------- chain

struct BoxCoxLayer {
  double lambda = 1.0;
};

/// log(y + delta) - log(offset); the offset is supplied per observation.
struct CountLogLayer {
  double delta = kDefaultCountDelta;
};

struct StandardizeLayer {
  double mean = 0.0;
  double sd = 1.0;
};

struct SALLayer {
  SALParams params;
  bool fixed_affine = false;  // theta1 = 0, theta2 = 1 held fixed
};

using TransformLayer = std::variant<BoxCoxLayer, CountLogLayer, StandardizeLayer, SALLayer>;

/// Result of pushing one value through a chain.
struct ForwardValue {
  double z = 0.0;
  double log_deriv = 0.0;       // sum over all layers
  double count_log_deriv = 0.0; // contribution of the count layer alone
};

class TransformChain {
 public:
  TransformChain() = default;
  explicit TransformChain(std::vector<TransformLayer> layers) : layers_(std::move(layers)) {}

  const std::vector<TransformLayer>& layers() const noexcept { return layers_; }
  bool empty() const noexcept { return layers_.empty(); }
  void push_back(TransformLayer l) { layers_.push_back(std::move(l)); }

  ForwardValue forward_one(double y, double log_offset = 0.0) const {
    ForwardValue out{y, 0.0, 0.0};
    for (const auto& layer : layers_) {
      std::visit(
          [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            double& v = out.z;
            if constexpr (std::is_same_v<L, BoxCoxLayer>) {
              out.log_deriv += boxcox_log_deriv(v, l.lambda);
              v = boxcox_forward(v, l.lambda);
            } else if constexpr (std::is_same_v<L, CountLogLayer>) {
              const double ld = -std::log(v + l.delta);
              out.log_deriv += ld;
              out.count_log_deriv += ld;
              v = count_forward(v, l.delta) - log_offset;
            } else if constexpr (std::is_same_v<L, StandardizeLayer>) {
              out.log_deriv -= std::log(l.sd);
              v = (v - l.mean) / l.sd;
            } else {
              out.log_deriv += sal_log_deriv(v, l.params);
              v = sal_forward(v, l.params);
            }
          },
          layer);
    }
    return out;
  }

  double forward(double y, double log_offset = 0.0) const { return forward_one(y, log_offset).z; }

  double inverse(double z, double log_offset = 0.0, bool* clamped = nullptr) const {
    double v = z;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
      std::visit(
          [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, BoxCoxLayer>) {
              v = boxcox_inverse(v, l.lambda, clamped);
            } else if constexpr (std::is_same_v<L, CountLogLayer>) {
              v = count_inverse(v + log_offset, l.delta, clamped);
            } else if constexpr (std::is_same_v<L, StandardizeLayer>) {
              v = v * l.sd + l.mean;
            } else {
              v = sal_inverse(v, l.params);
            }
          },
          *it);
    }
    return v;
  }

  /// d inverse / dz, the chain-rule factor for marginal effects.
  double inverse_deriv(double z, double log_offset = 0.0) const {
    // Walk backwards collecting the input of every layer, then sum forward log-derivatives.
    std::vector<double> inputs(layers_.size());
    double v = z;
    double log_d = 0.0;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      std::visit(
          [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, BoxCoxLayer>) {
              v = boxcox_inverse(v, l.lambda);
              log_d += boxcox_log_deriv(v, l.lambda);
            } else if constexpr (std::is_same_v<L, CountLogLayer>) {
              // d/dz of exp(z + off) - delta
              log_d -= v + log_offset;
              v = count_inverse(v + log_offset, l.delta);
            } else if constexpr (std::is_same_v<L, StandardizeLayer>) {
              v = v * l.sd + l.mean;
              log_d -= std::log(l.sd);
            } else {
              v = sal_inverse(v, l.params);
              log_d += sal_log_deriv(v, l.params);
            }
          },
          layers_[k]);
    }
    return std::exp(-log_d);
  }

  /// Free parameters: 1 per Box-Cox, 4 per SAL layer (2 when its affine part is fixed).
  int free_parameter_count() const noexcept {
    int p = 0;
    for (const auto& layer : layers_) {
      if (std::holds_alternative<BoxCoxLayer>(layer)) p += 1;
      if (const auto* s = std::get_if<SALLayer>(&layer)) p += s->fixed_affine ? 2 : 4;
    }
    return p;
  }

  const BoxCoxLayer* boxcox() const noexcept {
    for (const auto& layer : layers_)
      if (const auto* b = std::get_if<BoxCoxLayer>(&layer)) return b;
    return nullptr;
  }

  const CountLogLayer* count_log() const noexcept {
    for (const auto& layer : layers_)
      if (const auto* c = std::get_if<CountLogLayer>(&layer)) return c;
    return nullptr;
  }

 private:
  std::vector<TransformLayer> layers_;
};

struct ChainOutput {
  std::vector<double> z;
  double log_jacobian = 0.0;
};

inline ChainOutput chain_forward(std::span<const double> y, const TransformChain& chain,
                                 std::span<const double> log_offset = {}) {
  ChainOutput out;
  out.z.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto f = chain.forward_one(y[i], log_offset.empty() ? 0.0 : log_offset[i]);
    out.z[i] = f.z;
    out.log_jacobian += f.log_deriv;
  }
  return out;
}

inline std::vector<double> chain_inverse(std::span<const double> z, const TransformChain& chain,
                                         std::span<const double> log_offset = {},
                                         std::vector<char>* clamped = nullptr) {
  std::vector<double> y(z.size());
  if (clamped) clamped->assign(z.size(), 0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    bool c = false;
    y[i] = chain.inverse(z[i], log_offset.empty() ? 0.0 : log_offset[i], &c);
    if (clamped) (*clamped)[i] = c;
  }
  return y;
}

inline double chain_inverse_deriv(double z, const TransformChain& chain, double log_offset = 0.0) {
  return chain.inverse_deriv(z, log_offset);
}

}  // namespace spwarp

#pragma once

// Profiled restricted likelihood of the mixed model
//   z = X b + Z S v + e,   v ~ N(0, s2 I),  e ~ N(0, s2 W^-1)
// where S = diag(scales) carries every variance-component parameter.

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spwarp/error.hpp"

namespace spwarp {

enum class BlockKind { spatial, nvc, group };

inline const char* to_string(BlockKind k) {
  switch (k) {
    case BlockKind::spatial: return "spatial";
    case BlockKind::nvc: return "nvc";
    case BlockKind::group: return "group";
  }
  return "unknown";
}

/// A contiguous run of random-coefficient columns sharing one variance model.
struct RandomBlock {
  BlockKind kind = BlockKind::spatial;
  std::string label;
  int covariate = -1;          // index into the varying-coefficient covariates; -1 for groups
  Eigen::Index offset = 0;     // first column inside Z
  Eigen::Index size = 0;
  Eigen::VectorXd eigenvalues; // spatial blocks only

  bool has_alpha() const noexcept { return kind == BlockKind::spatial; }
};

/// Per-coefficient scales tau * sqrt(lambda^alpha * sum(lambda) / sum(lambda^alpha)).
inline Eigen::VectorXd spatial_scales(const Eigen::VectorXd& eigenvalues, double tau, double alpha) {
  const Eigen::ArrayXd a = alpha * eigenvalues.array().log();
  const Eigen::ArrayXd w = (a - a.maxCoeff()).exp();
  const Eigen::ArrayXd evv = w * (eigenvalues.sum() / w.sum());
  return (tau * evv.sqrt()).matrix();
}

struct REMLSolution {
  double neg2_loglik = std::numeric_limits<double>::infinity();
  Eigen::VectorXd coef;  // [b; v]
  double dd = 0.0;       // z'Wz - coef'm (penalized residual sum of squares)
  double sigma2 = 0.0;   // dd / (n - p)
  Eigen::MatrixXd m_inverse;
};

class MixedModelDesign {
 public:
  MixedModelDesign() = default;

  MixedModelDesign(Eigen::MatrixXd x, Eigen::MatrixXd z, Eigen::VectorXd weights)
      : n_(x.rows()), p_(x.cols()), q_(z.cols()), weights_(std::move(weights)) {
    if (weights_.size() == 0) weights_ = Eigen::VectorXd::Ones(n_);
    sqrt_w_ = weights_.array().sqrt().matrix();
    a_.resize(n_, p_ + q_);
    a_ << x, z;
    aw_ = sqrt_w_.asDiagonal() * a_;
    ata_ = aw_.transpose() * aw_;
    sum_log_w_ = weights_.array().log().sum();
  }

  Eigen::Index n() const noexcept { return n_; }
  Eigen::Index p() const noexcept { return p_; }
  Eigen::Index q() const noexcept { return q_; }
  const Eigen::MatrixXd& design() const noexcept { return a_; }
  const Eigen::VectorXd& weights() const noexcept { return weights_; }

  /// -2 * restricted log-likelihood of z for the given random-effect scales.
  double neg2_loglik(const Eigen::VectorXd& z, const Eigen::VectorXd& scales) const {
    Eigen::MatrixXd m;
    Eigen::VectorXd rhs;
    double ztz = 0.0;
    assemble(z, scales, m, rhs, ztz);
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Eigen::VectorXd b = llt.solve(rhs);
    const double dd = ztz - b.dot(rhs);
    return finish(llt, dd);
  }

  /// d neg2_loglik / dz at fixed scales: 2 (n - p) / dd * W (z - fitted).
  Eigen::VectorXd neg2_loglik_gradient(const Eigen::VectorXd& z, const Eigen::VectorXd& scales) const {
    Eigen::MatrixXd m;
    Eigen::VectorXd rhs;
    double ztz = 0.0;
    assemble(z, scales, m, rhs, ztz);
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw numeric_error("mixed-model normal matrix is not positive definite");
    const Eigen::VectorXd b = llt.solve(rhs);
    const double dd = ztz - b.dot(rhs);
    Eigen::VectorXd d(p_ + q_);
    d << Eigen::VectorXd::Ones(p_), scales;
    const Eigen::VectorXd fitted = a_ * d.cwiseProduct(b);
    return (2.0 * static_cast<double>(n_ - p_) / dd) * weights_.cwiseProduct(z - fitted);
  }

  REMLSolution solve(const Eigen::VectorXd& z, const Eigen::VectorXd& scales) const {
    Eigen::MatrixXd m;
    Eigen::VectorXd rhs;
    double ztz = 0.0;
    assemble(z, scales, m, rhs, ztz);
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
      throw numeric_error("mixed-model normal matrix is not positive definite");
    REMLSolution s;
    s.coef = llt.solve(rhs);
    s.dd = ztz - s.coef.dot(rhs);
    s.sigma2 = s.dd / static_cast<double>(n_ - p_);
    s.neg2_loglik = finish(llt, s.dd);
    s.m_inverse = llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
    return s;
  }

 private:
  void assemble(const Eigen::VectorXd& z, const Eigen::VectorXd& scales, Eigen::MatrixXd& m,
                Eigen::VectorXd& rhs, double& ztz) const {
    Eigen::VectorXd d(p_ + q_);
    d << Eigen::VectorXd::Ones(p_), scales;
    const Eigen::VectorXd zw = sqrt_w_.cwiseProduct(z);
    m = d.asDiagonal() * ata_ * d.asDiagonal();
    m.diagonal().tail(q_).array() += 1.0;
    rhs = d.cwiseProduct(aw_.transpose() * zw);
    ztz = zw.squaredNorm();
  }

  double finish(const Eigen::LLT<Eigen::MatrixXd>& llt, double dd) const {
    if (!(dd > 0.0)) return std::numeric_limits<double>::infinity();
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double dof = static_cast<double>(n_ - p_);
    return log_det + dof * (1.0 + std::log(2.0 * std::numbers::pi * dd / dof)) - sum_log_w_;
  }

  Eigen::Index n_ = 0, p_ = 0, q_ = 0;
  Eigen::VectorXd weights_, sqrt_w_;
  Eigen::MatrixXd a_, aw_, ata_;
  double sum_log_w_ = 0.0;
};

/// Names of columns that are linear combinations of earlier columns.
inline std::vector<std::string> collinear_columns(const Eigen::MatrixXd& x,
                                                  const std::vector<std::string>& names) {
  std::vector<std::string> bad;
  Eigen::MatrixXd kept(x.rows(), 0);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Eigen::MatrixXd trial(x.rows(), kept.cols() + 1);
    trial << kept, x.col(j);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
    qr.setThreshold(1e-10);
    if (qr.rank() < trial.cols()) {
      bad.push_back(names[static_cast<std::size_t>(j)]);
    } else {
      kept = std::move(trial);
    }
  }
  return bad;
}

}  // namespace spwarp

#pragma once

// Spatial proximity matrices and the Moran eigenvector basis built from them.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spwarp/error.hpp"

namespace spwarp {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Planar site coordinates with optional labels.
class CoordinateSet {
 public:
  CoordinateSet() = default;
  explicit CoordinateSet(std::vector<Point> sites, std::vector<std::string> ids = {})
      : sites_(std::move(sites)), ids_(std::move(ids)) {
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      if (!std::isfinite(sites_[i].x) || !std::isfinite(sites_[i].y))
        throw data_error("non-finite coordinate at site " + std::to_string(i));
    }
    if (!ids_.empty() && ids_.size() != sites_.size())
      throw data_error("site_id count does not match coordinate count");
  }

  std::size_t size() const noexcept { return sites_.size(); }
  bool empty() const noexcept { return sites_.empty(); }
  const Point& operator[](std::size_t i) const { return sites_[i]; }
  const std::vector<Point>& sites() const noexcept { return sites_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::vector<Point> sites_;
  std::vector<std::string> ids_;
};

enum class ProximityKind { exponential_kernel, binary_contiguity, user_supplied };

inline const char* to_string(ProximityKind k) {
  switch (k) {
    case ProximityKind::exponential_kernel: return "exponential_kernel";
    case ProximityKind::binary_contiguity: return "binary_contiguity";
    case ProximityKind::user_supplied: return "user_supplied";
  }
  return "unknown";
}

inline ProximityKind proximity_kind_from_string(const std::string& s) {
  if (s == "exponential_kernel") return ProximityKind::exponential_kernel;
  if (s == "binary_contiguity") return ProximityKind::binary_contiguity;
  if (s == "user_supplied") return ProximityKind::user_supplied;
  throw data_error("unknown proximity kind '" + s + "'");
}

/// Symmetric, non-negative, zero-diagonal proximity among N sites.
struct ProximityMatrix {
  Eigen::MatrixXd values;
  ProximityKind kind = ProximityKind::user_supplied;
  double range = 0.0;                  // kernel range r; 0 for adjacency
  std::vector<Point> coords;           // training coordinates (kernel only)
  std::vector<std::string> site_ids;   // zone labels (adjacency only)

  Eigen::Index size() const noexcept { return values.rows(); }
};

/// Length of the longest edge of the Euclidean minimum spanning tree (Prim, O(N^2)).
inline double mst_longest_edge(const std::vector<Point>& pts) {
  const std::size_t n = pts.size();
  if (n < 2) return 0.0;
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<char> in_tree(n, 0);
  best[0] = 0.0;
  double longest = 0.0;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t u = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!in_tree[i] && (u == n || best[i] < best[u])) u = i;
    in_tree[u] = 1;
    longest = std::max(longest, best[u]);
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      best[v] = std::min(best[v], distance(pts[u], pts[v]));
    }
  }
  return longest;
}

/// exp(-d_ij / r) with r the longest MST edge; zero diagonal.
inline ProximityMatrix build_kernel_proximity(const CoordinateSet& coords) {
  const auto n = static_cast<Eigen::Index>(coords.size());
  if (n < 2) throw data_error("at least 2 sites are required");
  const double r = mst_longest_edge(coords.sites());
  if (!(r > 0.0)) throw data_error("degenerate geometry: all sites share one location");

  ProximityMatrix p;
  p.kind = ProximityKind::exponential_kernel;
  p.range = r;
  p.coords = coords.sites();
  p.site_ids = coords.ids();
  p.values.setZero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = std::exp(-distance(coords[i], coords[j]) / r);
      p.values(i, j) = v;
      p.values(j, i) = v;
    }
  }
  return p;
}

namespace detail {

inline void validate_square_symmetric(const Eigen::MatrixXd& m, bool binary) {
  if (m.rows() != m.cols()) throw data_error("proximity matrix must be square");
  if (m.rows() < 2) throw data_error("at least 2 sites are required");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (m(i, i) != 0.0)
      throw data_error("nonzero diagonal at index " + std::to_string(i));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      if (!std::isfinite(v) || v < 0.0)
        throw data_error("invalid entry at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      if (binary && v != 0.0 && v != 1.0)
        throw data_error("non-binary entry at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      if (std::abs(v - m(j, i)) > 1e-12 * scale)
        throw data_error("asymmetry at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
    }
  }
}

}  // namespace detail

inline ProximityMatrix build_contiguity_proximity(Eigen::MatrixXd adjacency,
                                                  std::vector<std::string> site_ids = {}) {
  detail::validate_square_symmetric(adjacency, true);
  if (!site_ids.empty() && static_cast<Eigen::Index>(site_ids.size()) != adjacency.rows())
    throw data_error("site_id count does not match adjacency size");
  ProximityMatrix p;
  p.kind = ProximityKind::binary_contiguity;
  p.values = std::move(adjacency);
  p.site_ids = std::move(site_ids);
  return p;
}

inline ProximityMatrix build_user_proximity(Eigen::MatrixXd weights,
                                            std::vector<std::string> site_ids = {}) {
  detail::validate_square_symmetric(weights, false);
  ProximityMatrix p;
  p.kind = ProximityKind::user_supplied;
  p.values = std::move(weights);
  p.site_ids = std::move(site_ids);
  return p;
}

/// Moran eigenvectors (columns) and their positive eigenvalues, descending.
struct EigenBasis {
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;
  ProximityKind kind = ProximityKind::user_supplied;
  double range = 0.0;
  std::vector<Point> coords;
  Eigen::VectorXd column_means;  // column means of the uncentered proximity
  std::vector<std::string> site_ids;
  /// sum(1' C 1) / N, used for the Moran's I scale
  double proximity_sum = 0.0;

  Eigen::Index sites() const noexcept { return vectors.rows(); }
  Eigen::Index rank() const noexcept { return vectors.cols(); }
};

/// Default keeps every eigenpair with a positive eigenvalue.
inline constexpr double kDefaultBasisThreshold = 0.0;

inline EigenBasis extract_basis(const ProximityMatrix& prox,
                                double threshold = kDefaultBasisThreshold) {
  if (!(threshold >= 0.0 && threshold < 1.0))
    throw config_error("basis threshold must lie in [0, 1)");
  const Eigen::Index n = prox.size();
  const Eigen::MatrixXd& c = prox.values;

  const Eigen::VectorXd col_means = c.colwise().mean().transpose();
  const double grand = col_means.mean();
  Eigen::MatrixXd mcm = c;
  mcm.rowwise() -= col_means.transpose();
  mcm.colwise() -= col_means;
  mcm.array() += grand;
  mcm = 0.5 * (mcm + mcm.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mcm);
  if (es.info() != Eigen::Success) throw numeric_error("eigendecomposition failed");

  // Eigen returns ascending order.
  Eigen::VectorXd lambda = es.eigenvalues().reverse();
  Eigen::MatrixXd vecs = es.eigenvectors().rowwise().reverse();
  for (Eigen::Index l = 0; l < n; ++l)
    if (std::abs(lambda(l)) < 1e-8) lambda(l) = 0.0;
  if (!(lambda(0) > 0.0)) throw numeric_error("no positive spatial dependence");

  Eigen::Index keep = 0;
  while (keep < n && lambda(keep) > 0.0 && lambda(keep) / lambda(0) >= threshold) ++keep;

  EigenBasis b;
  b.vectors = vecs.leftCols(keep);
  b.values = lambda.head(keep);
  for (Eigen::Index l = 0; l < keep; ++l) {
    Eigen::Index imax = 0;
    b.vectors.col(l).cwiseAbs().maxCoeff(&imax);
    if (b.vectors(imax, l) < 0.0) b.vectors.col(l) *= -1.0;
  }
  b.kind = prox.kind;
  b.range = prox.range;
  b.coords = prox.coords;
  b.site_ids = prox.site_ids;
  b.column_means = col_means;
  b.proximity_sum = c.sum();
  return b;
}

/// Moran eigenvectors evaluated at out-of-sample sites.
struct ExtendedBasis {
  Eigen::MatrixXd vectors0;
  Eigen::VectorXd values;
};

/// Nystrom extension of a kernel basis to new coordinates.
inline ExtendedBasis extend_basis(const EigenBasis& basis, const CoordinateSet& coords0) {
  if (basis.kind != ProximityKind::exponential_kernel)
    throw config_error("extension requires kernel basis");
  if (coords0.empty()) throw data_error("no prediction sites");
  const auto m = static_cast<Eigen::Index>(coords0.size());
  const auto n = static_cast<Eigen::Index>(basis.coords.size());

  Eigen::MatrixXd c0(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = distance(coords0[static_cast<std::size_t>(i)], basis.coords[static_cast<std::size_t>(j)]);
      c0(i, j) = std::exp(-d / basis.range);
    }
  }
  c0.rowwise() -= basis.column_means.transpose();

  // The cross kernel keeps exp(0) = 1 at coincident sites, so it extends the
  // unit-diagonal kernel whose centred eigenvalues are lambda + 1. This is
  // exact at training sites and continuous around them.
  ExtendedBasis out;
  out.vectors0 = c0 * basis.vectors;
  out.vectors0.array().rowwise() /= (basis.values.array() + 1.0).transpose();
  out.values = basis.values;
  return out;
}

}  // namespace spwarp

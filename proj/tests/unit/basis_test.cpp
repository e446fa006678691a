#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "spwarp/proximity_basis.hpp"

using namespace spwarp;

namespace {

std::vector<Point> to_points(const std::vector<std::pair<double, double>>& s) {
  std::vector<Point> p;
  for (const auto& [x, y] : s) p.push_back({x, y});
  return p;
}

// Longest edge of the minimum spanning tree via Kruskal over all pairs.
double kruskal_longest(const std::vector<Point>& p) {
  const std::size_t n = p.size();
  std::vector<std::tuple<double, std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(distance(p[i], p[j]), i, j);
  std::sort(edges.begin(), edges.end());
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  double longest = 0.0;
  for (const auto& [d, i, j] : edges) {
    const auto a = find(i), b = find(j);
    if (a == b) continue;
    parent[a] = b;
    longest = d;
  }
  return longest;
}

}  // namespace

TEST(Kernel, RangeIsLongestSpanningTreeEdge) {
  std::mt19937_64 g(3);
  const auto pts = to_points(oracle::random_sites(g, 40, 10.0));
  EXPECT_NEAR(mst_longest_edge(pts), kruskal_longest(pts), 1e-12);
}

TEST(Kernel, ZeroDiagonalAndSymmetric) {
  std::mt19937_64 g(4);
  const auto prox = build_kernel_proximity(CoordinateSet(to_points(oracle::random_sites(g, 25))));
  EXPECT_EQ(prox.kind, ProximityKind::exponential_kernel);
  for (Eigen::Index i = 0; i < prox.size(); ++i) {
    EXPECT_EQ(prox.values(i, i), 0.0);
    for (Eigen::Index j = 0; j < i; ++j) {
      EXPECT_EQ(prox.values(i, j), prox.values(j, i));
      const double d = distance(prox.coords[static_cast<std::size_t>(i)], prox.coords[static_cast<std::size_t>(j)]);
      EXPECT_NEAR(prox.values(i, j), std::exp(-d / prox.range), 1e-15);
    }
  }
}

TEST(Kernel, RejectsNonFiniteCoordinates) {
  EXPECT_THROW(CoordinateSet({{0.0, 0.0}, {std::numeric_limits<double>::quiet_NaN(), 1.0}}), Error);
}

TEST(Basis, MatchesJacobiOracle) {
  std::mt19937_64 g(5);
  const auto prox = build_kernel_proximity(CoordinateSet(to_points(oracle::random_sites(g, 30))));
  const auto b = extract_basis(prox);
  const auto ref = oracle::jacobi_eigen(oracle::double_center(prox.values));
  ASSERT_GT(b.rank(), 0);
  for (Eigen::Index l = 0; l < b.rank(); ++l) {
    EXPECT_NEAR(b.values(l), ref.values(l), 1e-10);
    // sign-free comparison through the projector
    const double dot = std::abs(b.vectors.col(l).dot(ref.vectors.col(l)));
    EXPECT_NEAR(dot, 1.0, 1e-8);
  }
  // every kept eigenvalue is positive, every dropped one is not
  if (b.rank() < 30) EXPECT_LE(ref.values(b.rank()), 1e-8);
}

TEST(Basis, VectorsAreOrthonormalAndCentred) {
  std::mt19937_64 g(6);
  const auto b = extract_basis(build_kernel_proximity(CoordinateSet(to_points(oracle::random_sites(g, 35)))));
  const Eigen::MatrixXd gram = b.vectors.transpose() * b.vectors;
  EXPECT_TRUE(gram.isApprox(Eigen::MatrixXd::Identity(b.rank(), b.rank()), 1e-10));
  EXPECT_LT(b.vectors.colwise().sum().cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Basis, ThresholdKeepsLargeRatiosOnly) {
  std::mt19937_64 g(8);
  const auto prox = build_kernel_proximity(CoordinateSet(to_points(oracle::random_sites(g, 40))));
  const auto all = extract_basis(prox, 0.0);
  const auto some = extract_basis(prox, 0.25);
  ASSERT_LT(some.rank(), all.rank());
  for (Eigen::Index l = 0; l < some.rank(); ++l) EXPECT_GE(some.values(l) / some.values(0), 0.25);
  EXPECT_LT(all.values(some.rank()) / all.values(0), 0.25);
  EXPECT_THROW(extract_basis(prox, 1.0), Error);
  EXPECT_THROW(extract_basis(prox, -0.1), Error);
}

TEST(Contiguity, LatticeBasis) {
  const auto adj = oracle::rook_lattice(5, 4, 20);
  const auto b = extract_basis(build_contiguity_proximity(adj));
  const auto ref = oracle::jacobi_eigen(oracle::double_center(adj));
  for (Eigen::Index l = 0; l < b.rank(); ++l) EXPECT_NEAR(b.values(l), ref.values(l), 1e-10);
  EXPECT_EQ(b.kind, ProximityKind::binary_contiguity);
}

TEST(Contiguity, RejectsMalformedMatrices) {
  Eigen::MatrixXd a = oracle::rook_lattice(3, 3, 9);
  Eigen::MatrixXd asym = a;
  asym(0, 1) = 0.0;
  EXPECT_THROW(build_contiguity_proximity(asym), Error);
  Eigen::MatrixXd nonbinary = a;
  nonbinary(0, 1) = nonbinary(1, 0) = 0.5;
  EXPECT_THROW(build_contiguity_proximity(nonbinary), Error);
  EXPECT_THROW(build_contiguity_proximity(Eigen::MatrixXd::Zero(3, 4)), Error);
  EXPECT_NO_THROW(build_user_proximity(nonbinary));
}

TEST(Contiguity, NoDependenceIsNumericError) {
  EXPECT_THROW(extract_basis(build_contiguity_proximity(Eigen::MatrixXd::Zero(4, 4))), Error);
}

TEST(Extension, ExactAtTrainingSites) {
  std::mt19937_64 g(9);
  const auto pts = to_points(oracle::random_sites(g, 30));
  const auto b = extract_basis(build_kernel_proximity(CoordinateSet(pts)));
  const auto e = extend_basis(b, CoordinateSet(pts));
  EXPECT_LT((e.vectors0 - b.vectors).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Extension, ContinuousNearTrainingSites) {
  std::mt19937_64 g(10);
  const auto pts = to_points(oracle::random_sites(g, 30));
  const auto b = extract_basis(build_kernel_proximity(CoordinateSet(pts)));
  const Point near{pts[0].x + 1e-7, pts[0].y};
  const auto e = extend_basis(b, CoordinateSet({near}));
  EXPECT_LT((e.vectors0.row(0) - b.vectors.row(0)).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Extension, RequiresKernelBasis) {
  const auto b = extract_basis(build_contiguity_proximity(oracle::rook_lattice(3, 3, 9)));
  EXPECT_THROW(extend_basis(b, CoordinateSet({{0.0, 0.0}})), Error);
  try {
    extend_basis(b, CoordinateSet({{0.0, 0.0}}));
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    EXPECT_STREQ(e.what(), "extension requires kernel basis");
  }
}

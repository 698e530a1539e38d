#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "avm/geometry.hpp"
#include "avm/types.hpp"

namespace avm::basis {

/// Matern-3/2 correlation at distance d with range rho.
double matern32(double d, double rho);

struct KernelConfig {
  double rho = 0;  // range in metres; 0 -> median pairwise knot distance
};

/// One design-matrix block plus its quadratic penalty. Blocks are built on
/// training data and keep enough metadata to evaluate basis rows for new
/// covariate values. Centering (sum-to-zero over the training rows) is a
/// Householder reparameterization stored as the reflector vector, so applying
/// it to a row costs O(k).
struct BasisBlock {
  enum class Kind { Crs, PSpline, Gp, Mrf };
  Kind kind = Kind::Crs;
  std::string label;

  Eigen::MatrixXd design;   // n x width(), current parameterization
  Eigen::MatrixXd penalty;  // width() x width(), symmetric PSD

  // raw-basis metadata
  Eigen::VectorXd knots;        // Crs: knot values; PSpline: extended knot grid
  int pspline_dim = 0;          // PSpline basis dimension k
  Eigen::MatrixXd knot_coords;  // Gp: k x 2 (metres)
  double rho = 0;               // Gp kernel range
  int num_regions = 0;          // Mrf
  Eigen::MatrixXd crs_moments;  // Crs: maps knot values -> second derivatives

  // centering reflector; empty while uncentered
  Eigen::VectorXd householder_u;

  int raw_dim() const;
  int width() const { return static_cast<int>(penalty.cols()); }
  bool centered() const { return householder_u.size() > 0; }

  /// Raw (uncentered) basis row for a scalar covariate value (Crs/PSpline).
  Eigen::RowVectorXd eval_raw(double value) const;
  /// Raw basis row at a projected location (Gp).
  Eigen::RowVectorXd eval_raw_xy(double x, double y) const;
  /// Raw indicator row for a region (Mrf).
  Eigen::RowVectorXd eval_raw_region(int region) const;

  /// Applies the centering reparameterization to a raw row (identity when
  /// uncentered).
  Eigen::RowVectorXd to_current(const Eigen::RowVectorXd& raw) const;
};

/// Cardinal natural cubic regression spline on k knots placed at evenly
/// spaced quantiles of the distinct values. Basis function j is 1 at knot j
/// and 0 at the others; the penalty is the exact integrated squared second
/// derivative. Fewer distinct values than knots reduces k with a warning.
BasisBlock crs_basis(const std::vector<double>& values, int k,
                     std::vector<std::string>* warnings = nullptr);

/// Degree-3 B-spline basis of dimension k on an evenly spaced extended knot
/// grid over [min, max], with the order-2 difference penalty D'D.
BasisBlock pspline_basis(const std::vector<double>& values, int k,
                         std::vector<std::string>* warnings = nullptr);

/// Order-2 difference operator, (k-2) x k.
Eigen::MatrixXd second_difference_matrix(int k);

/// Natural-spline moment map for a CRS knot vector: second derivatives at
/// the knots as a linear function of the knot values. Pure in the knots, so
/// deserialized blocks rebuild it exactly.
Eigen::MatrixXd crs_moment_map(const Eigen::VectorXd& knots);

/// k space-filling knots: centroids of a fixed-seed k-means (k-means++ init,
/// Lloyd relocation) over the training coordinates, sorted lexicographically.
Eigen::MatrixXd select_knots_spacefilling(const Eigen::MatrixXd& coords, int k,
                                          std::uint64_t seed = 42,
                                          std::vector<std::string>* warnings = nullptr);

/// Matern-3/2 Gram matrix over knots with diagonal jitter.
Eigen::MatrixXd matern_gram(const Eigen::MatrixXd& knot_coords, double rho,
                            double jitter = 1e-8);

/// Low-rank kriging block: design(i,j) = matern32(||coord_i - knot_j||),
/// penalty = knot Gram matrix. Returned zero-centered.
BasisBlock gp_basis(const Eigen::MatrixXd& coords,
                    const Eigen::MatrixXd& knot_coords, KernelConfig kernel);

/// Graph Laplacian (degree on diagonal, -1 per edge) of an adjacency list.
Eigen::MatrixXd graph_laplacian(const std::vector<std::vector<int>>& adjacency);

/// Region-indicator block penalized by the Laplacian of the second-order
/// neighbourhood graph. Returned zero-centered.
BasisBlock mrf_basis(const std::vector<int>& region_ids,
                     const geo::RegionGraph& graph);

/// Sum-to-zero reparameterization over the training rows: absorbs the
/// column-sum constraint via an orthonormal Householder complement and
/// transforms the penalty congruently.
BasisBlock center_block(BasisBlock block);

}  // namespace avm::basis

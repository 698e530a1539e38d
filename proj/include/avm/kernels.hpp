#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace avm::kernels {

// Data-parallel cores of the pipeline. Each kernel has a serial reference
// (*_serial) and an OpenMP version that must produce bit-identical output:
// every parallel loop computes whole output elements per iteration, so no
// floating-point reduction order depends on the thread count.
// tools/bench_kernels compares the two.

/// X^T X. Each upper-triangle entry is one column dot product.
Eigen::MatrixXd crossprod_serial(const Eigen::MatrixXd& X);
Eigen::MatrixXd crossprod(const Eigen::MatrixXd& X);

/// X^T y, one dot product per output element.
Eigen::VectorXd crossprod_vec_serial(const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& y);
Eigen::VectorXd crossprod_vec(const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y);

/// Matern-3/2 design: out(i, j) = (1 + sqrt(3) d/rho) exp(-sqrt(3) d/rho)
/// with d = ||points.row(i) - knots.row(j)||. Row-parallel.
Eigen::MatrixXd matern_design_serial(const Eigen::MatrixXd& points,
                                     const Eigen::MatrixXd& knots, double rho);
Eigen::MatrixXd matern_design(const Eigen::MatrixXd& points,
                              const Eigen::MatrixXd& knots, double rho);

/// Solves L Z = B for lower-triangular L, column-parallel.
Eigen::MatrixXd forward_solve_multi_serial(const Eigen::MatrixXd& L,
                                           const Eigen::MatrixXd& B);
Eigen::MatrixXd forward_solve_multi(const Eigen::MatrixXd& L,
                                    const Eigen::MatrixXd& B);

/// Solves L^T Z = B, column-parallel.
Eigen::MatrixXd backward_solve_multi_serial(const Eigen::MatrixXd& L,
                                            const Eigen::MatrixXd& B);
Eigen::MatrixXd backward_solve_multi(const Eigen::MatrixXd& L,
                                     const Eigen::MatrixXd& B);

/// k nearest neighbours of each row of coords (n x 2), excluding itself.
/// Brute force, row-parallel; ties broken by index. Returns n x k index and
/// distance arrays.
struct KnnResult {
  std::vector<std::vector<int>> index;
  std::vector<std::vector<double>> distance;
};
KnnResult knn_serial(const Eigen::MatrixXd& coords, int k);
KnnResult knn(const Eigen::MatrixXd& coords, int k);

}  // namespace avm::kernels

#include "avm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "avm/parallel.hpp"

namespace avm::kernels {

namespace {
constexpr double kSqrt3 = 1.7320508075688772;

inline double matern32(double d, double rho) {
  const double t = kSqrt3 * d / rho;
  return (1.0 + t) * std::exp(-t);
}
}  // namespace

Eigen::MatrixXd crossprod_serial(const Eigen::MatrixXd& X) {
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd A(p, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) {
      const double v = X.col(i).dot(X.col(j));
      A(i, j) = v;
      A(j, i) = v;
    }
  return A;
}

Eigen::MatrixXd crossprod(const Eigen::MatrixXd& X) {
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd A(p, p);
  // Flatten the upper triangle so the static schedule balances long and
  // short columns.
  const std::int64_t m = static_cast<std::int64_t>(p) * (p + 1) / 2;
  parallel_for(m, [&](std::int64_t t) {
    // t -> (i, j), i <= j, column-major over the triangle
    const Eigen::Index j =
        static_cast<Eigen::Index>((std::sqrt(8.0 * static_cast<double>(t) + 1.0) - 1.0) / 2.0);
    Eigen::Index jj = j;
    while (static_cast<std::int64_t>(jj) * (jj + 1) / 2 > t) --jj;
    while (static_cast<std::int64_t>(jj + 1) * (jj + 2) / 2 <= t) ++jj;
    const Eigen::Index i = static_cast<Eigen::Index>(t - static_cast<std::int64_t>(jj) * (jj + 1) / 2);
    const double v = X.col(i).dot(X.col(jj));
    A(i, jj) = v;
    A(jj, i) = v;
  });
  return A;
}

Eigen::VectorXd crossprod_vec_serial(const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& y) {
  const Eigen::Index p = X.cols();
  Eigen::VectorXd out(p);
  for (Eigen::Index j = 0; j < p; ++j) out(j) = X.col(j).dot(y);
  return out;
}

Eigen::VectorXd crossprod_vec(const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y) {
  const Eigen::Index p = X.cols();
  Eigen::VectorXd out(p);
  parallel_for(p, [&](std::int64_t j) { out(j) = X.col(j).dot(y); });
  return out;
}

Eigen::MatrixXd matern_design_serial(const Eigen::MatrixXd& points,
                                     const Eigen::MatrixXd& knots,
                                     double rho) {
  const Eigen::Index n = points.rows(), k = knots.rows();
  Eigen::MatrixXd out(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      out(i, j) = matern32((points.row(i) - knots.row(j)).norm(), rho);
  return out;
}

Eigen::MatrixXd matern_design(const Eigen::MatrixXd& points,
                              const Eigen::MatrixXd& knots, double rho) {
  const Eigen::Index n = points.rows(), k = knots.rows();
  Eigen::MatrixXd out(n, k);
  parallel_for(n, [&](std::int64_t i) {
    for (Eigen::Index j = 0; j < k; ++j)
      out(i, j) = matern32((points.row(i) - knots.row(j)).norm(), rho);
  });
  return out;
}

Eigen::MatrixXd forward_solve_multi_serial(const Eigen::MatrixXd& L,
                                           const Eigen::MatrixXd& B) {
  Eigen::MatrixXd Z(B.rows(), B.cols());
  for (Eigen::Index c = 0; c < B.cols(); ++c)
    Z.col(c) = L.triangularView<Eigen::Lower>().solve(B.col(c));
  return Z;
}

Eigen::MatrixXd forward_solve_multi(const Eigen::MatrixXd& L,
                                    const Eigen::MatrixXd& B) {
  Eigen::MatrixXd Z(B.rows(), B.cols());
  parallel_for(B.cols(), [&](std::int64_t c) {
    Z.col(c) = L.triangularView<Eigen::Lower>().solve(B.col(c));
  });
  return Z;
}

Eigen::MatrixXd backward_solve_multi_serial(const Eigen::MatrixXd& L,
                                            const Eigen::MatrixXd& B) {
  Eigen::MatrixXd Z(B.rows(), B.cols());
  for (Eigen::Index c = 0; c < B.cols(); ++c)
    Z.col(c) = L.transpose().triangularView<Eigen::Upper>().solve(B.col(c));
  return Z;
}

Eigen::MatrixXd backward_solve_multi(const Eigen::MatrixXd& L,
                                     const Eigen::MatrixXd& B) {
  Eigen::MatrixXd Z(B.rows(), B.cols());
  parallel_for(B.cols(), [&](std::int64_t c) {
    Z.col(c) = L.transpose().triangularView<Eigen::Upper>().solve(B.col(c));
  });
  return Z;
}

namespace {
void knn_row(const Eigen::MatrixXd& coords, int k, int i,
             std::vector<int>& idx, std::vector<double>& dist) {
  const Eigen::Index n = coords.rows();
  // (distance, index) pairs; ties resolve toward the smaller index.
  std::vector<std::pair<double, int>> cand;
  cand.reserve(n - 1);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j == i) continue;
    const double d = (coords.row(i) - coords.row(j)).norm();
    cand.emplace_back(d, static_cast<int>(j));
  }
  const std::size_t kk = std::min<std::size_t>(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + kk, cand.end());
  idx.resize(kk);
  dist.resize(kk);
  for (std::size_t t = 0; t < kk; ++t) {
    idx[t] = cand[t].second;
    dist[t] = cand[t].first;
  }
}
}  // namespace

KnnResult knn_serial(const Eigen::MatrixXd& coords, int k) {
  const Eigen::Index n = coords.rows();
  KnnResult r;
  r.index.resize(n);
  r.distance.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    knn_row(coords, k, static_cast<int>(i), r.index[i], r.distance[i]);
  return r;
}

KnnResult knn(const Eigen::MatrixXd& coords, int k) {
  const Eigen::Index n = coords.rows();
  KnnResult r;
  r.index.resize(n);
  r.distance.resize(n);
  parallel_for(n, [&](std::int64_t i) {
    knn_row(coords, k, static_cast<int>(i), r.index[i], r.distance[i]);
  });
  return r;
}

}  // namespace avm::kernels

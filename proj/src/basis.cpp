#include "avm/basis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "avm/kernels.hpp"
#include "avm/parallel.hpp"
#include "avm/rng.hpp"

namespace avm::basis {

namespace {
constexpr double kSqrt3 = 1.7320508075688772;

void warn(std::vector<std::string>* sink, const std::string& msg) {
  if (sink) sink->push_back(msg);
}

std::vector<double> sorted_distinct(const std::vector<double>& values) {
  std::vector<double> d(values);
  std::sort(d.begin(), d.end());
  d.erase(std::unique(d.begin(), d.end()), d.end());
  return d;
}
}  // namespace

double matern32(double d, double rho) {
  const double t = kSqrt3 * d / rho;
  return (1.0 + t) * std::exp(-t);
}

int BasisBlock::raw_dim() const {
  switch (kind) {
    case Kind::Crs:
      return static_cast<int>(knots.size());
    case Kind::PSpline:
      return pspline_dim;
    case Kind::Gp:
      return static_cast<int>(knot_coords.rows());
    case Kind::Mrf:
      return num_regions;
  }
  return 0;
}

Eigen::RowVectorXd BasisBlock::to_current(const Eigen::RowVectorXd& raw) const {
  if (!centered()) return raw;
  const Eigen::VectorXd& u = householder_u;
  const double scale = 2.0 / u.squaredNorm();
  Eigen::RowVectorXd reflected = raw - (scale * raw.dot(u)) * u.transpose();
  return reflected.tail(reflected.size() - 1);
}

// ---------------------------------------------------------------------------
// Cardinal natural cubic splines.
//
// Second derivatives (moments) m at the knots are a linear map m = F v of the
// knot values v: the standard tridiagonal continuity system with natural
// boundary conditions m_0 = m_{k-1} = 0. The penalty integrates the squared
// second derivative, which is piecewise linear in x:
//   integral = m' T m with T tridiagonal, T_ii = (h_{i-1}+h_i)/3,
//   T_{i,i+1} = h_i/6, so S = F' T F.

Eigen::MatrixXd crs_moment_map(const Eigen::VectorXd& knots) {
  const int k = static_cast<int>(knots.size());
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(k, k);
  if (k <= 2) return F;
  const int m = k - 2;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, k);
  for (int i = 1; i <= k - 2; ++i) {
    const double hl = knots[i] - knots[i - 1];
    const double hr = knots[i + 1] - knots[i];
    const int r = i - 1;
    if (i - 1 >= 1) A(r, r - 1) = hl / 6.0;
    A(r, r) = (hl + hr) / 3.0;
    if (i + 1 <= k - 2) A(r, r + 1) = hr / 6.0;
    B(r, i - 1) = 1.0 / hl;
    B(r, i) = -1.0 / hl - 1.0 / hr;
    B(r, i + 1) = 1.0 / hr;
  }
  const Eigen::MatrixXd inner = A.ldlt().solve(B);
  F.block(1, 0, m, k) = inner;
  return F;
}

namespace {

Eigen::MatrixXd crs_penalty(const Eigen::VectorXd& knots,
                            const Eigen::MatrixXd& F) {
  const int k = static_cast<int>(knots.size());
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i + 1 < k; ++i) {
    const double h = knots[i + 1] - knots[i];
    T(i, i) += h / 3.0;
    T(i + 1, i + 1) += h / 3.0;
    T(i, i + 1) += h / 6.0;
    T(i + 1, i) += h / 6.0;
  }
  Eigen::MatrixXd S = F.transpose() * T * F;
  return 0.5 * (S + S.transpose());
}

Eigen::RowVectorXd crs_eval_row(const Eigen::VectorXd& knots,
                                const Eigen::MatrixXd& F, double x) {
  const int k = static_cast<int>(knots.size());
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(k);
  if (k == 1) {
    row(0) = 1.0;
    return row;
  }
  if (x <= knots[0]) {
    // natural spline extrapolates linearly: s(x) = v_0 + s'(t_0)(x - t_0)
    const double h = knots[1] - knots[0];
    row(0) = 1.0;
    Eigen::RowVectorXd slope = Eigen::RowVectorXd::Zero(k);
    slope(0) = -1.0 / h;
    slope(1) = 1.0 / h;
    slope -= (h / 3.0) * F.row(0) + (h / 6.0) * F.row(1);
    row += (x - knots[0]) * slope;
    return row;
  }
  if (x >= knots[k - 1]) {
    const double h = knots[k - 1] - knots[k - 2];
    row(k - 1) = 1.0;
    Eigen::RowVectorXd slope = Eigen::RowVectorXd::Zero(k);
    slope(k - 2) = -1.0 / h;
    slope(k - 1) = 1.0 / h;
    slope += (h / 6.0) * F.row(k - 2) + (h / 3.0) * F.row(k - 1);
    row += (x - knots[k - 1]) * slope;
    return row;
  }
  int i = static_cast<int>(std::upper_bound(knots.data(), knots.data() + k, x) -
                           knots.data()) - 1;
  i = std::min(i, k - 2);
  const double h = knots[i + 1] - knots[i];
  const double a = (knots[i + 1] - x) / h;
  const double b = (x - knots[i]) / h;
  const double c = (a * a * a - a) * h * h / 6.0;
  const double d = (b * b * b - b) * h * h / 6.0;
  row(i) = a;
  row(i + 1) = b;
  row += c * F.row(i) + d * F.row(i + 1);
  return row;
}

}  // namespace

BasisBlock crs_basis(const std::vector<double>& values, int k,
                     std::vector<std::string>* warnings) {
  if (k < 3) throw std::invalid_argument("crs_basis: need k >= 3");
  if (values.empty()) throw std::invalid_argument("crs_basis: empty values");
  const std::vector<double> distinct = sorted_distinct(values);
  const int m = static_cast<int>(distinct.size());
  if (m < 2)
    throw std::invalid_argument("crs_basis: need at least 2 distinct values");
  // m == 2 degenerates to the linear interpolant with a zero penalty
  if (m < k) {
    warn(warnings, "crs_basis: reducing knots from " + std::to_string(k) +
                       " to " + std::to_string(m) + " distinct values");
    k = m;
  }
  // knots at evenly spaced quantiles of the distinct values
  BasisBlock block;
  block.kind = BasisBlock::Kind::Crs;
  block.knots.resize(k);
  for (int j = 0; j < k; ++j) {
    const double pos = static_cast<double>(j) * (m - 1) / (k - 1);
    block.knots[j] = distinct[static_cast<int>(std::llround(pos))];
  }
  // quantile rounding can collide for heavily skewed data; keep distinct
  {
    std::vector<double> uq(block.knots.data(), block.knots.data() + k);
    uq = sorted_distinct(uq);
    if (static_cast<int>(uq.size()) != k) {
      warn(warnings, "crs_basis: collapsing duplicate quantile knots");
      k = static_cast<int>(uq.size());
      block.knots = Eigen::Map<Eigen::VectorXd>(uq.data(), k);
    }
  }
  block.crs_moments = crs_moment_map(block.knots);
  block.penalty = crs_penalty(block.knots, block.crs_moments);
  block.design.resize(values.size(), k);
  for (std::size_t i = 0; i < values.size(); ++i)
    block.design.row(i) = crs_eval_row(block.knots, block.crs_moments, values[i]);
  return block;
}

// ---------------------------------------------------------------------------
// P-splines.

Eigen::MatrixXd second_difference_matrix(int k) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(k - 2, k);
  for (int i = 0; i < k - 2; ++i) {
    D(i, i) = 1.0;
    D(i, i + 1) = -2.0;
    D(i, i + 2) = 1.0;
  }
  return D;
}

namespace {

/// Cox-de Boor values of the 4 cubic B-splines that are non-zero on the span
/// [t_j, t_{j+1}); writes them to out[0..3] for basis indices j-3..j.
void cubic_bspline_span(const Eigen::VectorXd& t, int j, double x,
                        double* out) {
  double left[4], right[4];
  out[0] = 1.0;
  for (int d = 1; d <= 3; ++d) {
    left[d] = x - t[j + 1 - d];
    right[d] = t[j + d] - x;
    double saved = 0.0;
    for (int r = 0; r < d; ++r) {
      const double tmp = out[r] / (right[r + 1] + left[d - r]);
      out[r] = saved + right[r + 1] * tmp;
      saved = left[d - r] * tmp;
    }
    out[d] = saved;
  }
}

Eigen::RowVectorXd pspline_eval_row(const Eigen::VectorXd& t, int k, double x) {
  const double lo = t[3], hi = t[k];
  x = std::clamp(x, lo, hi);
  const double h = t[4] - t[3];
  int span = 3 + static_cast<int>((x - lo) / h);
  span = std::clamp(span, 3, k - 1);
  // guard against floating-point landing just outside the span
  while (span > 3 && x < t[span]) --span;
  while (span < k - 1 && x >= t[span + 1]) ++span;
  double vals[4];
  cubic_bspline_span(t, span, x, vals);
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(k);
  for (int r = 0; r < 4; ++r) row(span - 3 + r) = vals[r];
  return row;
}

}  // namespace

BasisBlock pspline_basis(const std::vector<double>& values, int k,
                         std::vector<std::string>* warnings) {
  if (k < 4) throw std::invalid_argument("pspline_basis: need k >= 4");
  if (values.empty()) throw std::invalid_argument("pspline_basis: empty values");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo))
    throw std::invalid_argument("pspline_basis: degenerate covariate range");
  const int distinct = static_cast<int>(sorted_distinct(values).size());
  if (distinct < k) {
    warn(warnings, "pspline_basis: reducing dimension from " + std::to_string(k) +
                       " to " + std::to_string(std::max(4, distinct)));
    k = std::max(4, distinct);
  }

  BasisBlock block;
  block.kind = BasisBlock::Kind::PSpline;
  block.pspline_dim = k;
  const double h = (hi - lo) / (k - 3);
  block.knots.resize(k + 4);
  for (int i = 0; i < k + 4; ++i) block.knots[i] = lo + (i - 3) * h;
  const Eigen::MatrixXd D = second_difference_matrix(k);
  block.penalty = D.transpose() * D;
  block.design.resize(values.size(), k);
  for (std::size_t i = 0; i < values.size(); ++i)
    block.design.row(i) = pspline_eval_row(block.knots, k, values[i]);
  return block;
}

// ---------------------------------------------------------------------------
// Space-filling knots (k-means).

Eigen::MatrixXd select_knots_spacefilling(const Eigen::MatrixXd& coords, int k,
                                          std::uint64_t seed,
                                          std::vector<std::string>* warnings) {
  if (k < 1) throw std::invalid_argument("select_knots: need k >= 1");
  // distinct coordinate pairs
  std::set<std::pair<double, double>> uniq;
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    uniq.insert({coords(i, 0), coords(i, 1)});
  std::vector<std::pair<double, double>> pts(uniq.begin(), uniq.end());
  const int n = static_cast<int>(pts.size());
  if (n == 0) throw std::invalid_argument("select_knots: no coordinates");
  if (k > n) {
    warn(warnings, "select_knots: reducing k from " + std::to_string(k) +
                       " to " + std::to_string(n) + " distinct points");
    k = n;
  }
  Eigen::MatrixXd P(n, 2);
  for (int i = 0; i < n; ++i) {
    P(i, 0) = pts[i].first;
    P(i, 1) = pts[i].second;
  }

  // k-means++ seeding
  Rng rng = Rng::keyed(seed, 0x6b6d6e73ULL);
  std::vector<int> centre_idx;
  centre_idx.push_back(rng.uniform_int(0, n - 1));
  Eigen::VectorXd d2 = (P.rowwise() - P.row(centre_idx[0])).rowwise().squaredNorm();
  while (static_cast<int>(centre_idx.size()) < k) {
    const double total = d2.sum();
    int pick;
    if (total <= 0) {
      // all remaining points coincide with a centre; take the first unused
      pick = 0;
      while (std::find(centre_idx.begin(), centre_idx.end(), pick) !=
             centre_idx.end())
        ++pick;
    } else {
      double target = rng.uniform() * total;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        target -= d2(i);
        if (target <= 0) {
          pick = i;
          break;
        }
      }
    }
    centre_idx.push_back(pick);
    d2 = d2.cwiseMin(
        (P.rowwise() - P.row(pick)).rowwise().squaredNorm());
  }
  Eigen::MatrixXd centres(k, 2);
  for (int c = 0; c < k; ++c) centres.row(c) = P.row(centre_idx[c]);

  // Lloyd iterations; assignment is point-parallel, the update sums each
  // cluster's members in index order so results do not depend on threads.
  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<int> next(n);
    parallel_for(n, [&](std::int64_t i) {
      int best = 0;
      double best_d = (P.row(i) - centres.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (P.row(i) - centres.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      next[i] = best;
    });
    const bool changed = next != assign;
    assign = std::move(next);
    if (!changed) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, 2);
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
    for (int i = 0; i < n; ++i) {
      sums.row(assign[i]) += P.row(i);
      counts(assign[i])++;
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0) {
        centres.row(c) = sums.row(c) / counts(c);
      } else {
        // deterministic restart: farthest point from its centre
        int far = 0;
        double far_d = -1;
        for (int i = 0; i < n; ++i) {
          const double d = (P.row(i) - centres.row(assign[i])).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centres.row(c) = P.row(far);
      }
    }
  }

  std::vector<int> order(k);
  for (int c = 0; c < k; ++c) order[c] = c;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (centres(a, 0) != centres(b, 0)) return centres(a, 0) < centres(b, 0);
    return centres(a, 1) < centres(b, 1);
  });
  Eigen::MatrixXd out(k, 2);
  for (int c = 0; c < k; ++c) out.row(c) = centres.row(order[c]);
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian-process kriging block.

Eigen::MatrixXd matern_gram(const Eigen::MatrixXd& knot_coords, double rho,
                            double jitter) {
  Eigen::MatrixXd S = kernels::matern_design(knot_coords, knot_coords, rho);
  S.diagonal().array() += jitter;
  return 0.5 * (S + S.transpose());
}

namespace {
double median_pairwise_distance(const Eigen::MatrixXd& knots) {
  const int k = static_cast<int>(knots.rows());
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(k) * (k - 1) / 2);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      d.push_back((knots.row(i) - knots.row(j)).norm());
  if (d.empty()) return 1.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + mid, d.end());
  return d[mid];
}
}  // namespace

BasisBlock gp_basis(const Eigen::MatrixXd& coords,
                    const Eigen::MatrixXd& knot_coords, KernelConfig kernel) {
  if (!coords.allFinite() || !knot_coords.allFinite())
    throw input_error("gp_basis: non-finite coordinates");
  double rho = kernel.rho;
  if (rho <= 0) rho = median_pairwise_distance(knot_coords);
  if (rho <= 0) throw input_error("gp_basis: degenerate knot spread");

  BasisBlock block;
  block.kind = BasisBlock::Kind::Gp;
  block.knot_coords = knot_coords;
  block.rho = rho;
  block.design = kernels::matern_design(coords, knot_coords, rho);
  block.penalty = matern_gram(knot_coords, rho);
  return center_block(std::move(block));
}

// ---------------------------------------------------------------------------
// Markov random field block.

Eigen::MatrixXd graph_laplacian(const std::vector<std::vector<int>>& adjacency) {
  const int m = static_cast<int>(adjacency.size());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j : adjacency[i]) {
      if (j == i) continue;
      L(i, j) = -1.0;
      L(i, i) += 1.0;
    }
  return L;
}

BasisBlock mrf_basis(const std::vector<int>& region_ids,
                     const geo::RegionGraph& graph) {
  const int m = graph.size();
  BasisBlock block;
  block.kind = BasisBlock::Kind::Mrf;
  block.num_regions = m;
  block.design = Eigen::MatrixXd::Zero(region_ids.size(), m);
  for (std::size_t i = 0; i < region_ids.size(); ++i) {
    const int r = region_ids[i];
    if (r < 0 || r >= m)
      throw input_error("mrf_basis: unknown region id " + std::to_string(r));
    block.design(i, r) = 1.0;
  }
  block.penalty = graph_laplacian(graph.second_order());
  return center_block(std::move(block));
}

// ---------------------------------------------------------------------------
// Centering.

Eigen::RowVectorXd BasisBlock::eval_raw(double value) const {
  switch (kind) {
    case Kind::Crs:
      return crs_eval_row(knots, crs_moments, value);
    case Kind::PSpline:
      return pspline_eval_row(knots, pspline_dim, value);
    default:
      throw std::logic_error("eval_raw: block is not a scalar smooth");
  }
}

Eigen::RowVectorXd BasisBlock::eval_raw_xy(double x, double y) const {
  if (kind != Kind::Gp) throw std::logic_error("eval_raw_xy: not a GP block");
  const int k = static_cast<int>(knot_coords.rows());
  Eigen::RowVectorXd row(k);
  for (int j = 0; j < k; ++j) {
    const double dx = x - knot_coords(j, 0), dy = y - knot_coords(j, 1);
    row(j) = matern32(std::sqrt(dx * dx + dy * dy), rho);
  }
  return row;
}

Eigen::RowVectorXd BasisBlock::eval_raw_region(int region) const {
  if (kind != Kind::Mrf) throw std::logic_error("eval_raw_region: not MRF");
  if (region < 0 || region >= num_regions)
    throw input_error("unknown region id " + std::to_string(region));
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(num_regions);
  row(region) = 1.0;
  return row;
}

BasisBlock center_block(BasisBlock block) {
  if (block.centered()) return block;
  const Eigen::VectorXd c = block.design.colwise().sum().transpose();
  const double norm = c.norm();
  if (norm <= 0) return block;  // nothing to absorb

  // Householder reflector u with H = I - 2uu'/(u'u) mapping c onto +-|c| e_0;
  // columns 1..k-1 of H are an orthonormal basis of {b : c'b = 0}.
  Eigen::VectorXd u = c;
  u(0) += (c(0) >= 0 ? norm : -norm);
  if (u.squaredNorm() <= 0) {
    u = Eigen::VectorXd::Zero(c.size());
    u(0) = 1.0;
  }
  block.householder_u = u;
  const double scale = 2.0 / u.squaredNorm();

  // design <- (design * H) dropping column 0
  Eigen::MatrixXd DH =
      block.design - scale * (block.design * u) * u.transpose();
  block.design = DH.rightCols(DH.cols() - 1);

  // penalty <- (H' S H) dropping row/col 0
  Eigen::MatrixXd SH =
      block.penalty - scale * (block.penalty * u) * u.transpose();
  Eigen::MatrixXd HSH = SH - scale * u * (u.transpose() * SH);
  Eigen::MatrixXd S = HSH.block(1, 1, HSH.rows() - 1, HSH.cols() - 1);
  block.penalty = 0.5 * (S + S.transpose());
  return block;
}

}  // namespace avm::basis

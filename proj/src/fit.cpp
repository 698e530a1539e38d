#include "avm/fit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "avm/kernels.hpp"
#include "avm/parallel.hpp"

namespace avm::fit {

namespace {

void warn(std::vector<std::string>* sink, const std::string& msg) {
  if (sink) sink->push_back(msg);
}

struct PenBlock {
  int index = 0;   // lambda slot
  int offset = 0;
  int dim = 0;
  Eigen::MatrixXd S;  // scaled penalty
  std::string label;
};

/// Normal equations with column scaling d = diag(X'X)^{-1/2} applied to both
/// X'X and every penalty, so the solve sees unit-diagonal blocks.
struct Normal {
  int n = 0, p = 0;
  Eigen::MatrixXd xtx;   // scaled
  Eigen::VectorXd xty;   // scaled
  double yty = 0;
  Eigen::VectorXd d;     // beta = d .* beta_scaled
  std::vector<PenBlock> pens;
};

Normal make_normal(const design::DesignMatrix& dm, const Eigen::VectorXd& y) {
  Normal nm;
  nm.n = static_cast<int>(dm.X.rows());
  nm.p = static_cast<int>(dm.X.cols());
  nm.xtx = kernels::crossprod(dm.X);
  nm.xty = kernels::crossprod_vec(dm.X, y);
  nm.yty = y.squaredNorm();
  nm.d.resize(nm.p);
  for (int c = 0; c < nm.p; ++c) {
    const double v = nm.xtx(c, c);
    nm.d(c) = v > 0 ? 1.0 / std::sqrt(v) : 1.0;
  }
  nm.xtx = nm.d.asDiagonal() * nm.xtx * nm.d.asDiagonal();
  nm.xty = nm.d.cwiseProduct(nm.xty);
  for (const design::Block& b : dm.blocks) {
    if (b.lambda_index < 0) continue;
    PenBlock pb;
    pb.index = b.lambda_index;
    pb.offset = b.offset;
    pb.dim = b.width;
    pb.label = b.label;
    const Eigen::VectorXd ds = nm.d.segment(b.offset, b.width);
    pb.S = ds.asDiagonal() * b.penalty * ds.asDiagonal();
    nm.pens.push_back(std::move(pb));
  }
  std::sort(nm.pens.begin(), nm.pens.end(),
            [](const PenBlock& a, const PenBlock& b) { return a.index < b.index; });
  return nm;
}

Eigen::MatrixXd penalized_matrix(const Normal& nm, const Eigen::VectorXd& lambda,
                                 double floor_all = 0.0, int skip = -1,
                                 double floor_skip = 0.0) {
  Eigen::MatrixXd A = nm.xtx;
  for (const PenBlock& pb : nm.pens) {
    double l = pb.index == skip ? floor_skip : lambda(pb.index) + floor_all;
    if (l != 0.0)
      A.block(pb.offset, pb.offset, pb.dim, pb.dim) += l * pb.S;
  }
  // pin structurally empty unpenalized columns so they solve to zero
  for (int c = 0; c < nm.p; ++c)
    if (A(c, c) < 1e-12) A(c, c) = 1.0;
  return A;
}

/// Cholesky with a small escalating ridge fallback; `A` is updated in place
/// when a ridge is applied so callers can form exact residuals. Throws
/// fit_error naming the offending blocks when the system stays singular.
Eigen::LLT<Eigen::MatrixXd> chol_or_throw(Eigen::MatrixXd& A, const Normal& nm,
                                          bool* used_ridge,
                                          std::vector<std::string>* warnings) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() == Eigen::Success) return llt;
  for (double ridge : {1e-10, 1e-8, 1e-6}) {
    Eigen::MatrixXd Ar = A;
    Ar.diagonal().array() += ridge;
    llt.compute(Ar);
    if (llt.info() == Eigen::Success) {
      if (used_ridge) *used_ridge = true;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%g", ridge);
      warn(warnings, std::string("penalized solve: added ridge ") + buf +
                         " to stabilize a near-singular system");
      A = std::move(Ar);
      return llt;
    }
  }
  // locate trouble via LDLT pivots
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  std::string blocks;
  const Eigen::VectorXd dv = ldlt.vectorD();
  for (const PenBlock& pb : nm.pens)
    for (int c = pb.offset; c < pb.offset + pb.dim; ++c)
      if (dv(c) < 1e-12 && blocks.find(pb.label) == std::string::npos)
        blocks += (blocks.empty() ? "" : ", ") + pb.label;
  throw fit_error("penalized solve: singular system" +
                  (blocks.empty() ? std::string() : " (blocks: " + blocks + ")"));
}

struct CoreFit {
  Eigen::VectorXd beta_scaled;
  double rss = 0, edf = 0, gcv = 0, sigma2 = 0;
  Eigen::VectorXd block_edf;
  bool ridge = false;
  double condition = 0;
  Eigen::MatrixXd Linv_t;  // L^{-T}, only when want_cov
};

CoreFit solve_core(const Normal& nm, const design::DesignMatrix& dm,
                   const Eigen::VectorXd& y, const Eigen::VectorXd& lambda,
                   bool want_cov, std::vector<std::string>* warnings) {
  for (const PenBlock& pb : nm.pens)
    if (lambda(pb.index) <= 0)
      throw fit_error("penalized solve: lambda must be positive for block " +
                      pb.label);
  CoreFit out;
  Eigen::MatrixXd A = penalized_matrix(nm, lambda);
  Eigen::LLT<Eigen::MatrixXd> llt = chol_or_throw(A, nm, &out.ridge, warnings);
  const Eigen::MatrixXd& L = llt.matrixLLT();

  out.beta_scaled = llt.solve(nm.xty);
  // iterative refinement recovers accuracy when huge lambdas push the
  // condition number toward 1/eps
  for (int refine = 0; refine < 2; ++refine) {
    const Eigen::VectorXd resid = nm.xty - A * out.beta_scaled;
    out.beta_scaled += llt.solve(resid);
  }
  const Eigen::VectorXd beta = nm.d.cwiseProduct(out.beta_scaled);
  out.rss = (y - dm.X * beta).squaredNorm();

  {
    const auto diagL = L.diagonal();
    const double dmax = diagL.maxCoeff(), dmin = diagL.minCoeff();
    out.condition = dmin > 0 ? (dmax / dmin) * (dmax / dmin)
                             : std::numeric_limits<double>::infinity();
    if (out.condition > 1e12)
      warn(warnings, "penalized solve: condition estimate " +
                         std::to_string(out.condition) + " exceeds 1e12");
  }

  // EDF = tr(A^{-1} X'X), accumulated per block (column-parallel solves)
  Eigen::MatrixXd Y1 = kernels::forward_solve_multi(
      Eigen::MatrixXd(L.triangularView<Eigen::Lower>()), nm.xtx);
  Eigen::MatrixXd T = kernels::backward_solve_multi(
      Eigen::MatrixXd(L.triangularView<Eigen::Lower>()), Y1);
  out.edf = T.trace();
  const int n_lambda = static_cast<int>(lambda.size());
  out.block_edf = Eigen::VectorXd::Zero(n_lambda);
  for (const PenBlock& pb : nm.pens)
    out.block_edf(pb.index) =
        T.diagonal().segment(pb.offset, pb.dim).sum();

  const double denom = nm.n - out.edf;
  if (denom <= 0)
    throw fit_error("penalized solve: effective degrees of freedom exhaust n");
  out.sigma2 = out.rss / denom;
  out.gcv = nm.n * out.rss / (denom * denom);

  if (want_cov) {
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(nm.p, nm.p);
    out.Linv_t = kernels::backward_solve_multi(
        Eigen::MatrixXd(L.triangularView<Eigen::Lower>()), I);
  }
  return out;
}

}  // namespace

PenalizedFit penalized_solve(const design::DesignMatrix& dm,
                             const Eigen::VectorXd& y,
                             const Eigen::VectorXd& lambda,
                             std::vector<std::string>* warnings,
                             bool want_cov) {
  const Normal nm = make_normal(dm, y);
  const CoreFit core = solve_core(nm, dm, y, lambda, want_cov, warnings);
  PenalizedFit out;
  out.beta = nm.d.cwiseProduct(core.beta_scaled);
  out.rss = core.rss;
  out.sigma2 = core.sigma2;
  out.edf = core.edf;
  out.gcv = core.gcv;
  out.block_edf = core.block_edf;
  out.ridge_fallback = core.ridge;
  out.condition = core.condition;
  if (want_cov) out.cov_factor = nm.d.asDiagonal() * core.Linv_t;
  return out;
}

double gcv_score(const design::DesignMatrix& dm, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& lambda) {
  const Normal nm = make_normal(dm, y);
  return solve_core(nm, dm, y, lambda, false, nullptr).gcv;
}

double penalized_objective(const design::DesignMatrix& dm,
                           const Eigen::VectorXd& y,
                           const Eigen::VectorXd& lambda,
                           const Eigen::VectorXd& beta) {
  double obj = (y - dm.X * beta).squaredNorm();
  for (const design::Block& b : dm.blocks) {
    if (b.lambda_index < 0) continue;
    const Eigen::VectorXd bb = beta.segment(b.offset, b.width);
    obj += lambda(b.lambda_index) * bb.dot(b.penalty * bb);
  }
  return obj;
}

Eigen::VectorXd penalized_gradient(const design::DesignMatrix& dm,
                                   const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& lambda,
                                   const Eigen::VectorXd& beta) {
  Eigen::VectorXd g = -2.0 * (dm.X.transpose() * (y - dm.X * beta));
  for (const design::Block& b : dm.blocks) {
    if (b.lambda_index < 0) continue;
    g.segment(b.offset, b.width) +=
        2.0 * lambda(b.lambda_index) * (b.penalty * beta.segment(b.offset, b.width));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Smoothing-parameter search.
//
// For one coordinate j with the others fixed, write
//   A(l) = M + (l - floor) S_j,  M = X'X + sum_{k != j} l_k S_k + floor S_j.
// With M = L L' and S_j = G G', the whitened penalty L^{-1}G has SVD with
// orthonormal U and singular values s, so
//   (I + d W)^{-1} = I - U diag(d s^2 / (1 + d s^2)) U',  W = L^{-1}S_j L^{-'}.
// Every GCV evaluation along the coordinate is then O(rank^2).

namespace {

struct CoordinateProfile {
  double t0 = 0, uu = 0, uBu = 0, yty = 0;
  int n = 0;
  Eigen::VectorXd s2, qu, qBu;
  Eigen::MatrixXd Hq;
  double floor = 0;

  double gcv(double lam, double* edf_out = nullptr) const {
    const double delta = lam - floor;
    const Eigen::ArrayXd g = (delta * s2.array()) / (1.0 + delta * s2.array());
    const double edf = t0 - (g * Hq.diagonal().array()).sum();
    const Eigen::VectorXd dvec = (g * qu.array()).matrix();
    const double wu = uu - dvec.dot(qu);
    const double wBw = uBu - 2.0 * dvec.dot(qBu) + dvec.dot(Hq * dvec);
    const double rss = std::max(yty - 2.0 * wu + wBw, 0.0);
    if (edf_out) *edf_out = edf;
    const double denom = n - edf;
    return n * rss / (denom * denom);
  }
};

}  // namespace

LambdaSearch optimize_lambdas(const design::DesignMatrix& dm,
                              const Eigen::VectorXd& y, const LambdaGrid& grid,
                              std::vector<std::string>* warnings) {
  const Normal nm = make_normal(dm, y);
  const int n_lambda = dm.n_lambda;
  LambdaSearch out;
  if (n_lambda == 0) {
    out.lambda.resize(0);
    out.gcv = solve_core(nm, dm, y, out.lambda, false, warnings).gcv;
    return out;
  }

  // low-rank factors G_j of the scaled penalties
  std::vector<Eigen::MatrixXd> factors(n_lambda);
  for (const PenBlock& pb : nm.pens) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pb.S);
    const Eigen::VectorXd ev = eig.eigenvalues();
    const double vmax = std::max(ev.maxCoeff(), 0.0);
    std::vector<int> keep;
    for (int i = 0; i < ev.size(); ++i)
      if (ev(i) > 1e-12 * vmax && ev(i) > 0) keep.push_back(i);
    Eigen::MatrixXd G(pb.dim, keep.size());
    for (std::size_t c = 0; c < keep.size(); ++c)
      G.col(c) = eig.eigenvectors().col(keep[c]) * std::sqrt(ev(keep[c]));
    factors[pb.index] = std::move(G);
  }

  const double lam_min = std::pow(10.0, grid.log10_min);
  const double floor = std::min(1e-8, lam_min * 0.01);
  Eigen::VectorXd lambda = Eigen::VectorXd::Ones(n_lambda);
  const double grid_step = (grid.log10_max - grid.log10_min) /
                           std::max(1, grid.grid_points - 1);

  double prev_gcv = std::numeric_limits<double>::infinity();
  double cur_gcv = prev_gcv;
  for (int sweep = 0; sweep < grid.max_sweeps; ++sweep) {
    for (const PenBlock& pb : nm.pens) {
      const int j = pb.index;
      const Eigen::MatrixXd& G = factors[j];
      if (G.cols() == 0) {  // rank-0 penalty: GCV is flat in lambda_j
        lambda(j) = lam_min;
        continue;
      }
      Eigen::MatrixXd M = penalized_matrix(nm, lambda, 0.0, j, floor);
      bool ridge = false;
      Eigen::LLT<Eigen::MatrixXd> llt = chol_or_throw(M, nm, &ridge, warnings);
      const Eigen::MatrixXd L = llt.matrixLLT().triangularView<Eigen::Lower>();

      Eigen::MatrixXd Y1 = kernels::forward_solve_multi(L, nm.xtx);
      Eigen::MatrixXd Bt =
          kernels::forward_solve_multi(L, Y1.transpose()).transpose();
      Bt = 0.5 * (Bt + Bt.transpose());
      const Eigen::VectorXd u =
          L.triangularView<Eigen::Lower>().solve(nm.xty);

      Eigen::MatrixXd P = Eigen::MatrixXd::Zero(nm.p, G.cols());
      P.middleRows(pb.offset, pb.dim) = G;
      const Eigen::MatrixXd C = kernels::forward_solve_multi(L, P);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C.transpose() * C);
      const Eigen::VectorXd ev = eig.eigenvalues();
      const double vmax = std::max(ev.maxCoeff(), 0.0);
      std::vector<int> keep;
      for (int i = 0; i < ev.size(); ++i)
        if (ev(i) > 1e-14 * vmax && ev(i) > 0) keep.push_back(i);
      if (keep.empty()) {
        lambda(j) = lam_min;
        continue;
      }
      Eigen::MatrixXd Q(nm.p, keep.size());
      Eigen::VectorXd s2(keep.size());
      for (std::size_t c = 0; c < keep.size(); ++c) {
        s2(c) = ev(keep[c]);
        Q.col(c) = C * eig.eigenvectors().col(keep[c]) / std::sqrt(ev(keep[c]));
      }

      CoordinateProfile prof;
      prof.n = nm.n;
      prof.yty = nm.yty;
      prof.floor = floor;
      prof.s2 = s2;
      prof.t0 = Bt.trace();
      prof.Hq = Q.transpose() * Bt * Q;
      prof.qu = Q.transpose() * u;
      const Eigen::VectorXd Bu = Bt * u;
      prof.qBu = Q.transpose() * Bu;
      prof.uBu = u.dot(Bu);
      prof.uu = u.squaredNorm();

      // coarse grid: ascending lambda, strict improvement keeps the smaller
      double best_t = grid.log10_min;
      double best_v = std::numeric_limits<double>::infinity();
      for (int gidx = 0; gidx < grid.grid_points; ++gidx) {
        const double t = grid.log10_min + gidx * grid_step;
        const double v = prof.gcv(std::pow(10.0, t));
        if (v < best_v) {
          best_v = v;
          best_t = t;
        }
      }
      // golden-section refinement within one grid step either side
      double a = std::max(grid.log10_min, best_t - grid_step);
      double b = std::min(grid.log10_max, best_t + grid_step);
      const double phi = 0.6180339887498949;
      double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
      double f1 = prof.gcv(std::pow(10.0, x1));
      double f2 = prof.gcv(std::pow(10.0, x2));
      auto consider = [&](double t, double v) {
        if (v < best_v || (v == best_v && t < best_t)) {
          best_v = v;
          best_t = t;
        }
      };
      consider(x1, f1);
      consider(x2, f2);
      while (b - a > grid.golden_tol) {
        if (f1 <= f2) {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - phi * (b - a);
          f1 = prof.gcv(std::pow(10.0, x1));
          consider(x1, f1);
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + phi * (b - a);
          f2 = prof.gcv(std::pow(10.0, x2));
          consider(x2, f2);
        }
      }
      lambda(j) = std::pow(10.0, best_t);
      cur_gcv = best_v;
    }
    out.sweeps = sweep + 1;
    if (std::abs(prev_gcv - cur_gcv) <= grid.rel_tol * (1.0 + std::abs(cur_gcv)))
      break;
    prev_gcv = cur_gcv;
  }
  if (out.sweeps >= grid.max_sweeps) {
    out.converged = false;
    warn(warnings, "optimize_lambdas: no convergence after " +
                       std::to_string(grid.max_sweeps) + " sweeps");
  }
  out.lambda = lambda;
  out.gcv = cur_gcv;
  return out;
}

// ---------------------------------------------------------------------------
// Model fitting and prediction.

FittedModel fit_model(const std::vector<PropertyRecord>& records,
                      const design::ModelSpec& spec,
                      const geo::RegionGraph& graph, const FitOptions& options) {
  FittedModel m;
  m.spec = spec;
  m.seed = options.seed;
  m.config_hash = options.config_hash;

  design::DesignMatrix dm = design::build_design(records, spec, graph, &m.warnings);
  Eigen::VectorXd y(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) y(i) = records[i].log_ppsm;

  Eigen::VectorXd lambda(dm.n_lambda);
  if (dm.n_lambda > 0) {
    LambdaSearch search = optimize_lambdas(dm, y, options.grid, &m.warnings);
    lambda = search.lambda;
    m.gcv = search.gcv;
  }
  PenalizedFit pf = penalized_solve(dm, y, lambda, &m.warnings, true);

  m.blocks = std::move(dm.blocks);
  m.column_labels = std::move(dm.column_labels);
  m.beta = pf.beta;
  m.lambda = lambda;
  m.block_edf = pf.block_edf;
  m.sigma2 = pf.sigma2;
  m.edf = pf.edf;
  m.gcv = pf.gcv;
  m.rss = pf.rss;
  m.n_train = static_cast<int>(records.size());
  m.cov_factor = pf.cov_factor;
  const double mean_y = y.mean();
  const double tss = (y.array() - mean_y).square().sum();
  m.deviance_explained = tss > 0 ? 1.0 - pf.rss / tss : 0.0;
  return m;
}

namespace {

double se_of_contrast(const FittedModel& m, const Eigen::VectorXd& contrast) {
  return std::sqrt(m.sigma2) * (m.cov_factor.transpose() * contrast).norm();
}

}  // namespace

std::vector<Prediction> predict(const FittedModel& model,
                                const std::vector<PropertyRecord>& records) {
  const int p = model.cols();
  std::vector<Prediction> out(records.size());
  parallel_for(static_cast<std::int64_t>(records.size()), [&](std::int64_t i) {
    const PropertyRecord& r = records[i];
    Prediction pred;
    pred.id = r.id;
    try {
      const Eigen::RowVectorXd row = design::assemble_row(model.blocks, p, r);
      const double mu = row.dot(model.beta);
      const double se_mu =
          std::sqrt(model.sigma2) *
          (model.cov_factor.transpose() * row.transpose()).norm();
      const double se_tot = std::sqrt(se_mu * se_mu + model.sigma2);
      pred.log_mu = mu;
      pred.se_mu = se_mu;
      pred.price = std::exp(mu) * r.size;
      pred.lo50 = std::exp(mu - kZ50 * se_tot) * r.size;
      pred.hi50 = std::exp(mu + kZ50 * se_tot) * r.size;
      pred.lo95 = std::exp(mu - kZ95 * se_tot) * r.size;
      pred.hi95 = std::exp(mu + kZ95 * se_tot) * r.size;
    } catch (const std::exception& e) {
      pred.error = e.what();
    }
    out[i] = std::move(pred);
  });
  return out;
}

std::vector<ScalingRow> summarize_parametric(const FittedModel& model) {
  std::vector<ScalingRow> rows;
  const int p = model.cols();
  auto push = [&](const std::string& term, const std::string& level,
                  double est, double se) {
    ScalingRow r;
    r.term = term;
    r.level = level;
    r.estimate = est;
    r.se = se;
    r.scaling = std::exp(est);
    r.lo = std::exp(est - 1.96 * se);
    r.hi = std::exp(est + 1.96 * se);
    rows.push_back(std::move(r));
  };

  for (const design::Block& b : model.blocks) {
    switch (b.role) {
      case design::Block::Role::FeatureDummies:
      case design::Block::Role::LinearCovariate: {
        for (int c = 0; c < b.width; ++c) {
          Eigen::VectorXd contrast = Eigen::VectorXd::Zero(p);
          contrast(b.offset + c) = 1.0;
          push(b.label, model.column_labels[b.offset + c],
               model.beta(b.offset + c), se_of_contrast(model, contrast));
        }
        break;
      }
      case design::Block::Role::BerCoding:
      case design::Block::Role::TypeCoding: {
        const int L = b.width + 1;
        const Eigen::MatrixXd D = design::deviation_decode_map(L);
        const Eigen::VectorXd eff =
            D * model.beta.segment(b.offset, b.width);
        const bool is_ber = b.role == design::Block::Role::BerCoding;
        for (int l = 0; l < L; ++l) {
          Eigen::VectorXd contrast = Eigen::VectorXd::Zero(p);
          contrast.segment(b.offset, b.width) = D.row(l).transpose();
          const std::string level =
              is_ber ? to_string(static_cast<Ber>(l))
                     : to_string(static_cast<PropertyType>(l));
          push(b.label, level, eff(l), se_of_contrast(model, contrast));
        }
        break;
      }
      default:
        break;
    }
  }
  return rows;
}

SmoothCurve extract_smooth(const FittedModel& model, design::SmoothVar var,
                           std::optional<Submarket> submarket,
                           int grid_points) {
  const design::Block* block = nullptr;
  for (const design::Block& b : model.blocks) {
    if (b.role != design::Block::Role::Smooth || b.var != var) continue;
    if (b.submarket.has_value() != submarket.has_value()) continue;
    if (b.submarket && *b.submarket != *submarket) continue;
    block = &b;
    break;
  }
  if (!block)
    throw input_error("extract_smooth: no matching smooth term (check submarket)");

  double lo, hi;
  if (block->basis.kind == basis::BasisBlock::Kind::Crs) {
    lo = block->basis.knots.minCoeff();
    hi = block->basis.knots.maxCoeff();
  } else {
    lo = block->basis.knots(3);
    hi = block->basis.knots(block->basis.pspline_dim);
  }

  SmoothCurve curve;
  curve.term = block->label;
  curve.grid.resize(grid_points);
  curve.value.resize(grid_points);
  curve.lo.resize(grid_points);
  curve.hi.resize(grid_points);

  const int p = model.cols();
  Eigen::RowVectorXd base_row;
  if (var == design::SmoothVar::Month)
    base_row = block->basis.to_current(block->basis.eval_raw(lo));

  for (int g = 0; g < grid_points; ++g) {
    const double x =
        grid_points == 1 ? lo : lo + (hi - lo) * g / (grid_points - 1);
    curve.grid(g) = x;
    Eigen::RowVectorXd row = block->basis.to_current(block->basis.eval_raw(x));
    if (var == design::SmoothVar::Month) row -= base_row;  // centre at origin
    Eigen::VectorXd contrast = Eigen::VectorXd::Zero(p);
    contrast.segment(block->offset, block->width) = row.transpose();
    const double v = row.dot(model.beta.segment(block->offset, block->width));
    const double se = se_of_contrast(model, contrast);
    curve.value(g) = v;
    curve.lo(g) = v - 1.96 * se;
    curve.hi(g) = v + 1.96 * se;
  }
  return curve;
}

SurfaceRaster extract_spatial_surface(const FittedModel& model,
                                      const geo::RegionGraph& graph,
                                      double lon_min, double lat_min,
                                      double lon_max, double lat_max, int nx,
                                      int ny) {
  const design::Block* gp = nullptr;
  const design::Block* mrf = nullptr;
  const design::Block* intercept = nullptr;
  for (const design::Block& b : model.blocks) {
    if (b.role == design::Block::Role::GpSmooth) gp = &b;
    if (b.role == design::Block::Role::MrfSmooth) mrf = &b;
    if (b.role == design::Block::Role::Intercept) intercept = &b;
  }
  if (!gp || !mrf || !intercept)
    throw input_error("extract_spatial_surface: model has no spatial terms");
  const double beta0 = model.beta(intercept->offset);

  SurfaceRaster r;
  r.nx = nx;
  r.ny = ny;
  const int cells = nx * ny;
  r.lon.resize(cells);
  r.lat.resize(cells);
  r.gp.resize(cells);
  r.mrf.resize(cells);
  r.fused.resize(cells);
  r.masked.assign(cells, true);

  std::vector<double> gp_vals(cells), mrf_vals(cells);
  std::vector<char> mask(cells, 1);
  parallel_for(cells, [&](std::int64_t c) {
    const int i = static_cast<int>(c) % nx;
    const int j = static_cast<int>(c) / nx;
    const double lon = lon_min + (lon_max - lon_min) * (i + 0.5) / nx;
    const double lat = lat_min + (lat_max - lat_min) * (j + 0.5) / ny;
    r.lon(c) = lon;
    r.lat(c) = lat;
    const auto region = graph.assign({lon, lat});
    if (!region) return;
    mask[c] = 0;
    const geo::XY xy = geo::project_web_mercator({lon, lat});
    const Eigen::RowVectorXd grow =
        gp->basis.to_current(gp->basis.eval_raw_xy(xy.x, xy.y));
    gp_vals[c] = grow.dot(model.beta.segment(gp->offset, gp->width));
    const Eigen::RowVectorXd mrow =
        mrf->basis.to_current(mrf->basis.eval_raw_region(*region));
    mrf_vals[c] = mrow.dot(model.beta.segment(mrf->offset, mrf->width));
  });
  for (int c = 0; c < cells; ++c) {
    r.masked[c] = mask[c] != 0;
    if (r.masked[c]) {
      r.gp(c) = r.mrf(c) = r.fused(c) = std::numeric_limits<double>::quiet_NaN();
    } else {
      r.gp(c) = gp_vals[c];
      r.mrf(c) = mrf_vals[c];
      r.fused(c) = std::exp(beta0 + gp_vals[c] + mrf_vals[c]);
    }
  }
  return r;
}

std::vector<InflationCurve> monthly_inflation(const FittedModel& model) {
  std::vector<InflationCurve> out;
  for (const design::Block& b : model.blocks) {
    if (b.role == design::Block::Role::Smooth &&
        b.var == design::SmoothVar::Month) {
      InflationCurve c;
      c.label = b.submarket ? to_string(*b.submarket) : "national";
      c.ratio.resize(12);
      c.ratio(0) = 1.0;
      Eigen::VectorXd f(12);
      for (int m = 1; m <= 12; ++m) {
        const Eigen::RowVectorXd row =
            b.basis.to_current(b.basis.eval_raw(static_cast<double>(m)));
        f(m - 1) = row.dot(model.beta.segment(b.offset, b.width));
      }
      for (int m = 1; m < 12; ++m) c.ratio(m) = std::exp(f(m) - f(m - 1));
      out.push_back(std::move(c));
    } else if (b.role == design::Block::Role::LinearCovariate &&
               b.var == design::SmoothVar::Month) {
      InflationCurve c;
      c.label = "national";
      c.ratio = Eigen::VectorXd::Constant(12, std::exp(model.beta(b.offset)));
      c.ratio(0) = 1.0;
      out.push_back(std::move(c));
    }
  }
  if (out.empty())
    throw input_error("monthly_inflation: model has no month term");
  return out;
}

// ---------------------------------------------------------------------------
// Serialization (versioned JSON artifact).

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v(i) = a[i].get<double>();
  return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd mat_from_json(const json& rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(i, j) = rows[i][j].get<double>();
  return m;
}

const char* role_name(design::Block::Role r) {
  switch (r) {
    case design::Block::Role::Intercept: return "intercept";
    case design::Block::Role::FeatureDummies: return "features";
    case design::Block::Role::BerCoding: return "ber";
    case design::Block::Role::TypeCoding: return "type";
    case design::Block::Role::LinearCovariate: return "linear";
    case design::Block::Role::Smooth: return "smooth";
    case design::Block::Role::GpSmooth: return "gp";
    case design::Block::Role::MrfSmooth: return "mrf";
  }
  return "?";
}

design::Block::Role role_from_name(const std::string& s) {
  using R = design::Block::Role;
  if (s == "intercept") return R::Intercept;
  if (s == "features") return R::FeatureDummies;
  if (s == "ber") return R::BerCoding;
  if (s == "type") return R::TypeCoding;
  if (s == "linear") return R::LinearCovariate;
  if (s == "smooth") return R::Smooth;
  if (s == "gp") return R::GpSmooth;
  if (s == "mrf") return R::MrfSmooth;
  throw input_error("model artifact: unknown block role " + s);
}

const char* kind_name(basis::BasisBlock::Kind k) {
  switch (k) {
    case basis::BasisBlock::Kind::Crs: return "crs";
    case basis::BasisBlock::Kind::PSpline: return "pspline";
    case basis::BasisBlock::Kind::Gp: return "gp";
    case basis::BasisBlock::Kind::Mrf: return "mrf";
  }
  return "?";
}

basis::BasisBlock::Kind kind_from_name(const std::string& s) {
  using K = basis::BasisBlock::Kind;
  if (s == "crs") return K::Crs;
  if (s == "pspline") return K::PSpline;
  if (s == "gp") return K::Gp;
  if (s == "mrf") return K::Mrf;
  throw input_error("model artifact: unknown basis kind " + s);
}

}  // namespace

void FittedModel::save(const std::string& path) const {
  json doc;
  doc["artifact"] = "fitted_model";
  doc["version"] = 1;
  doc["seed"] = seed;
  doc["config_hash"] = config_hash;
  doc["family"] = design::to_string(spec.family);
  doc["spec"] = {{"family", design::to_string(spec.family)},
                 {"knots",
                  {{"beds", spec.knots.beds},
                   {"baths", spec.knots.baths},
                   {"size", spec.knots.size},
                   {"month", spec.knots.month},
                   {"location", spec.knots.location}}},
                 {"kernel_rho", spec.kernel.rho},
                 {"knot_seed", spec.knot_seed},
                 {"submarket_interactions", spec.submarket_interactions}};
  doc["n_train"] = n_train;
  doc["sigma2"] = sigma2;
  doc["edf"] = edf;
  doc["gcv"] = gcv;
  doc["rss"] = rss;
  doc["deviance_explained"] = deviance_explained;
  doc["lambda"] = vec_to_json(lambda);
  doc["block_edf"] = vec_to_json(block_edf);
  doc["column_labels"] = column_labels;
  doc["beta"] = vec_to_json(beta);
  doc["warnings"] = warnings;

  // packed upper triangle of the covariance factor, row-major
  {
    const int p = static_cast<int>(cov_factor.rows());
    json packed = json::array();
    for (int i = 0; i < p; ++i)
      for (int j = i; j < p; ++j) packed.push_back(cov_factor(i, j));
    doc["cov_factor_packed"] = std::move(packed);
  }

  json blocks_json = json::array();
  for (const design::Block& b : blocks) {
    json jb;
    jb["role"] = role_name(b.role);
    jb["label"] = b.label;
    jb["offset"] = b.offset;
    jb["width"] = b.width;
    jb["lambda_index"] = b.lambda_index;
    if (b.submarket) jb["submarket"] = to_string(*b.submarket);
    jb["var"] = design::to_string(b.var);
    if (b.role == design::Block::Role::Smooth ||
        b.role == design::Block::Role::GpSmooth ||
        b.role == design::Block::Role::MrfSmooth) {
      json basis_json;
      basis_json["kind"] = kind_name(b.basis.kind);
      basis_json["knots"] = vec_to_json(b.basis.knots);
      basis_json["pspline_dim"] = b.basis.pspline_dim;
      basis_json["knot_coords"] = mat_to_json(b.basis.knot_coords);
      basis_json["rho"] = b.basis.rho;
      basis_json["num_regions"] = b.basis.num_regions;
      basis_json["householder_u"] = vec_to_json(b.basis.householder_u);
      jb["basis"] = std::move(basis_json);
    }
    blocks_json.push_back(std::move(jb));
  }
  doc["blocks"] = std::move(blocks_json);

  std::ofstream out(path);
  if (!out) throw input_error("cannot write model artifact: " + path);
  out << doc.dump() << "\n";
}

FittedModel FittedModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open model artifact: " + path);
  json doc = json::parse(in);
  if (doc.value("artifact", "") != "fitted_model")
    throw input_error("not a fitted_model artifact: " + path);
  if (doc.value("version", 0) != 1)
    throw input_error("unsupported fitted_model version");

  FittedModel m;
  m.seed = doc.value("seed", 0ULL);
  m.config_hash = doc.value("config_hash", "");
  const json& spec = doc.at("spec");
  auto family = design::parse_family(spec.at("family").get<std::string>());
  if (!family) throw input_error("model artifact: bad family");
  m.spec.family = *family;
  m.spec.knots.beds = spec.at("knots").at("beds").get<int>();
  m.spec.knots.baths = spec.at("knots").at("baths").get<int>();
  m.spec.knots.size = spec.at("knots").at("size").get<int>();
  m.spec.knots.month = spec.at("knots").at("month").get<int>();
  m.spec.knots.location = spec.at("knots").at("location").get<int>();
  m.spec.kernel.rho = spec.at("kernel_rho").get<double>();
  m.spec.knot_seed = spec.at("knot_seed").get<std::uint64_t>();
  m.spec.submarket_interactions = spec.at("submarket_interactions").get<bool>();

  m.n_train = doc.at("n_train").get<int>();
  m.sigma2 = doc.at("sigma2").get<double>();
  m.edf = doc.at("edf").get<double>();
  m.gcv = doc.at("gcv").get<double>();
  m.rss = doc.at("rss").get<double>();
  m.deviance_explained = doc.at("deviance_explained").get<double>();
  m.lambda = vec_from_json(doc.at("lambda"));
  m.block_edf = vec_from_json(doc.at("block_edf"));
  m.column_labels = doc.at("column_labels").get<std::vector<std::string>>();
  m.beta = vec_from_json(doc.at("beta"));
  m.warnings = doc.value("warnings", std::vector<std::string>{});

  const int p = static_cast<int>(m.beta.size());
  m.cov_factor = Eigen::MatrixXd::Zero(p, p);
  {
    const json& packed = doc.at("cov_factor_packed");
    std::size_t t = 0;
    for (int i = 0; i < p; ++i)
      for (int j = i; j < p; ++j) m.cov_factor(i, j) = packed[t++].get<double>();
  }

  for (const json& jb : doc.at("blocks")) {
    design::Block b;
    b.role = role_from_name(jb.at("role").get<std::string>());
    b.label = jb.at("label").get<std::string>();
    b.offset = jb.at("offset").get<int>();
    b.width = jb.at("width").get<int>();
    b.lambda_index = jb.at("lambda_index").get<int>();
    if (jb.contains("submarket")) {
      auto sm = parse_submarket(jb["submarket"].get<std::string>());
      if (!sm) throw input_error("model artifact: bad submarket");
      b.submarket = *sm;
    }
    for (int v = 0; v < design::kNumSmoothVars; ++v)
      if (design::to_string(static_cast<design::SmoothVar>(v)) ==
          jb.value("var", "beds"))
        b.var = static_cast<design::SmoothVar>(v);
    if (jb.contains("basis")) {
      const json& basis_json = jb["basis"];
      b.basis.kind = kind_from_name(basis_json.at("kind").get<std::string>());
      b.basis.knots = vec_from_json(basis_json.at("knots"));
      b.basis.pspline_dim = basis_json.at("pspline_dim").get<int>();
      b.basis.knot_coords = mat_from_json(basis_json.at("knot_coords"));
      b.basis.rho = basis_json.at("rho").get<double>();
      b.basis.num_regions = basis_json.at("num_regions").get<int>();
      b.basis.householder_u = vec_from_json(basis_json.at("householder_u"));
      if (b.basis.kind == basis::BasisBlock::Kind::Crs)
        b.basis.crs_moments = basis::crs_moment_map(b.basis.knots);
    }
    m.blocks.push_back(std::move(b));
  }
  return m;
}

}  // namespace avm::fit

#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avm/design.hpp"
#include "avm/geometry.hpp"
#include "avm/types.hpp"

namespace avm::fit {

/// Grid and refinement settings for the smoothing-parameter search.
struct LambdaGrid {
  double log10_min = -6.0;
  double log10_max = 8.0;
  int grid_points = 15;       // coarse grid, one point per log10 unit
  double golden_tol = 1e-3;   // bracket width in log10(lambda)
  int max_sweeps = 50;
  double rel_tol = 1e-7;      // relative GCV change across a sweep
};

struct PenalizedFit {
  Eigen::VectorXd beta;
  double rss = 0;
  double sigma2 = 0;
  double edf = 0;
  double gcv = 0;
  Eigen::VectorXd block_edf;   // one entry per penalized block
  Eigen::MatrixXd cov_factor;  // M upper-triangular, V_beta = sigma2 * M M'
  bool ridge_fallback = false;
  double condition = 0;        // rough l2 condition estimate of the system
};

/// Minimizes ||y - X b||^2 + sum_j lambda_j b' S_j b via a scaled Cholesky of
/// the normal equations. EDF is tr[(X'X + sum lambda_j S_j)^{-1} X'X];
/// sigma2 = RSS / (n - EDF).
PenalizedFit penalized_solve(const design::DesignMatrix& dm,
                             const Eigen::VectorXd& y,
                             const Eigen::VectorXd& lambda,
                             std::vector<std::string>* warnings = nullptr,
                             bool want_cov = true);

/// GCV = n RSS / (n - EDF)^2 at the given smoothing parameters.
double gcv_score(const design::DesignMatrix& dm, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& lambda);

double penalized_objective(const design::DesignMatrix& dm,
                           const Eigen::VectorXd& y,
                           const Eigen::VectorXd& lambda,
                           const Eigen::VectorXd& beta);
Eigen::VectorXd penalized_gradient(const design::DesignMatrix& dm,
                                   const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& lambda,
                                   const Eigen::VectorXd& beta);

struct LambdaSearch {
  Eigen::VectorXd lambda;
  double gcv = 0;
  int sweeps = 0;
  bool converged = true;
};

/// Coordinate descent over per-block log10(lambda): coarse grid scan, then
/// golden-section refinement around the best cell, sweeping until the GCV
/// change falls below rel_tol (ties prefer the smaller lambda). Each
/// coordinate profile is evaluated through a one-time eigen-reduction, so a
/// whole 1-D scan costs one Cholesky plus O(rank^2) per candidate.
LambdaSearch optimize_lambdas(const design::DesignMatrix& dm,
                              const Eigen::VectorXd& y,
                              const LambdaGrid& grid = {},
                              std::vector<std::string>* warnings = nullptr);

struct Prediction {
  std::string id;
  double log_mu = 0;     // point prediction of log price per m^2
  double se_mu = 0;      // standard error of the linear predictor
  double price = 0;      // exp(log_mu) * size, euro
  double lo50 = 0, hi50 = 0;
  double lo95 = 0, hi95 = 0;
  std::string error;     // non-empty when this record could not be scored
  bool ok() const { return error.empty(); }
};

struct FittedModel {
  design::ModelSpec spec;
  std::vector<design::Block> blocks;
  std::vector<std::string> column_labels;
  Eigen::VectorXd beta;
  Eigen::VectorXd lambda;
  Eigen::VectorXd block_edf;
  double sigma2 = 0;
  double edf = 0;
  double gcv = 0;
  double rss = 0;
  double deviance_explained = 0;
  int n_train = 0;
  Eigen::MatrixXd cov_factor;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<std::string> warnings;

  int cols() const { return static_cast<int>(beta.size()); }

  void save(const std::string& path) const;
  static FittedModel load(const std::string& path);
};

struct FitOptions {
  LambdaGrid grid;
  std::uint64_t seed = 1;
  std::string config_hash;
};

/// build_design + optimize_lambdas (skipped for the hedonic family) +
/// penalized_solve, keeping everything needed to score unseen records.
FittedModel fit_model(const std::vector<PropertyRecord>& records,
                      const design::ModelSpec& spec,
                      const geo::RegionGraph& graph,
                      const FitOptions& options = {});

inline constexpr double kZ50 = 0.6745;
inline constexpr double kZ95 = 1.95996;

/// Point predictions with 50% and 95% prediction intervals. Interval on the
/// log scale is mu +- z * sqrt(se_mu^2 + sigma2), then exponentiated and
/// scaled by size. Records that cannot be scored get an error entry.
std::vector<Prediction> predict(const FittedModel& model,
                                const std::vector<PropertyRecord>& records);

struct ScalingRow {
  std::string term;      // block label
  std::string level;     // coefficient / decoded level name
  double estimate = 0;   // log-scale effect
  double se = 0;
  double scaling = 0;    // exp(estimate)
  double lo = 0, hi = 0; // 95% CI of the scaling
};

/// Multiplicative scalings exp(beta) with 95% CIs for every parametric term;
/// deviation-coded factors are decoded to all levels including the reference.
std::vector<ScalingRow> summarize_parametric(const FittedModel& model);

struct SmoothCurve {
  std::string term;
  Eigen::VectorXd grid;
  Eigen::VectorXd value;
  Eigen::VectorXd lo, hi;  // pointwise 95% band
};

/// Centered smooth evaluated on a covariate grid. Month curves are
/// re-centered at the first month, with the band widened accordingly.
SmoothCurve extract_smooth(const FittedModel& model, design::SmoothVar var,
                           std::optional<Submarket> submarket = std::nullopt,
                           int grid_points = 100);

struct SurfaceRaster {
  int nx = 0, ny = 0;
  Eigen::VectorXd lon, lat;      // cell centres
  Eigen::VectorXd gp, mrf, fused;  // fused = exp(b0 + gp + mrf), euro/m^2
  std::vector<bool> masked;        // outside all regions
};

/// GP, MRF and fused price-per-m^2 rasters over the graph's extent.
SurfaceRaster extract_spatial_surface(const FittedModel& model,
                                      const geo::RegionGraph& graph,
                                      double lon_min, double lat_min,
                                      double lon_max, double lat_max,
                                      int nx, int ny);

struct InflationCurve {
  std::string label;            // submarket or "national"
  Eigen::VectorXd ratio;        // 12 entries, month-on-month; ratio(0) = 1
};

/// Month-on-month price ratios exp(f(m) - f(m-1)) from the month smooth,
/// per submarket for the S-GAM, global otherwise.
std::vector<InflationCurve> monthly_inflation(const FittedModel& model);

}  // namespace avm::fit

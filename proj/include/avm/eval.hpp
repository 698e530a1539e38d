#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avm/design.hpp"
#include "avm/fit.hpp"
#include "avm/forest.hpp"
#include "avm/geometry.hpp"
#include "avm/types.hpp"

namespace avm::eval {

/// A scored observation on the euro price scale.
struct ScoredPrediction {
  int record_index = -1;  // position in the input records
  double actual = 0;
  double predicted = 0;
  double lo50 = 0, hi50 = 0, lo95 = 0, hi95 = 0;
  double residual_log = 0;  // response minus fitted value, log scale
  double x = 0, y = 0;      // projected metres, for spatial diagnostics
  Submarket submarket = Submarket::Rural;
};

struct MetricsReport {
  double r2 = 0;
  double rmse = 0;          // euro
  double mape = 0;          // median absolute percentage error, fraction
  double within_5pct = 0;
  double within_10pct = 0;
  double pi50_coverage = 0;
  double pi95_coverage = 0;
  double morans_i = 0;
  bool morans_flag = false;   // |I| marginally outside [-1, 1]
  bool has_morans = false;
  int n = 0;
};

/// Price-scale metrics. Throws input_error when the actual prices have zero
/// variance (R^2 undefined).
MetricsReport compute_metrics(const std::vector<ScoredPrediction>& scored);

struct WeightSpec {
  int k = 20;                   // nearest neighbours
  bool row_standardize = true;  // inverse-distance rows scaled to sum 1
};

struct MoranResult {
  double I = 0;
  double p_value = 0;   // upper tail over permutations
  double perm_mean = 0;
  double perm_sd = 0;
  bool flag = false;
};

/// Moran's I of residuals under k-nearest inverse-distance weights
/// (duplicate coordinates get a 1 m distance floor), with a fixed-seed
/// permutation test.
MoranResult morans_i(const Eigen::VectorXd& residuals,
                     const Eigen::MatrixXd& coords, const WeightSpec& spec,
                     int n_permutations = 999, std::uint64_t seed = 1);

struct CvOptions {
  int folds = 5;
  std::uint64_t seed = 1;
  fit::LambdaGrid grid;
  forest::ForestConfig forest;
  WeightSpec weights;
  int moran_permutations = 199;
  std::string config_hash;
  /// Replaces the default spec of a matching GAM family (knot-selection runs).
  std::optional<design::ModelSpec> spec_override;
};

struct ModelCvResult {
  std::string model;
  std::vector<MetricsReport> per_fold;
  MetricsReport national;  // per-fold means plus pooled Moran's I
  std::map<std::string, MetricsReport> by_submarket;  // pooled held-out rows
  std::vector<ScoredPrediction> pooled;  // in record order
  std::vector<std::string> warnings;
};

struct CvResult {
  std::vector<int> fold_of;  // fold index per record
  std::vector<ModelCvResult> models;
};

/// Seeded k-fold cross-validation of the requested model families
/// ("sgam", "ngam", "hedonic", "rf"): fit on each complement, score the
/// held-out fold, report per-fold metrics, their national means, and pooled
/// submarket breakdowns.
CvResult kfold_cv(const std::vector<PropertyRecord>& records,
                  const std::vector<std::string>& model_names,
                  const geo::RegionGraph& graph, const CvOptions& options);

struct KnotCurvePoint {
  int k = 0;
  double r2 = 0;
  double within_5pct = 0;
  double mape = 0;
};

struct KnotCurve {
  std::string term;  // "size" or "location"
  std::vector<KnotCurvePoint> points;
  int suggested_k = 0;  // smallest k with r2 within 0.005 of the maximum
};

/// Cross-validated knot-count selection for the size smooth or the GP
/// location smooth.
KnotCurve knot_selection_cv(const std::vector<PropertyRecord>& records,
                            const std::string& term,
                            const std::vector<int>& candidate_ks,
                            const geo::RegionGraph& graph,
                            design::Family family, const CvOptions& options,
                            std::vector<std::string>* warnings = nullptr);

}  // namespace avm::eval

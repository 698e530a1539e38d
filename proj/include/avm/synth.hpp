#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "avm/design.hpp"
#include "avm/fit.hpp"
#include "avm/geometry.hpp"
#include "avm/types.hpp"

namespace avm::synth {

/// One location cluster of the mixture that places records on the map.
struct ClusterSpec {
  double x = 0, y = 0;     // centre, web-mercator metres
  double radius_m = 10000; // Gaussian spread
  double weight = 0;       // mixture weight
  Submarket submarket = Submarket::Towns;
};

/// Quadratic-in-standardized-covariate truth for one smooth term:
/// f(x) = linear * u + curve * (u^2 - 1), u = (x - centre) / scale.
/// For size the standardization is u = log(x / centre) / scale.
struct SmoothTruth {
  double linear = 0;
  double curve = 0;
  double centre = 0;
  double scale = 1;
  bool log_input = false;
  double eval(double x) const;
};

struct SynthConfig {
  int n = 5000;
  std::array<double, 4> extent{};  // xmin, ymin, xmax, ymax (metres)
  std::vector<ClusterSpec> clusters;
  double rural_weight = 0;  // remaining mass, uniform over the extent
  int num_regions = 36;

  double beta0 = 8.0;  // baseline log price per m^2 (~3000 euro)
  std::array<double, kNumFeatures> z_coef{};
  std::array<double, kNumBerLevels> ber_coef{};  // sums to zero
  // property-type log effects per submarket, each row sums to zero
  std::array<std::array<double, kNumPropertyTypes>, kNumSubmarkets> type_coef{};
  // per (submarket, smooth var) truth
  std::array<std::array<SmoothTruth, design::kNumSmoothVars>, kNumSubmarkets>
      smooths{};

  int gp_bumps = 10;
  double gp_amplitude = 0.35;   // sd of the spatial field over the map
  double region_amplitude = 0.10;
  double noise_sigma = 0.12;

  std::uint64_t structure_seed = 42;  // landscape, covariates, truths
  std::uint64_t noise_seed = 1;       // residual draws only

  static SynthConfig defaults();
  std::string canonical_string() const;  // hashed into artifacts

  void save(const std::string& path) const;
  static SynthConfig load(const std::string& path);
};

/// The generating process: everything needed to evaluate the truth anywhere,
/// plus the per-record latent decomposition.
struct GroundTruth {
  SynthConfig config;
  // spatial field = amplitude * (bump_field - mean) / sd
  Eigen::MatrixXd bump_centres;  // q x 2
  Eigen::VectorXd bump_scales, bump_weights;
  double field_mean = 0, field_sd = 1;
  Eigen::VectorXd region_effect;  // per region, centered

  // per-record latents
  Eigen::VectorXd gp_latent, region_latent, smooth_latent, parametric_latent;
  Eigen::VectorXd noiseless, noise;

  double gp_field(double x, double y) const;
  double smooth_value(Submarket sm, design::SmoothVar v, double x) const;

  void save(const std::string& path) const;
  static GroundTruth load(const std::string& path);
};

struct SynthResult {
  std::vector<PropertyRecord> records;
  geo::RegionGraph graph;
  GroundTruth truth;
};

/// Deterministic generator: cluster-mixture locations, Voronoi regions,
/// Table-3-shaped covariates, response assembled from the configured truths
/// plus Gaussian noise. Structure and noise draw from separate seeds.
SynthResult simulate_dataset(const SynthConfig& config);

struct SmoothRecovery {
  std::string term;      // e.g. "s(size):Dublin"
  double rmse = 0;       // centered RMSE on the evaluation grid
};

struct RecoveryReport {
  std::vector<SmoothRecovery> smooths;
  double gp_correlation = 0;       // fitted f5 vs true field at train points
  double spatial_correlation = 0;  // fitted f5+f6 vs true gp+region
  double max_z_coef_error = 0;
  double max_ber_coef_error = 0;
};

/// Compares a fitted model against the generating truth: centered RMSE of
/// each smooth on a within-range grid, spatial-field correlations at the
/// training locations, and parametric coefficient errors.
RecoveryReport recovery_error(const fit::FittedModel& model,
                              const GroundTruth& truth,
                              const std::vector<PropertyRecord>& records);

}  // namespace avm::synth

#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "avm/basis.hpp"
#include "avm/geometry.hpp"
#include "avm/types.hpp"

namespace avm::design {

enum class Family { SGam, NGam, Hedonic };

const std::string& to_string(Family f);
std::optional<Family> parse_family(const std::string& token);

/// Covariates that get smooth (or, in the hedonic model, linear) terms.
enum class SmoothVar : int { Beds = 0, Baths, Size, Month };
inline constexpr int kNumSmoothVars = 4;
const std::string& to_string(SmoothVar v);

struct KnotCounts {
  int beds = 8;
  int baths = 7;
  int size = 40;
  int month = 10;
  int location = 400;
  int of(SmoothVar v) const;
};

struct ModelSpec {
  Family family = Family::SGam;
  KnotCounts knots;
  basis::KernelConfig kernel;
  std::uint64_t knot_seed = 42;
  /// Factor-by-submarket interactions for the smooths and the property-type
  /// coding; on for S-GAM, off for N-GAM and hedonic.
  bool submarket_interactions = true;

  static ModelSpec for_family(Family f);
};

/// One contiguous column block of the assembled design matrix.
struct Block {
  enum class Role {
    Intercept,
    FeatureDummies,
    BerCoding,
    TypeCoding,
    LinearCovariate,
    Smooth,
    GpSmooth,
    MrfSmooth
  };
  Role role = Role::Intercept;
  std::string label;
  int offset = 0;
  int width = 0;
  int lambda_index = -1;  // -1 = unpenalized
  Eigen::MatrixXd penalty;
  std::optional<Submarket> submarket;  // factor-by filter
  SmoothVar var = SmoothVar::Beds;     // Smooth / LinearCovariate
  basis::BasisBlock basis;             // Smooth / GpSmooth / MrfSmooth
};

struct DesignMatrix {
  Eigen::MatrixXd X;
  std::vector<Block> blocks;
  std::vector<std::string> column_labels;
  int n_lambda = 0;

  int cols() const { return static_cast<int>(X.cols()); }
};

/// Deviation ("sum to grand mean") coding: L-1 columns, column j is
/// 1{level j} - 1{reference}, reference = last level of the enumeration.
Eigen::MatrixXd encode_sum_to_grand_mean(const std::vector<int>& levels,
                                         int n_levels,
                                         std::vector<std::string>* warnings = nullptr);

/// Maps the L-1 coded coefficients to all L level effects (which sum to 0).
Eigen::MatrixXd deviation_decode_map(int n_levels);

DesignMatrix build_design(const std::vector<PropertyRecord>& records,
                          const ModelSpec& spec, const geo::RegionGraph& graph,
                          std::vector<std::string>* warnings = nullptr);

/// Predict-time assembly: reproduces the training columns for an identical
/// record. Throws input_error for a region id outside the training graph.
Eigen::RowVectorXd assemble_row(const std::vector<Block>& blocks, int p,
                                const PropertyRecord& r);

}  // namespace avm::design

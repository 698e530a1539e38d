#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avm/types.hpp"

namespace avm::forest {

struct ForestConfig {
  int n_trees = 500;
  int mtry = 7;
  int min_node_size = 5;
  double sample_fraction = 1.0;  // bootstrap with replacement
  std::uint64_t seed = 1;
};

/// Covariate schema for the forest: the model covariates plus the address
/// labels (submarket and region). Categorical features carry a level count;
/// numeric ones have levels == 0.
struct FeatureSchema {
  int num_regions = 0;
  static constexpr int kNumNumeric = 6;  // beds, baths, size, month, x, y
  int count() const { return 10 + kNumFeatures; }
  int levels(int feature) const;         // 0 for numeric
  std::string name(int feature) const;
  double value(const PropertyRecord& r, int feature) const;
};

struct SplitRule {
  int feature = -1;               // -1 = leaf
  double threshold = 0;           // numeric: go left when value < threshold
  std::vector<int> left_levels;   // categorical: sorted levels going left
};

struct Node {
  SplitRule rule;
  int left = -1, right = -1;
  double value = 0;  // leaf mean of the response
  int n = 0;
};

struct Tree {
  std::vector<Node> nodes;  // node 0 is the root
  std::vector<int> oob;     // out-of-bag record indices
};

struct Forest {
  ForestConfig config;
  FeatureSchema schema;
  std::vector<Tree> trees;
  std::vector<double> importance;  // per feature, mean SSE decrease per tree
  std::uint64_t seed = 0;
  std::string config_hash;

  void save(const std::string& path) const;
  static Forest load(const std::string& path);
};

/// CART regression forest on log price per m^2: per tree a bootstrap sample,
/// mtry features per node, best variance-reduction split, leaves of at least
/// min_node_size rows. Trees grow in parallel with per-tree RNG streams, so
/// the forest is identical for any thread count.
Forest grow_forest(const std::vector<PropertyRecord>& records,
                   const ForestConfig& config, int num_regions,
                   std::vector<std::string>* warnings = nullptr);

/// Prediction of a single tree for a record.
double tree_predict(const Tree& tree, const FeatureSchema& schema,
                    const PropertyRecord& r);

/// Per-tree predictions (log scale); the forest prediction is their mean.
std::vector<double> per_tree_predictions(const Forest& forest,
                                         const PropertyRecord& r);

struct RfInterval {
  double lo = 0, hi = 0;
};

/// Empirical quantile interval of the per-tree distribution at
/// (1 +- level)/2 (type-7 interpolation), exponentiated and scaled by size.
RfInterval rf_interval(std::vector<double> tree_values, double level,
                       double size);

struct RfPrediction {
  std::string id;
  double log_mean = 0;
  double price = 0;
  double lo50 = 0, hi50 = 0, lo95 = 0, hi95 = 0;
};

RfPrediction rf_predict(const Forest& forest, const PropertyRecord& r);

/// Features ranked by cumulative node-purity gain, descending; ties resolve
/// by feature name.
std::vector<std::pair<std::string, double>> variable_importance(
    const Forest& forest);

/// Mean squared OOB error on the log scale.
double oob_mse(const Forest& forest, const std::vector<PropertyRecord>& records);

}  // namespace avm::forest

#include "avm/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "avm/parallel.hpp"
#include "avm/rng.hpp"

namespace avm::forest {

int FeatureSchema::levels(int feature) const {
  switch (feature) {
    case 6:
      return kNumSubmarkets;
    case 7:
      return num_regions;
    case 8:
      return kNumPropertyTypes;
    case 9:
      return kNumBerLevels;
    default:
      return 0;
  }
}

std::string FeatureSchema::name(int feature) const {
  switch (feature) {
    case 0: return "beds";
    case 1: return "baths";
    case 2: return "size";
    case 3: return "month";
    case 4: return "x";
    case 5: return "y";
    case 6: return "submarket";
    case 7: return "region";
    case 8: return "property_type";
    case 9: return "ber";
    default:
      return "feat_" + avm::to_string(static_cast<Feature>(feature - 10));
  }
}

double FeatureSchema::value(const PropertyRecord& r, int feature) const {
  switch (feature) {
    case 0: return r.beds;
    case 1: return r.baths;
    case 2: return r.size;
    case 3: return r.month;
    case 4: return r.x;
    case 5: return r.y;
    case 6: return static_cast<double>(r.submarket);
    case 7: return r.region_id;
    case 8: return static_cast<double>(r.property_type);
    case 9: return static_cast<double>(r.ber);
    default:
      return r.features[feature - 10] ? 1.0 : 0.0;
  }
}

namespace {

struct SplitCandidate {
  bool valid = false;
  double gain = 0;  // S_L^2/n_L + S_R^2/n_R - S^2/n
  SplitRule rule;
};

struct NodeStats {
  double sum = 0, sum_sq = 0;
  int n = 0;
};

/// Best variance-reduction split of `rows` on one feature, honouring the
/// min-node-size constraint on both children.
SplitCandidate best_split_on_feature(
    const std::vector<PropertyRecord>& records, const std::vector<double>& y,
    const std::vector<int>& rows, const FeatureSchema& schema, int feature,
    int min_node, const NodeStats& parent) {
  SplitCandidate best;
  const int L = schema.levels(feature);
  const double base = parent.sum * parent.sum / parent.n;

  if (L == 0) {
    // numeric: sort by (value, row) and scan the prefix boundary
    std::vector<std::pair<double, int>> vals;
    vals.reserve(rows.size());
    for (int r : rows) vals.emplace_back(schema.value(records[r], feature), r);
    std::sort(vals.begin(), vals.end());
    double sum_l = 0;
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      sum_l += y[vals[i].second];
      if (vals[i].first == vals[i + 1].first) continue;
      const int n_l = static_cast<int>(i) + 1;
      const int n_r = static_cast<int>(vals.size()) - n_l;
      if (n_l < min_node || n_r < min_node) continue;
      const double sum_r = parent.sum - sum_l;
      const double gain = sum_l * sum_l / n_l + sum_r * sum_r / n_r - base;
      if (!best.valid || gain > best.gain) {
        best.valid = true;
        best.gain = gain;
        best.rule.feature = feature;
        best.rule.threshold = 0.5 * (vals[i].first + vals[i + 1].first);
      }
    }
    return best;
  }

  // categorical: per-level response sums
  std::vector<double> lsum(L, 0.0);
  std::vector<int> lcount(L, 0);
  for (int r : rows) {
    const int lev = static_cast<int>(schema.value(records[r], feature));
    lsum[lev] += y[r];
    lcount[lev]++;
  }
  auto eval_mask = [&](const std::vector<char>& left) {
    double sum_l = 0;
    int n_l = 0;
    for (int l = 0; l < L; ++l)
      if (left[l]) {
        sum_l += lsum[l];
        n_l += lcount[l];
      }
    const int n_r = parent.n - n_l;
    if (n_l < min_node || n_r < min_node) return;
    const double sum_r = parent.sum - sum_l;
    const double gain = sum_l * sum_l / n_l + sum_r * sum_r / n_r - base;
    if (!best.valid || gain > best.gain) {
      best.valid = true;
      best.gain = gain;
      best.rule.feature = feature;
      best.rule.left_levels.clear();
      for (int l = 0; l < L; ++l)
        if (left[l] && lcount[l] > 0) best.rule.left_levels.push_back(l);
    }
  };

  if (L <= 10) {
    // exhaustive binary subsets; the last level stays right to kill mirrors
    const std::uint32_t total = 1u << (L - 1);
    std::vector<char> left(L, 0);
    for (std::uint32_t mask = 1; mask < total; ++mask) {
      for (int l = 0; l < L - 1; ++l) left[l] = (mask >> l) & 1u;
      left[L - 1] = 0;
      eval_mask(left);
    }
  } else {
    // order present levels by node mean, then scan as ordinal
    std::vector<int> present;
    for (int l = 0; l < L; ++l)
      if (lcount[l] > 0) present.push_back(l);
    std::sort(present.begin(), present.end(), [&](int a, int b) {
      const double ma = lsum[a] / lcount[a], mb = lsum[b] / lcount[b];
      if (ma != mb) return ma < mb;
      return a < b;
    });
    std::vector<char> left(L, 0);
    for (std::size_t q = 0; q + 1 < present.size(); ++q) {
      left[present[q]] = 1;
      eval_mask(left);
    }
  }
  return best;
}

struct TreeGrower {
  const std::vector<PropertyRecord>& records;
  const std::vector<double>& y;
  const FeatureSchema& schema;
  const ForestConfig& config;
  Rng rng;
  Tree tree;
  std::vector<double>* importance;  // per feature, this tree's contribution

  int grow(std::vector<int> rows) {
    NodeStats stats;
    stats.n = static_cast<int>(rows.size());
    for (int r : rows) {
      stats.sum += y[r];
      stats.sum_sq += y[r] * y[r];
    }
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes[node_id].n = stats.n;
    tree.nodes[node_id].value = stats.sum / stats.n;

    const double sse = stats.sum_sq - stats.sum * stats.sum / stats.n;
    if (stats.n < 2 * config.min_node_size ||
        sse <= 1e-12 * std::max(1.0, stats.sum_sq))
      return node_id;

    // sample mtry distinct candidate features
    std::vector<int> feats(schema.count());
    std::iota(feats.begin(), feats.end(), 0);
    const int mtry = std::min(config.mtry, schema.count());
    for (int i = 0; i < mtry; ++i) {
      const int j = i + rng.uniform_int(0, static_cast<int>(feats.size()) - 1 - i);
      std::swap(feats[i], feats[j]);
    }

    SplitCandidate best;
    for (int i = 0; i < mtry; ++i) {
      SplitCandidate c = best_split_on_feature(records, y, rows, schema,
                                               feats[i], config.min_node_size,
                                               stats);
      if (c.valid && (!best.valid || c.gain > best.gain)) best = std::move(c);
    }
    if (!best.valid || best.gain <= 1e-12) return node_id;

    (*importance)[best.rule.feature] += best.gain;

    std::vector<int> left_rows, right_rows;
    left_rows.reserve(rows.size());
    right_rows.reserve(rows.size());
    const int L = schema.levels(best.rule.feature);
    for (int r : rows) {
      const double v = schema.value(records[r], best.rule.feature);
      bool go_left;
      if (L == 0) {
        go_left = v < best.rule.threshold;
      } else {
        go_left = std::binary_search(best.rule.left_levels.begin(),
                                     best.rule.left_levels.end(),
                                     static_cast<int>(v));
      }
      (go_left ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    tree.nodes[node_id].rule = best.rule;
    const int left_id = grow(std::move(left_rows));
    tree.nodes[node_id].left = left_id;
    const int right_id = grow(std::move(right_rows));
    tree.nodes[node_id].right = right_id;
    return node_id;
  }
};

}  // namespace

Forest grow_forest(const std::vector<PropertyRecord>& records,
                   const ForestConfig& config, int num_regions,
                   std::vector<std::string>* warnings) {
  const int n = static_cast<int>(records.size());
  if (n < 2 * config.min_node_size)
    throw input_error("grow_forest: need at least 2*min_node_size records");
  if (config.n_trees < 1 || config.mtry < 1)
    throw input_error("grow_forest: bad config");

  Forest forest;
  forest.config = config;
  forest.schema.num_regions = num_regions;
  forest.seed = config.seed;
  forest.trees.resize(config.n_trees);
  forest.importance.assign(forest.schema.count(), 0.0);

  std::vector<double> y(n);
  bool constant = true;
  for (int i = 0; i < n; ++i) {
    y[i] = records[i].log_ppsm;
    if (y[i] != y[0]) constant = false;
  }
  if (constant && warnings)
    warnings->push_back("grow_forest: constant response, trees are single leaves");

  const int n_draw = std::max(1, static_cast<int>(std::lround(
                                     config.sample_fraction * n)));
  std::vector<std::vector<double>> tree_importance(
      config.n_trees, std::vector<double>(forest.schema.count(), 0.0));

  parallel_for(config.n_trees, [&](std::int64_t t) {
    Rng rng = Rng::keyed(config.seed, 0x74726565ULL, static_cast<std::uint64_t>(t));
    std::vector<int> rows(n_draw);
    std::vector<char> in_bag(n, 0);
    for (int i = 0; i < n_draw; ++i) {
      rows[i] = rng.uniform_int(0, n - 1);
      in_bag[rows[i]] = 1;
    }
    TreeGrower grower{records, y, forest.schema, config, rng, Tree{},
                      &tree_importance[t]};
    grower.grow(std::move(rows));
    for (int i = 0; i < n; ++i)
      if (!in_bag[i]) grower.tree.oob.push_back(i);
    forest.trees[t] = std::move(grower.tree);
  });

  for (int t = 0; t < config.n_trees; ++t)
    for (int f = 0; f < forest.schema.count(); ++f)
      forest.importance[f] += tree_importance[t][f];
  for (double& v : forest.importance) v /= config.n_trees;
  return forest;
}

double tree_predict(const Tree& tree, const FeatureSchema& schema,
                    const PropertyRecord& r) {
  int node = 0;
  while (tree.nodes[node].rule.feature >= 0) {
    const Node& nd = tree.nodes[node];
    const double v = schema.value(r, nd.rule.feature);
    bool go_left;
    if (schema.levels(nd.rule.feature) == 0) {
      go_left = v < nd.rule.threshold;
    } else {
      go_left = std::binary_search(nd.rule.left_levels.begin(),
                                   nd.rule.left_levels.end(),
                                   static_cast<int>(v));
    }
    node = go_left ? nd.left : nd.right;
  }
  return tree.nodes[node].value;
}

std::vector<double> per_tree_predictions(const Forest& forest,
                                         const PropertyRecord& r) {
  std::vector<double> out(forest.trees.size());
  for (std::size_t t = 0; t < forest.trees.size(); ++t)
    out[t] = tree_predict(forest.trees[t], forest.schema, r);
  return out;
}

namespace {
/// Type-7 quantile (linear interpolation of order statistics) of sorted v.
double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) return 0;
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}
}  // namespace

RfInterval rf_interval(std::vector<double> tree_values, double level,
                       double size) {
  std::sort(tree_values.begin(), tree_values.end());
  const double a = (1.0 - level) / 2.0;
  return {std::exp(quantile_sorted(tree_values, a)) * size,
          std::exp(quantile_sorted(tree_values, 1.0 - a)) * size};
}

RfPrediction rf_predict(const Forest& forest, const PropertyRecord& r) {
  RfPrediction out;
  out.id = r.id;
  const std::vector<double> vals = per_tree_predictions(forest, r);
  out.log_mean = std::accumulate(vals.begin(), vals.end(), 0.0) /
                 static_cast<double>(vals.size());
  out.price = std::exp(out.log_mean) * r.size;
  const RfInterval i50 = rf_interval(vals, 0.50, r.size);
  const RfInterval i95 = rf_interval(vals, 0.95, r.size);
  out.lo50 = i50.lo;
  out.hi50 = i50.hi;
  out.lo95 = i95.lo;
  out.hi95 = i95.hi;
  return out;
}

std::vector<std::pair<std::string, double>> variable_importance(
    const Forest& forest) {
  std::vector<std::pair<std::string, double>> rows;
  for (int f = 0; f < forest.schema.count(); ++f)
    rows.emplace_back(forest.schema.name(f), forest.importance[f]);
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return rows;
}

double oob_mse(const Forest& forest, const std::vector<PropertyRecord>& records) {
  std::vector<double> sum(records.size(), 0.0);
  std::vector<int> count(records.size(), 0);
  for (const Tree& tree : forest.trees)
    for (int i : tree.oob) {
      sum[i] += tree_predict(tree, forest.schema, records[i]);
      count[i]++;
    }
  double err = 0;
  int n = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (count[i] == 0) continue;
    const double e = records[i].log_ppsm - sum[i] / count[i];
    err += e * e;
    ++n;
  }
  if (n == 0) throw fit_error("oob_mse: no out-of-bag observations");
  return err / n;
}

// ---------------------------------------------------------------------------
// Serialization.

void Forest::save(const std::string& path) const {
  nlohmann::json doc;
  doc["artifact"] = "forest";
  doc["version"] = 1;
  doc["seed"] = seed;
  doc["config_hash"] = config_hash;
  doc["config"] = {{"n_trees", config.n_trees},
                   {"mtry", config.mtry},
                   {"min_node_size", config.min_node_size},
                   {"sample_fraction", config.sample_fraction},
                   {"seed", config.seed}};
  doc["num_regions"] = schema.num_regions;
  doc["importance"] = importance;
  nlohmann::json trees_json = nlohmann::json::array();
  for (const Tree& t : trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const Node& nd : t.nodes) {
      nlohmann::json n = nlohmann::json::array();
      n.push_back(nd.rule.feature);
      n.push_back(nd.rule.threshold);
      n.push_back(nd.left);
      n.push_back(nd.right);
      n.push_back(nd.value);
      n.push_back(nd.n);
      n.push_back(nd.rule.left_levels);
      nodes.push_back(std::move(n));
    }
    trees_json.push_back(std::move(nodes));
  }
  doc["trees"] = std::move(trees_json);
  std::ofstream out(path);
  if (!out) throw input_error("cannot write forest artifact: " + path);
  out << doc.dump() << "\n";
}

Forest Forest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open forest artifact: " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  if (doc.value("artifact", "") != "forest")
    throw input_error("not a forest artifact: " + path);
  Forest f;
  f.seed = doc.value("seed", 0ULL);
  f.config_hash = doc.value("config_hash", "");
  const auto& c = doc.at("config");
  f.config.n_trees = c.at("n_trees").get<int>();
  f.config.mtry = c.at("mtry").get<int>();
  f.config.min_node_size = c.at("min_node_size").get<int>();
  f.config.sample_fraction = c.at("sample_fraction").get<double>();
  f.config.seed = c.at("seed").get<std::uint64_t>();
  f.schema.num_regions = doc.at("num_regions").get<int>();
  f.importance = doc.at("importance").get<std::vector<double>>();
  for (const auto& tj : doc.at("trees")) {
    Tree t;
    for (const auto& nj : tj) {
      Node nd;
      nd.rule.feature = nj.at(0).get<int>();
      nd.rule.threshold = nj.at(1).get<double>();
      nd.left = nj.at(2).get<int>();
      nd.right = nj.at(3).get<int>();
      nd.value = nj.at(4).get<double>();
      nd.n = nj.at(5).get<int>();
      nd.rule.left_levels = nj.at(6).get<std::vector<int>>();
      t.nodes.push_back(std::move(nd));
    }
    f.trees.push_back(std::move(t));
  }
  return f;
}

}  // namespace avm::forest

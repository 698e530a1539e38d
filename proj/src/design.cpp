#include "avm/design.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace avm::design {

namespace {
const std::array<std::string, 3> kFamilyNames = {"sgam", "ngam", "hedonic"};
const std::array<std::string, kNumSmoothVars> kSmoothVarNames = {
    "beds", "baths", "size", "month"};
}  // namespace

const std::string& to_string(Family f) {
  return kFamilyNames[static_cast<int>(f)];
}

std::optional<Family> parse_family(const std::string& token) {
  std::string t = token;
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  for (int i = 0; i < 3; ++i)
    if (kFamilyNames[i] == t) return static_cast<Family>(i);
  return std::nullopt;
}

const std::string& to_string(SmoothVar v) {
  return kSmoothVarNames[static_cast<int>(v)];
}

int KnotCounts::of(SmoothVar v) const {
  switch (v) {
    case SmoothVar::Beds:
      return beds;
    case SmoothVar::Baths:
      return baths;
    case SmoothVar::Size:
      return size;
    case SmoothVar::Month:
      return month;
  }
  return 0;
}

ModelSpec ModelSpec::for_family(Family f) {
  ModelSpec spec;
  spec.family = f;
  spec.submarket_interactions = (f == Family::SGam);
  return spec;
}

Eigen::MatrixXd encode_sum_to_grand_mean(const std::vector<int>& levels,
                                         int n_levels,
                                         std::vector<std::string>* warnings) {
  if (n_levels < 2) {
    if (warnings) warnings->push_back("deviation coding: single level, empty coding");
    return Eigen::MatrixXd::Zero(levels.size(), 0);
  }
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(levels.size(), n_levels - 1);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const int l = levels[i];
    if (l < 0 || l >= n_levels)
      throw input_error("deviation coding: level out of range");
    if (l == n_levels - 1)
      C.row(i).setConstant(-1.0);  // reference level
    else
      C(i, l) = 1.0;
  }
  return C;
}

Eigen::MatrixXd deviation_decode_map(int n_levels) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n_levels, n_levels - 1);
  M.topRows(n_levels - 1).setIdentity();
  M.bottomRows(1).setConstant(-1.0);
  return M;
}

namespace {

double covariate_value(const PropertyRecord& r, SmoothVar v) {
  switch (v) {
    case SmoothVar::Beds:
      return static_cast<double>(r.beds);
    case SmoothVar::Baths:
      return static_cast<double>(r.baths);
    case SmoothVar::Size:
      return r.size;
    case SmoothVar::Month:
      return static_cast<double>(r.month);
  }
  return 0;
}

basis::BasisBlock scalar_smooth(const std::vector<double>& values, SmoothVar v,
                                int k, std::vector<std::string>* warnings) {
  if (v == SmoothVar::Month) return basis::pspline_basis(values, k, warnings);
  return basis::crs_basis(values, k, warnings);
}

}  // namespace

DesignMatrix build_design(const std::vector<PropertyRecord>& records,
                          const ModelSpec& spec, const geo::RegionGraph& graph,
                          std::vector<std::string>* warnings) {
  const int n = static_cast<int>(records.size());
  if (n == 0) throw input_error("build_design: no records");

  DesignMatrix dm;
  std::vector<std::pair<Block, Eigen::MatrixXd>> staged;  // block + columns

  auto stage = [&](Block b, Eigen::MatrixXd cols,
                   const std::vector<std::string>& labels) {
    b.width = static_cast<int>(cols.cols());
    staged.emplace_back(std::move(b), std::move(cols));
    dm.column_labels.insert(dm.column_labels.end(), labels.begin(), labels.end());
  };

  // intercept
  {
    Block b;
    b.role = Block::Role::Intercept;
    b.label = "intercept";
    stage(std::move(b), Eigen::MatrixXd::Ones(n, 1), {"intercept"});
  }

  // Z: 11 feature dummies
  {
    Eigen::MatrixXd Z(n, kNumFeatures);
    std::vector<std::string> labels;
    for (int f = 0; f < kNumFeatures; ++f) {
      for (int i = 0; i < n; ++i) Z(i, f) = records[i].features[f] ? 1.0 : 0.0;
      labels.push_back("feat:" + to_string(static_cast<Feature>(f)));
    }
    Block b;
    b.role = Block::Role::FeatureDummies;
    b.label = "features";
    stage(std::move(b), std::move(Z), labels);
  }

  // BER deviation coding (reference = unknown, the last level)
  {
    std::vector<int> levels(n);
    for (int i = 0; i < n; ++i) levels[i] = static_cast<int>(records[i].ber);
    Eigen::MatrixXd C = encode_sum_to_grand_mean(levels, kNumBerLevels, warnings);
    std::vector<std::string> labels;
    for (int l = 0; l < kNumBerLevels - 1; ++l)
      labels.push_back("ber:" + to_string(static_cast<Ber>(l)));
    Block b;
    b.role = Block::Role::BerCoding;
    b.label = "ber";
    stage(std::move(b), std::move(C), labels);
  }

  // property-type coding, global or per submarket
  auto type_levels = [&](const std::vector<int>& rows) {
    std::vector<int> levels(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      levels[i] = static_cast<int>(records[rows[i]].property_type);
    return levels;
  };
  std::array<std::vector<int>, kNumSubmarkets> rows_by_submarket;
  for (int i = 0; i < n; ++i)
    rows_by_submarket[static_cast<int>(records[i].submarket)].push_back(i);

  if (spec.family != Family::Hedonic && spec.submarket_interactions) {
    for (int s = 0; s < kNumSubmarkets; ++s) {
      const auto& rows = rows_by_submarket[s];
      const std::string sm = to_string(static_cast<Submarket>(s));
      Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(n, kNumPropertyTypes - 1);
      if (!rows.empty()) {
        Eigen::MatrixXd C =
            encode_sum_to_grand_mean(type_levels(rows), kNumPropertyTypes, warnings);
        for (std::size_t i = 0; i < rows.size(); ++i) cols.row(rows[i]) = C.row(i);
      }
      std::vector<std::string> labels;
      for (int l = 0; l < kNumPropertyTypes - 1; ++l)
        labels.push_back("type:" + sm + ":" +
                         to_string(static_cast<PropertyType>(l)));
      Block b;
      b.role = Block::Role::TypeCoding;
      b.label = "type:" + sm;
      b.submarket = static_cast<Submarket>(s);
      stage(std::move(b), std::move(cols), labels);
    }
  } else {
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    Eigen::MatrixXd C =
        encode_sum_to_grand_mean(type_levels(all), kNumPropertyTypes, warnings);
    std::vector<std::string> labels;
    for (int l = 0; l < kNumPropertyTypes - 1; ++l)
      labels.push_back("type:" + to_string(static_cast<PropertyType>(l)));
    Block b;
    b.role = Block::Role::TypeCoding;
    b.label = "type";
    stage(std::move(b), std::move(C), labels);
  }

  if (spec.family == Family::Hedonic) {
    // raw linear columns for beds, baths, size, month
    for (int v = 0; v < kNumSmoothVars; ++v) {
      Eigen::MatrixXd col(n, 1);
      for (int i = 0; i < n; ++i)
        col(i, 0) = covariate_value(records[i], static_cast<SmoothVar>(v));
      Block b;
      b.role = Block::Role::LinearCovariate;
      b.var = static_cast<SmoothVar>(v);
      b.label = "linear:" + to_string(b.var);
      stage(std::move(b), std::move(col), {b.label});
    }
  } else {
    // f1..f4: centered smooths, per submarket for the S-GAM
    for (int v = 0; v < kNumSmoothVars; ++v) {
      const SmoothVar var = static_cast<SmoothVar>(v);
      const int k = spec.knots.of(var);
      if (spec.submarket_interactions) {
        for (int s = 0; s < kNumSubmarkets; ++s) {
          const auto& rows = rows_by_submarket[s];
          if (rows.empty()) {
            if (warnings)
              warnings->push_back("design: no records in submarket " +
                                  to_string(static_cast<Submarket>(s)));
            continue;
          }
          std::vector<double> values(rows.size());
          for (std::size_t i = 0; i < rows.size(); ++i)
            values[i] = covariate_value(records[rows[i]], var);
          if (std::set<double>(values.begin(), values.end()).size() < 2) {
            if (warnings)
              warnings->push_back(
                  "design: " + to_string(var) + " is constant in submarket " +
                  to_string(static_cast<Submarket>(s)) + "; smooth skipped");
            continue;
          }
          basis::BasisBlock bb =
              basis::center_block(scalar_smooth(values, var, k, warnings));
          Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(n, bb.design.cols());
          for (std::size_t i = 0; i < rows.size(); ++i)
            cols.row(rows[i]) = bb.design.row(i);
          bb.design.resize(0, 0);
          Block b;
          b.role = Block::Role::Smooth;
          b.var = var;
          b.submarket = static_cast<Submarket>(s);
          b.label = "s(" + to_string(var) + "):" +
                    to_string(static_cast<Submarket>(s));
          b.penalty = bb.penalty;
          b.basis = std::move(bb);
          b.lambda_index = dm.n_lambda++;
          std::vector<std::string> labels;
          for (int c = 0; c < cols.cols(); ++c)
            labels.push_back(b.label + ":" + std::to_string(c));
          stage(std::move(b), std::move(cols), labels);
        }
      } else {
        std::vector<double> values(n);
        for (int i = 0; i < n; ++i) values[i] = covariate_value(records[i], var);
        basis::BasisBlock bb =
            basis::center_block(scalar_smooth(values, var, k, warnings));
        Eigen::MatrixXd cols = bb.design;
        bb.design.resize(0, 0);
        Block b;
        b.role = Block::Role::Smooth;
        b.var = var;
        b.label = "s(" + to_string(var) + ")";
        b.penalty = bb.penalty;
        b.basis = std::move(bb);
        b.lambda_index = dm.n_lambda++;
        std::vector<std::string> labels;
        for (int c = 0; c < cols.cols(); ++c)
          labels.push_back(b.label + ":" + std::to_string(c));
        stage(std::move(b), std::move(cols), labels);
      }
    }

    // f5: low-rank GP over projected coordinates
    {
      Eigen::MatrixXd coords(n, 2);
      for (int i = 0; i < n; ++i) {
        coords(i, 0) = records[i].x;
        coords(i, 1) = records[i].y;
      }
      Eigen::MatrixXd knots = basis::select_knots_spacefilling(
          coords, spec.knots.location, spec.knot_seed, warnings);
      basis::BasisBlock bb = basis::gp_basis(coords, knots, spec.kernel);
      Eigen::MatrixXd cols = bb.design;
      bb.design.resize(0, 0);
      Block b;
      b.role = Block::Role::GpSmooth;
      b.label = "s(location)";
      b.penalty = bb.penalty;
      b.basis = std::move(bb);
      b.lambda_index = dm.n_lambda++;
      std::vector<std::string> labels;
      for (int c = 0; c < cols.cols(); ++c)
        labels.push_back(b.label + ":" + std::to_string(c));
      stage(std::move(b), std::move(cols), labels);
    }

    // f6: MRF over regions
    {
      std::vector<int> region_ids(n);
      for (int i = 0; i < n; ++i) region_ids[i] = records[i].region_id;
      basis::BasisBlock bb = basis::mrf_basis(region_ids, graph);
      Eigen::MatrixXd cols = bb.design;
      bb.design.resize(0, 0);
      Block b;
      b.role = Block::Role::MrfSmooth;
      b.label = "mrf(region)";
      b.penalty = bb.penalty;
      b.basis = std::move(bb);
      b.lambda_index = dm.n_lambda++;
      std::vector<std::string> labels;
      for (int c = 0; c < cols.cols(); ++c)
        labels.push_back(b.label + ":" + std::to_string(c));
      stage(std::move(b), std::move(cols), labels);
    }
  }

  // assemble
  int p = 0;
  for (auto& [block, cols] : staged) p += static_cast<int>(cols.cols());
  dm.X.resize(n, p);
  int offset = 0;
  for (auto& [block, cols] : staged) {
    block.offset = offset;
    dm.X.middleCols(offset, cols.cols()) = cols;
    offset += static_cast<int>(cols.cols());
    dm.blocks.push_back(std::move(block));
  }
  return dm;
}

Eigen::RowVectorXd assemble_row(const std::vector<Block>& blocks, int p,
                                const PropertyRecord& r) {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(p);
  for (const Block& b : blocks) {
    switch (b.role) {
      case Block::Role::Intercept:
        row(b.offset) = 1.0;
        break;
      case Block::Role::FeatureDummies:
        for (int f = 0; f < kNumFeatures; ++f)
          row(b.offset + f) = r.features[f] ? 1.0 : 0.0;
        break;
      case Block::Role::BerCoding: {
        const int l = static_cast<int>(r.ber);
        if (l == kNumBerLevels - 1)
          row.segment(b.offset, b.width).setConstant(-1.0);
        else
          row(b.offset + l) = 1.0;
        break;
      }
      case Block::Role::TypeCoding: {
        if (b.submarket && *b.submarket != r.submarket) break;
        const int l = static_cast<int>(r.property_type);
        if (l == kNumPropertyTypes - 1)
          row.segment(b.offset, b.width).setConstant(-1.0);
        else
          row(b.offset + l) = 1.0;
        break;
      }
      case Block::Role::LinearCovariate:
        row(b.offset) = covariate_value(r, b.var);
        break;
      case Block::Role::Smooth: {
        if (b.submarket && *b.submarket != r.submarket) break;
        const Eigen::RowVectorXd raw = b.basis.eval_raw(covariate_value(r, b.var));
        row.segment(b.offset, b.width) = b.basis.to_current(raw);
        break;
      }
      case Block::Role::GpSmooth: {
        const Eigen::RowVectorXd raw = b.basis.eval_raw_xy(r.x, r.y);
        row.segment(b.offset, b.width) = b.basis.to_current(raw);
        break;
      }
      case Block::Role::MrfSmooth: {
        const Eigen::RowVectorXd raw = b.basis.eval_raw_region(r.region_id);
        row.segment(b.offset, b.width) = b.basis.to_current(raw);
        break;
      }
    }
  }
  return row;
}

}  // namespace avm::design

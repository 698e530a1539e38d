#include "avm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "avm/kernels.hpp"
#include "avm/parallel.hpp"
#include "avm/rng.hpp"

namespace avm::eval {

namespace {
double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}
}  // namespace

MetricsReport compute_metrics(const std::vector<ScoredPrediction>& scored) {
  const int n = static_cast<int>(scored.size());
  if (n == 0) throw input_error("compute_metrics: no predictions");
  MetricsReport rep;
  rep.n = n;

  double mean_actual = 0;
  for (const auto& s : scored) mean_actual += s.actual;
  mean_actual /= n;

  double sse = 0, sst = 0, cover50 = 0, cover95 = 0, in5 = 0, in10 = 0;
  std::vector<double> ape;
  ape.reserve(n);
  for (const auto& s : scored) {
    const double err = s.predicted - s.actual;
    sse += err * err;
    sst += (s.actual - mean_actual) * (s.actual - mean_actual);
    const double rel = std::abs(err) / s.actual;
    ape.push_back(rel);
    if (rel <= 0.05) in5 += 1;
    if (rel <= 0.10) in10 += 1;
    if (s.actual >= s.lo50 && s.actual <= s.hi50) cover50 += 1;
    if (s.actual >= s.lo95 && s.actual <= s.hi95) cover95 += 1;
  }
  if (sst <= 0) throw input_error("compute_metrics: zero price variance");
  rep.r2 = 1.0 - sse / sst;
  rep.rmse = std::sqrt(sse / n);
  rep.mape = median(std::move(ape));
  rep.within_5pct = in5 / n;
  rep.within_10pct = in10 / n;
  rep.pi50_coverage = cover50 / n;
  rep.pi95_coverage = cover95 / n;
  return rep;
}

// ---------------------------------------------------------------------------
// Moran's I.

namespace {

struct MoranWeights {
  std::vector<std::vector<int>> idx;
  std::vector<std::vector<double>> w;
  double total = 0;
};

MoranWeights build_weights(const Eigen::MatrixXd& coords, const WeightSpec& spec) {
  const int n = static_cast<int>(coords.rows());
  const int k = std::min(spec.k, n - 1);
  kernels::KnnResult nn = kernels::knn(coords, k);
  MoranWeights mw;
  mw.idx = std::move(nn.index);
  mw.w.resize(n);
  for (int i = 0; i < n; ++i) {
    mw.w[i].resize(mw.idx[i].size());
    double row_sum = 0;
    for (std::size_t t = 0; t < mw.idx[i].size(); ++t) {
      const double d = std::max(nn.distance[i][t], 1.0);  // 1 m floor
      mw.w[i][t] = 1.0 / d;
      row_sum += mw.w[i][t];
    }
    if (spec.row_standardize && row_sum > 0)
      for (double& wv : mw.w[i]) wv /= row_sum;
  }
  for (int i = 0; i < n; ++i)
    mw.total += std::accumulate(mw.w[i].begin(), mw.w[i].end(), 0.0);
  return mw;
}

/// I = (n / W) * sum_ij w_ij z_i z_j / sum_i z_i^2 for a permutation `perm`
/// of the deviations z. Row terms are computed independently and summed in
/// index order, so the value is thread-count invariant.
double moran_stat(const MoranWeights& mw, const Eigen::VectorXd& z,
                  const std::vector<int>* perm) {
  const int n = static_cast<int>(mw.idx.size());
  std::vector<double> row_term(n);
  parallel_for(n, [&](std::int64_t i) {
    const double zi = perm ? z((*perm)[i]) : z(i);
    double s = 0;
    for (std::size_t t = 0; t < mw.idx[i].size(); ++t) {
      const int j = mw.idx[i][t];
      s += mw.w[i][t] * (perm ? z((*perm)[j]) : z(j));
    }
    row_term[i] = zi * s;
  });
  double num = 0;
  for (int i = 0; i < n; ++i) num += row_term[i];
  return (n / mw.total) * num / z.squaredNorm();
}

}  // namespace

MoranResult morans_i(const Eigen::VectorXd& residuals,
                     const Eigen::MatrixXd& coords, const WeightSpec& spec,
                     int n_permutations, std::uint64_t seed) {
  const int n = static_cast<int>(residuals.size());
  if (n < 3) throw input_error("morans_i: need at least 3 observations");
  const Eigen::VectorXd z = residuals.array() - residuals.mean();
  if (z.squaredNorm() <= 0) throw input_error("morans_i: zero variance");

  const MoranWeights mw = build_weights(coords, spec);
  MoranResult out;
  out.I = moran_stat(mw, z, nullptr);
  out.flag = std::abs(out.I) > 1.0;

  if (n_permutations > 0) {
    std::vector<double> perm_I(n_permutations);
    // permutations are independent; each draws its own keyed stream
    parallel_for(n_permutations, [&](std::int64_t b) {
      Rng rng = Rng::keyed(seed, 0x6d6f72616eULL, static_cast<std::uint64_t>(b));
      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(perm);
      perm_I[b] = moran_stat(mw, z, &perm);
    });
    int ge = 0;
    double mean = 0;
    for (double v : perm_I) {
      if (v >= out.I) ++ge;
      mean += v;
    }
    mean /= n_permutations;
    double var = 0;
    for (double v : perm_I) var += (v - mean) * (v - mean);
    out.perm_mean = mean;
    out.perm_sd = n_permutations > 1 ? std::sqrt(var / (n_permutations - 1)) : 0;
    out.p_value = static_cast<double>(1 + ge) / (n_permutations + 1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation.

namespace {

std::vector<ScoredPrediction> score_gam(const fit::FittedModel& model,
                                        const std::vector<PropertyRecord>& test,
                                        const std::vector<int>& test_idx,
                                        std::vector<std::string>* warnings) {
  std::vector<fit::Prediction> preds = fit::predict(model, test);
  std::vector<ScoredPrediction> out;
  out.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (!preds[i].ok()) {
      if (warnings)
        warnings->push_back("prediction failed for " + test[i].id + ": " +
                            preds[i].error);
      continue;
    }
    ScoredPrediction s;
    s.record_index = test_idx[i];
    s.actual = test[i].price;
    s.predicted = preds[i].price;
    s.lo50 = preds[i].lo50;
    s.hi50 = preds[i].hi50;
    s.lo95 = preds[i].lo95;
    s.hi95 = preds[i].hi95;
    s.residual_log = test[i].log_ppsm - preds[i].log_mu;
    s.x = test[i].x;
    s.y = test[i].y;
    s.submarket = test[i].submarket;
    out.push_back(s);
  }
  return out;
}

std::vector<ScoredPrediction> score_rf(const forest::Forest& rf,
                                       const std::vector<PropertyRecord>& test,
                                       const std::vector<int>& test_idx) {
  std::vector<ScoredPrediction> out(test.size());
  parallel_for(static_cast<std::int64_t>(test.size()), [&](std::int64_t i) {
    const forest::RfPrediction p = forest::rf_predict(rf, test[i]);
    ScoredPrediction s;
    s.record_index = test_idx[i];
    s.actual = test[i].price;
    s.predicted = p.price;
    s.lo50 = p.lo50;
    s.hi50 = p.hi50;
    s.lo95 = p.lo95;
    s.hi95 = p.hi95;
    s.residual_log = test[i].log_ppsm - p.log_mean;
    s.x = test[i].x;
    s.y = test[i].y;
    s.submarket = test[i].submarket;
    out[i] = s;
  });
  return out;
}

MetricsReport mean_of_folds(const std::vector<MetricsReport>& folds) {
  MetricsReport m;
  int used = 0;
  for (const auto& f : folds) {
    if (f.n == 0) continue;
    m.r2 += f.r2;
    m.rmse += f.rmse;
    m.mape += f.mape;
    m.within_5pct += f.within_5pct;
    m.within_10pct += f.within_10pct;
    m.pi50_coverage += f.pi50_coverage;
    m.pi95_coverage += f.pi95_coverage;
    m.n += f.n;
    ++used;
  }
  if (used > 0) {
    m.r2 /= used;
    m.rmse /= used;
    m.mape /= used;
    m.within_5pct /= used;
    m.within_10pct /= used;
    m.pi50_coverage /= used;
    m.pi95_coverage /= used;
  }
  return m;
}

}  // namespace

CvResult kfold_cv(const std::vector<PropertyRecord>& records,
                  const std::vector<std::string>& model_names,
                  const geo::RegionGraph& graph, const CvOptions& options) {
  const int n = static_cast<int>(records.size());
  const int k = options.folds;
  if (k < 2) throw input_error("kfold_cv: need k >= 2");
  if (k > n) throw input_error("kfold_cv: more folds than records");

  CvResult result;
  std::vector<std::string> shared_warnings;
  if (n < 10 * k)
    shared_warnings.push_back("kfold_cv: fewer than 10*k records");

  // seeded partition: shuffle, then deal round-robin (fold sizes differ <= 1)
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::keyed(options.seed, 0xf01d5ULL);
  rng.shuffle(order);
  result.fold_of.assign(n, 0);
  for (int i = 0; i < n; ++i) result.fold_of[order[i]] = i % k;

  // flag folds that lose an entire submarket or region
  for (int f = 0; f < k; ++f) {
    std::vector<char> sm_seen(kNumSubmarkets, 0), region_seen(graph.size(), 0);
    for (int i = 0; i < n; ++i)
      if (result.fold_of[i] != f) {
        sm_seen[static_cast<int>(records[i].submarket)] = 1;
        region_seen[records[i].region_id] = 1;
      }
    for (int s = 0; s < kNumSubmarkets; ++s)
      if (!sm_seen[s])
        shared_warnings.push_back(
            "kfold_cv: training complement of fold " + std::to_string(f) +
            " has no records in submarket " + to_string(static_cast<Submarket>(s)));
    int missing_regions = 0;
    for (int r = 0; r < graph.size(); ++r)
      if (!region_seen[r]) ++missing_regions;
    if (missing_regions > 0)
      shared_warnings.push_back("kfold_cv: fold " + std::to_string(f) + " drops " +
                                std::to_string(missing_regions) +
                                " region level(s) from training");
  }

  for (const std::string& name : model_names) {
    ModelCvResult mr;
    mr.model = name;
    mr.warnings = shared_warnings;
    std::vector<ScoredPrediction> pooled;
    pooled.reserve(n);

    for (int f = 0; f < k; ++f) {
      std::vector<PropertyRecord> train, test;
      std::vector<int> test_idx;
      train.reserve(n);
      for (int i = 0; i < n; ++i) {
        if (result.fold_of[i] == f) {
          test.push_back(records[i]);
          test_idx.push_back(i);
        } else {
          train.push_back(records[i]);
        }
      }

      std::vector<ScoredPrediction> scored;
      if (name == "rf") {
        forest::ForestConfig fc = options.forest;
        fc.seed = options.forest.seed + static_cast<std::uint64_t>(f);
        forest::Forest rf = grow_forest(train, fc, graph.size(), &mr.warnings);
        scored = score_rf(rf, test, test_idx);
      } else {
        auto family = design::parse_family(name);
        if (!family) throw input_error("kfold_cv: unknown model " + name);
        design::ModelSpec spec = options.spec_override && options.spec_override->family == *family
                                     ? *options.spec_override
                                     : design::ModelSpec::for_family(*family);
        fit::FitOptions fo;
        fo.grid = options.grid;
        fo.seed = options.seed;
        fo.config_hash = options.config_hash;
        fit::FittedModel model = fit::fit_model(train, spec, graph, fo);
        mr.warnings.insert(mr.warnings.end(), model.warnings.begin(),
                           model.warnings.end());
        scored = score_gam(model, test, test_idx, &mr.warnings);
      }

      MetricsReport fold_metrics;
      try {
        fold_metrics = compute_metrics(scored);
      } catch (const input_error&) {
        fold_metrics.n = 0;  // degenerate fold (e.g. leave-one-out)
      }
      mr.per_fold.push_back(fold_metrics);
      pooled.insert(pooled.end(), scored.begin(), scored.end());
    }

    std::sort(pooled.begin(), pooled.end(),
              [](const ScoredPrediction& a, const ScoredPrediction& b) {
                return a.record_index < b.record_index;
              });

    mr.national = mean_of_folds(mr.per_fold);
    // pooled held-out residual autocorrelation (log scale)
    if (static_cast<int>(pooled.size()) >= 3) {
      Eigen::VectorXd res(pooled.size());
      Eigen::MatrixXd coords(pooled.size(), 2);
      for (std::size_t i = 0; i < pooled.size(); ++i) {
        res(i) = pooled[i].residual_log;
        coords(i, 0) = pooled[i].x;
        coords(i, 1) = pooled[i].y;
      }
      const MoranResult mi = morans_i(res, coords, options.weights,
                                      options.moran_permutations, options.seed);
      mr.national.morans_i = mi.I;
      mr.national.morans_flag = mi.flag;
      mr.national.has_morans = true;
    }

    for (int s = 0; s < kNumSubmarkets; ++s) {
      std::vector<ScoredPrediction> sub;
      for (const auto& sp : pooled)
        if (static_cast<int>(sp.submarket) == s) sub.push_back(sp);
      if (sub.empty()) continue;
      MetricsReport sm;
      try {
        sm = compute_metrics(sub);
      } catch (const input_error&) {
        sm.n = static_cast<int>(sub.size());
      }
      mr.by_submarket[to_string(static_cast<Submarket>(s))] = sm;
    }

    mr.pooled = std::move(pooled);
    result.models.push_back(std::move(mr));
  }
  return result;
}

KnotCurve knot_selection_cv(const std::vector<PropertyRecord>& records,
                            const std::string& term,
                            const std::vector<int>& candidate_ks,
                            const geo::RegionGraph& graph,
                            design::Family family, const CvOptions& options,
                            std::vector<std::string>* warnings) {
  if (term != "size" && term != "location")
    throw input_error("knot_selection_cv: term must be size or location");
  KnotCurve curve;
  curve.term = term;

  // distinct-value ceiling for the candidates
  int distinct = 0;
  if (term == "size") {
    std::vector<double> vals;
    for (const auto& r : records) vals.push_back(r.size);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    distinct = static_cast<int>(vals.size());
  } else {
    std::set<std::pair<double, double>> pts;
    for (const auto& r : records) pts.insert({r.x, r.y});
    distinct = static_cast<int>(pts.size());
  }

  for (int k : candidate_ks) {
    if (k > distinct) {
      if (warnings)
        warnings->push_back("knot_selection_cv: skipping k=" + std::to_string(k) +
                            " (exceeds distinct values)");
      continue;
    }
    design::ModelSpec spec = design::ModelSpec::for_family(family);
    if (term == "size")
      spec.knots.size = k;
    else
      spec.knots.location = k;

    CvOptions run = options;
    run.spec_override = spec;
    CvResult cv = kfold_cv(records, {design::to_string(family)}, graph, run);
    const MetricsReport& m = cv.models.front().national;
    curve.points.push_back({k, m.r2, m.within_5pct, m.mape});
  }

  double best_r2 = -1e300;
  for (const auto& p : curve.points) best_r2 = std::max(best_r2, p.r2);
  for (const auto& p : curve.points)
    if (p.r2 >= best_r2 - 0.005) {
      curve.suggested_k = p.k;
      break;
    }
  return curve;
}

}  // namespace avm::eval

// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exits non-zero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "avm/eval.hpp"
#include "avm/fit.hpp"
#include "avm/forest.hpp"
#include "avm/io.hpp"
#include "avm/parallel.hpp"
#include "avm/rng.hpp"
#include "avm/synth.hpp"
#include "avm/textmine.hpp"
#include "oracles.hpp"

using namespace avm;
using clock_type = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass,
            const std::string& detail) {
  std::printf("%s criterion %2d (%s): %s\n", pass ? "PASS" : "FAIL", criterion,
              name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

/// Intercept + centered P-spline design on x, one penalized block.
design::DesignMatrix pspline_design(const Eigen::VectorXd& x, int k) {
  std::vector<double> values(x.data(), x.data() + x.size());
  basis::BasisBlock bb = basis::center_block(basis::pspline_basis(values, k));
  design::DesignMatrix dm;
  const int n = static_cast<int>(x.size());
  const int w = static_cast<int>(bb.design.cols());
  dm.X.resize(n, 1 + w);
  dm.X.col(0).setOnes();
  dm.X.rightCols(w) = bb.design;
  design::Block intercept;
  intercept.role = design::Block::Role::Intercept;
  intercept.offset = 0;
  intercept.width = 1;
  dm.blocks.push_back(intercept);
  design::Block smooth;
  smooth.role = design::Block::Role::Smooth;
  smooth.offset = 1;
  smooth.width = w;
  smooth.penalty = bb.penalty;
  smooth.basis = bb;
  smooth.lambda_index = 0;
  dm.blocks.push_back(smooth);
  dm.column_labels.assign(1 + w, "c");
  dm.n_lambda = 1;
  return dm;
}

synth::SynthResult make_dataset(int n, std::uint64_t noise_seed,
                                int num_regions,
                                double gp_amplitude = 0.35,
                                double noise_sigma = 0.12) {
  synth::SynthConfig cfg = synth::SynthConfig::defaults();
  cfg.n = n;
  cfg.num_regions = num_regions;
  cfg.noise_seed = noise_seed;
  cfg.gp_amplitude = gp_amplitude;
  cfg.noise_sigma = noise_sigma;
  return synth::simulate_dataset(cfg);
}

Eigen::VectorXd responses(const std::vector<PropertyRecord>& records) {
  Eigen::VectorXd y(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) y(i) = records[i].log_ppsm;
  return y;
}

// --------------------------------------------------------------------------

void criterion_1_ols_reduction() {
  auto data = make_dataset(500, 11, 10);
  const auto t0 = clock_type::now();
  design::ModelSpec spec = design::ModelSpec::for_family(design::Family::Hedonic);
  fit::FittedModel model = fit::fit_model(data.records, spec, data.graph);
  const double elapsed = seconds_since(t0);

  // oracle over the identified (non-empty) columns via rank-revealing QR
  auto dm = design::build_design(data.records, spec, data.graph);
  std::vector<int> keep;
  for (int c = 0; c < dm.cols(); ++c)
    if (dm.X.col(c).cwiseAbs().maxCoeff() > 0) keep.push_back(c);
  Eigen::MatrixXd X(dm.X.rows(), keep.size());
  for (std::size_t c = 0; c < keep.size(); ++c) X.col(c) = dm.X.col(keep[c]);
  const Eigen::VectorXd y = responses(data.records);
  const Eigen::VectorXd oracle = oracles::ols_qr(X, y);
  double max_rel = 0;
  const double scale = oracle.cwiseAbs().maxCoeff();
  for (std::size_t c = 0; c < keep.size(); ++c)
    max_rel = std::max(max_rel,
                       std::abs(model.beta(keep[c]) - oracle(c)) / scale);
  report(1, "OLS reduction", max_rel < 1e-8 && elapsed < 1.0,
         fmt("max rel coef diff %.2e, fit %.2f s (n=500)", max_rel, elapsed));
}

void criterion_2_penalty_limits() {
  Rng rng(7);
  const int n = 150;
  Eigen::VectorXd x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x(i) = rng.uniform(0, 10);
    y(i) = 0.8 + 0.4 * x(i) + 0.3 * rng.normal();
  }
  auto dm = pspline_design(x, 10);
  Eigen::VectorXd lam(1);

  lam << 1e12;
  auto heavy = fit::penalized_solve(dm, y, lam);
  Eigen::MatrixXd line(n, 2);
  line.col(0).setOnes();
  line.col(1) = x;
  const Eigen::VectorXd line_fit = line * oracles::ols_qr(line, y);
  const double gap_heavy = ((dm.X * heavy.beta) - line_fit).cwiseAbs().maxCoeff();

  lam << 1e-12;
  auto light = fit::penalized_solve(dm, y, lam);
  const Eigen::VectorXd free_fit = dm.X * oracles::ols_qr(dm.X, y);
  const double gap_light = ((dm.X * light.beta) - free_fit).cwiseAbs().maxCoeff();

  report(2, "penalty limits", gap_heavy < 1e-4 && gap_light < 1e-6,
         fmt("lambda=1e12 vs line %.2e (tol 1e-4); lambda=1e-12 vs OLS %.2e "
             "(tol 1e-6)",
             gap_heavy, gap_light));
}

void criterion_3_gradient_check() {
  auto data = make_dataset(400, 13, 8);
  design::ModelSpec spec = design::ModelSpec::for_family(design::Family::NGam);
  spec.knots.location = 25;
  spec.knots.size = 12;
  auto dm = design::build_design(data.records, spec, data.graph);
  const Eigen::VectorXd y = responses(data.records);
  Eigen::VectorXd lam = Eigen::VectorXd::Constant(dm.n_lambda, 2.5);

  Rng rng(17);
  double worst = 0;
  for (int point = 0; point < 20; ++point) {
    Eigen::VectorXd beta(dm.cols());
    for (int c = 0; c < dm.cols(); ++c) beta(c) = 0.4 * rng.normal();
    const Eigen::VectorXd grad = fit::penalized_gradient(dm, y, lam, beta);
    const double gscale = std::max(1.0, grad.cwiseAbs().maxCoeff());
    for (int probe = 0; probe < 6; ++probe) {
      const int c = rng.uniform_int(0, dm.cols() - 1);
      const double h = 1e-5 * (1.0 + std::abs(beta(c)));
      Eigen::VectorXd bp = beta, bm = beta;
      bp(c) += h;
      bm(c) -= h;
      const double fd = (fit::penalized_objective(dm, y, lam, bp) -
                         fit::penalized_objective(dm, y, lam, bm)) /
                        (2 * h);
      worst = std::max(worst, std::abs(grad(c) - fd) / gscale);
    }
  }
  report(3, "gradient check", worst < 1e-5,
         fmt("max rel error %.2e over 20 points (tol 1e-5)", worst));
}

void criterion_4_lambda_optimizer() {
  Rng rng(23);
  int hits = 0;
  double worst_gap = 0;
  for (int problem = 0; problem < 10; ++problem) {
    const int n = 120 + 15 * problem;
    Eigen::VectorXd x(n), y(n);
    const double wiggle = 0.3 + 0.45 * problem;
    const double noise = 0.15 + 0.06 * (problem % 4);
    for (int i = 0; i < n; ++i) {
      x(i) = rng.uniform(0, 10);
      y(i) = std::sin(wiggle * x(i)) + noise * rng.normal();
    }
    auto dm = pspline_design(x, 8 + (problem % 3) * 4);
    auto search = fit::optimize_lambdas(dm, y);

    double best_t = 0, best_v = 1e300;
    for (double t = -6.0; t <= 8.0 + 1e-9; t += 0.01) {
      Eigen::VectorXd lam(1);
      lam << std::pow(10.0, t);
      const double v = fit::gcv_score(dm, y, lam);
      if (v < best_v) {
        best_v = v;
        best_t = t;
      }
    }
    const double got_t = std::log10(search.lambda(0));
    const double gap = std::abs(got_t - best_t);
    const bool ok = gap <= 0.02 || search.gcv <= best_v * (1 + 1e-7);
    if (ok) ++hits;
    worst_gap = std::max(worst_gap, gap);
  }
  report(4, "lambda optimizer", hits == 10,
         fmt("%d/10 problems at the exhaustive-grid minimum (worst "
             "log10-gap %.3f)",
             hits, worst_gap));
}

void criterion_5_smooth_recovery() {
  const auto t0 = clock_type::now();
  synth::SynthConfig cfg = synth::SynthConfig::defaults();  // n = 5000
  cfg.noise_seed = 1;
  auto data = synth::simulate_dataset(cfg);

  design::ModelSpec spec = design::ModelSpec::for_family(design::Family::SGam);
  spec.knots.location = 150;
  fit::FittedModel model = fit::fit_model(data.records, spec, data.graph);
  auto rep = synth::recovery_error(model, data.truth, data.records);
  const double elapsed = seconds_since(t0);

  double worst_rmse = 0;
  std::string worst_term = "-";
  for (const auto& s : rep.smooths)
    if (s.rmse > worst_rmse) {
      worst_rmse = s.rmse;
      worst_term = s.term;
    }
  const bool pass = worst_rmse < 0.05 && rep.gp_correlation > 0.9 &&
                    elapsed < 300.0;
  report(5, "smooth recovery",
         pass,
         fmt("worst smooth RMSE %.4f [%s] (tol 0.05); gp corr %.3f (>0.9); "
             "%.0f s (<300)",
             worst_rmse, worst_term.c_str(), rep.gp_correlation, elapsed));
}

void criterion_6_interval_calibration() {
  synth::SynthConfig cfg = synth::SynthConfig::defaults();
  cfg.n = 7000;
  cfg.noise_seed = 5;
  auto data = synth::simulate_dataset(cfg);

  // seeded split: 5000 train, 2000 holdout
  std::vector<int> order(cfg.n);
  for (int i = 0; i < cfg.n; ++i) order[i] = i;
  Rng rng(29);
  rng.shuffle(order);
  std::vector<PropertyRecord> train, holdout;
  for (int i = 0; i < cfg.n; ++i)
    (i < 5000 ? train : holdout).push_back(data.records[order[i]]);

  design::ModelSpec spec = design::ModelSpec::for_family(design::Family::SGam);
  spec.knots.location = 100;
  fit::FittedModel model = fit::fit_model(train, spec, data.graph);
  auto preds = fit::predict(model, holdout);
  int n_ok = 0, in50 = 0, in95 = 0;
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    if (!preds[i].ok()) continue;
    ++n_ok;
    const double price = holdout[i].price;
    if (price >= preds[i].lo50 && price <= preds[i].hi50) ++in50;
    if (price >= preds[i].lo95 && price <= preds[i].hi95) ++in95;
  }
  const double c50 = double(in50) / n_ok, c95 = double(in95) / n_ok;
  report(6, "interval calibration",
         c95 >= 0.92 && c95 <= 0.97 && c50 >= 0.45 && c50 <= 0.55,
         fmt("95%% coverage %.3f (in [0.92,0.97]); 50%% coverage %.3f (in "
             "[0.45,0.55]); n=%d",
             c95, c50, n_ok));
}

void criterion_7_moran_pattern() {
  auto data = make_dataset(2500, 31, 24, /*gp_amplitude=*/0.5,
                           /*noise_sigma=*/0.10);
  const Eigen::VectorXd y = responses(data.records);
  Eigen::MatrixXd coords(data.records.size(), 2);
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    coords(i, 0) = data.records[i].x;
    coords(i, 1) = data.records[i].y;
  }
  eval::WeightSpec wspec;  // k = 20, inverse distance, row standardized

  design::ModelSpec hedonic = design::ModelSpec::for_family(design::Family::Hedonic);
  fit::FittedModel mh = fit::fit_model(data.records, hedonic, data.graph);
  auto ph = fit::predict(mh, data.records);
  Eigen::VectorXd res_h(y.size());
  for (int i = 0; i < y.size(); ++i) res_h(i) = y(i) - ph[i].log_mu;
  const double I_hedonic = eval::morans_i(res_h, coords, wspec, 0, 1).I;

  design::ModelSpec sgam = design::ModelSpec::for_family(design::Family::SGam);
  sgam.knots.location = 100;
  fit::FittedModel ms = fit::fit_model(data.records, sgam, data.graph);
  auto ps = fit::predict(ms, data.records);
  Eigen::VectorXd res_s(y.size());
  for (int i = 0; i < y.size(); ++i) res_s(i) = y(i) - ps[i].log_mu;
  const double I_sgam = eval::morans_i(res_s, coords, wspec, 0, 1).I;

  // brute-force double-sum oracle on n=200
  Eigen::MatrixXd c200 = coords.topRows(200);
  Eigen::VectorXd r200 = res_h.head(200);
  const double ours = eval::morans_i(r200, c200, wspec, 0, 1).I;
  const Eigen::MatrixXd W = oracles::brute_knn_weights(c200, wspec.k, true);
  const double oracle = oracles::brute_morans_i(r200, W);
  const double oracle_gap = std::abs(ours - oracle);

  report(7, "moran pattern",
         I_hedonic > 0.15 && I_sgam < 0.05 && oracle_gap < 1e-10,
         fmt("hedonic I %.3f (>0.15); sgam I %.3f (<0.05); oracle gap %.1e "
             "(<1e-10)",
             I_hedonic, I_sgam, oracle_gap));
}

void criterion_8_sparse_region_pattern() {
  synth::SynthConfig cfg = synth::SynthConfig::defaults();
  cfg.n = 3000;
  cfg.noise_seed = 37;
  cfg.gp_amplitude = 0.45;
  auto data = synth::simulate_dataset(cfg);

  std::vector<int> order(cfg.n);
  for (int i = 0; i < cfg.n; ++i) order[i] = i;
  Rng rng(41);
  rng.shuffle(order);
  const int n_train = cfg.n * 3 / 4;
  std::vector<PropertyRecord> train, holdout;
  for (int i = 0; i < cfg.n; ++i)
    (i < n_train ? train : holdout).push_back(data.records[order[i]]);

  design::ModelSpec sgam = design::ModelSpec::for_family(design::Family::SGam);
  sgam.knots.location = 100;
  fit::FittedModel ms = fit::fit_model(train, sgam, data.graph);
  auto ps = fit::predict(ms, holdout);

  forest::ForestConfig fc;
  fc.seed = 43;
  forest::Forest rf = grow_forest(train, fc, data.graph.size());

  auto rural_r2 = [&](auto price_of) {
    double sse = 0, sst = 0, mean = 0;
    int n = 0;
    for (std::size_t i = 0; i < holdout.size(); ++i)
      if (holdout[i].submarket == Submarket::Rural) {
        mean += holdout[i].price;
        ++n;
      }
    mean /= n;
    for (std::size_t i = 0; i < holdout.size(); ++i) {
      if (holdout[i].submarket != Submarket::Rural) continue;
      const double hat = price_of(i);
      sse += (hat - holdout[i].price) * (hat - holdout[i].price);
      sst += (holdout[i].price - mean) * (holdout[i].price - mean);
    }
    return 1.0 - sse / sst;
  };
  const double r2_sgam = rural_r2([&](std::size_t i) { return ps[i].price; });
  const double r2_rf = rural_r2(
      [&](std::size_t i) { return forest::rf_predict(rf, holdout[i]).price; });

  report(8, "sparse-region pattern", r2_sgam - r2_rf >= 0.05,
         fmt("rural holdout R2: sgam %.3f vs rf %.3f (gap %.3f >= 0.05)",
             r2_sgam, r2_rf, r2_sgam - r2_rf));
}

void criterion_9_rf_correctness() {
  // full-depth interpolation on unique rows
  Rng rng(47);
  std::vector<PropertyRecord> rows(50);
  for (int i = 0; i < 50; ++i) {
    PropertyRecord& r = rows[i];
    r.id = std::to_string(i);
    r.beds = rng.uniform_int(1, 6);
    r.baths = rng.uniform_int(1, 4);
    r.size = 50 + i * 3.1;
    r.month = rng.uniform_int(1, 12);
    r.x = rng.uniform(0, 1e5);
    r.y = rng.uniform(0, 1e5);
    r.submarket = static_cast<Submarket>(i % 6);
    r.region_id = i % 5;
    r.property_type = static_cast<PropertyType>(i % 7);
    r.ber = static_cast<Ber>(i % 16);
    r.log_ppsm = rng.normal();
  }
  forest::ForestConfig cfg1;
  cfg1.n_trees = 1;
  cfg1.min_node_size = 1;
  cfg1.mtry = 21;
  cfg1.seed = 3;
  forest::Forest f1 = grow_forest(rows, cfg1, 5);
  double interp_gap = 0;
  {
    Rng boot = Rng::keyed(cfg1.seed, 0x74726565ULL, 0);
    std::vector<char> in_bag(50, 0);
    for (int i = 0; i < 50; ++i) in_bag[boot.uniform_int(0, 49)] = 1;
    for (int i = 0; i < 50; ++i)
      if (in_bag[i])
        interp_gap = std::max(
            interp_gap, std::abs(forest::tree_predict(f1.trees[0], f1.schema,
                                                      rows[i]) -
                                 rows[i].log_ppsm));
  }

  // root split matches the exhaustive oracle on 20-row fixtures
  bool split_ok = true;
  for (std::uint64_t seed : {201, 202, 203}) {
    std::vector<PropertyRecord> fix(rows.begin(), rows.begin() + 20);
    Rng mix(seed);
    for (auto& r : fix) r.log_ppsm = 0.3 * r.beds + 0.01 * r.size + mix.normal();
    forest::ForestConfig c2;
    c2.n_trees = 1;
    c2.mtry = 21;
    c2.min_node_size = 2;
    c2.seed = seed;
    forest::Forest f2 = grow_forest(fix, c2, 5);
    const forest::Node& root = f2.trees[0].nodes[0];
    if (root.rule.feature < 0) {
      split_ok = false;
      continue;
    }
    Rng boot = Rng::keyed(seed, 0x74726565ULL, 0);
    std::vector<int> bag(20);
    for (int i = 0; i < 20; ++i) bag[i] = boot.uniform_int(0, 19);
    Eigen::VectorXd yb(20);
    Eigen::MatrixXd Xb(20, f2.schema.count());
    for (int i = 0; i < 20; ++i) {
      yb(i) = fix[bag[i]].log_ppsm;
      for (int c = 0; c < f2.schema.count(); ++c)
        Xb(i, c) = f2.schema.value(fix[bag[i]], c);
    }
    // numeric enumeration suffices: categorical levels are numeric codes and
    // the fixture's response is monotone in them only by chance; compare
    // achieved gains
    double got;
    {
      double sum_l = 0, sum_r = 0;
      int n_l = 0, n_r = 0;
      for (int i = 0; i < 20; ++i) {
        const double v = f2.schema.value(fix[bag[i]], root.rule.feature);
        bool left;
        if (f2.schema.levels(root.rule.feature) == 0)
          left = v < root.rule.threshold;
        else
          left = std::binary_search(root.rule.left_levels.begin(),
                                    root.rule.left_levels.end(),
                                    static_cast<int>(v));
        (left ? sum_l : sum_r) += yb(i);
        (left ? n_l : n_r)++;
      }
      got = sum_l * sum_l / n_l + sum_r * sum_r / n_r -
            yb.sum() * yb.sum() / 20;
    }
    double best = 0;
    for (int feat = 0; feat < f2.schema.count(); ++feat) {
      const int L = f2.schema.levels(feat);
      if (L == 0) {
        best = std::max(best, oracles::brute_best_split_gain(
                                  Xb.col(feat), yb, c2.min_node_size));
      } else {
        const double total = yb.sum();
        for (std::uint32_t mask = 1; mask + 1 < (1u << L); ++mask) {
          double sum_l = 0;
          int n_l = 0;
          for (int i = 0; i < 20; ++i)
            if (mask & (1u << static_cast<int>(Xb(i, feat)))) {
              sum_l += yb(i);
              ++n_l;
            }
          const int n_r = 20 - n_l;
          if (n_l < 2 || n_r < 2) continue;
          const double sum_r = total - sum_l;
          best = std::max(best, sum_l * sum_l / n_l + sum_r * sum_r / n_r -
                                    total * total / 20);
        }
      }
    }
    if (std::abs(got - best) > 1e-9 * std::max(1.0, best)) split_ok = false;
  }

  // determinism across runs and thread counts
  auto data = make_dataset(400, 51, 8);
  forest::ForestConfig c3;
  c3.n_trees = 30;
  c3.seed = 7;
  set_thread_count(1);
  forest::Forest a = grow_forest(data.records, c3, 8);
  set_thread_count(4);
  forest::Forest b = grow_forest(data.records, c3, 8);
  set_thread_count(0);
  bool deterministic = a.trees.size() == b.trees.size();
  for (std::size_t t = 0; deterministic && t < a.trees.size(); ++t) {
    deterministic = a.trees[t].nodes.size() == b.trees[t].nodes.size();
    for (std::size_t k = 0; deterministic && k < a.trees[t].nodes.size(); ++k)
      deterministic = a.trees[t].nodes[k].value == b.trees[t].nodes[k].value &&
                      a.trees[t].nodes[k].rule.feature ==
                          b.trees[t].nodes[k].rule.feature &&
                      a.trees[t].nodes[k].rule.threshold ==
                          b.trees[t].nodes[k].rule.threshold;
  }

  report(9, "rf correctness",
         interp_gap < 1e-12 && split_ok && deterministic,
         fmt("interpolation gap %.1e; root-split oracle %s; thread/seed "
             "determinism %s",
             interp_gap, split_ok ? "ok" : "FAILED",
             deterministic ? "ok" : "FAILED"));
}

void criterion_10_metrics_oracle() {
  Rng rng(53);
  bool exact = true;
  int checked = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = rng.uniform_int(3, 50);
    std::vector<eval::ScoredPrediction> scored(n);
    std::vector<double> actual(n), pred(n), lo50(n), hi50(n), lo95(n), hi95(n);
    for (int i = 0; i < n; ++i) {
      actual[i] = rng.uniform(50, 900);
      pred[i] = actual[i] * rng.uniform(0.6, 1.4);
      const double w50 = rng.uniform(0, 80), w95 = w50 + rng.uniform(0, 150);
      lo50[i] = pred[i] - w50;
      hi50[i] = pred[i] + w50;
      lo95[i] = pred[i] - w95;
      hi95[i] = pred[i] + w95;
      scored[i] = {0, actual[i], pred[i], lo50[i], hi50[i],
                   lo95[i], hi95[i], 0, 0, 0, Submarket::Rural};
    }
    eval::MetricsReport m;
    try {
      m = eval::compute_metrics(scored);
    } catch (const input_error&) {
      continue;
    }
    ++checked;
    const auto o = oracles::brute_metrics(actual, pred, lo50, hi50, lo95, hi95);
    exact = exact && m.r2 == o.r2 && m.rmse == o.rmse && m.mape == o.mape &&
            m.within_5pct == o.within5 && m.within_10pct == o.within10 &&
            m.pi50_coverage == o.cover50 && m.pi95_coverage == o.cover95;
  }
  // hand-arithmetic fixtures
  std::vector<eval::ScoredPrediction> hand(3);
  hand[0] = {0, 100, 110, 0, 0, 0, 0, 0, 0, 0, Submarket::Rural};
  hand[1] = {0, 200, 190, 0, 0, 0, 0, 0, 0, 0, Submarket::Rural};
  hand[2] = {0, 300, 300, 0, 0, 0, 0, 0, 0, 0, Submarket::Rural};
  const auto hm = eval::compute_metrics(hand);
  const bool hand_ok = hm.mape == 0.05 && std::abs(hm.within_5pct - 2.0 / 3.0) < 1e-15;

  report(10, "metrics oracle", exact && hand_ok && checked >= 95,
         fmt("%d random fixtures exact: %s; hand fixtures: %s", checked,
             exact ? "yes" : "NO", hand_ok ? "ok" : "FAILED"));
}

void criterion_11_ingestion_corpus() {
  // corpus agreement
  std::ifstream in(std::string(AVM_DATA_DIR) + "/description_corpus.csv");
  int rows = 0, agree = 0;
  if (in) {
    io::CsvReader reader(in);
    reader.next_row();
    while (auto row = reader.next_row()) {
      ++rows;
      bool ok = true;
      const std::string& desc = (*row)[0];
      const auto type = textmine::extract_property_type(desc);
      ok &= (*row)[1] == (type ? to_string(*type) : "");
      const auto beds = textmine::extract_count(desc, textmine::CountKind::Beds);
      ok &= (*row)[2] == (beds ? std::to_string(*beds) : "");
      const auto baths = textmine::extract_count(desc, textmine::CountKind::Baths);
      ok &= (*row)[3] == (baths ? std::to_string(*baths) : "");
      const auto size = textmine::extract_size(desc);
      if ((*row)[4].empty()) {
        ok &= !size.has_value();
      } else {
        ok &= size && std::abs(*size - std::stod((*row)[4])) < 1e-9;
      }
      const Ber ber = textmine::extract_ber(desc);
      ok &= (*row)[5] == (ber == Ber::Unknown ? "" : to_string(ber));
      const FeatureFlags flags = textmine::extract_features(desc);
      for (int f = 0; f < kNumFeatures; ++f)
        ok &= ((*row)[6 + f] == "1") == flags[f];
      if (ok) ++agree;
    }
  }

  // projection round-trip
  Rng rng(59);
  double worst_deg = 0;
  for (int i = 0; i < 1000000; ++i) {
    const geo::LonLat p{rng.uniform(-180, 180), rng.uniform(-85, 85)};
    const geo::LonLat back = geo::inverse_web_mercator(geo::project_web_mercator(p));
    worst_deg = std::max({worst_deg, std::abs(back.lon - p.lon),
                          std::abs(back.lat - p.lat)});
  }

  // point-in-polygon vs winding-number oracle
  geo::PolygonFeature poly;
  poly.id = "test";
  poly.rings.push_back(
      {{{0, 0}, {8, 0}, {8, 3}, {3, 3}, {3, 5}, {8, 5}, {8, 8}, {0, 8}}});
  int pip_checked = 0, pip_agree = 0;
  for (int i = 0; i < 1000; ++i) {
    const geo::LonLat p{rng.uniform(-1, 9), rng.uniform(-1, 9)};
    bool near_edge = false;
    const auto& v = poly.rings[0].vertices;
    for (std::size_t a = 0, b = v.size() - 1; a < v.size(); b = a++) {
      const double cross = (v[a].lon - v[b].lon) * (p.lat - v[b].lat) -
                           (v[a].lat - v[b].lat) * (p.lon - v[b].lon);
      if (std::abs(cross) < 1e-7) near_edge = true;
    }
    if (near_edge) continue;
    ++pip_checked;
    if (geo::point_in_polygon(p, poly) == oracles::winding_inside(p, poly))
      ++pip_agree;
  }

  report(11, "ingestion corpus",
         rows == 100 && agree == rows && worst_deg < 1e-9 &&
             pip_agree == pip_checked && pip_checked > 900,
         fmt("corpus %d/%d agree; projection round-trip %.1e deg (<1e-9); "
             "pip oracle %d/%d",
             agree, rows, worst_deg, pip_agree, pip_checked));
}

void criterion_12_cv_determinism() {
#ifndef AVM_CLI_PATH
  report(12, "cv determinism", false, "CLI path not configured");
#else
  const std::string cli = AVM_CLI_PATH;
  const std::string dir = "/tmp/avm_acceptance_cv";
  std::system(("rm -rf " + dir + " && mkdir -p " + dir).c_str());

  // small but complete dataset + config
  {
    std::ofstream cfg(dir + "/cfg.json");
    cfg << R"({"model": {"knots": {"location": 40}}, "moran_permutations": 49,
               "forest": {"n_trees": 60}})";
  }
  std::string cmd = cli + " simulate --n 600 --seed 3 --out " + dir + "/sim" +
                    " > /dev/null";
  bool ok = std::system(cmd.c_str()) == 0;

  auto run_cv = [&](const std::string& out, const std::string& env) {
    const std::string c = env + cli + " --config " + dir + "/cfg.json" +
                          " cv --records " + dir + "/sim/records.csv" +
                          " --regions " + dir + "/sim/regions.json" +
                          " --models sgam,hedonic,rf --folds 3 --seed 7" +
                          " --out " + dir + "/" + out + " > /dev/null";
    return std::system(c.c_str()) == 0;
  };
  ok = ok && run_cv("a", "");
  ok = ok && run_cv("b", "");
  ok = ok && run_cv("c", "AVM_THREADS=4 ");

  auto same = [&](const std::string& x, const std::string& y) {
    for (const char* f :
         {"cv_national.csv", "cv_folds.csv", "cv_submarkets.csv",
          "cv_report.json"}) {
      const std::string c = "cmp -s " + dir + "/" + x + "/" + f + " " + dir +
                            "/" + y + "/" + f;
      if (std::system(c.c_str()) != 0) return false;
    }
    return true;
  };
  const bool rerun_same = ok && same("a", "b");
  const bool threads_same = ok && same("a", "c");
  report(12, "cv determinism", ok && rerun_same && threads_same,
         fmt("repeat run byte-identical: %s; 4-thread run byte-identical: %s",
             rerun_same ? "yes" : "NO", threads_same ? "yes" : "NO"));
#endif
}

}  // namespace

int main() {
  const auto t0 = clock_type::now();
  criterion_1_ols_reduction();
  criterion_2_penalty_limits();
  criterion_3_gradient_check();
  criterion_4_lambda_optimizer();
  criterion_5_smooth_recovery();
  criterion_6_interval_calibration();
  criterion_7_moran_pattern();
  criterion_8_sparse_region_pattern();
  criterion_9_rf_correctness();
  criterion_10_metrics_oracle();
  criterion_11_ingestion_corpus();
  criterion_12_cv_determinism();
  std::printf("\n%s: %d criterion failure(s), total %.0f s\n",
              g_failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
              g_failures, seconds_since(t0));
  return g_failures == 0 ? 0 : 1;
}

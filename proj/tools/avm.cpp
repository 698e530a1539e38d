// Command-line entry point: ingest, simulate, fit, predict, cv, knots,
// surfaces, report. Every run resolves its configuration up front, logs it,
// and stamps the config hash and seed into each artifact it writes.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "avm/design.hpp"
#include "avm/eval.hpp"
#include "avm/fit.hpp"
#include "avm/forest.hpp"
#include "avm/geometry.hpp"
#include "avm/ingest.hpp"
#include "avm/io.hpp"
#include "avm/parallel.hpp"
#include "avm/synth.hpp"
#include "avm/textmine.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace avm;

namespace {

struct RunConfig {
  json raw = json::object();
  std::uint64_t seed = 1;
  int threads = 0;
  std::string hash;

  design::ModelSpec model_spec(const std::string& family_token) const {
    auto family = design::parse_family(family_token);
    if (!family) throw input_error("unknown model family: " + family_token);
    design::ModelSpec spec = design::ModelSpec::for_family(*family);
    if (raw.contains("model")) {
      const json& m = raw["model"];
      if (m.contains("knots")) {
        const json& k = m["knots"];
        spec.knots.beds = k.value("beds", spec.knots.beds);
        spec.knots.baths = k.value("baths", spec.knots.baths);
        spec.knots.size = k.value("size", spec.knots.size);
        spec.knots.month = k.value("month", spec.knots.month);
        spec.knots.location = k.value("location", spec.knots.location);
      }
      spec.kernel.rho = m.value("kernel_rho", spec.kernel.rho);
      spec.knot_seed = m.value("knot_seed", spec.knot_seed);
    }
    return spec;
  }

  fit::LambdaGrid lambda_grid() const {
    fit::LambdaGrid g;
    if (raw.contains("lambda_grid")) {
      const json& j = raw["lambda_grid"];
      g.log10_min = j.value("log10_min", g.log10_min);
      g.log10_max = j.value("log10_max", g.log10_max);
      g.grid_points = j.value("grid_points", g.grid_points);
      g.golden_tol = j.value("golden_tol", g.golden_tol);
      g.max_sweeps = j.value("max_sweeps", g.max_sweeps);
      g.rel_tol = j.value("rel_tol", g.rel_tol);
    }
    return g;
  }

  forest::ForestConfig forest_config() const {
    forest::ForestConfig fc;
    fc.seed = seed;
    if (raw.contains("forest")) {
      const json& j = raw["forest"];
      fc.n_trees = j.value("n_trees", fc.n_trees);
      fc.mtry = j.value("mtry", fc.mtry);
      fc.min_node_size = j.value("min_node_size", fc.min_node_size);
      fc.sample_fraction = j.value("sample_fraction", fc.sample_fraction);
      fc.seed = j.value("seed", fc.seed);
    }
    return fc;
  }

  eval::WeightSpec weight_spec() const {
    eval::WeightSpec w;
    if (raw.contains("weights")) {
      w.k = raw["weights"].value("k", w.k);
      w.row_standardize =
          raw["weights"].value("row_standardize", w.row_standardize);
    }
    return w;
  }
};

RunConfig load_config(const std::string& path, std::uint64_t seed_flag,
                      int threads_flag) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open config file: " + path);
    cfg.raw = json::parse(in);
  }
  cfg.seed = cfg.raw.value("seed", std::uint64_t{1});
  if (seed_flag != 0) cfg.seed = seed_flag;  // flags override file values
  cfg.threads = cfg.raw.value("threads", 0);
  if (threads_flag != 0) cfg.threads = threads_flag;
  cfg.raw["seed"] = cfg.seed;
  cfg.raw["threads"] = cfg.threads;
  cfg.hash = io::fnv1a_hex(cfg.raw.dump());
  if (cfg.threads > 0) set_thread_count(cfg.threads);
  return cfg;
}

std::string out_dir_or_env(std::string dir) {
  if (const char* env = std::getenv("AVM_OUT_DIR"); env && dir.empty())
    dir = env;
  if (dir.empty()) dir = ".";
  fs::create_directories(dir);
  return dir;
}

std::map<std::string, std::string> stamp(const RunConfig& cfg) {
  return {{"config_hash", cfg.hash}, {"seed", std::to_string(cfg.seed)}};
}

void write_stamped_csv(const std::string& path, const RunConfig& cfg,
                       const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write " + path);
  out << "# config_hash=" << cfg.hash << "\n# seed=" << cfg.seed << "\n";
  io::write_csv_row(out, header);
  for (const auto& row : rows) io::write_csv_row(out, row);
}

void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write " + path);
  out << doc.dump(1) << "\n";
}

std::string fmt(double v) { return io::format_double(v); }

json metrics_json(const eval::MetricsReport& m) {
  json j;
  j["r2"] = m.r2;
  j["rmse"] = m.rmse;
  j["mape"] = m.mape;
  j["within_5pct"] = m.within_5pct;
  j["within_10pct"] = m.within_10pct;
  j["pi50_coverage"] = m.pi50_coverage;
  j["pi95_coverage"] = m.pi95_coverage;
  if (m.has_morans) {
    j["morans_i"] = m.morans_i;
    j["morans_flag"] = m.morans_flag;
  }
  j["n"] = m.n;
  return j;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const RunConfig& cfg, const std::string& listings_path,
               const std::string& regions_path, const std::string& cities_path,
               const std::string& towns_path, std::string out_dir) {
  out_dir = out_dir_or_env(out_dir);
  std::ifstream in(listings_path);
  if (!in) throw input_error("cannot open listings file: " + listings_path);
  auto parsed = ingest::parse_listings(in);

  const auto graph = geo::RegionGraph::load(regions_path);
  ingest::SubmarketConfig sub;
  sub.city_polygons = geo::read_feature_collection_file(cities_path);
  sub.towns = ingest::read_town_centres(towns_path);
  if (cfg.raw.contains("town_radius_m"))
    sub.town_radius_m = cfg.raw["town_radius_m"].get<double>();

  ingest::CleanOptions opts;
  if (cfg.raw.contains("commercial_keywords"))
    opts.commercial_keywords =
        cfg.raw["commercial_keywords"].get<std::vector<std::string>>();
  auto cleaned = ingest::clean(parsed.listings, graph, sub, opts);

  io::write_records(out_dir + "/records.csv", cleaned.records, stamp(cfg));

  std::vector<std::vector<std::string>> rej_rows;
  for (const auto& r : parsed.rejected)
    rej_rows.push_back({std::to_string(r.row), r.id, r.reason});
  for (const auto& r : cleaned.report.drops)
    rej_rows.push_back({std::to_string(r.row), r.id, r.reason});
  write_stamped_csv(out_dir + "/rejections.csv", cfg, {"row", "id", "reason"},
                    rej_rows);

  json rep;
  rep["artifact"] = "ingest_report";
  rep["config_hash"] = cfg.hash;
  rep["seed"] = cfg.seed;
  rep["config"] = cfg.raw;
  rep["rows_parsed"] = parsed.listings.size() + parsed.rejected.size();
  rep["rows_rejected_parse"] = parsed.rejected.size();
  rep["rows_cleaned"] = cleaned.report.kept;
  rep["dropped"] = cleaned.report.dropped;
  rep["imputed"] = cleaned.report.imputed;
  write_json(out_dir + "/ingest_report.json", rep);

  std::cout << "ingest: " << cleaned.report.kept << " records from "
            << parsed.listings.size() + parsed.rejected.size() << " rows -> "
            << out_dir << "/records.csv\n";
  return 0;
}

int cmd_simulate(const RunConfig& cfg, int n, std::uint64_t structure_seed,
                 std::string out_dir) {
  out_dir = out_dir_or_env(out_dir);
  synth::SynthConfig scfg = synth::SynthConfig::defaults();
  if (cfg.raw.contains("synth")) {
    const std::string tmp = out_dir + "/.synth_config_in.json";
    write_json(tmp, cfg.raw["synth"]);
    scfg = synth::SynthConfig::load(tmp);
    fs::remove(tmp);
  }
  if (n > 0) scfg.n = n;
  scfg.noise_seed = cfg.seed;
  if (structure_seed != 0) scfg.structure_seed = structure_seed;

  auto result = synth::simulate_dataset(scfg);
  io::write_records(out_dir + "/records.csv", result.records, stamp(cfg));
  result.graph.save(out_dir + "/regions.json");
  result.truth.save(out_dir + "/truth.json");
  scfg.save(out_dir + "/synth_config.json");

  std::cout << "simulate: n=" << scfg.n << " regions=" << scfg.num_regions
            << " noise_seed=" << scfg.noise_seed << " -> " << out_dir << "\n";
  return 0;
}

int cmd_fit(const RunConfig& cfg, const std::string& records_path,
            const std::string& regions_path, const std::string& model_name,
            std::string out_path) {
  auto records = io::read_records(records_path);
  const auto graph = geo::RegionGraph::load(regions_path);
  if (out_path.empty()) out_path = "model_" + model_name + ".json";

  if (model_name == "rf") {
    forest::ForestConfig fc = cfg.forest_config();
    std::vector<std::string> warnings;
    forest::Forest rf = grow_forest(records, fc, graph.size(), &warnings);
    rf.config_hash = cfg.hash;
    rf.save(out_path);
    std::cout << "fit rf: trees=" << fc.n_trees
              << " oob_mse=" << fmt(oob_mse(rf, records)) << " -> " << out_path
              << "\n";
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    return 0;
  }

  fit::FitOptions opts;
  opts.grid = cfg.lambda_grid();
  opts.seed = cfg.seed;
  opts.config_hash = cfg.hash;
  fit::FittedModel model =
      fit::fit_model(records, cfg.model_spec(model_name), graph, opts);
  model.save(out_path);
  std::cout << "fit " << model_name << ": n=" << model.n_train
            << " edf=" << fmt(model.edf) << " sigma2=" << fmt(model.sigma2)
            << " dev_expl=" << fmt(model.deviance_explained) << " -> "
            << out_path << "\n";
  for (const auto& w : model.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

bool artifact_is_forest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open model artifact: " + path);
  json doc = json::parse(in);
  return doc.value("artifact", "") == "forest";
}

int cmd_predict(const RunConfig& cfg, const std::string& model_path,
                const std::string& records_path, std::string out_path) {
  auto records = io::read_records(records_path);
  if (out_path.empty()) out_path = "predictions.csv";

  std::vector<std::vector<std::string>> rows;
  if (artifact_is_forest(model_path)) {
    forest::Forest rf = forest::Forest::load(model_path);
    for (const auto& r : records) {
      const auto p = forest::rf_predict(rf, r);
      rows.push_back({p.id, fmt(p.price), fmt(p.lo50), fmt(p.hi50),
                      fmt(p.lo95), fmt(p.hi95), fmt(p.log_mean), "", ""});
    }
  } else {
    fit::FittedModel model = fit::FittedModel::load(model_path);
    auto preds = fit::predict(model, records);
    for (const auto& p : preds)
      rows.push_back({p.id, fmt(p.price), fmt(p.lo50), fmt(p.hi50),
                      fmt(p.lo95), fmt(p.hi95), fmt(p.log_mu), fmt(p.se_mu),
                      p.error});
  }
  write_stamped_csv(out_path, cfg,
                    {"id", "price", "lo50", "hi50", "lo95", "hi95", "log_mu",
                     "se_mu", "error"},
                    rows);
  std::cout << "predict: " << rows.size() << " rows -> " << out_path << "\n";
  return 0;
}

int cmd_cv(const RunConfig& cfg, const std::string& records_path,
           const std::string& regions_path, const std::string& models_csv,
           int folds, std::string out_dir) {
  out_dir = out_dir_or_env(out_dir);
  auto records = io::read_records(records_path);
  const auto graph = geo::RegionGraph::load(regions_path);

  std::vector<std::string> models;
  for (std::size_t pos = 0; pos < models_csv.size();) {
    const auto comma = models_csv.find(',', pos);
    models.push_back(models_csv.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }

  eval::CvOptions opts;
  opts.folds = folds;
  opts.seed = cfg.seed;
  opts.grid = cfg.lambda_grid();
  opts.forest = cfg.forest_config();
  opts.weights = cfg.weight_spec();
  opts.moran_permutations = cfg.raw.value("moran_permutations", 199);
  opts.config_hash = cfg.hash;

  auto cv = eval::kfold_cv(records, models, graph, opts);

  const std::vector<std::string> metric_header = {
      "model",       "r2",           "rmse",          "mape",
      "within_5pct", "within_10pct", "pi50_coverage", "pi95_coverage",
      "morans_i",    "n"};
  auto metric_row = [](const std::string& name, const eval::MetricsReport& m) {
    return std::vector<std::string>{
        name,
        fmt(m.r2),
        fmt(m.rmse),
        fmt(m.mape),
        fmt(m.within_5pct),
        fmt(m.within_10pct),
        fmt(m.pi50_coverage),
        fmt(m.pi95_coverage),
        m.has_morans ? fmt(m.morans_i) : "",
        std::to_string(m.n)};
  };

  std::vector<std::vector<std::string>> national, folds_rows, submarkets;
  for (const auto& mr : cv.models) {
    national.push_back(metric_row(mr.model, mr.national));
    for (std::size_t f = 0; f < mr.per_fold.size(); ++f) {
      auto row = metric_row(mr.model, mr.per_fold[f]);
      row.insert(row.begin() + 1, std::to_string(f));
      folds_rows.push_back(std::move(row));
    }
    for (const auto& [sm, rep] : mr.by_submarket) {
      auto row = metric_row(mr.model, rep);
      row.insert(row.begin() + 1, sm);
      submarkets.push_back(std::move(row));
    }
  }
  write_stamped_csv(out_dir + "/cv_national.csv", cfg, metric_header, national);
  {
    auto header = metric_header;
    header.insert(header.begin() + 1, "fold");
    write_stamped_csv(out_dir + "/cv_folds.csv", cfg, header, folds_rows);
  }
  {
    auto header = metric_header;
    header.insert(header.begin() + 1, "submarket");
    write_stamped_csv(out_dir + "/cv_submarkets.csv", cfg, header, submarkets);
  }

  json rep;
  rep["artifact"] = "cv_report";
  rep["config_hash"] = cfg.hash;
  rep["seed"] = cfg.seed;
  rep["config"] = cfg.raw;
  rep["folds"] = folds;
  for (const auto& mr : cv.models) {
    json m;
    m["national"] = metrics_json(mr.national);
    for (const auto& [sm, r] : mr.by_submarket)
      m["submarkets"][sm] = metrics_json(r);
    m["warnings"] = mr.warnings;
    rep["models"][mr.model] = std::move(m);
  }
  write_json(out_dir + "/cv_report.json", rep);

  std::cout << "cv: " << models.size() << " models, " << folds << " folds, n="
            << records.size() << " -> " << out_dir << "\n";
  return 0;
}

int cmd_knots(const RunConfig& cfg, const std::string& records_path,
              const std::string& regions_path, const std::string& term,
              const std::string& candidates_csv, const std::string& family,
              int folds, std::string out_dir) {
  out_dir = out_dir_or_env(out_dir);
  auto records = io::read_records(records_path);
  const auto graph = geo::RegionGraph::load(regions_path);

  std::vector<int> candidates;
  for (std::size_t pos = 0; pos < candidates_csv.size();) {
    const auto comma = candidates_csv.find(',', pos);
    candidates.push_back(std::stoi(candidates_csv.substr(pos)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }

  auto fam = design::parse_family(family);
  if (!fam) throw input_error("unknown model family: " + family);

  eval::CvOptions opts;
  opts.folds = folds;
  opts.seed = cfg.seed;
  opts.grid = cfg.lambda_grid();
  opts.weights = cfg.weight_spec();
  opts.moran_permutations = 0;
  opts.config_hash = cfg.hash;

  std::vector<std::string> warnings;
  auto curve = eval::knot_selection_cv(records, term, candidates, graph, *fam,
                                       opts, &warnings);

  std::vector<std::vector<std::string>> rows;
  for (const auto& p : curve.points)
    rows.push_back(
        {std::to_string(p.k), fmt(p.r2), fmt(p.within_5pct), fmt(p.mape)});
  write_stamped_csv(out_dir + "/knot_curves.csv", cfg,
                    {"k", "r2", "within_5pct", "mape"}, rows);

  json rep;
  rep["artifact"] = "knot_report";
  rep["config_hash"] = cfg.hash;
  rep["seed"] = cfg.seed;
  rep["term"] = term;
  rep["family"] = family;
  rep["suggested_k"] = curve.suggested_k;
  rep["warnings"] = warnings;
  write_json(out_dir + "/knot_report.json", rep);

  std::cout << "knots(" << term << "): suggested k = " << curve.suggested_k
            << " -> " << out_dir << "\n";
  return 0;
}

int cmd_surfaces(const RunConfig& cfg, const std::string& model_path,
                 const std::string& regions_path, int nx, int ny,
                 std::string bbox_csv, std::string out_dir) {
  out_dir = out_dir_or_env(out_dir);
  fit::FittedModel model = fit::FittedModel::load(model_path);
  const auto graph = geo::RegionGraph::load(regions_path);

  double lon0, lat0, lon1, lat1;
  if (!bbox_csv.empty()) {
    if (std::sscanf(bbox_csv.c_str(), "%lf,%lf,%lf,%lf", &lon0, &lat0, &lon1,
                    &lat1) != 4)
      throw input_error("surfaces: --bbox expects lon0,lat0,lon1,lat1");
  } else if (graph.voronoi_mode()) {
    const auto& s = graph.sites();
    const geo::LonLat lo =
        geo::inverse_web_mercator({s.col(0).minCoeff(), s.col(1).minCoeff()});
    const geo::LonLat hi =
        geo::inverse_web_mercator({s.col(0).maxCoeff(), s.col(1).maxCoeff()});
    lon0 = lo.lon;
    lat0 = lo.lat;
    lon1 = hi.lon;
    lat1 = hi.lat;
  } else {
    lon0 = lat0 = 1e300;
    lon1 = lat1 = -1e300;
    for (const auto& poly : graph.polygons())
      for (const auto& ring : poly.rings)
        for (const auto& v : ring.vertices) {
          lon0 = std::min(lon0, v.lon);
          lat0 = std::min(lat0, v.lat);
          lon1 = std::max(lon1, v.lon);
          lat1 = std::max(lat1, v.lat);
        }
  }

  auto raster = fit::extract_spatial_surface(model, graph, lon0, lat0, lon1,
                                             lat1, nx, ny);
  std::vector<std::vector<std::string>> rows;
  for (int c = 0; c < nx * ny; ++c) {
    if (raster.masked[c]) {
      rows.push_back(
          {fmt(raster.lon(c)), fmt(raster.lat(c)), "NA", "NA", "NA"});
    } else {
      rows.push_back({fmt(raster.lon(c)), fmt(raster.lat(c)),
                      fmt(raster.gp(c)), fmt(raster.mrf(c)),
                      fmt(raster.fused(c))});
    }
  }
  write_stamped_csv(out_dir + "/surface.csv", cfg,
                    {"lon", "lat", "gp", "mrf", "fused_ppsm"}, rows);
  std::cout << "surfaces: " << nx << "x" << ny << " raster -> " << out_dir
            << "/surface.csv\n";
  return 0;
}

int cmd_report(const RunConfig& cfg, const std::string& model_path,
               const std::string& rppi_path, std::string out_dir) {
  out_dir = out_dir_or_env(out_dir);

  if (artifact_is_forest(model_path)) {
    forest::Forest rf = forest::Forest::load(model_path);
    std::vector<std::vector<std::string>> rows;
    for (const auto& [name, imp] : variable_importance(rf))
      rows.push_back({name, fmt(imp)});
    write_stamped_csv(out_dir + "/importance.csv", cfg,
                      {"feature", "sse_decrease"}, rows);
    std::cout << "report: variable importance -> " << out_dir
              << "/importance.csv\n";
    return 0;
  }

  fit::FittedModel model = fit::FittedModel::load(model_path);

  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : fit::summarize_parametric(model))
      rows.push_back({r.term, r.level, fmt(r.estimate), fmt(r.se),
                      fmt(r.scaling), fmt(r.lo), fmt(r.hi)});
    write_stamped_csv(
        out_dir + "/parametric_scalings.csv", cfg,
        {"term", "level", "estimate", "se", "scaling", "lo95", "hi95"}, rows);
  }

  {
    std::vector<std::vector<std::string>> rows;
    for (int v = 0; v < design::kNumSmoothVars; ++v) {
      const auto var = static_cast<design::SmoothVar>(v);
      auto emit = [&](std::optional<Submarket> sm) {
        try {
          auto curve = fit::extract_smooth(model, var, sm);
          for (int g = 0; g < curve.grid.size(); ++g)
            rows.push_back({design::to_string(var),
                            sm ? to_string(*sm) : "national",
                            fmt(curve.grid(g)), fmt(curve.value(g)),
                            fmt(curve.lo(g)), fmt(curve.hi(g))});
        } catch (const input_error&) {
          // the family has no such smooth (hedonic, or a missing submarket)
        }
      };
      if (model.spec.submarket_interactions) {
        for (int s = 0; s < kNumSubmarkets; ++s)
          emit(static_cast<Submarket>(s));
      } else {
        emit(std::nullopt);
      }
    }
    write_stamped_csv(out_dir + "/smooths.csv", cfg,
                      {"term", "submarket", "x", "value", "lo95", "hi95"},
                      rows);
  }

  {
    std::vector<std::vector<std::string>> rows;
    std::vector<double> rppi_ratio(12, 0.0);
    bool have_rppi = false;
    if (!rppi_path.empty()) {
      std::ifstream in(rppi_path);
      if (!in) throw input_error("cannot open RPPI file: " + rppi_path);
      io::CsvReader reader(in);
      reader.next_row();  // header
      std::vector<double> index(13, 0.0);
      while (auto row = reader.next_row())
        index[std::stoi((*row)[0])] = std::stod((*row)[1]);
      for (int m = 2; m <= 12; ++m) rppi_ratio[m - 1] = index[m] / index[m - 1];
      rppi_ratio[0] = 1.0;
      have_rppi = true;
    }
    try {
      for (const auto& curve : fit::monthly_inflation(model))
        for (int m = 0; m < 12; ++m)
          rows.push_back({curve.label, std::to_string(m + 1),
                          fmt(curve.ratio(m)),
                          have_rppi ? fmt(rppi_ratio[m]) : ""});
      write_stamped_csv(out_dir + "/monthly_inflation.csv", cfg,
                        {"submarket", "month", "ratio", "rppi_ratio"}, rows);
    } catch (const input_error&) {
      // no month term in this artifact
    }
  }

  std::cout << "report: parametric scalings, smooths, inflation -> " << out_dir
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"avm: submarket-aware property valuation models"};
  app.require_subcommand(1);
  app.fallthrough();  // --config/--seed/--threads may follow the subcommand

  std::string config_path;
  std::uint64_t seed_flag = 0;
  int threads_flag = 0;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed_flag, "seed override (nonzero)");
  app.add_option("--threads", threads_flag, "thread count override");

  auto* ing = app.add_subcommand("ingest", "clean raw listings into records");
  std::string listings, regions, cities, towns, out_dir;
  ing->add_option("--listings", listings)->required();
  ing->add_option("--regions", regions)->required();
  ing->add_option("--cities", cities)->required();
  ing->add_option("--towns", towns)->required();
  ing->add_option("--out", out_dir);

  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  int sim_n = 0;
  std::uint64_t structure_seed = 0;
  std::string sim_out;
  sim->add_option("--n", sim_n);
  sim->add_option("--structure-seed", structure_seed);
  sim->add_option("--out", sim_out);

  auto* fit_cmd = app.add_subcommand("fit", "fit a model to a records file");
  std::string fit_records, fit_regions, fit_model = "sgam", fit_out;
  fit_cmd->add_option("--records", fit_records)->required();
  fit_cmd->add_option("--regions", fit_regions)->required();
  fit_cmd->add_option("--model", fit_model);
  fit_cmd->add_option("--out", fit_out);

  auto* pred = app.add_subcommand("predict", "score records with an artifact");
  std::string pred_model, pred_records, pred_out;
  pred->add_option("--model", pred_model)->required();
  pred->add_option("--records", pred_records)->required();
  pred->add_option("--out", pred_out);

  auto* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation");
  std::string cv_records, cv_regions, cv_models = "sgam,ngam,hedonic,rf",
                           cv_out;
  int cv_folds = 5;
  cv_cmd->add_option("--records", cv_records)->required();
  cv_cmd->add_option("--regions", cv_regions)->required();
  cv_cmd->add_option("--models", cv_models);
  cv_cmd->add_option("--folds", cv_folds);
  cv_cmd->add_option("--out", cv_out);

  auto* kn = app.add_subcommand("knots", "cross-validated knot selection");
  std::string kn_records, kn_regions, kn_term = "location", kn_cands,
                          kn_family = "ngam", kn_out;
  int kn_folds = 5;
  kn->add_option("--records", kn_records)->required();
  kn->add_option("--regions", kn_regions)->required();
  kn->add_option("--term", kn_term);
  kn->add_option("--candidates", kn_cands)->required();
  kn->add_option("--family", kn_family);
  kn->add_option("--folds", kn_folds);
  kn->add_option("--out", kn_out);

  auto* sur = app.add_subcommand("surfaces", "export GP/MRF/fused rasters");
  std::string sur_model, sur_regions, sur_bbox, sur_out;
  int sur_nx = 80, sur_ny = 80;
  sur->add_option("--model", sur_model)->required();
  sur->add_option("--regions", sur_regions)->required();
  sur->add_option("--nx", sur_nx);
  sur->add_option("--ny", sur_ny);
  sur->add_option("--bbox", sur_bbox, "lon0,lat0,lon1,lat1");
  sur->add_option("--out", sur_out);

  auto* rep = app.add_subcommand("report", "parametric/smooth/inflation tables");
  std::string rep_model, rep_rppi, rep_out;
  rep->add_option("--model", rep_model)->required();
  rep->add_option("--rppi", rep_rppi, "RPPI monthly index CSV");
  rep->add_option("--out", rep_out);

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = load_config(config_path, seed_flag, threads_flag);
    if (*ing) return cmd_ingest(cfg, listings, regions, cities, towns, out_dir);
    if (*sim) return cmd_simulate(cfg, sim_n, structure_seed, sim_out);
    if (*fit_cmd)
      return cmd_fit(cfg, fit_records, fit_regions, fit_model, fit_out);
    if (*pred) return cmd_predict(cfg, pred_model, pred_records, pred_out);
    if (*cv_cmd)
      return cmd_cv(cfg, cv_records, cv_regions, cv_models, cv_folds, cv_out);
    if (*kn)
      return cmd_knots(cfg, kn_records, kn_regions, kn_term, kn_cands,
                       kn_family, kn_folds, kn_out);
    if (*sur)
      return cmd_surfaces(cfg, sur_model, sur_regions, sur_nx, sur_ny,
                          sur_bbox, sur_out);
    if (*rep) return cmd_report(cfg, rep_model, rep_rppi, rep_out);
  } catch (const fit_error& e) {
    std::cerr << "fit error: " << e.what() << "\n";
    return 2;
  } catch (const input_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

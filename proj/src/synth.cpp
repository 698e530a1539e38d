#include "avm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "avm/parallel.hpp"
#include "avm/rng.hpp"

namespace avm::synth {

double SmoothTruth::eval(double x) const {
  const double u = log_input ? std::log(x / centre) / scale
                             : (x - centre) / scale;
  return linear * u + curve * (u * u - 1.0);
}

SynthConfig SynthConfig::defaults() {
  SynthConfig c;
  const geo::XY lo = geo::project_web_mercator({-10.5, 51.4});
  const geo::XY hi = geo::project_web_mercator({-6.0, 55.4});
  c.extent = {lo.x, lo.y, hi.x, hi.y};

  auto cluster = [](double lon, double lat, double r, double w, Submarket sm) {
    const geo::XY xy = geo::project_web_mercator({lon, lat});
    return ClusterSpec{xy.x, xy.y, r, w, sm};
  };
  c.clusters = {
      cluster(-6.26, 53.35, 15000, 0.300, Submarket::Dublin),
      cluster(-8.47, 51.90, 10000, 0.065, Submarket::Cork),
      cluster(-9.05, 53.27, 7000, 0.035, Submarket::Galway),
      cluster(-8.63, 52.66, 7000, 0.030, Submarket::Limerick),
      cluster(-6.35, 53.72, 5000, 0.0225, Submarket::Towns),
      cluster(-6.40, 54.00, 5000, 0.0225, Submarket::Towns),
      cluster(-7.25, 52.65, 5000, 0.0225, Submarket::Towns),
      cluster(-7.94, 53.42, 5000, 0.0225, Submarket::Towns),
      cluster(-8.47, 54.27, 5000, 0.0225, Submarket::Towns),
      cluster(-9.70, 52.27, 5000, 0.0225, Submarket::Towns),
      cluster(-6.46, 52.34, 5000, 0.0225, Submarket::Towns),
      cluster(-7.11, 52.26, 5000, 0.0225, Submarket::Towns),
  };
  double used = 0;
  for (const auto& cl : c.clusters) used += cl.weight;
  c.rural_weight = 1.0 - used;

  c.z_coef = {-0.01, 0.03, 0.005, 0.03, 0.04, 0.10,
              0.02,  -0.01, 0.0,  0.14, 0.015};
  {
    std::array<double, kNumBerLevels> b = {0.14,  0.15,  0.11,  0.08, 0.05,
                                           0.035, 0.005, -0.005, -0.02, -0.04,
                                           -0.05, -0.07, -0.08, -0.12, -0.16,
                                           0.0};
    double mean = std::accumulate(b.begin(), b.end(), 0.0) / b.size();
    for (double& v : b) v -= mean;
    c.ber_coef = b;
  }
  {
    const std::array<double, kNumPropertyTypes> base = {0.21,  0.085, -0.04,
                                                        0.01,  -0.07, -0.08,
                                                        -0.115};
    const std::array<double, kNumSubmarkets> factor = {1.0, 0.8, 1.05,
                                                       1.0, 1.2, 1.1};
    for (int s = 0; s < kNumSubmarkets; ++s) {
      double mean = 0;
      for (int t = 0; t < kNumPropertyTypes; ++t) {
        c.type_coef[s][t] = base[t] * factor[s];
        mean += c.type_coef[s][t];
      }
      mean /= kNumPropertyTypes;
      for (int t = 0; t < kNumPropertyTypes; ++t) c.type_coef[s][t] -= mean;
    }
  }
  // hand-picked per-submarket shapes: {linear, curve} on standardized inputs
  const double beds_lin[kNumSubmarkets] = {0.05, 0.03, 0.06, 0.04, 0.07, 0.05};
  const double beds_crv[kNumSubmarkets] = {-0.015, -0.02, 0.0, -0.01, -0.02, -0.015};
  const double bath_lin[kNumSubmarkets] = {0.05, 0.06, 0.07, 0.04, 0.08, 0.06};
  const double bath_crv[kNumSubmarkets] = {-0.025, -0.01, 0.0, -0.02, -0.03, -0.02};
  const double size_lin[kNumSubmarkets] = {-0.08, -0.12, -0.06, -0.09, -0.14, -0.11};
  const double size_crv[kNumSubmarkets] = {0.03, 0.04, 0.02, 0.03, 0.05, 0.04};
  const double mon_lin[kNumSubmarkets] = {0.015, 0.025, 0.02, 0.035, 0.04, 0.03};
  const double mon_crv[kNumSubmarkets] = {-0.008, 0.01, 0.0, -0.005, -0.012, 0.006};
  for (int s = 0; s < kNumSubmarkets; ++s) {
    c.smooths[s][0] = {beds_lin[s], beds_crv[s], 3.5, 2.0, false};
    c.smooths[s][1] = {bath_lin[s], bath_crv[s], 2.0, 1.5, false};
    c.smooths[s][2] = {size_lin[s], size_crv[s], 100.0, 0.5, true};
    c.smooths[s][3] = {mon_lin[s], mon_crv[s], 6.5, 3.5, false};
  }
  return c;
}

double GroundTruth::gp_field(double x, double y) const {
  double v = 0;
  for (Eigen::Index q = 0; q < bump_centres.rows(); ++q) {
    const double dx = x - bump_centres(q, 0), dy = y - bump_centres(q, 1);
    const double r2 = dx * dx + dy * dy;
    const double s = bump_scales(q);
    v += bump_weights(q) * std::exp(-r2 / (2.0 * s * s));
  }
  return config.gp_amplitude * (v - field_mean) / field_sd;
}

double GroundTruth::smooth_value(Submarket sm, design::SmoothVar v,
                                 double x) const {
  return config.smooths[static_cast<int>(sm)][static_cast<int>(v)].eval(x);
}

namespace {

// per-submarket covariate shape tables (Table-3-like)
const double kMedianSize[kNumSubmarkets] = {95, 95, 100, 98, 112, 104};

const double kTypeProbs[kNumSubmarkets][kNumPropertyTypes] = {
    // detached semi terraced end-terr town apt duplex
    {0.16, 0.36, 0.16, 0.10, 0.11, 0.09, 0.02},  // Cork
    {0.09, 0.32, 0.18, 0.10, 0.07, 0.20, 0.04},  // Dublin
    {0.15, 0.34, 0.09, 0.07, 0.07, 0.22, 0.06},  // Galway
    {0.08, 0.44, 0.10, 0.08, 0.07, 0.18, 0.05},  // Limerick
    {0.32, 0.40, 0.09, 0.07, 0.06, 0.05, 0.01},  // Rural
    {0.19, 0.45, 0.10, 0.08, 0.06, 0.10, 0.02},  // Towns
};

const double kBerProbs[kNumBerLevels] = {0.005, 0.05, 0.06, 0.045, 0.07, 0.10,
                                         0.11,  0.09, 0.085, 0.08, 0.06, 0.05,
                                         0.04,  0.04, 0.035, 0.08};

const double kFeatureRates[kNumFeatures] = {0.024, 0.67, 0.152, 0.316,
                                            0.140, 0.021, 0.129, 0.039,
                                            0.013, 0.005, 0.227};

int draw_categorical(Rng& rng, const double* probs, int n) {
  double u = rng.uniform();
  for (int i = 0; i < n; ++i) {
    u -= probs[i];
    if (u <= 0) return i;
  }
  return n - 1;
}

}  // namespace

SynthResult simulate_dataset(const SynthConfig& config) {
  if (config.n < 100) throw input_error("simulate_dataset: need n >= 100");
  if (config.num_regions > config.n)
    throw input_error("simulate_dataset: more regions than records");
  if (config.noise_sigma < 0)
    throw input_error("simulate_dataset: negative noise sigma");
  double wsum = config.rural_weight;
  for (const auto& cl : config.clusters) wsum += cl.weight;
  if (std::abs(wsum - 1.0) > 1e-9)
    throw input_error("simulate_dataset: mixture weights must sum to 1");

  const double xmin = config.extent[0], ymin = config.extent[1];
  const double xmax = config.extent[2], ymax = config.extent[3];
  if (!(xmax > xmin && ymax > ymin))
    throw input_error("simulate_dataset: bad extent");

  SynthResult out;
  out.truth.config = config;

  // Voronoi region sites
  {
    Rng rng = Rng::keyed(config.structure_seed, 0x5174e5ULL);
    Eigen::MatrixXd sites(config.num_regions, 2);
    for (int r = 0; r < config.num_regions; ++r) {
      sites(r, 0) = rng.uniform(xmin, xmax);
      sites(r, 1) = rng.uniform(ymin, ymax);
    }
    out.graph = geo::RegionGraph::from_voronoi_sites(std::move(sites));
  }

  // spatial bump field, standardized over a fixed reference grid
  {
    Rng rng = Rng::keyed(config.structure_seed, 0xb0b5ULL);
    const int q = config.gp_bumps;
    out.truth.bump_centres.resize(q, 2);
    out.truth.bump_scales.resize(q);
    out.truth.bump_weights.resize(q);
    const double span = std::min(xmax - xmin, ymax - ymin);
    for (int b = 0; b < q; ++b) {
      out.truth.bump_centres(b, 0) = xmin + (0.05 + 0.9 * rng.uniform()) * (xmax - xmin);
      out.truth.bump_centres(b, 1) = ymin + (0.05 + 0.9 * rng.uniform()) * (ymax - ymin);
      out.truth.bump_scales(b) = (0.12 + 0.13 * rng.uniform()) * span;
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      out.truth.bump_weights(b) = sign * (0.6 + 0.8 * rng.uniform());
    }
    out.truth.field_mean = 0;
    out.truth.field_sd = 1;
    const int g = 60;
    Eigen::VectorXd vals(g * g);
    for (int iy = 0; iy < g; ++iy)
      for (int ix = 0; ix < g; ++ix) {
        const double x = xmin + (ix + 0.5) * (xmax - xmin) / g;
        const double y = ymin + (iy + 0.5) * (ymax - ymin) / g;
        double v = 0;
        for (int b = 0; b < q; ++b) {
          const double dx = x - out.truth.bump_centres(b, 0);
          const double dy = y - out.truth.bump_centres(b, 1);
          const double s = out.truth.bump_scales(b);
          v += out.truth.bump_weights(b) * std::exp(-(dx * dx + dy * dy) / (2 * s * s));
        }
        vals(iy * g + ix) = v;
      }
    out.truth.field_mean = vals.mean();
    const double sd = std::sqrt((vals.array() - out.truth.field_mean).square().mean());
    out.truth.field_sd = sd > 0 ? sd : 1.0;
  }

  // centered region effects
  {
    Rng rng = Rng::keyed(config.structure_seed, 0x4e0effULL);
    Eigen::VectorXd g(config.num_regions);
    for (int r = 0; r < config.num_regions; ++r) g(r) = rng.normal();
    out.truth.region_effect =
        config.region_amplitude * (g.array() - g.mean()).matrix();
  }

  const int n = config.n;
  out.records.resize(n);
  out.truth.gp_latent.resize(n);
  out.truth.region_latent.resize(n);
  out.truth.smooth_latent.resize(n);
  out.truth.parametric_latent.resize(n);
  out.truth.noiseless.resize(n);
  out.truth.noise.resize(n);

  parallel_for(n, [&](std::int64_t i) {
    Rng rng = Rng::keyed(config.structure_seed, 0x7ec0ULL,
                         static_cast<std::uint64_t>(i));
    PropertyRecord r;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "S%06d", static_cast<int>(i));
    r.id = idbuf;

    // location from the cluster mixture
    double u = rng.uniform();
    const ClusterSpec* chosen = nullptr;
    for (const auto& cl : config.clusters) {
      u -= cl.weight;
      if (u <= 0) {
        chosen = &cl;
        break;
      }
    }
    if (chosen) {
      do {
        r.x = chosen->x + chosen->radius_m * rng.normal();
        r.y = chosen->y + chosen->radius_m * rng.normal();
      } while (r.x < xmin || r.x > xmax || r.y < ymin || r.y > ymax);
      r.submarket = chosen->submarket;
    } else {
      r.x = rng.uniform(xmin, xmax);
      r.y = rng.uniform(ymin, ymax);
      r.submarket = Submarket::Rural;
    }
    const geo::LonLat ll = geo::inverse_web_mercator({r.x, r.y});
    r.longitude = ll.lon;
    r.latitude = ll.lat;
    r.region_id = *out.graph.assign_xy({r.x, r.y});

    const int sm = static_cast<int>(r.submarket);
    r.size = std::clamp(std::exp(std::log(kMedianSize[sm]) + 0.32 * rng.normal()),
                        35.0, 600.0);
    r.beds = std::clamp(static_cast<int>(std::lround(
                            1.1 + 1.9 * std::log(r.size / 40.0) + 0.5 * rng.normal())),
                        1, 8);
    r.baths = std::clamp(static_cast<int>(std::lround(
                             0.75 * r.beds - 0.2 + 0.5 * rng.normal())),
                         1, 6);
    r.month = rng.uniform_int(1, 12);
    r.property_type = static_cast<PropertyType>(
        draw_categorical(rng, kTypeProbs[sm], kNumPropertyTypes));
    r.ber = static_cast<Ber>(draw_categorical(rng, kBerProbs, kNumBerLevels));
    for (int f = 0; f < kNumFeatures; ++f)
      r.features[f] = rng.uniform() < kFeatureRates[f];

    double parametric = 0;
    for (int f = 0; f < kNumFeatures; ++f)
      if (r.features[f]) parametric += config.z_coef[f];
    parametric += config.ber_coef[static_cast<int>(r.ber)];
    parametric += config.type_coef[sm][static_cast<int>(r.property_type)];

    double smooth = 0;
    smooth += config.smooths[sm][0].eval(r.beds);
    smooth += config.smooths[sm][1].eval(r.baths);
    smooth += config.smooths[sm][2].eval(r.size);
    smooth += config.smooths[sm][3].eval(r.month);

    const double gp = out.truth.gp_field(r.x, r.y);
    const double reg = out.truth.region_effect(r.region_id);
    const double noiseless = config.beta0 + parametric + smooth + gp + reg;
    const double eps =
        config.noise_sigma *
        Rng::keyed(config.noise_seed, 0x4015eULL, static_cast<std::uint64_t>(i))
            .normal();

    r.log_ppsm = noiseless + eps;
    r.price = std::exp(r.log_ppsm) * r.size;

    out.truth.parametric_latent(i) = parametric;
    out.truth.smooth_latent(i) = smooth;
    out.truth.gp_latent(i) = gp;
    out.truth.region_latent(i) = reg;
    out.truth.noiseless(i) = noiseless;
    out.truth.noise(i) = eps;
    out.records[i] = std::move(r);
  });

  return out;
}

// ---------------------------------------------------------------------------
// Recovery diagnostics.

namespace {

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::ArrayXd za = a.array() - a.mean();
  const Eigen::ArrayXd zb = b.array() - b.mean();
  const double denom = std::sqrt(za.square().sum() * zb.square().sum());
  return denom > 0 ? (za * zb).sum() / denom : 0.0;
}

}  // namespace

RecoveryReport recovery_error(const fit::FittedModel& model,
                              const GroundTruth& truth,
                              const std::vector<PropertyRecord>& records) {
  RecoveryReport rep;
  const int n = static_cast<int>(records.size());

  // smooth terms: centered RMSE over the covariate values actually observed
  for (const design::Block& b : model.blocks) {
    if (b.role != design::Block::Role::Smooth) continue;
    std::vector<double> fitted, true_vals;
    for (const PropertyRecord& r : records) {
      if (b.submarket && r.submarket != *b.submarket) continue;
      double x = 0;
      switch (b.var) {
        case design::SmoothVar::Beds: x = r.beds; break;
        case design::SmoothVar::Baths: x = r.baths; break;
        case design::SmoothVar::Size: x = r.size; break;
        case design::SmoothVar::Month: x = r.month; break;
      }
      const Eigen::RowVectorXd row = b.basis.to_current(b.basis.eval_raw(x));
      fitted.push_back(row.dot(model.beta.segment(b.offset, b.width)));
      if (b.submarket) {
        true_vals.push_back(truth.smooth_value(*b.submarket, b.var, x));
      } else {
        // national smooth: compare to the record's own submarket truth
        true_vals.push_back(truth.smooth_value(r.submarket, b.var, x));
      }
    }
    if (fitted.empty()) continue;
    const double mf = std::accumulate(fitted.begin(), fitted.end(), 0.0) / fitted.size();
    const double mt = std::accumulate(true_vals.begin(), true_vals.end(), 0.0) /
                      true_vals.size();
    double sse = 0;
    for (std::size_t i = 0; i < fitted.size(); ++i) {
      const double d = (fitted[i] - mf) - (true_vals[i] - mt);
      sse += d * d;
    }
    rep.smooths.push_back({b.label, std::sqrt(sse / fitted.size())});
  }

  // spatial components at the training locations
  const design::Block* gp = nullptr;
  const design::Block* mrf = nullptr;
  for (const design::Block& b : model.blocks) {
    if (b.role == design::Block::Role::GpSmooth) gp = &b;
    if (b.role == design::Block::Role::MrfSmooth) mrf = &b;
  }
  if (gp) {
    Eigen::VectorXd fitted(n), fitted_spatial(n), true_spatial(n);
    for (int i = 0; i < n; ++i) {
      const Eigen::RowVectorXd row =
          gp->basis.to_current(gp->basis.eval_raw_xy(records[i].x, records[i].y));
      fitted(i) = row.dot(model.beta.segment(gp->offset, gp->width));
      double mrf_val = 0;
      if (mrf) {
        const Eigen::RowVectorXd mrow =
            mrf->basis.to_current(mrf->basis.eval_raw_region(records[i].region_id));
        mrf_val = mrow.dot(model.beta.segment(mrf->offset, mrf->width));
      }
      fitted_spatial(i) = fitted(i) + mrf_val;
      true_spatial(i) = truth.gp_latent(i) + truth.region_latent(i);
    }
    rep.gp_correlation = pearson(fitted, truth.gp_latent);
    rep.spatial_correlation = pearson(fitted_spatial, true_spatial);
  }

  // parametric recovery
  for (const design::Block& b : model.blocks) {
    if (b.role == design::Block::Role::FeatureDummies) {
      for (int c = 0; c < b.width; ++c)
        rep.max_z_coef_error =
            std::max(rep.max_z_coef_error,
                     std::abs(model.beta(b.offset + c) - truth.config.z_coef[c]));
    }
    if (b.role == design::Block::Role::BerCoding) {
      const Eigen::MatrixXd D = design::deviation_decode_map(kNumBerLevels);
      const Eigen::VectorXd eff = D * model.beta.segment(b.offset, b.width);
      for (int l = 0; l < kNumBerLevels; ++l)
        rep.max_ber_coef_error = std::max(
            rep.max_ber_coef_error, std::abs(eff(l) - truth.config.ber_coef[l]));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization.

namespace {
using nlohmann::json;

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}
Eigen::VectorXd vec_from(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v(i) = a[i].get<double>();
  return v;
}

json config_json(const SynthConfig& c) {
  json doc;
  doc["n"] = c.n;
  doc["extent"] = c.extent;
  json cl = json::array();
  for (const auto& s : c.clusters)
    cl.push_back({{"x", s.x},
                  {"y", s.y},
                  {"radius_m", s.radius_m},
                  {"weight", s.weight},
                  {"submarket", to_string(s.submarket)}});
  doc["clusters"] = cl;
  doc["rural_weight"] = c.rural_weight;
  doc["num_regions"] = c.num_regions;
  doc["beta0"] = c.beta0;
  doc["z_coef"] = c.z_coef;
  doc["ber_coef"] = c.ber_coef;
  json tc = json::array();
  for (const auto& row : c.type_coef) tc.push_back(row);
  doc["type_coef"] = tc;
  json sm = json::array();
  for (const auto& row : c.smooths) {
    json vr = json::array();
    for (const auto& s : row)
      vr.push_back({{"linear", s.linear},
                    {"curve", s.curve},
                    {"centre", s.centre},
                    {"scale", s.scale},
                    {"log_input", s.log_input}});
    sm.push_back(vr);
  }
  doc["smooths"] = sm;
  doc["gp_bumps"] = c.gp_bumps;
  doc["gp_amplitude"] = c.gp_amplitude;
  doc["region_amplitude"] = c.region_amplitude;
  doc["noise_sigma"] = c.noise_sigma;
  doc["structure_seed"] = c.structure_seed;
  doc["noise_seed"] = c.noise_seed;
  return doc;
}

SynthConfig config_from_json(const json& doc) {
  SynthConfig c = SynthConfig::defaults();
  c.n = doc.value("n", c.n);
  if (doc.contains("extent")) c.extent = doc["extent"].get<std::array<double, 4>>();
  if (doc.contains("clusters")) {
    c.clusters.clear();
    for (const auto& j : doc["clusters"]) {
      ClusterSpec s;
      s.x = j.at("x").get<double>();
      s.y = j.at("y").get<double>();
      s.radius_m = j.at("radius_m").get<double>();
      s.weight = j.at("weight").get<double>();
      auto sm = parse_submarket(j.at("submarket").get<std::string>());
      if (!sm) throw input_error("synth config: bad submarket");
      s.submarket = *sm;
      c.clusters.push_back(s);
    }
  }
  c.rural_weight = doc.value("rural_weight", c.rural_weight);
  c.num_regions = doc.value("num_regions", c.num_regions);
  c.beta0 = doc.value("beta0", c.beta0);
  if (doc.contains("z_coef"))
    c.z_coef = doc["z_coef"].get<std::array<double, kNumFeatures>>();
  if (doc.contains("ber_coef"))
    c.ber_coef = doc["ber_coef"].get<std::array<double, kNumBerLevels>>();
  if (doc.contains("type_coef"))
    for (int s = 0; s < kNumSubmarkets; ++s)
      c.type_coef[s] =
          doc["type_coef"][s].get<std::array<double, kNumPropertyTypes>>();
  if (doc.contains("smooths"))
    for (int s = 0; s < kNumSubmarkets; ++s)
      for (int v = 0; v < design::kNumSmoothVars; ++v) {
        const json& j = doc["smooths"][s][v];
        c.smooths[s][v] = {j.at("linear").get<double>(),
                           j.at("curve").get<double>(),
                           j.at("centre").get<double>(),
                           j.at("scale").get<double>(),
                           j.at("log_input").get<bool>()};
      }
  c.gp_bumps = doc.value("gp_bumps", c.gp_bumps);
  c.gp_amplitude = doc.value("gp_amplitude", c.gp_amplitude);
  c.region_amplitude = doc.value("region_amplitude", c.region_amplitude);
  c.noise_sigma = doc.value("noise_sigma", c.noise_sigma);
  c.structure_seed = doc.value("structure_seed", c.structure_seed);
  c.noise_seed = doc.value("noise_seed", c.noise_seed);
  return c;
}

}  // namespace

std::string SynthConfig::canonical_string() const {
  return config_json(*this).dump();
}

void SynthConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write synth config: " + path);
  out << config_json(*this).dump(1) << "\n";
}

SynthConfig SynthConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open synth config: " + path);
  return config_from_json(json::parse(in));
}

void GroundTruth::save(const std::string& path) const {
  json doc;
  doc["artifact"] = "ground_truth";
  doc["version"] = 1;
  doc["config"] = config_json(config);
  json bc = json::array();
  for (Eigen::Index i = 0; i < bump_centres.rows(); ++i)
    bc.push_back({bump_centres(i, 0), bump_centres(i, 1)});
  doc["bump_centres"] = bc;
  doc["bump_scales"] = vec_json(bump_scales);
  doc["bump_weights"] = vec_json(bump_weights);
  doc["field_mean"] = field_mean;
  doc["field_sd"] = field_sd;
  doc["region_effect"] = vec_json(region_effect);
  doc["gp_latent"] = vec_json(gp_latent);
  doc["region_latent"] = vec_json(region_latent);
  doc["smooth_latent"] = vec_json(smooth_latent);
  doc["parametric_latent"] = vec_json(parametric_latent);
  doc["noiseless"] = vec_json(noiseless);
  doc["noise"] = vec_json(noise);
  std::ofstream out(path);
  if (!out) throw input_error("cannot write truth file: " + path);
  out << doc.dump() << "\n";
}

GroundTruth GroundTruth::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open truth file: " + path);
  json doc = json::parse(in);
  if (doc.value("artifact", "") != "ground_truth")
    throw input_error("not a ground_truth artifact: " + path);
  GroundTruth t;
  t.config = config_from_json(doc.at("config"));
  const json& bc = doc.at("bump_centres");
  t.bump_centres.resize(bc.size(), 2);
  for (std::size_t i = 0; i < bc.size(); ++i) {
    t.bump_centres(i, 0) = bc[i][0].get<double>();
    t.bump_centres(i, 1) = bc[i][1].get<double>();
  }
  t.bump_scales = vec_from(doc.at("bump_scales"));
  t.bump_weights = vec_from(doc.at("bump_weights"));
  t.field_mean = doc.at("field_mean").get<double>();
  t.field_sd = doc.at("field_sd").get<double>();
  t.region_effect = vec_from(doc.at("region_effect"));
  t.gp_latent = vec_from(doc.at("gp_latent"));
  t.region_latent = vec_from(doc.at("region_latent"));
  t.smooth_latent = vec_from(doc.at("smooth_latent"));
  t.parametric_latent = vec_from(doc.at("parametric_latent"));
  t.noiseless = vec_from(doc.at("noiseless"));
  t.noise = vec_from(doc.at("noise"));
  return t;
}

}  // namespace avm::synth

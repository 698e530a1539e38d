#include "avm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

namespace avm::geo {

using std::numbers::pi;

XY project_web_mercator(LonLat p) {
  if (std::abs(p.lat) > kMaxMercatorLatDeg)
    throw std::domain_error("latitude outside web-mercator domain: " +
                            std::to_string(p.lat));
  const double lon_rad = p.lon * pi / 180.0;
  const double lat_rad = p.lat * pi / 180.0;
  // asinh(tan(lat)) == ln(tan(pi/4 + lat/2)), exact at the equator
  return {kWebMercatorRadiusM * lon_rad,
          kWebMercatorRadiusM * std::asinh(std::tan(lat_rad))};
}

LonLat inverse_web_mercator(XY p) {
  const double lon_rad = p.x / kWebMercatorRadiusM;
  const double lat_rad = std::atan(std::sinh(p.y / kWebMercatorRadiusM));
  return {lon_rad * 180.0 / pi, lat_rad * 180.0 / pi};
}

double haversine_m(LonLat a, LonLat b) {
  const double phi1 = a.lat * pi / 180.0, phi2 = b.lat * pi / 180.0;
  const double dphi = phi2 - phi1;
  const double dlam = (b.lon - a.lon) * pi / 180.0;
  const double s = std::sin(dphi / 2), t = std::sin(dlam / 2);
  const double h = s * s + std::cos(phi1) * std::cos(phi2) * t * t;
  return 2.0 * kMeanEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

namespace {

// On-segment test with a tolerance scaled to the segment extent, so that
// boundary vertices written with finite precision still register.
bool on_segment(LonLat p, LonLat a, LonLat b) {
  const double cross =
      (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
  const double scale = std::max({std::abs(b.lon - a.lon),
                                 std::abs(b.lat - a.lat), 1e-12});
  if (std::abs(cross) > 1e-12 * scale) return false;
  const double dot =
      (p.lon - a.lon) * (b.lon - a.lon) + (p.lat - a.lat) * (b.lat - a.lat);
  const double len2 = (b.lon - a.lon) * (b.lon - a.lon) +
                      (b.lat - a.lat) * (b.lat - a.lat);
  return dot >= -1e-12 * len2 && dot <= len2 * (1 + 1e-12);
}

}  // namespace

bool point_in_polygon(LonLat p, const PolygonFeature& poly) {
  bool inside = false;
  for (const Ring& ring : poly.rings) {
    const auto& v = ring.vertices;
    const std::size_t n = v.size();
    if (n < 3) continue;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      if (on_segment(p, v[j], v[i])) return true;  // boundary counts inside
      if ((v[i].lat > p.lat) != (v[j].lat > p.lat)) {
        const double xint = v[j].lon + (p.lat - v[j].lat) *
                                           (v[i].lon - v[j].lon) /
                                           (v[i].lat - v[j].lat);
        if (p.lon < xint) inside = !inside;
      }
    }
  }
  return inside;
}

std::vector<PolygonFeature> read_feature_collection(std::istream& in) {
  nlohmann::json doc = nlohmann::json::parse(in);
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features"))
    throw input_error("geometry file: expected a FeatureCollection");
  std::vector<PolygonFeature> out;
  for (const auto& f : doc["features"]) {
    PolygonFeature pf;
    if (f.contains("id"))
      pf.id = f["id"].is_string() ? f["id"].get<std::string>()
                                  : f["id"].dump();
    else if (f.contains("properties") && f["properties"].contains("id"))
      pf.id = f["properties"]["id"].get<std::string>();
    else
      throw input_error("geometry file: feature without id");
    const auto& geom = f.at("geometry");
    if (geom.value("type", "") != "Polygon")
      throw input_error("geometry file: only Polygon features are supported");
    for (const auto& ring : geom.at("coordinates")) {
      Ring r;
      for (const auto& pt : ring)
        r.vertices.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
      // drop an explicit closing vertex; edges wrap implicitly
      if (r.vertices.size() > 1 &&
          r.vertices.front().lon == r.vertices.back().lon &&
          r.vertices.front().lat == r.vertices.back().lat)
        r.vertices.pop_back();
      if (r.vertices.size() < 3)
        throw input_error("geometry file: ring with fewer than 3 vertices in " +
                          pf.id);
      pf.rings.push_back(std::move(r));
    }
    out.push_back(std::move(pf));
  }
  return out;
}

std::vector<PolygonFeature> read_feature_collection_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open geometry file: " + path);
  return read_feature_collection(in);
}

// ---------------------------------------------------------------------------
// Delaunay triangulation (Bowyer-Watson), used for Voronoi adjacency.

namespace {

struct Tri {
  int a, b, c;  // CCW
};

double orient(const Eigen::RowVector2d& a, const Eigen::RowVector2d& b,
              const Eigen::RowVector2d& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

bool in_circumcircle(const Eigen::RowVector2d& a, const Eigen::RowVector2d& b,
                     const Eigen::RowVector2d& c, const Eigen::RowVector2d& p) {
  const double ax = a.x() - p.x(), ay = a.y() - p.y();
  const double bx = b.x() - p.x(), by = b.y() - p.y();
  const double cx = c.x() - p.x(), cy = c.y() - p.y();
  const double det =
      (ax * ax + ay * ay) * (bx * cy - cx * by) -
      (bx * bx + by * by) * (ax * cy - cx * ay) +
      (cx * cx + cy * cy) * (ax * by - bx * ay);
  return det > 0;  // assumes CCW triangle
}

}  // namespace

std::vector<std::pair<int, int>> delaunay_edges(const Eigen::MatrixXd& sites) {
  const int m = static_cast<int>(sites.rows());
  if (m < 2) return {};
  if (m == 2) return {{0, 1}};

  // Normalize into the unit square; Delaunay structure is scale-invariant
  // and this keeps the circumcircle determinants well conditioned.
  const Eigen::RowVector2d lo = sites.colwise().minCoeff();
  const Eigen::RowVector2d hi = sites.colwise().maxCoeff();
  const double span = std::max({hi.x() - lo.x(), hi.y() - lo.y(), 1e-300});
  std::vector<Eigen::RowVector2d> pts(m + 3);
  for (int i = 0; i < m; ++i)
    pts[i] = (sites.row(i) - lo) / span;

  // Super-triangle enclosing the unit square by a wide margin.
  pts[m] = {-10.0, -10.0};
  pts[m + 1] = {20.0, -10.0};
  pts[m + 2] = {0.5, 20.0};

  std::vector<Tri> tris{{m, m + 1, m + 2}};
  for (int p = 0; p < m; ++p) {
    std::vector<Tri> keep;
    std::map<std::pair<int, int>, int> boundary;  // edge -> count among bad tris
    for (const Tri& t : tris) {
      if (in_circumcircle(pts[t.a], pts[t.b], pts[t.c], pts[p])) {
        auto add = [&](int u, int v) {
          auto key = std::minmax(u, v);
          boundary[{key.first, key.second}]++;
        };
        add(t.a, t.b);
        add(t.b, t.c);
        add(t.c, t.a);
      } else {
        keep.push_back(t);
      }
    }
    for (const auto& [edge, count] : boundary) {
      if (count != 1) continue;  // interior edge of the cavity
      int u = edge.first, v = edge.second;
      if (orient(pts[u], pts[v], pts[p]) < 0) std::swap(u, v);
      keep.push_back({u, v, p});
    }
    tris = std::move(keep);
  }

  std::set<std::pair<int, int>> edges;
  for (const Tri& t : tris) {
    if (t.a >= m || t.b >= m || t.c >= m) continue;  // touches super-triangle
    auto add = [&](int u, int v) {
      edges.insert({std::min(u, v), std::max(u, v)});
    };
    add(t.a, t.b);
    add(t.b, t.c);
    add(t.c, t.a);
  }
  return {edges.begin(), edges.end()};
}

// ---------------------------------------------------------------------------
// RegionGraph

RegionGraph RegionGraph::from_polygons(std::vector<PolygonFeature> features) {
  RegionGraph g;
  g.polygons_ = std::move(features);
  const int m = static_cast<int>(g.polygons_.size());
  g.ids_.reserve(m);
  for (const auto& f : g.polygons_) g.ids_.push_back(f.id);

  // First-order adjacency: two regions sharing at least one boundary edge.
  // Region tilings in the documented format are vertex-matched, so edges are
  // compared exactly.
  using VKey = std::pair<double, double>;
  using EKey = std::pair<VKey, VKey>;
  std::map<EKey, std::vector<int>> owners;
  for (int f = 0; f < m; ++f) {
    for (const Ring& ring : g.polygons_[f].rings) {
      const auto& v = ring.vertices;
      const std::size_t n = v.size();
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        VKey p{v[j].lon, v[j].lat}, q{v[i].lon, v[i].lat};
        if (q < p) std::swap(p, q);
        owners[{p, q}].push_back(f);
      }
    }
  }
  g.first_.assign(m, {});
  std::set<std::pair<int, int>> seen;
  for (const auto& [edge, fs] : owners) {
    for (std::size_t i = 0; i < fs.size(); ++i)
      for (std::size_t j = i + 1; j < fs.size(); ++j) {
        const int a = std::min(fs[i], fs[j]), b = std::max(fs[i], fs[j]);
        if (a != b && seen.insert({a, b}).second) {
          g.first_[a].push_back(b);
          g.first_[b].push_back(a);
        }
      }
  }
  for (auto& nb : g.first_) std::sort(nb.begin(), nb.end());
  g.derive_second_order();
  return g;
}

RegionGraph RegionGraph::from_voronoi_sites(Eigen::MatrixXd sites,
                                            std::vector<std::string> ids) {
  RegionGraph g;
  const int m = static_cast<int>(sites.rows());
  g.sites_ = std::move(sites);
  if (ids.empty()) {
    for (int i = 0; i < m; ++i) g.ids_.push_back("R" + std::to_string(i));
  } else {
    if (static_cast<int>(ids.size()) != m)
      throw input_error("region graph: id count does not match site count");
    g.ids_ = std::move(ids);
  }
  g.first_.assign(m, {});
  for (const auto& [a, b] : delaunay_edges(g.sites_)) {
    g.first_[a].push_back(b);
    g.first_[b].push_back(a);
  }
  for (auto& nb : g.first_) std::sort(nb.begin(), nb.end());
  g.derive_second_order();
  return g;
}

void RegionGraph::derive_second_order() {
  const int m = size();
  second_.assign(m, {});
  for (int i = 0; i < m; ++i) {
    std::set<int> nb(first_[i].begin(), first_[i].end());
    for (int j : first_[i]) nb.insert(first_[j].begin(), first_[j].end());
    nb.erase(i);
    second_[i].assign(nb.begin(), nb.end());
  }
}

std::optional<int> RegionGraph::assign(LonLat p) const {
  if (voronoi_mode()) return assign_xy(project_web_mercator(p));
  for (int i = 0; i < size(); ++i)
    if (point_in_polygon(p, polygons_[i])) return i;
  return std::nullopt;
}

std::optional<int> RegionGraph::assign_xy(XY p) const {
  if (!voronoi_mode()) return assign(inverse_web_mercator(p));
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < sites_.rows(); ++i) {
    const double dx = sites_(i, 0) - p.x, dy = sites_(i, 1) - p.y;
    const double d = dx * dx + dy * dy;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best < 0 ? std::nullopt : std::optional<int>(best);
}

int RegionGraph::connected_components() const {
  const int m = size();
  std::vector<int> comp(m, -1);
  int n_comp = 0;
  for (int s = 0; s < m; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack{s};
    comp[s] = n_comp;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : second_[u])
        if (comp[v] < 0) {
          comp[v] = n_comp;
          stack.push_back(v);
        }
    }
    ++n_comp;
  }
  return n_comp;
}

void RegionGraph::save(const std::string& path) const {
  nlohmann::json doc;
  if (voronoi_mode()) {
    doc["type"] = "RegionGraph";
    doc["mode"] = "voronoi";
    doc["ids"] = ids_;
    auto sites = nlohmann::json::array();
    for (int i = 0; i < sites_.rows(); ++i)
      sites.push_back({sites_(i, 0), sites_(i, 1)});
    doc["sites"] = sites;
  } else {
    doc["type"] = "FeatureCollection";
    auto features = nlohmann::json::array();
    for (const auto& pf : polygons_) {
      nlohmann::json f;
      f["type"] = "Feature";
      f["id"] = pf.id;
      f["geometry"]["type"] = "Polygon";
      auto rings = nlohmann::json::array();
      for (const Ring& r : pf.rings) {
        auto ring = nlohmann::json::array();
        for (const LonLat& v : r.vertices) ring.push_back({v.lon, v.lat});
        ring.push_back({r.vertices.front().lon, r.vertices.front().lat});
        rings.push_back(ring);
      }
      f["geometry"]["coordinates"] = rings;
      features.push_back(f);
    }
    doc["features"] = features;
  }
  std::ofstream out(path);
  if (!out) throw input_error("cannot write region graph: " + path);
  out << doc.dump(1) << "\n";
}

RegionGraph RegionGraph::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open region graph: " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  if (doc.value("type", "") == "RegionGraph") {
    if (doc.value("mode", "") != "voronoi")
      throw input_error("region graph: unknown mode");
    const auto& sites = doc.at("sites");
    Eigen::MatrixXd m(sites.size(), 2);
    for (std::size_t i = 0; i < sites.size(); ++i) {
      m(i, 0) = sites[i].at(0).get<double>();
      m(i, 1) = sites[i].at(1).get<double>();
    }
    std::vector<std::string> ids;
    if (doc.contains("ids")) ids = doc["ids"].get<std::vector<std::string>>();
    return from_voronoi_sites(std::move(m), std::move(ids));
  }
  std::istringstream again(doc.dump());
  return from_polygons(read_feature_collection(again));
}

}  // namespace avm::geo

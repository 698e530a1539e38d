#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "avm/geometry.hpp"
#include "avm/rng.hpp"
#include "oracles.hpp"

using namespace avm;
using geo::LonLat;
using geo::XY;

TEST_CASE("web mercator fixed points") {
  const XY origin = geo::project_web_mercator({0, 0});
  CHECK(origin.x == 0.0);
  CHECK(origin.y == 0.0);
  const XY edge = geo::project_web_mercator({180, 0});
  CHECK(edge.x == doctest::Approx(20037508.34).epsilon(1e-9));
  CHECK(std::abs(edge.y) < 1e-9);
  CHECK_THROWS_AS(geo::project_web_mercator({0, 86.0}), std::domain_error);
}

TEST_CASE("projection round-trip under 1e-9 degrees") {
  // the documented Limerick-ish point plus a large random sweep
  {
    const LonLat p{-8.63, 52.66};
    const LonLat back = geo::inverse_web_mercator(geo::project_web_mercator(p));
    CHECK(std::abs(back.lon - p.lon) < 1e-9);
    CHECK(std::abs(back.lat - p.lat) < 1e-9);
  }
  Rng rng(11);
  double worst = 0;
  for (int i = 0; i < 1000000; ++i) {
    const LonLat p{rng.uniform(-180, 180), rng.uniform(-85.0, 85.0)};
    const LonLat back = geo::inverse_web_mercator(geo::project_web_mercator(p));
    worst = std::max({worst, std::abs(back.lon - p.lon), std::abs(back.lat - p.lat)});
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("haversine sanity") {
  // one degree of longitude at the equator
  const double d = geo::haversine_m({0, 0}, {1, 0});
  CHECK(d == doctest::Approx(2 * M_PI * geo::kMeanEarthRadiusM / 360.0).epsilon(1e-9));
  CHECK(geo::haversine_m({5, 5}, {5, 5}) == 0.0);
}

namespace {
geo::PolygonFeature square(double lo, double hi, const std::string& id = "sq") {
  geo::PolygonFeature f;
  f.id = id;
  f.rings.push_back({{{lo, lo}, {hi, lo}, {hi, hi}, {lo, hi}}});
  return f;
}
}  // namespace

TEST_CASE("point in polygon: interior, exterior, boundary, holes") {
  const auto sq = square(0, 10);
  CHECK(geo::point_in_polygon({5, 5}, sq));
  CHECK(!geo::point_in_polygon({15, 5}, sq));
  CHECK(geo::point_in_polygon({0, 5}, sq));   // edge counts inside
  CHECK(geo::point_in_polygon({0, 0}, sq));   // vertex counts inside
  geo::PolygonFeature holed = sq;
  holed.rings.push_back({{{4, 4}, {6, 4}, {6, 6}, {4, 6}}});
  CHECK(!geo::point_in_polygon({5, 5}, holed));  // inside the hole
  CHECK(geo::point_in_polygon({2, 2}, holed));
}

TEST_CASE("ray casting agrees with the winding-number oracle on 1000 points") {
  // an awkward concave polygon
  geo::PolygonFeature poly;
  poly.id = "concave";
  poly.rings.push_back(
      {{{0, 0}, {10, 0}, {10, 4}, {4, 4}, {4, 6}, {10, 6}, {10, 10}, {0, 10}}});
  Rng rng(3);
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const LonLat p{rng.uniform(-2, 12), rng.uniform(-2, 12)};
    // skip points numerically on the boundary, where the rules differ
    bool near_edge = false;
    const auto& v = poly.rings[0].vertices;
    for (std::size_t a = 0, b = v.size() - 1; a < v.size(); b = a++) {
      const double cross = (v[a].lon - v[b].lon) * (p.lat - v[b].lat) -
                           (v[a].lat - v[b].lat) * (p.lon - v[b].lon);
      if (std::abs(cross) < 1e-7) near_edge = true;
    }
    if (near_edge) continue;
    ++checked;
    CHECK(geo::point_in_polygon(p, poly) == oracles::winding_inside(p, poly));
  }
  CHECK(checked > 900);
}

TEST_CASE("feature collection parsing and polygon adjacency") {
  const std::string doc = R"({
    "type": "FeatureCollection",
    "features": [
      {"type":"Feature","id":"A","geometry":{"type":"Polygon",
        "coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
      {"type":"Feature","id":"B","geometry":{"type":"Polygon",
        "coordinates":[[[1,0],[2,0],[2,1],[1,1],[1,0]]]}},
      {"type":"Feature","id":"C","geometry":{"type":"Polygon",
        "coordinates":[[[2,0],[3,0],[3,1],[2,1],[2,0]]]}}
    ]})";
  std::istringstream in(doc);
  auto features = geo::read_feature_collection(in);
  REQUIRE(features.size() == 3);
  const auto graph = geo::RegionGraph::from_polygons(features);
  CHECK(graph.size() == 3);
  // path A-B-C: adjacency symmetric and irreflexive
  CHECK(graph.first_order()[0] == std::vector<int>{1});
  CHECK(graph.first_order()[1] == (std::vector<int>{0, 2}));
  CHECK(graph.first_order()[2] == std::vector<int>{1});
  // second order is the complete graph on three nodes
  CHECK(graph.second_order()[0] == (std::vector<int>{1, 2}));
  CHECK(graph.second_order()[1] == (std::vector<int>{0, 2}));
  CHECK(graph.second_order()[2] == (std::vector<int>{0, 1}));
  CHECK(graph.connected_components() == 1);
  CHECK(graph.assign({0.5, 0.5}) == 0);
  CHECK(graph.assign({2.5, 0.5}) == 2);
  CHECK(!graph.assign({5.0, 5.0}).has_value());
}

TEST_CASE("voronoi adjacency from delaunay matches brute-force neighbour test") {
  Rng rng(17);
  const int m = 30;
  Eigen::MatrixXd sites(m, 2);
  for (int i = 0; i < m; ++i) {
    sites(i, 0) = rng.uniform(0, 1000);
    sites(i, 1) = rng.uniform(0, 1000);
  }
  const auto graph = geo::RegionGraph::from_voronoi_sites(sites);

  // brute force: sample a fine grid, mark which cells touch which
  const int g = 400;
  std::vector<std::vector<char>> touch(m, std::vector<char>(m, 0));
  std::vector<int> cell(g * g);
  for (int iy = 0; iy < g; ++iy)
    for (int ix = 0; ix < g; ++ix) {
      const double x = 1000.0 * (ix + 0.5) / g, y = 1000.0 * (iy + 0.5) / g;
      int best = 0;
      double bd = 1e300;
      for (int s = 0; s < m; ++s) {
        const double dx = sites(s, 0) - x, dy = sites(s, 1) - y;
        if (dx * dx + dy * dy < bd) {
          bd = dx * dx + dy * dy;
          best = s;
        }
      }
      cell[iy * g + ix] = best;
    }
  for (int iy = 0; iy < g; ++iy)
    for (int ix = 0; ix + 1 < g; ++ix) {
      touch[cell[iy * g + ix]][cell[iy * g + ix + 1]] = 1;
      touch[cell[iy * g + ix + 1]][cell[iy * g + ix]] = 1;
    }
  for (int ix = 0; ix < g; ++ix)
    for (int iy = 0; iy + 1 < g; ++iy) {
      touch[cell[iy * g + ix]][cell[(iy + 1) * g + ix]] = 1;
      touch[cell[(iy + 1) * g + ix]][cell[iy * g + ix]] = 1;
    }

  // every grid-detected adjacency must be a Delaunay edge (the grid can
  // miss hairline contacts, so only this direction is exact)
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      if (a == b || !touch[a][b]) continue;
      const auto& nb = graph.first_order()[a];
      CHECK(std::find(nb.begin(), nb.end(), b) != nb.end());
    }
  CHECK(graph.assign_xy({sites(4, 0) + 0.5, sites(4, 1)}) == 4);
}

TEST_CASE("region graph round-trips through save/load") {
  Rng rng(5);
  Eigen::MatrixXd sites(12, 2);
  for (int i = 0; i < 12; ++i) {
    sites(i, 0) = rng.uniform(0, 100);
    sites(i, 1) = rng.uniform(0, 100);
  }
  const auto graph = geo::RegionGraph::from_voronoi_sites(sites);
  const std::string path = "/tmp/avm_test_region_graph.json";
  graph.save(path);
  const auto loaded = geo::RegionGraph::load(path);
  CHECK(loaded.size() == graph.size());
  CHECK(loaded.first_order() == graph.first_order());
  CHECK(loaded.second_order() == graph.second_order());
}

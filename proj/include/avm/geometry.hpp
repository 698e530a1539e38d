#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "avm/types.hpp"

namespace avm::geo {

inline constexpr double kWebMercatorRadiusM = 6378137.0;
inline constexpr double kMeanEarthRadiusM = 6371008.8;
inline constexpr double kMaxMercatorLatDeg = 85.06;

struct LonLat {
  double lon = 0, lat = 0;
};
struct XY {
  double x = 0, y = 0;
};

/// Pseudo/Web Mercator: x = R*lon, y = R*ln(tan(pi/4 + lat/2)), R = 6378137 m.
/// Throws std::domain_error for |lat| > 85.06 degrees.
XY project_web_mercator(LonLat p);
LonLat inverse_web_mercator(XY p);

/// Great-circle distance in metres on the mean-radius sphere.
double haversine_m(LonLat a, LonLat b);

struct Ring {
  std::vector<LonLat> vertices;  // closed implicitly (last edge wraps)
};

struct PolygonFeature {
  std::string id;
  std::vector<Ring> rings;  // ring 0 outer, rest holes (even-odd handles both)
};

/// Even-odd ray casting over all rings. Points on an edge count as inside.
bool point_in_polygon(LonLat p, const PolygonFeature& poly);

/// Parses the documented plain-text geometry format: a JSON FeatureCollection
/// restricted to Polygon features with an "id" member.
std::vector<PolygonFeature> read_feature_collection(std::istream& in);
std::vector<PolygonFeature> read_feature_collection_file(const std::string& path);

/// Delaunay edges (Bowyer-Watson); each pair is (i, j) with i < j, sorted.
/// Voronoi cells of two sites share a boundary exactly when the sites are
/// Delaunay neighbours, which is how voronoi-mode graphs get adjacency.
std::vector<std::pair<int, int>> delaunay_edges(const Eigen::MatrixXd& sites);

/// Areal units with first- and second-order neighbourhood structure.
/// Polygon mode stores rings in WGS84; voronoi mode stores generator sites
/// in web-mercator metres.
class RegionGraph {
 public:
  static RegionGraph from_polygons(std::vector<PolygonFeature> features);
  static RegionGraph from_voronoi_sites(Eigen::MatrixXd sites,
                                        std::vector<std::string> ids = {});

  static RegionGraph load(const std::string& path);
  void save(const std::string& path) const;

  int size() const { return static_cast<int>(ids_.size()); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<std::vector<int>>& first_order() const { return first_; }
  const std::vector<std::vector<int>>& second_order() const { return second_; }
  const std::vector<PolygonFeature>& polygons() const { return polygons_; }
  const Eigen::MatrixXd& sites() const { return sites_; }
  bool voronoi_mode() const { return polygons_.empty() && sites_.rows() > 0; }

  /// Region containing the point, or nullopt. Polygon mode: even-odd test
  /// in lon/lat; voronoi mode: nearest site in projected metres.
  std::optional<int> assign(LonLat p) const;
  /// Same in projected coordinates (voronoi mode only needs no projection).
  std::optional<int> assign_xy(XY p) const;

  int connected_components() const;  // of the second-order graph

 private:
  void derive_second_order();
  std::vector<std::string> ids_;
  std::vector<PolygonFeature> polygons_;
  Eigen::MatrixXd sites_;  // m x 2, metres
  std::vector<std::vector<int>> first_, second_;
};

}  // namespace avm::geo

// Copyright 2026 The bevcvt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "grid.hpp"
#include "image.hpp"

namespace bevcvt::world {

using Point2 = Eigen::Vector2d;
using Polygon = std::vector<Point2>;

struct Polyline {
  std::vector<Point2> points;
  double width = 0.0;
};

struct RoadGraph {
  std::vector<Point2> nodes;
  std::vector<std::pair<int, int>> edges;

  std::vector<std::vector<int>> adjacency() const;
  int degree(int node) const;
};

/// Block-grid town layout. Block edge lengths are drawn per seed from
/// [block_min_m, block_max_m]; road width from [road_width_min_m,
/// road_width_max_m].
struct TownSpec {
  int blocks_x = 4;
  int blocks_y = 4;
  double block_min_m = 30.0;
  double block_max_m = 45.0;
  double road_width_min_m = 7.0;
  double road_width_max_m = 9.0;
  double lane_width_m = 0.4;
  double lane_inset_m = 0.75;
  double dash_length_m = 3.0;
  double edge_removal_fraction = 0.3;
};

enum class SemanticClass : std::uint8_t { Road = 0, Lane = 1, Offroad = 2, Sky = 3 };

struct Rgb {
  std::uint8_t r, g, b;
};

Rgb palette(SemanticClass c);

class TownMap {
 public:
  TownMap() = default;
  TownMap(std::uint64_t seed, std::vector<Polygon> roads, std::vector<Polyline> lanes, RoadGraph graph);

  std::uint64_t seed() const { return seed_; }
  const std::vector<Polygon>& road_polygons() const { return roads_; }
  const std::vector<Polyline>& lane_polylines() const { return lanes_; }
  const RoadGraph& graph() const { return graph_; }
  /// (min_x, min_y, max_x, max_y) over all geometry.
  const Eigen::Vector4d& extent() const { return extent_; }

  bool on_road(const Point2& p) const;
  bool on_lane(const Point2& p) const;
  /// Lane markings take precedence over road surface.
  SemanticClass classify(const Point2& p) const;

 private:
  void build_index();
  std::size_t bucket_of(int bx, int by) const { return static_cast<std::size_t>(by) * buckets_x_ + bx; }
  std::optional<std::size_t> bucket_at(const Point2& p) const;

  std::uint64_t seed_ = 0;
  std::vector<Polygon> roads_;
  std::vector<Polyline> lanes_;
  RoadGraph graph_;
  Eigen::Vector4d extent_ = Eigen::Vector4d::Zero();

  double bucket_m_ = 8.0;
  int buckets_x_ = 0;
  int buckets_y_ = 0;
  std::vector<std::vector<int>> road_buckets_;
  std::vector<std::vector<int>> lane_buckets_;
};

bool point_in_polygon(const Point2& p, const Polygon& poly);
double distance_to_segment(const Point2& p, const Point2& a, const Point2& b);
double distance_to_polyline(const Point2& p, const std::vector<Point2>& line);

TownMap generate_town(std::uint64_t seed, const TownSpec& spec);

nlohmann::json town_to_json(const TownMap& town);
TownMap town_from_json(const nlohmann::json& j);

struct Route {
  std::vector<Point2> waypoints;
  /// Graph nodes visited, in order; the corner polyline of the route.
  std::vector<int> node_path;
  std::vector<Point2> corners;
  double spacing = 0.0;

  double length() const;
};

/// Dijkstra shortest path over the road graph, each edge resampled at
/// `spacing` so that every corner is itself a waypoint.
Route plan_route(const TownMap& town, int start, int goal, double spacing);

struct EgoPose {
  Point2 position = Point2::Zero();
  double heading = 0.0;  // radians, [-pi, pi)
  int frame = 0;
};

double wrap_angle(double a);

/// Pose at arc length `s` along the route; heading follows a +-1.5 m chord.
EgoPose pose_along_route(const Route& route, double s, int frame);

struct Rig {
  std::string name;
  std::vector<geometry::CameraModel> cameras;  // mounts relative to ego
};

/// Left/center/right front cameras (+ rear when n_views == 4).
Rig default_rig(int n_views, int width = 128, int height = 128, double fov_deg = 90.0);

Image render_camera_view(const TownMap& town, const geometry::CameraModel& mount, const EgoPose& ego);

/// Class of the ground point seen through an arbitrary (sub-)pixel position.
SemanticClass classify_pixel(const TownMap& town, const geometry::CameraModel& world_cam,
                             const geometry::Vec2& pixel);

/// Half-width of the dense trajectory band in the ground truth.
inline constexpr double kTrajectoryHalfWidthM = 1.0;

BinaryGrid rasterize_bev_gt(const TownMap& town, const Route& route, const EgoPose& ego,
                            const GridSpec& grid);

/// Route waypoints as radius-1-cell discs. An empty route yields zeros.
BinaryGrid rasterize_sparse_trajectory(const Route& route, const EgoPose& ego, const GridSpec& grid);

/// World position of a cell centre for the given ego.
Point2 cell_to_world(const GridSpec& grid, const EgoPose& ego, int row, int col);

}  // namespace bevcvt::world

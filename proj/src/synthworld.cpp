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

#include "synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <queue>
#include <random>

#include "error.hpp"

namespace bevcvt::world {
namespace {

// Portable uniform draw; std distributions are not specified bit-exactly.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform(rng, 0.0, static_cast<double>(n)));
}

Polygon rectangle(const Point2& a, const Point2& b, double half_width) {
  const Point2 dir = (b - a).normalized();
  const Point2 n(-dir.y(), dir.x());
  return {a - n * half_width, b - n * half_width, b + n * half_width, a + n * half_width};
}

bool connected(int n_nodes, const std::vector<std::pair<int, int>>& edges, const std::vector<bool>& alive) {
  std::vector<std::vector<int>> adj(n_nodes);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (!alive[i]) continue;
    adj[edges[i].first].push_back(edges[i].second);
    adj[edges[i].second].push_back(edges[i].first);
  }
  std::vector<bool> seen(n_nodes, false);
  std::vector<int> stack{0};
  seen[0] = true;
  int count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = true;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == n_nodes;
}

Point2 point_at(const std::vector<Point2>& line, const std::vector<double>& cumulative, double s) {
  if (line.size() == 1) return line.front();
  s = std::clamp(s, 0.0, cumulative.back());
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
  std::size_t i = static_cast<std::size_t>(std::distance(cumulative.begin(), it));
  i = std::clamp<std::size_t>(i, 1, line.size() - 1);
  const double seg = cumulative[i] - cumulative[i - 1];
  const double t = seg > 0.0 ? (s - cumulative[i - 1]) / seg : 0.0;
  return line[i - 1] + t * (line[i] - line[i - 1]);
}

std::vector<double> cumulative_length(const std::vector<Point2>& line) {
  std::vector<double> out(line.size(), 0.0);
  for (std::size_t i = 1; i < line.size(); ++i) out[i] = out[i - 1] + (line[i] - line[i - 1]).norm();
  return out;
}

}  // namespace

Rgb palette(SemanticClass c) {
  switch (c) {
    case SemanticClass::Road: return {128, 64, 128};
    case SemanticClass::Lane: return {255, 255, 255};
    case SemanticClass::Offroad: return {107, 142, 35};
    case SemanticClass::Sky: return {70, 130, 180};
  }
  return {0, 0, 0};
}

std::vector<std::vector<int>> RoadGraph::adjacency() const {
  std::vector<std::vector<int>> adj(nodes.size());
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  return adj;
}

int RoadGraph::degree(int node) const {
  return static_cast<int>(std::count_if(edges.begin(), edges.end(), [node](const auto& e) {
    return e.first == node || e.second == node;
  }));
}

bool point_in_polygon(const Point2& p, const Polygon& poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = poly[i];
    const Point2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

double distance_to_segment(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double distance_to_polyline(const Point2& p, const std::vector<Point2>& line) {
  if (line.empty()) return std::numeric_limits<double>::infinity();
  if (line.size() == 1) return (p - line.front()).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < line.size(); ++i) best = std::min(best, distance_to_segment(p, line[i - 1], line[i]));
  return best;
}

TownMap::TownMap(std::uint64_t seed, std::vector<Polygon> roads, std::vector<Polyline> lanes, RoadGraph graph)
    : seed_(seed), roads_(std::move(roads)), lanes_(std::move(lanes)), graph_(std::move(graph)) {
  build_index();
}

void TownMap::build_index() {
  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
  double max_x = -min_x, max_y = -min_x;
  auto grow = [&](const Point2& p, double pad) {
    min_x = std::min(min_x, p.x() - pad);
    min_y = std::min(min_y, p.y() - pad);
    max_x = std::max(max_x, p.x() + pad);
    max_y = std::max(max_y, p.y() + pad);
  };
  for (const auto& poly : roads_) for (const auto& p : poly) grow(p, 0.0);
  for (const auto& lane : lanes_) for (const auto& p : lane.points) grow(p, lane.width / 2);
  for (const auto& p : graph_.nodes) grow(p, 0.0);
  if (!std::isfinite(min_x)) {
    extent_ = Eigen::Vector4d::Zero();
    buckets_x_ = buckets_y_ = 0;
    return;
  }
  extent_ = Eigen::Vector4d(min_x, min_y, max_x, max_y);
  buckets_x_ = std::max(1, static_cast<int>(std::ceil((max_x - min_x) / bucket_m_)));
  buckets_y_ = std::max(1, static_cast<int>(std::ceil((max_y - min_y) / bucket_m_)));
  road_buckets_.assign(static_cast<std::size_t>(buckets_x_) * buckets_y_, {});
  lane_buckets_.assign(road_buckets_.size(), {});

  auto insert_box = [&](std::vector<std::vector<int>>& buckets, int id, double x0, double y0, double x1, double y1) {
    const int bx0 = std::clamp(static_cast<int>(std::floor((x0 - min_x) / bucket_m_)), 0, buckets_x_ - 1);
    const int by0 = std::clamp(static_cast<int>(std::floor((y0 - min_y) / bucket_m_)), 0, buckets_y_ - 1);
    const int bx1 = std::clamp(static_cast<int>(std::floor((x1 - min_x) / bucket_m_)), 0, buckets_x_ - 1);
    const int by1 = std::clamp(static_cast<int>(std::floor((y1 - min_y) / bucket_m_)), 0, buckets_y_ - 1);
    for (int by = by0; by <= by1; ++by) {
      for (int bx = bx0; bx <= bx1; ++bx) {
        auto& b = buckets[bucket_of(bx, by)];
        if (b.empty() || b.back() != id) b.push_back(id);
      }
    }
  };
  for (int i = 0; i < static_cast<int>(roads_.size()); ++i) {
    double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
    for (const auto& p : roads_[i]) {
      x0 = std::min(x0, p.x()), y0 = std::min(y0, p.y());
      x1 = std::max(x1, p.x()), y1 = std::max(y1, p.y());
    }
    insert_box(road_buckets_, i, x0, y0, x1, y1);
  }
  for (int i = 0; i < static_cast<int>(lanes_.size()); ++i) {
    const double hw = lanes_[i].width / 2;
    for (std::size_t k = 1; k < lanes_[i].points.size(); ++k) {
      const Point2& a = lanes_[i].points[k - 1];
      const Point2& b = lanes_[i].points[k];
      insert_box(lane_buckets_, i, std::min(a.x(), b.x()) - hw, std::min(a.y(), b.y()) - hw,
                 std::max(a.x(), b.x()) + hw, std::max(a.y(), b.y()) + hw);
    }
    if (lanes_[i].points.size() == 1) {
      const Point2& a = lanes_[i].points[0];
      insert_box(lane_buckets_, i, a.x() - hw, a.y() - hw, a.x() + hw, a.y() + hw);
    }
  }
}

std::optional<std::size_t> TownMap::bucket_at(const Point2& p) const {
  if (buckets_x_ == 0) return std::nullopt;
  if (p.x() < extent_[0] || p.y() < extent_[1] || p.x() > extent_[2] || p.y() > extent_[3]) return std::nullopt;
  const int bx = std::min(static_cast<int>((p.x() - extent_[0]) / bucket_m_), buckets_x_ - 1);
  const int by = std::min(static_cast<int>((p.y() - extent_[1]) / bucket_m_), buckets_y_ - 1);
  return bucket_of(bx, by);
}

bool TownMap::on_road(const Point2& p) const {
  const auto b = bucket_at(p);
  if (!b) return false;
  for (int id : road_buckets_[*b]) {
    if (point_in_polygon(p, roads_[id])) return true;
  }
  return false;
}

bool TownMap::on_lane(const Point2& p) const {
  const auto b = bucket_at(p);
  if (!b) return false;
  for (int id : lane_buckets_[*b]) {
    if (distance_to_polyline(p, lanes_[id].points) <= lanes_[id].width / 2) return true;
  }
  return false;
}

SemanticClass TownMap::classify(const Point2& p) const {
  if (on_lane(p)) return SemanticClass::Lane;
  if (on_road(p)) return SemanticClass::Road;
  return SemanticClass::Offroad;
}

TownMap generate_town(std::uint64_t seed, const TownSpec& spec) {
  if (spec.blocks_x < 2 || spec.blocks_y < 2) fail(ErrorCode::InvalidArgument, "generate_town: need at least 2x2 blocks");
  if (!(spec.block_min_m > 0.0) || spec.block_max_m < spec.block_min_m) {
    fail(ErrorCode::InvalidArgument, "generate_town: invalid block size range");
  }
  if (!(spec.road_width_min_m > 0.0) || spec.road_width_max_m < spec.road_width_min_m ||
      spec.road_width_max_m >= spec.block_min_m / 2) {
    fail(ErrorCode::InvalidArgument, "generate_town: invalid road width range");
  }
  if (!(spec.lane_width_m > 0.0) || spec.lane_inset_m * 2 >= spec.road_width_min_m) {
    fail(ErrorCode::InvalidArgument, "generate_town: lane markings do not fit the road");
  }
  if (spec.edge_removal_fraction < 0.0 || spec.edge_removal_fraction >= 1.0) {
    fail(ErrorCode::InvalidArgument, "generate_town: edge_removal_fraction must lie in [0, 1)");
  }

  std::mt19937_64 rng(seed);
  const int nx = spec.blocks_x + 1;
  const int ny = spec.blocks_y + 1;
  std::vector<double> xs{0.0}, ys{0.0};
  for (int i = 0; i < spec.blocks_x; ++i) xs.push_back(xs.back() + uniform(rng, spec.block_min_m, spec.block_max_m));
  for (int i = 0; i < spec.blocks_y; ++i) ys.push_back(ys.back() + uniform(rng, spec.block_min_m, spec.block_max_m));
  const double road_width = uniform(rng, spec.road_width_min_m, spec.road_width_max_m);
  const double hw = road_width / 2;

  RoadGraph graph;
  auto id = [nx](int ix, int iy) { return iy * nx + ix; };
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) graph.nodes.emplace_back(xs[ix], ys[iy]);
  std::vector<std::pair<int, int>> all_edges;
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix + 1 < nx; ++ix) all_edges.emplace_back(id(ix, iy), id(ix + 1, iy));
  for (int iy = 0; iy + 1 < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) all_edges.emplace_back(id(ix, iy), id(ix, iy + 1));

  // One interior crossroads and one boundary T-junction are kept intact.
  const int cross = id(1 + static_cast<int>(uniform_index(rng, spec.blocks_x - 1)),
                       1 + static_cast<int>(uniform_index(rng, spec.blocks_y - 1)));
  const int tee = id(0, 1 + static_cast<int>(uniform_index(rng, spec.blocks_y - 1)));
  std::vector<std::size_t> order(all_edges.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

  std::vector<bool> alive(all_edges.size(), true);
  std::vector<int> degree(graph.nodes.size(), 0);
  for (const auto& [a, b] : all_edges) ++degree[a], ++degree[b];
  const auto target = static_cast<std::size_t>(std::lround(spec.edge_removal_fraction * all_edges.size()));
  std::size_t removed = 0;
  for (std::size_t e : order) {
    if (removed >= target) break;
    const auto [a, b] = all_edges[e];
    if (a == cross || b == cross || a == tee || b == tee) continue;
    if (degree[a] <= 2 || degree[b] <= 2) continue;
    alive[e] = false;
    if (!connected(static_cast<int>(graph.nodes.size()), all_edges, alive)) {
      alive[e] = true;
      continue;
    }
    --degree[a], --degree[b];
    ++removed;
  }
  for (std::size_t i = 0; i < all_edges.size(); ++i)
    if (alive[i]) graph.edges.push_back(all_edges[i]);

  std::vector<Polygon> roads;
  std::vector<Polyline> lanes;
  for (const auto& p : graph.nodes) {
    roads.push_back({p + Point2(-hw, -hw), p + Point2(hw, -hw), p + Point2(hw, hw), p + Point2(-hw, hw)});
  }
  const double offset = hw - spec.lane_inset_m;
  for (const auto& [ia, ib] : graph.edges) {
    const Point2& a = graph.nodes[ia];
    const Point2& b = graph.nodes[ib];
    roads.push_back(rectangle(a, b, hw));
    const Point2 dir = (b - a).normalized();
    const Point2 n(-dir.y(), dir.x());
    const Point2 start = a + dir * hw;
    const Point2 end = b - dir * hw;
    lanes.push_back({{start + n * offset, end + n * offset}, spec.lane_width_m});
    lanes.push_back({{start - n * offset, end - n * offset}, spec.lane_width_m});
    const double len = (end - start).norm();
    for (double s = spec.dash_length_m; s + spec.dash_length_m <= len - spec.dash_length_m;
         s += 2 * spec.dash_length_m) {
      lanes.push_back({{start + dir * s, start + dir * (s + spec.dash_length_m)}, spec.lane_width_m});
    }
  }
  return TownMap(seed, std::move(roads), std::move(lanes), std::move(graph));
}

nlohmann::json town_to_json(const TownMap& town) {
  using nlohmann::json;
  auto pt = [](const Point2& p) { return json::array({p.x(), p.y()}); };
  json roads = json::array();
  for (const auto& poly : town.road_polygons()) {
    json ring = json::array();
    for (const auto& p : poly) ring.push_back(pt(p));
    roads.push_back(std::move(ring));
  }
  json lanes = json::array();
  for (const auto& lane : town.lane_polylines()) {
    json pts = json::array();
    for (const auto& p : lane.points) pts.push_back(pt(p));
    lanes.push_back({{"width", lane.width}, {"points", std::move(pts)}});
  }
  json nodes = json::array();
  for (const auto& p : town.graph().nodes) nodes.push_back(pt(p));
  json edges = json::array();
  for (const auto& [a, b] : town.graph().edges) edges.push_back(json::array({a, b}));
  const auto& e = town.extent();
  return json{{"seed", town.seed()},
              {"extent", json::array({e[0], e[1], e[2], e[3]})},
              {"road_polygons", std::move(roads)},
              {"lane_polylines", std::move(lanes)},
              {"graph", {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}}}};
}

TownMap town_from_json(const nlohmann::json& j) {
  try {
    auto pt = [](const nlohmann::json& v) { return Point2(v.at(0).get<double>(), v.at(1).get<double>()); };
    std::vector<Polygon> roads;
    for (const auto& ring : j.at("road_polygons")) {
      Polygon poly;
      for (const auto& p : ring) poly.push_back(pt(p));
      roads.push_back(std::move(poly));
    }
    std::vector<Polyline> lanes;
    for (const auto& l : j.at("lane_polylines")) {
      Polyline line;
      line.width = l.at("width").get<double>();
      for (const auto& p : l.at("points")) line.points.push_back(pt(p));
      lanes.push_back(std::move(line));
    }
    RoadGraph graph;
    for (const auto& p : j.at("graph").at("nodes")) graph.nodes.push_back(pt(p));
    for (const auto& e : j.at("graph").at("edges")) graph.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    return TownMap(j.at("seed").get<std::uint64_t>(), std::move(roads), std::move(lanes), std::move(graph));
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::Format, std::string("town_from_json: ") + ex.what());
  }
}

double Route::length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < corners.size(); ++i) total += (corners[i] - corners[i - 1]).norm();
  return total;
}

Route plan_route(const TownMap& town, int start, int goal, double spacing) {
  const auto& graph = town.graph();
  const int n = static_cast<int>(graph.nodes.size());
  if (start < 0 || start >= n || goal < 0 || goal >= n) fail(ErrorCode::InvalidArgument, "plan_route: node out of range");
  if (!(spacing > 0.0)) fail(ErrorCode::InvalidArgument, "plan_route: spacing must be positive");

  const auto adj = graph.adjacency();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> prev(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[start] = 0.0;
  queue.emplace(0.0, start);
  while (!queue.empty()) {
    const auto [d, v] = queue.top();
    queue.pop();
    if (d > dist[v]) continue;
    if (v == goal) break;
    for (int w : adj[v]) {
      const double nd = d + (graph.nodes[w] - graph.nodes[v]).norm();
      if (nd < dist[w]) {
        dist[w] = nd;
        prev[w] = v;
        queue.emplace(nd, w);
      }
    }
  }
  if (!std::isfinite(dist[goal])) {
    fail(ErrorCode::NoRoute, "plan_route: node " + std::to_string(goal) + " unreachable from " + std::to_string(start));
  }

  Route route;
  route.spacing = spacing;
  for (int v = goal; v != -1; v = prev[v]) route.node_path.push_back(v);
  std::reverse(route.node_path.begin(), route.node_path.end());
  for (int v : route.node_path) route.corners.push_back(graph.nodes[v]);
  route.waypoints.push_back(route.corners.front());
  for (std::size_t i = 1; i < route.corners.size(); ++i) {
    const Point2& a = route.corners[i - 1];
    const Point2& b = route.corners[i];
    const double len = (b - a).norm();
    const int steps = std::max(1, static_cast<int>(std::lround(len / spacing)));
    for (int k = 1; k <= steps; ++k) route.waypoints.push_back(a + (b - a) * (static_cast<double>(k) / steps));
  }
  return route;
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  a -= std::numbers::pi;
  return a >= std::numbers::pi ? a - two_pi : a;
}

EgoPose pose_along_route(const Route& route, double s, int frame) {
  if (route.corners.empty()) fail(ErrorCode::InvalidArgument, "pose_along_route: empty route");
  const auto cum = cumulative_length(route.corners);
  EgoPose pose;
  pose.frame = frame;
  pose.position = point_at(route.corners, cum, s);
  const Point2 ahead = point_at(route.corners, cum, s + 1.5);
  const Point2 behind = point_at(route.corners, cum, s - 1.5);
  const Point2 d = ahead - behind;
  pose.heading = d.squaredNorm() > 0.0 ? wrap_angle(std::atan2(d.y(), d.x())) : 0.0;
  return pose;
}

Rig default_rig(int n_views, int width, int height, double fov_deg) {
  if (n_views != 3 && n_views != 4) fail(ErrorCode::InvalidArgument, "default_rig: n_views must be 3 or 4");
  using geometry::Angles;
  using geometry::Vec3;
  Rig rig;
  rig.name = n_views == 4 ? "default4" : "default3";
  constexpr double height_m = 1.8;
  constexpr double pitch = -5.0;
  rig.cameras.push_back(geometry::make_camera("left", width, height, fov_deg, Vec3(0.9, 0.5, height_m), Angles{pitch, 55.0, 0.0}));
  rig.cameras.push_back(geometry::make_camera("center", width, height, fov_deg, Vec3(1.0, 0.0, height_m), Angles{pitch, 0.0, 0.0}));
  rig.cameras.push_back(geometry::make_camera("right", width, height, fov_deg, Vec3(0.9, -0.5, height_m), Angles{pitch, -55.0, 0.0}));
  if (n_views == 4) {
    rig.cameras.push_back(geometry::make_camera("rear", width, height, fov_deg, Vec3(-1.2, 0.0, height_m), Angles{pitch, 180.0, 0.0}));
  }
  return rig;
}

SemanticClass classify_pixel(const TownMap& town, const geometry::CameraModel& world_cam, const geometry::Vec2& pixel) {
  const auto hit = geometry::ray_ground_intersection(pixel, world_cam);
  if (!hit) return SemanticClass::Sky;
  return town.classify(hit->head<2>());
}

Image render_camera_view(const TownMap& town, const geometry::CameraModel& mount, const EgoPose& ego) {
  const auto cam = geometry::mounted_at(mount, ego.position.x(), ego.position.y(), ego.heading);
  Image img(cam.width, cam.height, 3);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Rgb c = palette(classify_pixel(town, cam, geometry::Vec2(x + 0.5, y + 0.5)));
      img.at(x, y, 0) = c.r;
      img.at(x, y, 1) = c.g;
      img.at(x, y, 2) = c.b;
    }
  }
  return img;
}

Point2 cell_to_world(const GridSpec& grid, const EgoPose& ego, int row, int col) {
  const auto [fwd, left] = grid.cell_to_ego(row, col);
  const double c = std::cos(ego.heading), s = std::sin(ego.heading);
  return ego.position + Point2(c * fwd - s * left, s * fwd + c * left);
}

BinaryGrid rasterize_bev_gt(const TownMap& town, const Route& route, const EgoPose& ego, const GridSpec& grid) {
  BinaryGrid out(3, grid.rows, grid.cols);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const Point2 p = cell_to_world(grid, ego, r, c);
      const bool road = town.on_road(p);
      out.at(kRoad, r, c) = road;
      out.at(kLane, r, c) = town.on_lane(p);
      out.at(kTrajectory, r, c) = road && distance_to_polyline(p, route.corners) <= kTrajectoryHalfWidthM;
    }
  }
  return out;
}

BinaryGrid rasterize_sparse_trajectory(const Route& route, const EgoPose& ego, const GridSpec& grid) {
  BinaryGrid out(1, grid.rows, grid.cols);
  const double c = std::cos(ego.heading), s = std::sin(ego.heading);
  for (const auto& wp : route.waypoints) {
    const Point2 rel = wp - ego.position;
    const double fwd = c * rel.x() + s * rel.y();
    const double left = -s * rel.x() + c * rel.y();
    const auto cell = grid.ego_to_cell(fwd, left);
    if (!cell) continue;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr * dr + dc * dc > 1) continue;
        const int r = cell->first + dr, col = cell->second + dc;
        if (r >= 0 && r < grid.rows && col >= 0 && col < grid.cols) out.at(0, r, col) = 1;
      }
    }
  }
  return out;
}

}  // namespace bevcvt::world

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

#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "error.hpp"

namespace bevcvt::dataset {
namespace {

using nlohmann::json;

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    fail(ErrorCode::Format, path.string() + ": " + ex.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json matrix_json(const auto& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Image grid_to_image(const BinaryGrid& g) {
  Image img(g.cols, g.rows, g.channels);
  for (int c = 0; c < g.channels; ++c)
    for (int r = 0; r < g.rows; ++r)
      for (int x = 0; x < g.cols; ++x) img.at(x, r, c) = g.at(c, r, x) ? 255 : 0;
  return img;
}

BinaryGrid image_to_grid(const Image& img, const fs::path& source) {
  BinaryGrid g(img.channels, img.height, img.width);
  for (int c = 0; c < img.channels; ++c) {
    for (int r = 0; r < img.height; ++r) {
      for (int x = 0; x < img.width; ++x) {
        const auto v = img.at(x, r, c);
        if (v != 0 && v != 255) fail(ErrorCode::Format, source.string() + ": raster is not binary (0/255)");
        g.at(c, r, x) = v ? 1 : 0;
      }
    }
  }
  return g;
}

namespace {

json meta_to_json(const Sample& s) {
  json cams = json::array();
  for (const auto& v : s.views) cams.push_back(camera_to_json(v.camera));
  return json{{"format_version", kFormatVersion},
              {"town", s.id.town},
              {"route", s.id.route},
              {"frame", s.id.frame},
              {"rig", s.rig},
              {"grid", grid_to_json(s.grid)},
              {"ego", {{"x", s.ego.position.x()}, {"y", s.ego.position.y()}, {"heading", s.ego.heading}, {"frame", s.ego.frame}}},
              {"route_s", s.route_s},
              {"cameras", std::move(cams)}};
}

std::string with_thousands(std::size_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

std::string split_title(const std::string& split) {
  if (split == "train") return "Training";
  if (split == "val") return "Validation";
  return "Test";
}

void prepare_root(const fs::path& root, bool force) {
  if (is_empty_dir(root)) {
    fs::create_directories(root);
    return;
  }
  if (!force) fail(ErrorCode::InvalidArgument, "output root " + root.string() + " is not empty (use --force)");
  if (!fs::exists(root / "manifest.json")) {
    fail(ErrorCode::InvalidArgument, "refusing to overwrite " + root.string() + ": it does not hold a dataset");
  }
  fs::remove_all(root);
  fs::create_directories(root);
}

}  // namespace

std::string SampleId::relative_path() const {
  std::ostringstream os;
  os << town << '/' << route << '/' << std::setw(6) << std::setfill('0') << frame;
  return os.str();
}

SampleId SampleId::parse(const std::string& text) {
  const auto a = text.find('/');
  const auto b = text.find('/', a == std::string::npos ? a : a + 1);
  if (a == std::string::npos || b == std::string::npos) {
    fail(ErrorCode::InvalidArgument, "sample id must be <town>/<route>/<frame>: " + text);
  }
  SampleId id{text.substr(0, a), text.substr(a + 1, b - a - 1), 0};
  try {
    id.frame = std::stoi(text.substr(b + 1));
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidArgument, "bad frame index in sample id: " + text);
  }
  return id;
}

json camera_to_json(const geometry::CameraModel& cam) {
  return json{{"name", cam.name},
              {"width", cam.width},
              {"height", cam.height},
              {"fov_deg", cam.fov_deg},
              {"position", {cam.position.x(), cam.position.y(), cam.position.z()}},
              {"rotation", {cam.angles.pitch_deg, cam.angles.yaw_deg, cam.angles.roll_deg}},
              {"K", matrix_json(cam.intrinsics.matrix())},
              {"E", matrix_json(cam.extrinsics.matrix())}};
}

geometry::CameraModel camera_from_json(const json& j) {
  try {
    const auto& p = j.at("position");
    const auto& r = j.at("rotation");
    return geometry::make_camera(j.at("name").get<std::string>(), j.at("width").get<int>(), j.at("height").get<int>(),
                                 j.at("fov_deg").get<double>(),
                                 geometry::Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()),
                                 geometry::Angles{r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()});
  } catch (const json::exception& ex) {
    fail(ErrorCode::Format, std::string("camera record: ") + ex.what());
  }
}

json grid_to_json(const GridSpec& g) {
  return json{{"rows", g.rows}, {"cols", g.cols}, {"cell_m", g.cell_m}, {"anchor_row", g.anchor_row}, {"anchor_col", g.anchor_col}};
}

GridSpec grid_from_json(const json& j) {
  GridSpec g;
  g.rows = j.value("rows", g.rows);
  g.cols = j.value("cols", g.cols);
  g.cell_m = j.value("cell_m", g.cell_m);
  g.anchor_row = j.value("anchor_row", g.anchor_row);
  g.anchor_col = j.value("anchor_col", g.anchor_col);
  if (g.rows <= 0 || g.cols <= 0 || !(g.cell_m > 0.0)) fail(ErrorCode::Config, "grid: non-positive dimensions");
  return g;
}

void validate(const Sample& s) {
  if (s.views.empty()) fail(ErrorCode::Shape, s.id.relative_path() + ": sample has no views");
  const int w = s.views.front().camera.width, h = s.views.front().camera.height;
  for (const auto& v : s.views) {
    if (v.camera.width != w || v.camera.height != h) fail(ErrorCode::Shape, s.id.relative_path() + ": mixed view resolutions");
    if (v.image.width != w || v.image.height != h || v.image.channels != 3) {
      fail(ErrorCode::Shape, s.id.relative_path() + ": view " + v.camera.name + " does not match its calibration");
    }
  }
  if (s.trajectory.channels != 1 || s.trajectory.rows != s.grid.rows || s.trajectory.cols != s.grid.cols) {
    fail(ErrorCode::Shape, s.id.relative_path() + ": trajectory raster does not match the grid");
  }
  if (s.bev_gt.channels != 3 || s.bev_gt.rows != s.grid.rows || s.bev_gt.cols != s.grid.cols) {
    fail(ErrorCode::Shape, s.id.relative_path() + ": bev_gt does not match the grid");
  }
}

SamplePaths write_sample(const Sample& s, const fs::path& root) {
  validate(s);
  SamplePaths paths;
  paths.dir = root / s.id.relative_path();
  fs::create_directories(paths.dir);
  for (const auto& v : s.views) {
    paths.views.push_back(paths.dir / (v.camera.name + ".png"));
    write_png(paths.views.back(), v.image);
  }
  paths.trajectory = paths.dir / "trajectory.png";
  write_png(paths.trajectory, grid_to_image(s.trajectory));
  paths.bev_gt = paths.dir / "bev_gt.png";
  write_png(paths.bev_gt, grid_to_image(s.bev_gt));
  paths.meta = paths.dir / "meta.json";
  write_json(paths.meta, meta_to_json(s));
  return paths;
}

Sample read_sample(const fs::path& dir, std::optional<int> expected_views) {
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) fail(ErrorCode::NotFound, "missing meta record: " + meta_path.string());
  const json meta = read_json(meta_path);
  Sample s;
  try {
    s.id = SampleId{meta.at("town").get<std::string>(), meta.at("route").get<std::string>(), meta.at("frame").get<int>()};
    s.rig = meta.at("rig").get<std::string>();
    s.grid = grid_from_json(meta.at("grid"));
    const auto& ego = meta.at("ego");
    s.ego.position = world::Point2(ego.at("x").get<double>(), ego.at("y").get<double>());
    s.ego.heading = ego.at("heading").get<double>();
    s.ego.frame = ego.at("frame").get<int>();
    s.route_s = meta.value("route_s", 0.0);
    for (const auto& cj : meta.at("cameras")) s.views.push_back(View{camera_from_json(cj), {}});
  } catch (const json::exception& ex) {
    fail(ErrorCode::Format, meta_path.string() + ": " + ex.what());
  }
  if (expected_views && static_cast<int>(s.views.size()) != *expected_views) {
    fail(ErrorCode::Shape, meta_path.string() + ": declares " + std::to_string(s.views.size()) + " views, rig expects " +
                               std::to_string(*expected_views));
  }
  for (auto& v : s.views) {
    const fs::path p = dir / (v.camera.name + ".png");
    if (!fs::exists(p)) fail(ErrorCode::NotFound, "missing view file: " + p.string());
    v.image = read_png(p);
    if (v.image.channels != 3 || v.image.width != v.camera.width || v.image.height != v.camera.height) {
      fail(ErrorCode::Shape, p.string() + ": image dimensions do not match calibration");
    }
  }
  const fs::path traj = dir / "trajectory.png";
  const fs::path gt = dir / "bev_gt.png";
  for (const auto& p : {traj, gt})
    if (!fs::exists(p)) fail(ErrorCode::NotFound, "missing raster file: " + p.string());
  const Image traj_img = read_png(traj);
  if (traj_img.channels != 1) fail(ErrorCode::Format, traj.string() + ": expected a single-channel raster");
  const Image gt_img = read_png(gt);
  if (gt_img.channels != 3) {
    fail(ErrorCode::Format, gt.string() + ": unknown channel count " + std::to_string(gt_img.channels));
  }
  s.trajectory = image_to_grid(traj_img, traj);
  s.bev_gt = image_to_grid(gt_img, gt);
  if (s.trajectory.rows != s.grid.rows || s.trajectory.cols != s.grid.cols) {
    fail(ErrorCode::Shape, traj.string() + ": raster size does not match the grid");
  }
  if (s.bev_gt.rows != s.grid.rows || s.bev_gt.cols != s.grid.cols) {
    fail(ErrorCode::Shape, gt.string() + ": raster size does not match the grid");
  }
  return s;
}

Sample drop_rear_view(const Sample& sample) {
  const auto it = std::find_if(sample.views.begin(), sample.views.end(), [](const View& v) { return v.camera.name == "rear"; });
  if (it == sample.views.end()) fail(ErrorCode::InvalidArgument, sample.id.relative_path() + ": no rear view to drop");
  Sample out = sample;
  out.views.erase(out.views.begin() + std::distance(sample.views.begin(), it));
  return out;
}

const std::vector<RouteKey>& SplitManifest::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  fail(ErrorCode::InvalidArgument, "unknown split: " + name);
}

std::string route_name(int index) {
  std::ostringstream os;
  os << "route" << std::setw(2) << std::setfill('0') << index;
  return os.str();
}

SplitManifest make_splits(const std::vector<std::string>& towns, int routes_per_town, const std::string& val_route) {
  if (towns.size() < 2) fail(ErrorCode::InvalidArgument, "make_splits: need at least two towns");
  if (routes_per_town < 2) fail(ErrorCode::InvalidArgument, "make_splits: need at least two routes per town");
  SplitManifest m;
  bool found = false;
  for (int r = 0; r < routes_per_town; ++r) {
    const std::string name = route_name(r);
    if (name == val_route) {
      m.val.emplace_back(towns[0], name);
      found = true;
    } else {
      m.train.emplace_back(towns[0], name);
    }
  }
  if (!found) fail(ErrorCode::InvalidArgument, "make_splits: " + val_route + " is not a route of " + towns[0]);
  for (std::size_t t = 1; t < towns.size(); ++t)
    for (int r = 0; r < routes_per_town; ++r) m.test.emplace_back(towns[t], route_name(r));
  return m;
}

void check_disjoint(const SplitManifest& m) {
  std::set<RouteKey> seen;
  for (const auto* split : {&m.train, &m.val, &m.test}) {
    for (const auto& key : *split) {
      if (!seen.insert(key).second) fail(ErrorCode::Format, "manifest lists " + key.first + "/" + key.second + " twice");
    }
  }
  std::set<std::string> train_towns;
  for (const auto& [town, route] : m.train) train_towns.insert(town);
  for (const auto& [town, route] : m.test) {
    if (train_towns.count(town)) fail(ErrorCode::Format, "town " + town + " appears in both train and test");
  }
}

json manifest_to_json(const SplitManifest& m) {
  auto keys = [](const std::vector<RouteKey>& v) {
    json a = json::array();
    for (const auto& [t, r] : v) a.push_back(json::array({t, r}));
    return a;
  };
  json cams = json::array();
  for (const auto& c : m.cameras) cams.push_back(camera_to_json(c));
  return json{{"format_version", kFormatVersion},
              {"grid", grid_to_json(m.grid)},
              {"rig", {{"name", m.rig_name}, {"n_views", m.n_views}, {"cameras", std::move(cams)}}},
              {"train", keys(m.train)},
              {"val", keys(m.val)},
              {"test", keys(m.test)}};
}

SplitManifest manifest_from_json(const json& j) {
  SplitManifest m;
  try {
    m.grid = grid_from_json(j.at("grid"));
    m.rig_name = j.at("rig").at("name").get<std::string>();
    m.n_views = j.at("rig").at("n_views").get<int>();
    for (const auto& c : j.at("rig").at("cameras")) m.cameras.push_back(camera_from_json(c));
    auto keys = [](const json& a) {
      std::vector<RouteKey> v;
      for (const auto& k : a) v.emplace_back(k.at(0).get<std::string>(), k.at(1).get<std::string>());
      return v;
    };
    m.train = keys(j.at("train"));
    m.val = keys(j.at("val"));
    m.test = keys(j.at("test"));
  } catch (const json::exception& ex) {
    fail(ErrorCode::Format, std::string("manifest: ") + ex.what());
  }
  return m;
}

void write_manifest(const SplitManifest& m, const fs::path& root) { write_json(root / "manifest.json", manifest_to_json(m)); }

SplitManifest read_manifest(const fs::path& root) {
  const fs::path p = root / "manifest.json";
  if (!fs::exists(p)) fail(ErrorCode::NotFound, "no manifest.json under " + root.string());
  return manifest_from_json(read_json(p));
}

std::vector<fs::path> list_split(const fs::path& root, const SplitManifest& m, const std::string& split) {
  std::vector<fs::path> out;
  for (const auto& [town, route] : m.split(split)) {
    const fs::path dir = root / town / route;
    if (!fs::is_directory(dir)) fail(ErrorCode::NotFound, "split " + split + ": missing route directory " + dir.string());
    std::vector<fs::path> frames;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory()) frames.push_back(e.path());
    std::sort(frames.begin(), frames.end());
    out.insert(out.end(), frames.begin(), frames.end());
  }
  return out;
}

BatchLoader::BatchLoader(std::vector<fs::path> frames, int batch_size, bool shuffle, std::uint64_t seed,
                         std::optional<int> expected_views, bool drop_rear)
    : frames_(std::move(frames)),
      batch_size_(batch_size),
      shuffle_(shuffle),
      seed_(seed),
      expected_views_(expected_views),
      drop_rear_(drop_rear) {
  if (batch_size_ <= 0) fail(ErrorCode::Config, "batch size must be positive");
  start_epoch(0);
}

void BatchLoader::start_epoch(int epoch) {
  order_ = frames_;
  cursor_ = 0;
  if (!shuffle_) return;
  std::mt19937_64 rng(seed_ + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch + 1));
  for (std::size_t i = order_.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(static_cast<double>(rng() >> 11) * 0x1.0p-53 * static_cast<double>(i));
    std::swap(order_[i - 1], order_[j]);
  }
}

std::vector<Sample> BatchLoader::next() {
  std::vector<Sample> batch;
  while (cursor_ < order_.size() && static_cast<int>(batch.size()) < batch_size_) {
    Sample s = read_sample(order_[cursor_++], expected_views_);
    batch.push_back(drop_rear_ ? drop_rear_view(s) : std::move(s));
  }
  return batch;
}

std::size_t BatchLoader::batches_per_epoch() const {
  return (frames_.size() + static_cast<std::size_t>(batch_size_) - 1) / static_cast<std::size_t>(batch_size_);
}

GenConfig gen_config_from_json(const json& j) {
  GenConfig c;
  try {
    if (j.contains("towns")) {
      c.towns.clear();
      for (const auto& t : j.at("towns")) c.towns.push_back({t.at("name").get<std::string>(), t.at("seed").get<std::uint64_t>()});
    }
    if (j.contains("town_spec")) {
      const auto& s = j.at("town_spec");
      auto& t = c.town_spec;
      t.blocks_x = s.value("blocks_x", t.blocks_x);
      t.blocks_y = s.value("blocks_y", t.blocks_y);
      t.block_min_m = s.value("block_min_m", t.block_min_m);
      t.block_max_m = s.value("block_max_m", t.block_max_m);
      t.road_width_min_m = s.value("road_width_min_m", t.road_width_min_m);
      t.road_width_max_m = s.value("road_width_max_m", t.road_width_max_m);
      t.lane_width_m = s.value("lane_width_m", t.lane_width_m);
      t.lane_inset_m = s.value("lane_inset_m", t.lane_inset_m);
      t.dash_length_m = s.value("dash_length_m", t.dash_length_m);
      t.edge_removal_fraction = s.value("edge_removal_fraction", t.edge_removal_fraction);
    }
    c.routes_per_town = j.value("routes_per_town", c.routes_per_town);
    c.val_route = j.value("val_route", c.val_route);
    c.frames_per_route = j.value("frames_per_route", c.frames_per_route);
    c.train_frames = j.value("train_frames", c.train_frames);
    c.val_frames = j.value("val_frames", c.val_frames);
    c.test_frames = j.value("test_frames", c.test_frames);
    c.n_views = j.value("n_views", c.n_views);
    c.image_width = j.value("image_width", c.image_width);
    c.image_height = j.value("image_height", c.image_height);
    c.fov_deg = j.value("fov_deg", c.fov_deg);
    if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
    c.route_spacing_m = j.value("route_spacing_m", c.route_spacing_m);
    c.min_route_length_m = j.value("min_route_length_m", c.min_route_length_m);
  } catch (const json::exception& ex) {
    fail(ErrorCode::Config, std::string("gen-data config: ") + ex.what());
  }
  if (c.routes_per_town < 2) fail(ErrorCode::Config, "routes_per_town must be at least 2");
  if (c.towns.size() < 2) fail(ErrorCode::Config, "at least two towns are required");
  if (c.frames_per_route < 0 || c.train_frames < 0 || c.val_frames < 0 || c.test_frames < 0) {
    fail(ErrorCode::Config, "frame counts must be non-negative");
  }
  return c;
}

json gen_config_to_json(const GenConfig& c) {
  json towns = json::array();
  for (const auto& t : c.towns) towns.push_back({{"name", t.name}, {"seed", t.seed}});
  const auto& t = c.town_spec;
  return json{{"towns", std::move(towns)},
              {"town_spec",
               {{"blocks_x", t.blocks_x},
                {"blocks_y", t.blocks_y},
                {"block_min_m", t.block_min_m},
                {"block_max_m", t.block_max_m},
                {"road_width_min_m", t.road_width_min_m},
                {"road_width_max_m", t.road_width_max_m},
                {"lane_width_m", t.lane_width_m},
                {"lane_inset_m", t.lane_inset_m},
                {"dash_length_m", t.dash_length_m},
                {"edge_removal_fraction", t.edge_removal_fraction}}},
              {"routes_per_town", c.routes_per_town},
              {"val_route", c.val_route},
              {"frames_per_route", c.frames_per_route},
              {"train_frames", c.train_frames},
              {"val_frames", c.val_frames},
              {"test_frames", c.test_frames},
              {"n_views", c.n_views},
              {"image_width", c.image_width},
              {"image_height", c.image_height},
              {"fov_deg", c.fov_deg},
              {"grid", grid_to_json(c.grid)},
              {"route_spacing_m", c.route_spacing_m},
              {"min_route_length_m", c.min_route_length_m}};
}

std::string GenSummary::listing() const {
  std::ostringstream os;
  for (const auto& s : splits) {
    os << split_title(s.split) << ": " << with_thousands(s.images) << " images and " << with_thousands(s.samples)
       << " sample points, totaling approximately " << std::fixed << std::setprecision(1)
       << static_cast<double>(s.bytes) / (1024.0 * 1024.0) << " MB\n";
  }
  return os.str();
}

std::vector<int> distribute_frames(int total, int n_routes) {
  std::vector<int> out(static_cast<std::size_t>(n_routes), n_routes > 0 ? total / n_routes : 0);
  for (int i = 0; i < (n_routes > 0 ? total % n_routes : 0); ++i) ++out[static_cast<std::size_t>(i)];
  return out;
}

json route_to_json(const RouteRecord& r) {
  auto pts = [](const std::vector<world::Point2>& v) {
    json a = json::array();
    for (const auto& p : v) a.push_back(json::array({p.x(), p.y()}));
    return a;
  };
  return json{{"spacing", r.route.spacing},
              {"node_path", r.route.node_path},
              {"corners", pts(r.route.corners)},
              {"waypoints", pts(r.route.waypoints)},
              {"junctions", pts(r.junctions)}};
}

RouteRecord route_from_json(const json& j) {
  auto pts = [](const json& a) {
    std::vector<world::Point2> v;
    for (const auto& p : a) v.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    return v;
  };
  RouteRecord r;
  try {
    r.route.spacing = j.at("spacing").get<double>();
    r.route.node_path = j.at("node_path").get<std::vector<int>>();
    r.route.corners = pts(j.at("corners"));
    r.route.waypoints = pts(j.at("waypoints"));
    r.junctions = pts(j.at("junctions"));
  } catch (const json::exception& ex) {
    fail(ErrorCode::Format, std::string("route record: ") + ex.what());
  }
  return r;
}

RouteRecord read_route(const fs::path& root, const RouteKey& key) {
  return route_from_json(read_json(root / key.first / key.second / "route.json"));
}

bool is_empty_dir(const fs::path& dir) { return !fs::exists(dir) || (fs::is_directory(dir) && fs::is_empty(dir)); }

GenSummary generate_dataset(const GenConfig& config, const fs::path& root, bool force) {
  std::vector<std::string> names;
  for (const auto& t : config.towns) names.push_back(t.name);
  SplitManifest manifest = make_splits(names, config.routes_per_town, config.val_route);
  const world::Rig rig = world::default_rig(config.n_views, config.image_width, config.image_height, config.fov_deg);
  manifest.grid = config.grid;
  manifest.rig_name = rig.name;
  manifest.n_views = config.n_views;
  manifest.cameras = rig.cameras;
  check_disjoint(manifest);
  prepare_root(root, force);

  std::map<RouteKey, int> frames_for;
  for (const char* split : {"train", "val", "test"}) {
    const auto& keys = manifest.split(split);
    const int total = std::string(split) == "train" ? config.train_frames
                      : std::string(split) == "val" ? config.val_frames
                                                     : config.test_frames;
    const auto counts = distribute_frames(total, static_cast<int>(keys.size()));
    for (std::size_t i = 0; i < keys.size(); ++i)
      frames_for[keys[i]] = config.frames_per_route > 0 ? config.frames_per_route : counts[i];
  }

  GenSummary summary;
  summary.root = root;
  std::map<std::string, SplitCount> counts;
  std::map<RouteKey, std::string> split_of;
  for (const char* split : {"train", "val", "test"})
    for (const auto& k : manifest.split(split)) split_of[k] = split;

  for (const auto& town_entry : config.towns) {
    const world::TownMap town = world::generate_town(town_entry.seed, config.town_spec);
    fs::create_directories(root / town_entry.name);
    write_text(root / town_entry.name / "town.json", world::town_to_json(town).dump() + "\n");

    const int n_nodes = static_cast<int>(town.graph().nodes.size());
    std::mt19937_64 rng(town_entry.seed ^ 0xA5A5A5A5DEADBEEFULL);
    auto draw = [&](int n) { return static_cast<int>(static_cast<double>(rng() >> 11) * 0x1.0p-53 * n); };
    std::set<std::pair<int, int>> used;
    for (int r = 0; r < config.routes_per_town; ++r) {
      const RouteKey key{town_entry.name, route_name(r)};
      if (!split_of.count(key)) continue;
      std::optional<world::Route> best;
      for (int attempt = 0; attempt < 500; ++attempt) {
        const int a = draw(n_nodes), b = draw(n_nodes);
        if (a == b || used.count({a, b})) continue;
        world::Route candidate = world::plan_route(town, a, b, config.route_spacing_m);
        if (!best || candidate.length() > best->length()) best = candidate;
        if (candidate.length() >= config.min_route_length_m) {
          best = std::move(candidate);
          break;
        }
      }
      if (!best) fail(ErrorCode::Runtime, "could not plan a route in " + town_entry.name);
      used.insert({best->node_path.front(), best->node_path.back()});

      RouteRecord record{*best, {}};
      for (int v : best->node_path)
        if (town.graph().degree(v) >= 3) record.junctions.push_back(town.graph().nodes[v]);
      fs::create_directories(root / key.first / key.second);
      write_json(root / key.first / key.second / "route.json", route_to_json(record));

      const int n_frames = frames_for[key];
      const double length = best->length();
      SplitCount& sc = counts[split_of[key]];
      sc.split = split_of[key];
      for (int f = 0; f < n_frames; ++f) {
        const double s = (f + 0.5) * length / n_frames;
        Sample sample;
        sample.id = SampleId{key.first, key.second, f};
        sample.rig = rig.name;
        sample.grid = config.grid;
        sample.ego = world::pose_along_route(*best, s, f);
        sample.route_s = s;
        for (const auto& cam : rig.cameras) sample.views.push_back(View{cam, world::render_camera_view(town, cam, sample.ego)});
        sample.trajectory = world::rasterize_sparse_trajectory(*best, sample.ego, config.grid);
        sample.bev_gt = world::rasterize_bev_gt(town, *best, sample.ego, config.grid);
        const SamplePaths paths = write_sample(sample, root);
        ++sc.samples;
        sc.images += paths.views.size() + 1;
        for (const auto& p : paths.views) sc.bytes += fs::file_size(p);
        sc.bytes += fs::file_size(paths.trajectory);
      }
    }
  }
  write_manifest(manifest, root);
  for (const char* split : {"train", "val", "test"}) {
    SplitCount sc = counts[split];
    sc.split = split;
    summary.splits.push_back(sc);
  }
  return summary;
}

void ingest_external(const fs::path& source, const fs::path& root, const std::optional<std::string>& rig_override,
                     bool force) {
  if (!fs::is_directory(source)) fail(ErrorCode::NotFound, "ingest: source directory does not exist: " + source.string());
  std::vector<fs::path> frames;
  for (const auto& e : fs::recursive_directory_iterator(source)) {
    if (e.is_regular_file() && e.path().filename() == "meta.json") frames.push_back(e.path().parent_path());
  }
  std::sort(frames.begin(), frames.end());
  if (frames.empty()) fail(ErrorCode::NotFound, "ingest: no frames (meta.json) found under " + source.string());

  std::optional<world::Rig> override_rig;
  if (rig_override) {
    if (*rig_override == "default4") override_rig = world::default_rig(4);
    else if (*rig_override == "default3") override_rig = world::default_rig(3);
    else fail(ErrorCode::InvalidArgument, "ingest: unknown rig override " + *rig_override);
  }

  struct Pending {
    fs::path dir;
    Sample sample;
  };
  std::vector<Pending> pending;
  std::vector<std::string> problems;
  for (const auto& dir : frames) {
    const json meta = read_json(dir / "meta.json");
    const std::string rel = fs::relative(dir, source).generic_string();
    Sample s;
    try {
      s.id = SampleId{meta.at("town").get<std::string>(), meta.at("route").get<std::string>(), meta.at("frame").get<int>()};
      s.rig = meta.value("rig", std::string("external"));
      s.grid = grid_from_json(meta.value("grid", json::object()));
      const auto& ego = meta.at("ego");
      s.ego.position = world::Point2(ego.at("x").get<double>(), ego.at("y").get<double>());
      s.ego.heading = ego.at("heading").get<double>();
      s.ego.frame = ego.value("frame", s.id.frame);
      s.route_s = meta.value("route_s", 0.0);
      const bool carla = meta.value("convention", std::string("native")) == "carla";
      if (override_rig) {
        s.rig = override_rig->name;
        for (const auto& cam : override_rig->cameras) s.views.push_back(View{cam, {}});
      } else {
        for (const auto& cj : meta.at("cameras")) {
          const auto& p = cj.at("position");
          const auto& r = cj.at("rotation");
          const double flip = carla ? -1.0 : 1.0;
          // The simulator frame is left-handed (Y right); mirror Y, yaw and roll.
          const auto cam = geometry::make_camera(
              cj.at("name").get<std::string>(), cj.at("width").get<int>(), cj.at("height").get<int>(),
              cj.at("fov_deg").get<double>(),
              geometry::Vec3(p.at(0).get<double>(), flip * p.at(1).get<double>(), p.at(2).get<double>()),
              geometry::Angles{r.at(0).get<double>(), flip * r.at(1).get<double>(), flip * r.at(2).get<double>()});
          if (cj.contains("K")) {
            const auto k = cam.intrinsics.matrix();
            for (int a = 0; a < 3; ++a)
              for (int b = 0; b < 3; ++b) {
                const double given = cj.at("K").at(a).at(b).get<double>();
                if (std::abs(given - k(a, b)) > 1e-3) {
                  std::ostringstream os;
                  os << rel << ": camera " << cam.name << " K[" << a << "][" << b << "] = " << given << ", expected "
                     << k(a, b);
                  problems.push_back(os.str());
                }
              }
          }
          if (cj.contains("E") && !carla) {
            const auto e = cam.extrinsics.matrix();
            for (int a = 0; a < 4; ++a)
              for (int b = 0; b < 4; ++b) {
                const double given = cj.at("E").at(a).at(b).get<double>();
                if (std::abs(given - e(a, b)) > 1e-3) {
                  std::ostringstream os;
                  os << rel << ": camera " << cam.name << " E[" << a << "][" << b << "] = " << given << ", expected "
                     << e(a, b);
                  problems.push_back(os.str());
                }
              }
          }
          s.views.push_back(View{cam, {}});
        }
      }
    } catch (const json::exception& ex) {
      fail(ErrorCode::Format, (dir / "meta.json").string() + ": " + ex.what());
    }
    for (const auto& v : s.views) {
      if (!fs::exists(dir / (v.camera.name + ".png"))) problems.push_back(rel + ": missing view file " + v.camera.name + ".png");
    }
    for (const char* f : {"trajectory.png", "bev_gt.png"})
      if (!fs::exists(dir / f)) problems.push_back(rel + ": missing " + f);
    pending.push_back({dir, std::move(s)});
  }
  if (!problems.empty()) {
    std::string msg = "ingest: calibration or layout mismatch in " + std::to_string(problems.size()) + " place(s):";
    for (const auto& p : problems) msg += "\n  " + p;
    fail(ErrorCode::Format, msg);
  }

  prepare_root(root, force);
  for (const auto& [dir, s] : pending) {
    const fs::path out = root / s.id.relative_path();
    fs::create_directories(out);
    for (const auto& v : s.views) fs::copy_file(dir / (v.camera.name + ".png"), out / (v.camera.name + ".png"));
    fs::copy_file(dir / "trajectory.png", out / "trajectory.png");
    fs::copy_file(dir / "bev_gt.png", out / "bev_gt.png");
    write_json(out / "meta.json", meta_to_json(s));
    const fs::path route_src = dir.parent_path() / "route.json";
    const fs::path route_dst = out.parent_path() / "route.json";
    if (fs::exists(route_src) && !fs::exists(route_dst)) fs::copy_file(route_src, route_dst);
    const fs::path town_src = dir.parent_path().parent_path() / "town.json";
    const fs::path town_dst = out.parent_path().parent_path() / "town.json";
    if (fs::exists(town_src) && !fs::exists(town_dst)) fs::copy_file(town_src, town_dst);
  }

  SplitManifest manifest;
  if (fs::exists(source / "manifest.json")) {
    manifest = read_manifest(source);
  } else {
    std::set<RouteKey> keys;
    for (const auto& p : pending) keys.insert({p.sample.id.town, p.sample.id.route});
    manifest.test.assign(keys.begin(), keys.end());
    manifest.grid = pending.front().sample.grid;
  }
  const Sample& first = pending.front().sample;
  if (override_rig || manifest.cameras.empty()) {
    manifest.rig_name = first.rig;
    manifest.n_views = static_cast<int>(first.views.size());
    manifest.cameras.clear();
    for (const auto& v : first.views) manifest.cameras.push_back(v.camera);
  }
  write_manifest(manifest, root);
}

}  // namespace bevcvt::dataset

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

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "grid.hpp"
#include "image.hpp"
#include "synthworld.hpp"

namespace bevcvt::dataset {

namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kDataRootEnv = "BEVCVT_DATA_ROOT";

struct SampleId {
  std::string town;
  std::string route;
  int frame = 0;

  /// "<town>/<route>/<frame:06d>"
  std::string relative_path() const;
  static SampleId parse(const std::string& text);
  bool operator==(const SampleId&) const = default;
};

struct View {
  geometry::CameraModel camera;  // mount, relative to the ego centre
  Image image;
};

struct Sample {
  SampleId id;
  std::string rig;
  GridSpec grid;
  std::vector<View> views;
  BinaryGrid trajectory;  // 1 channel, model input
  BinaryGrid bev_gt;      // road, lane, trajectory
  world::EgoPose ego;
  double route_s = 0.0;  // arc length of the ego along its route
};

/// Throws Format/Shape errors on any violated Sample invariant.
void validate(const Sample& sample);

nlohmann::json camera_to_json(const geometry::CameraModel& cam);
geometry::CameraModel camera_from_json(const nlohmann::json& j);
nlohmann::json grid_to_json(const GridSpec& grid);
GridSpec grid_from_json(const nlohmann::json& j);

/// Channel c of the grid becomes image channel c, cells map to 0 / 255.
Image grid_to_image(const BinaryGrid& grid);
BinaryGrid image_to_grid(const Image& image, const fs::path& source);

struct SamplePaths {
  fs::path dir;
  std::vector<fs::path> views;
  fs::path trajectory;
  fs::path bev_gt;
  fs::path meta;
};

SamplePaths write_sample(const Sample& sample, const fs::path& root);

/// Reads one frame directory. `expected_views`, when given, must match the
/// number of views the meta record declares.
Sample read_sample(const fs::path& dir, std::optional<int> expected_views = std::nullopt);

Sample drop_rear_view(const Sample& sample);

using RouteKey = std::pair<std::string, std::string>;  // (town, route)

struct SplitManifest {
  std::vector<RouteKey> train;
  std::vector<RouteKey> val;
  std::vector<RouteKey> test;
  GridSpec grid;
  std::string rig_name;
  int n_views = 4;
  std::vector<geometry::CameraModel> cameras;

  const std::vector<RouteKey>& split(const std::string& name) const;
};

std::string route_name(int index);

/// towns[0] provides train (all routes except val_route) and val; every
/// further town contributes all of its routes to test.
SplitManifest make_splits(const std::vector<std::string>& towns, int routes_per_town, const std::string& val_route);

/// Throws when a (town, route) pair appears in two splits or train and test
/// share a town.
void check_disjoint(const SplitManifest& manifest);

nlohmann::json manifest_to_json(const SplitManifest& m);
SplitManifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const SplitManifest& m, const fs::path& root);
SplitManifest read_manifest(const fs::path& root);

/// Frame directories of one split, sorted by (town, route, frame).
std::vector<fs::path> list_split(const fs::path& root, const SplitManifest& m, const std::string& split);

/// Deterministic mini-batch iterator; one shuffle stream per epoch.
class BatchLoader {
 public:
  BatchLoader(std::vector<fs::path> frames, int batch_size, bool shuffle, std::uint64_t seed,
              std::optional<int> expected_views, bool drop_rear);

  void start_epoch(int epoch);
  /// Empty when the epoch is exhausted.
  std::vector<Sample> next();
  std::size_t size() const { return frames_.size(); }
  std::size_t batches_per_epoch() const;
  const std::vector<fs::path>& order() const { return order_; }

 private:
  std::vector<fs::path> frames_;
  std::vector<fs::path> order_;
  int batch_size_;
  bool shuffle_;
  std::uint64_t seed_;
  std::optional<int> expected_views_;
  bool drop_rear_;
  std::size_t cursor_ = 0;
};

struct TownEntry {
  std::string name;
  std::uint64_t seed = 0;
};

struct GenConfig {
  std::vector<TownEntry> towns{{"Town01", 1}, {"Town02", 2}};
  world::TownSpec town_spec;
  int routes_per_town = 10;
  std::string val_route = "route00";
  /// When > 0, every route gets this many frames and the split totals are
  /// ignored.
  int frames_per_route = 0;
  int train_frames = 2000;
  int val_frames = 200;
  int test_frames = 1000;
  int n_views = 4;
  int image_width = 128;
  int image_height = 128;
  double fov_deg = 90.0;
  GridSpec grid;
  double route_spacing_m = 2.0;
  double min_route_length_m = 80.0;
};

GenConfig gen_config_from_json(const nlohmann::json& j);
nlohmann::json gen_config_to_json(const GenConfig& c);

struct SplitCount {
  std::string split;
  std::size_t samples = 0;
  std::size_t images = 0;
  std::uintmax_t bytes = 0;
};

struct GenSummary {
  fs::path root;
  std::vector<SplitCount> splits;

  /// "Training: N images and M sample points, totaling approximately X MB"
  std::string listing() const;
};

/// Builds towns, routes and every frame of every split under `root`.
/// An existing non-empty root is refused unless `force`, and even then only
/// when it holds a previous dataset.
GenSummary generate_dataset(const GenConfig& config, const fs::path& root, bool force);

/// Frame count per route for one split total.
std::vector<int> distribute_frames(int total, int n_routes);

struct RouteRecord {
  world::Route route;
  std::vector<world::Point2> junctions;  // nodes of degree >= 3 on the route
};

nlohmann::json route_to_json(const RouteRecord& r);
RouteRecord route_from_json(const nlohmann::json& j);
RouteRecord read_route(const fs::path& root, const RouteKey& key);

/// Normalises an externally recorded tree (same directory layout, meta
/// records possibly in the simulator's left-handed convention and possibly
/// without matrices) into a dataset root. Intrinsics/extrinsics are
/// recomputed from (width, height, fov, position, rotation); any provided K
/// or E that disagrees by more than 1e-3 aborts with the offending frames.
/// `rig_override` ("default3"/"default4") replaces all calibration.
void ingest_external(const fs::path& source, const fs::path& root, const std::optional<std::string>& rig_override,
                     bool force);

/// Directory is absent or empty.
bool is_empty_dir(const fs::path& dir);

}  // namespace bevcvt::dataset

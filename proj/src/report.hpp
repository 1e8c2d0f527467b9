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

#include <array>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "image.hpp"
#include "metrics.hpp"
#include "model_common.hpp"
#include "training.hpp"

namespace bevcvt::report {

namespace fs = std::filesystem;

inline constexpr int kTableDecimals = 4;
inline constexpr std::array<const char*, 3> kColumns{"Road", "Trajectory", "Lane"};

struct TableRow {
  std::string model;
  /// Road, trajectory, lane; empty when no sample defined the channel.
  std::array<std::optional<double>, 3> values{};
  bool operator==(const TableRow&) const = default;
};

struct Table {
  std::string title;
  std::vector<TableRow> rows;
  bool operator==(const Table&) const = default;
};

double round_to_decimals(double v, int decimals = kTableDecimals);

Table make_table(const std::string& title, std::span<const metrics::MetricsReport> reports);
std::string table_to_text(const Table& table);
Table table_from_text(const std::string& text);
nlohmann::json table_to_json(const Table& table);
Table table_from_json(const nlohmann::json& j);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Band {
  double x0 = 0.0;
  double x1 = 0.0;
  std::string color;
  std::string label;
};

std::string line_plot_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                          std::span<const Series> series, std::span<const Band> bands = {},
                          std::optional<std::pair<double, double>> y_range = std::nullopt);

std::string loss_curve_svg(const training::RunRecord& run);

struct TraceSeries {
  std::string model;
  metrics::SegmentTrace trace;
};

/// Per-frame IoU of several models along one route over background bands
/// coloured by the segment labels of the first series.
std::string trace_svg(const std::string& title, std::span<const TraceSeries> series);

std::string slug(const std::string& text);

struct ReportOutputs {
  std::vector<fs::path> files;
  std::optional<Table> val;
  std::optional<Table> test;
  std::vector<std::string> findings;
};

/// Each input is a run directory (config.json, run.jsonl, metrics_<split>.json)
/// or a matrix directory whose matrix.json lists its run directories.
ReportOutputs write_report(const std::vector<fs::path>& inputs, const fs::path& out_dir);

/// Writes matrix.json so that write_report keeps the cell order.
void write_matrix_index(const training::MatrixResult& result);

/// x, y, width, height of tile `index` in a panel.
std::array<int, 4> tile_rect(int index, int tile_w, int tile_h);
inline constexpr int kTileGap = 4;

/// Views, trajectory, ground truth and prediction side by side. `gt` is the
/// stored bev_gt.png image; the prediction uses the same channel-to-colour
/// mapping.
Image render_panel(const dataset::Sample& sample, const Image& gt, const BinaryGrid& prediction);

/// Runs the model on every id under `data_root` and writes one panel per
/// sample to `out_dir`. Returns the written paths.
std::vector<fs::path> visualize(const fs::path& checkpoint, const fs::path& data_root,
                                const std::vector<std::string>& sample_ids, const fs::path& out_dir,
                                double threshold = training::kDefaultThreshold);

}  // namespace bevcvt::report

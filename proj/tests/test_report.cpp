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

#include <torch/torch.h>
// torch brings a glog-style CHECK; the test macro takes over.
#undef CHECK
#include <doctest.h>

#include <fstream>

#include "dataset.hpp"
#include "error.hpp"
#include "report.hpp"
#include "test_support.hpp"
#include "training.hpp"

using namespace bevcvt;
using namespace bevcvt::report;
using bevcvt::testing::TempDir;

namespace {

const fs::path& tiny_root() {
  static TempDir dir("report_data");
  static bool made = false;
  if (!made) {
    fs::remove_all(dir.path());
    dataset::generate_dataset(dataset::gen_config_from_json(testing::tiny_gen_config()), dir.path(), false);
    made = true;
  }
  return dir.path();
}

training::TrainConfig tiny_config() {
  training::TrainConfig c;
  c.model = testing::tiny_model("cvt");
  c.epochs = 2;
  c.batch_size = 4;
  return c;
}

nlohmann::json tiny_overrides() {
  return {{"cvt", testing::tiny_model("cvt")}, {"unet", testing::tiny_model("unet")}};
}

metrics::MetricsReport fake_report(const std::string& model, double road, std::optional<double> lane) {
  metrics::MetricsReport r;
  r.model = model;
  r.split = "test";
  r.overall.value = {road, lane, 0.5};
  r.overall.n_samples = {3, lane ? 2 : 0, 3};
  metrics::RouteBreakdown b;
  b.town = "TownB";
  b.route = "route04";
  r.routes.push_back(b);
  return r;
}

// Tiles sit at a fixed stride with background-grey gaps between them.
int count_tiles(const Image& panel, int tile_w, int tile_h) {
  CHECK(panel.height == tile_h + 2 * kTileGap);
  CHECK((panel.width - kTileGap) % (tile_w + kTileGap) == 0);
  const int n = (panel.width - kTileGap) / (tile_w + kTileGap);
  for (int i = 0; i <= n; ++i) {
    const int x = i * (tile_w + kTileGap);
    for (int dx = 0; dx < kTileGap; ++dx)
      for (int y = 0; y < panel.height; ++y) CHECK(panel.at(x + dx, y, 1) == 40);
  }
  return n;
}

Image crop(const Image& img, const std::array<int, 4>& rect) {
  const auto [x0, y0, w, h] = rect;
  Image out(w, h, img.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(x0 + x, y0 + y, c);
  return out;
}

}  // namespace

TEST_CASE("tables in text and JSON carry the same values") {
  std::vector<metrics::MetricsReport> reports;
  const auto cells = training::default_matrix();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    reports.push_back(fake_report(cells[i].name, 0.1 * static_cast<double>(i) + 0.123456, i % 2 ? std::nullopt : std::optional(0.0421)));
  }
  const auto table = make_table("Mean IoU per channel for different models from TownB - all routes", reports);
  REQUIRE(table.rows.size() == 6);
  CHECK(table.rows[0].values[0] == 0.1235);
  CHECK(table.rows[0].values[2] == 0.0421);
  CHECK(table.rows[0].values[1] == 0.5);
  CHECK_FALSE(table.rows[1].values[2].has_value());

  const auto text = table_to_text(table);
  CHECK(text.find("Model") != std::string::npos);
  CHECK(text.find("| Road") != std::string::npos);
  CHECK(text.find("Road") < text.find("Trajectory"));
  CHECK(text.find("Trajectory") < text.find("Lane"));
  CHECK(table_from_text(text) == table);
  CHECK(table_from_json(table_to_json(table)) == table);
  CHECK(table_from_json(table_to_json(table)) == table_from_text(text));
  CHECK(table_to_json(table)["columns"] == nlohmann::json{"Model", "Road", "Trajectory", "Lane"});

  const auto single = make_table("one", std::vector<metrics::MetricsReport>{reports[2]});
  CHECK(single.rows.size() == 1);
  CHECK(table_from_text(table_to_text(single)) == single);
}

TEST_CASE("plots are well-formed SVG") {
  const std::vector<Series> s{{"train", {1, 2, 3}, {0.5, 0.3, 0.2}}, {"val", {1, 2, 3}, {0.6, 0.4, 0.35}}};
  const std::vector<Band> bands{{1.0, 1.5, "#fdd9a8", "turn"}};
  const auto svg = line_plot_svg("Loss", "epoch", "loss", s, bands);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("#fdd9a8") != std::string::npos);
  CHECK(svg.find("train") != std::string::npos);

  metrics::SegmentTrace trace;
  trace.values = {1.0, 0.5, 0.7};
  trace.labels = {metrics::SegmentLabel::Straight, metrics::SegmentLabel::Intersection, metrics::SegmentLabel::Turn};
  const std::vector<TraceSeries> ts{{"CVT", trace}};
  const auto t = trace_svg("trace", ts);
  for (const char* colour : {"#ececec", "#fdd9a8", "#c6dcf2"}) CHECK(t.find(colour) != std::string::npos);
  CHECK(slug("CVT, Focal loss - 4 cams") == "cvt_focal_loss_4_cams");
}

TEST_CASE("report over a full matrix") {
  TempDir out("report_matrix");
  const auto result = training::run_experiment_matrix(training::default_matrix(), tiny_config(), tiny_overrides(),
                                                      tiny_root(), out.path() / "runs");
  write_matrix_index(result);
  const auto rep = write_report({out.path() / "runs"}, out.path() / "report");
  REQUIRE(rep.val.has_value());
  REQUIRE(rep.test.has_value());
  CHECK(rep.val->rows.size() == 6);
  CHECK(rep.test->rows.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(rep.test->rows[i].model == training::default_matrix()[i].name);
  CHECK(rep.val->title == "Mean IoU per channel for different models from Town01 - Validation route (route00)");
  CHECK(rep.test->title == "Mean IoU per channel for different models from Town02 - all routes");

  const auto dir = out.path() / "report";
  const auto from_text = table_from_text(testing::file_bytes(dir / "table_test.txt"));
  const auto from_json = table_from_json(nlohmann::json::parse(testing::file_bytes(dir / "table_test.json")));
  CHECK(from_text == from_json);
  CHECK(from_text == *rep.test);
  CHECK(fs::exists(dir / "trace_test_town02_route00.svg"));
  CHECK(fs::exists(dir / "trace_val_town01_route00.svg"));
  for (const auto& cell : training::default_matrix()) CHECK(fs::exists(dir / ("loss_" + slug(cell.name) + ".svg")));
  CHECK(fs::exists(dir / "table_val.txt"));
  CHECK(fs::exists(dir / "table_val.json"));
  CHECK(fs::exists(dir / "findings.txt"));
  CHECK(rep.findings.size() == 2);

  // Same seeds, same tables.
  TempDir again("report_matrix_again");
  const auto r2 = training::run_experiment_matrix(training::default_matrix(), tiny_config(), tiny_overrides(),
                                                  tiny_root(), again.path() / "runs");
  write_matrix_index(r2);
  const auto rep2 = write_report({again.path() / "runs"}, again.path() / "report");
  CHECK(*rep2.test == *rep.test);
  CHECK(*rep2.val == *rep.val);
}

TEST_CASE("report over a single run and with missing inputs") {
  TempDir out("report_single");
  auto c = tiny_config();
  c.name = "solo";
  training::train_model(c, tiny_root(), out.path() / "solo");
  for (const char* split : {"val", "test"}) {
    const auto r = training::evaluate_checkpoint(out.path() / "solo" / "last.pt", tiny_root(), split);
    std::ofstream(out.path() / "solo" / (std::string("metrics_") + split + ".json")) << metrics::report_to_json(r).dump();
  }
  const auto rep = write_report({out.path() / "solo"}, out.path() / "report");
  REQUIRE(rep.test.has_value());
  CHECK(rep.test->rows.size() == 1);
  CHECK(rep.test->rows[0].model == "solo");

  fs::create_directories(out.path() / "empty_a");
  fs::create_directories(out.path() / "empty_b");
  try {
    write_report({out.path() / "empty_a", out.path() / "empty_b", out.path() / "absent"}, out.path() / "report2");
    FAIL("expected missing inputs");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotFound);
    const std::string msg = e.what();
    CHECK(msg.find("empty_a") != std::string::npos);
    CHECK(msg.find("empty_b") != std::string::npos);
    CHECK(msg.find("absent") != std::string::npos);
  }
  CHECK_THROWS_AS(write_report({}, out.path() / "report3"), Error);
}

TEST_CASE("visualization panels") {
  TempDir out("report_vis");
  auto four = tiny_config();
  four.epochs = 1;
  training::train_model(four, tiny_root(), out.path() / "four");
  auto three = four;
  three.n_views = 3;
  training::train_model(three, tiny_root(), out.path() / "three");

  const std::string id = "Town02/route01/000001";
  const auto files = visualize(out.path() / "four" / "last.pt", tiny_root(), {id}, out.path() / "panels4");
  REQUIRE(files.size() == 1);
  CHECK(files[0].filename() == "panel_town02_route01_1.png");
  const Image panel = read_png(files[0]);
  CHECK(count_tiles(panel, 32, 32) == 7);

  // The GT tile is the stored raster, byte for byte.
  const Image gt = read_png(tiny_root() / id / "bev_gt.png");
  CHECK(crop(panel, tile_rect(5, 32, 32)) == gt);
  const auto sample = dataset::read_sample(tiny_root() / id);
  CHECK(crop(panel, tile_rect(0, 32, 32)) == sample.views[0].image);

  const auto three_files = visualize(out.path() / "three" / "last.pt", tiny_root(), {id}, out.path() / "panels3");
  CHECK(count_tiles(read_png(three_files[0]), 32, 32) == 6);

  try {
    visualize(out.path() / "four" / "last.pt", tiny_root(), {"Town09/route01/000001"}, out.path() / "panels_bad");
    FAIL("expected an unknown-id error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotFound);
  }
}

TEST_CASE("panel tiles follow the layout contract") {
  dataset::Sample s;
  s.grid = GridSpec{8, 10, 1.0, 6, 5};
  for (const auto& cam : world::default_rig(4, 20, 16).cameras) s.views.push_back({cam, Image(20, 16, 3, 200)});
  s.trajectory = BinaryGrid(1, 8, 10);
  s.trajectory.at(0, 6, 5) = 1;
  BinaryGrid pred(3, 8, 10);
  pred.at(0, 1, 1) = 1;
  const Image gt(10, 8, 3, 255);
  const auto panel = render_panel(s, gt, pred);
  CHECK(count_tiles(panel, 10, 8) == 7);
  CHECK(tile_rect(2, 10, 8) == std::array<int, 4>{4 + 2 * 14, 4, 10, 8});
  const auto p = crop(panel, tile_rect(6, 10, 8));
  CHECK(p.at(1, 1, 0) == 255);
  CHECK(p.at(1, 1, 1) == 0);
  CHECK(p.at(0, 0, 0) == 0);
  const auto t = crop(panel, tile_rect(4, 10, 8));
  CHECK(t.at(5, 6, 0) == 255);
  CHECK_THROWS_AS(render_panel(s, Image(9, 8, 3), pred), Error);
}

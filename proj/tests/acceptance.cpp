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

// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Every tolerance and budget is a constant below.

#include <torch/torch.h>

#include <CLI11.hpp>
#include <Eigen/Geometry>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "dataset.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "model_support.hpp"
#include "report.hpp"
#include "test_support.hpp"
#include "training.hpp"

using namespace bevcvt;
namespace fs = std::filesystem;

namespace {

constexpr int kGeometryCases = 1000;
constexpr double kParallelTol = 1e-9;
constexpr double kSelfSimTol = 1e-9;
constexpr double kScaleTol = 1e-12;
constexpr double kGroundPixelTol = 1e-6;
constexpr double kGeometryBudgetS = 10.0;

constexpr double kFovReadBackRel = 1e-9;

constexpr int kGradInstances = 100;
constexpr double kFdStep = 1e-5;
constexpr double kGradRelTol = 1e-4;
constexpr double kHalfBceTol = 1e-9;

constexpr int kIouPairs = 100;
constexpr int kIouSide = 16;

constexpr double kPermutationTol = 1e-5;
constexpr double kPermutationBudgetS = 60.0;

constexpr int kOverfitSamples = 16;
constexpr int kOverfitSteps = 500;
constexpr int kOverfitBatch = 4;
constexpr double kOverfitLr = 1e-3;
constexpr double kLossDrop = 0.9;
constexpr double kOverfitRoadIou = 0.9;
constexpr double kOverfitBudgetS = 15.0 * 60.0;

constexpr int kExperimentEpochs = 10;
constexpr int kExperimentBatch = 8;
constexpr double kExperimentRoadIou = 0.3;
constexpr double kExperimentBudgetS = 4.0 * 3600.0;

constexpr double kCurveTol = 1e-6;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

void progress(const std::string& line) { std::cerr << "  " << line << std::endl; }

const std::vector<std::string> kReferenceRows{"CVT, Focal loss - 4 cams", "Unet, Focal loss - 4 cams",
                                              "CVT, L1 - 4 cams",         "Unet, L1 - 4 cams",
                                              "CVT, Focal loss - 3 cams", "CVT, L1 - 3 cams"};

// Reference layout: Model | Road | Trajectory | Lane, the six configurations
// in a fixed order, four decimals. Returns "" when the files conform.
std::string table_schema_problem(const fs::path& txt, const fs::path& json_path) {
  if (!fs::exists(txt) || !fs::exists(json_path)) return "missing " + txt.filename().string();
  const std::string text = testing::file_bytes(txt);
  std::istringstream in(text);
  std::string title, header;
  std::getline(in, title);
  std::getline(in, header);
  if (title.rfind("Mean IoU per channel for different models from ", 0) != 0) return "title: " + title;
  std::vector<std::string> cols;
  std::stringstream hs(header);
  for (std::string c; std::getline(hs, c, '|');) {
    c.erase(0, c.find_first_not_of(' '));
    c.erase(c.find_last_not_of(' ') + 1);
    cols.push_back(c);
  }
  if (cols != std::vector<std::string>{"Model", "Road", "Trajectory", "Lane"}) return "header: " + header;
  const auto table = report::table_from_text(text);
  std::vector<std::string> names;
  for (const auto& r : table.rows) names.push_back(r.model);
  if (names != kReferenceRows) return "rows are not the six configurations in order";
  for (const auto& r : table.rows)
    for (const auto& v : r.values)
      if (v && std::abs(*v * 1e4 - std::round(*v * 1e4)) > 1e-6) return "value not at four decimals";
  if (!(report::table_from_json(nlohmann::json::parse(testing::file_bytes(json_path))) == table)) {
    return "JSON and text tables disagree";
  }
  return "";
}

// ---- criteria ----

Outcome tables(const fs::path& work) {
  // Reference unseen-town values must survive the text and JSON writers.
  const std::vector<std::array<double, 3>> reference{{0.9079, 0.7528, 0.2906}, {0.6978, 0.5915, 0.3959},
                                                     {0.9144, 0.7808, 0.3158}, {0.6804, 0.5642, 0.3809},
                                                     {0.8981, 0.7787, 0.2970}, {0.8823, 0.7935, 0.3099}};
  report::Table t{"Mean IoU per channel for different models from Town02 - all routes", {}};
  for (std::size_t i = 0; i < reference.size(); ++i) {
    t.rows.push_back({kReferenceRows[i], {reference[i][0], reference[i][1], reference[i][2]}});
  }
  if (!(report::table_from_text(report::table_to_text(t)) == t)) return {false, "reference values do not round-trip"};
  if (!(report::table_from_json(report::table_to_json(t)) == t)) return {false, "reference values do not round-trip"};

  // And the report command emits that layout from a real (tiny) matrix.
  const auto data = work / "tables_data";
  const auto runs = work / "tables_runs";
  fs::remove_all(data);
  fs::remove_all(runs);
  dataset::generate_dataset(dataset::gen_config_from_json(testing::tiny_gen_config()), data, false);
  training::TrainConfig base;
  base.epochs = 1;
  base.batch_size = 4;
  const nlohmann::json overrides{{"cvt", testing::tiny_model("cvt")}, {"unet", testing::tiny_model("unet")}};
  const auto result = training::run_experiment_matrix(training::default_matrix(), base, overrides, data, runs);
  report::write_matrix_index(result);
  report::write_report({runs}, runs / "report");
  for (const char* split : {"val", "test"}) {
    const auto problem = table_schema_problem(runs / "report" / (std::string("table_") + split + ".txt"),
                                              runs / "report" / (std::string("table_") + split + ".json"));
    if (!problem.empty()) return {false, std::string(split) + " table: " + problem};
  }
  return {true, "reference values round-trip; report tables carry Model | Road | Trajectory | Lane and six rows"};
}

Outcome geometry_suite() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  double worst_par = 0, worst_sim = 0, worst_scale = 0, worst_ground = 0;
  for (int i = 0; i < kGeometryCases; ++i) {
    const auto cam = testing::random_camera(rng);
    const auto p = testing::random_point_in_front(cam, rng);
    const auto q = geometry::project(p, cam);
    const auto d = geometry::unproject_direction(q, cam);
    worst_par = std::max(worst_par, std::abs(testing::cosine(d, p - cam.extrinsics.translation) - 1.0));
    const double sim = geometry::geometric_similarity(q, p, cam);
    worst_sim = std::max(worst_sim, std::abs(sim - 1.0));
    for (double lambda : {1e-3, 0.37, 12.0, 1e4}) {
      const geometry::Vec3 x = lambda * geometry::Vec3(q.x(), q.y(), 1.0);
      worst_scale = std::max(worst_scale, std::abs(geometry::geometric_similarity(x, p, cam) - sim));
    }
    // Ray/ground round trip on a pixel that sees the ground; cameras looking
    // wholly above the horizon are redrawn.
    auto gcam = cam;
    std::optional<geometry::Vec3> g;
    geometry::Vec2 px;
    while (!g) {
      std::uniform_real_distribution<double> u(0.0, gcam.width), v(gcam.height / 2.0, gcam.height);
      for (int tries = 0; tries < 100 && !g; ++tries) {
        px = geometry::Vec2(u(rng), v(rng));
        g = geometry::ray_ground_intersection(px, gcam);
      }
      if (!g) gcam = testing::random_camera(rng);
    }
    worst_ground = std::max(worst_ground, (geometry::project(*g, gcam) - px).norm());
  }
  const double wall = since(t0);
  const bool pass = worst_par <= kParallelTol && worst_sim <= kSelfSimTol && worst_scale <= kScaleTol &&
                    worst_ground <= kGroundPixelTol && wall < kGeometryBudgetS;
  return {pass, std::to_string(kGeometryCases) + " cases: |cos-1| " + fmt(worst_par) + ", |sim-1| " + fmt(worst_sim) +
                    ", scale " + fmt(worst_scale) + ", ground " + fmt(worst_ground) + " px, " + fmt(wall) + " s"};
}

Outcome intrinsics() {
  const auto a = geometry::intrinsics_from_fov(400, 400, 90.0);
  const auto b = geometry::intrinsics_from_fov(800, 600, 90.0);
  const bool exact = a.fx == 200.0 && a.fy == 200.0;
  const bool wide = std::abs(b.fx - 400.0) <= 1e-9 * 400.0 && std::abs(b.fy - 300.0) <= 1e-9 * 300.0;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> fov(1.0, 179.0);
  std::uniform_int_distribution<int> size(1, 4096);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const double f = fov(rng);
    const int w = size(rng);
    const auto k = geometry::intrinsics_from_fov(w, size(rng), f);
    worst = std::max(worst, std::abs(2.0 * std::atan(w / (2.0 * k.fx)) * 180.0 / M_PI - f) / f);
  }
  return {exact && wide && worst <= kFovReadBackRel,
          "f(400,90) = " + fmt(a.fx, 17) + ", (800,600) -> (" + fmt(b.fx, 12) + ", " + fmt(b.fy, 12) +
              "), read-back rel " + fmt(worst)};
}

double relative_error(const torch::Tensor& a, const torch::Tensor& b) {
  const double denom = std::max({a.norm().item<double>(), b.norm().item<double>(), 1e-300});
  return (a - b).norm().item<double>() / denom;
}

template <typename F>
torch::Tensor central_differences(const torch::Tensor& z, F&& f) {
  auto flat = z.clone().flatten();
  auto g = torch::zeros_like(flat);
  auto acc = flat.accessor<double, 1>();
  auto gacc = g.accessor<double, 1>();
  for (int64_t i = 0; i < flat.numel(); ++i) {
    const double x = acc[i];
    acc[i] = x + kFdStep;
    const double up = f(flat.view(z.sizes()));
    acc[i] = x - kFdStep;
    const double down = f(flat.view(z.sizes()));
    acc[i] = x;
    gacc[i] = (up - down) / (2 * kFdStep);
  }
  return g.view(z.sizes());
}

Outcome loss_gradients() {
  torch::manual_seed(31);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> gamma(0.0, 4.0), alpha(0.05, 0.95);
  double worst_focal = 0, worst_l1 = 0, worst_bce = 0;
  for (int i = 0; i < kGradInstances; ++i) {
    const auto z = torch::randn({2, 3, 4, 4}, torch::kDouble) * 3.0;
    const auto y = torch::randint(0, 2, {2, 3, 4, 4}, torch::kDouble);
    const double g = gamma(rng), a = alpha(rng);
    const auto focal = losses::focal_loss_with_grad(z, y, {}, g, a);
    const auto fnum = central_differences(
        z, [&](const torch::Tensor& t) { return losses::focal_loss_with_grad(t, y, {}, g, a).value.item<double>(); });
    worst_focal = std::max(worst_focal, relative_error(focal.grad, fnum));
    const auto l1 = losses::l1_loss_with_grad(z, y, {});
    const auto lnum =
        central_differences(z, [&](const torch::Tensor& t) { return losses::l1_loss_with_grad(t, y, {}).value.item<double>(); });
    worst_l1 = std::max(worst_l1, relative_error(l1.grad, lnum));

    // Plain binary cross-entropy, summed by hand.
    double bce = 0;
    const auto zf = z.flatten(), yf = y.flatten();
    auto za = zf.accessor<double, 1>();
    auto ya = yf.accessor<double, 1>();
    for (int64_t k = 0; k < z.numel(); ++k) {
      const double p = 1.0 / (1.0 + std::exp(-za[k]));
      bce -= ya[k] > 0.5 ? std::log(p) : std::log(1.0 - p);
    }
    bce /= static_cast<double>(z.numel());
    const double f0 = losses::focal_loss_with_grad(z, y, {}, 0.0, 0.5).value.item<double>();
    worst_bce = std::max(worst_bce, std::abs(f0 - 0.5 * bce));
  }
  return {worst_focal < kGradRelTol && worst_l1 < kGradRelTol && worst_bce <= kHalfBceTol,
          std::to_string(kGradInstances) + " instances: focal rel " + fmt(worst_focal) + ", L1 rel " + fmt(worst_l1) +
              ", |focal(0, 0.5) - BCE/2| " + fmt(worst_bce)};
}

std::optional<double> loop_iou(const BinaryGrid& a, const BinaryGrid& b, int ch) {
  long inter = 0, uni = 0;
  for (int r = 0; r < a.rows; ++r)
    for (int c = 0; c < a.cols; ++c) {
      const bool x = a.at(ch, r, c), y = b.at(ch, r, c);
      if (x && y) ++inter;
      if (x || y) ++uni;
    }
  if (uni == 0) return std::nullopt;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Outcome iou_oracle() {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> density(0.0, 1.0), u(0.0, 1.0);
  int mismatches = 0;
  for (int i = 0; i < kIouPairs; ++i) {
    BinaryGrid a(3, kIouSide, kIouSide), b(3, kIouSide, kIouSide);
    const double da = density(rng), db = density(rng);
    for (auto& c : a.cells) c = u(rng) < da;
    for (auto& c : b.cells) c = u(rng) < db;
    const auto v = metrics::iou_per_channel(a, b);
    for (int ch = 0; ch < 3; ++ch)
      if (v.value[ch] != loop_iou(a, b, ch)) ++mismatches;
  }
  BinaryGrid top(3, kIouSide, kIouSide), left(3, kIouSide, kIouSide);
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < kIouSide; ++r)
      for (int c = 0; c < kIouSide; ++c) {
        top.at(ch, r, c) = r < kIouSide / 2;
        left.at(ch, r, c) = c < kIouSide / 2;
      }
  const auto third = metrics::iou_per_channel(top, left);
  bool exact = true;
  for (int ch = 0; ch < 3; ++ch) exact = exact && third.value[ch] == 1.0 / 3.0;
  return {mismatches == 0 && exact,
          std::to_string(mismatches) + " mismatches over " + std::to_string(kIouPairs) + " pairs; top/left = " +
              fmt(*third.road(), 17)};
}

Outcome permutation() {
  const auto t0 = Clock::now();
  auto cvt = testing::calibrated({{"arch", "cvt"}}, 3);
  auto unet = testing::calibrated({{"arch", "unet"}}, 3);
  torch::NoGradGuard ng;
  const auto batch = testing::rendered_batch(2, 4, 77);
  double cvt_worst = 0, unet_least = INFINITY;
  for (const auto& order : std::vector<std::vector<int>>{{1, 0, 2, 3}, {3, 2, 1, 0}, {2, 3, 0, 1}, {0, 3, 1, 2}}) {
    const auto permuted = batch.permuted(order);
    cvt_worst = std::max(cvt_worst, testing::max_abs(cvt->forward(batch), cvt->forward(permuted)));
    unet_least = std::min(unet_least, testing::max_abs(unet->forward(batch), unet->forward(permuted)));
  }
  const double wall = since(t0);
  return {cvt_worst < kPermutationTol && unet_least > 0.0 && wall < kPermutationBudgetS,
          "CVT max-abs " + fmt(cvt_worst) + ", UNet min change " + fmt(unet_least) + ", " + fmt(wall) + " s"};
}

Outcome overfit(const std::string& arch) {
  const auto t0 = Clock::now();
  const auto samples = testing::rendered_samples(kOverfitSamples, 4, 5);
  torch::manual_seed(0);
  auto net = model::make_model({{"arch", arch}});
  const auto curve = training::fit_samples(*net, samples, losses::LossConfig{}, kOverfitSteps, kOverfitBatch,
                                           kOverfitLr, 0);
  const double first = curve.front();
  const double best = *std::min_element(curve.begin(), curve.end());
  const double drop = 1.0 - best / first;
  const auto ious = training::predict_iou(*net, samples);
  const double road = *metrics::mean_iou(ious).road();
  const double wall = since(t0);
  return {drop >= kLossDrop && road >= kOverfitRoadIou && wall <= kOverfitBudgetS,
          std::to_string(kOverfitSamples) + " samples, " + std::to_string(kOverfitSteps) + " steps: loss " + fmt(first) +
              " -> " + fmt(best) + " (drop " + fmt(100 * drop) + "%), road IoU " + fmt(road, 4) + ", " + fmt(wall) +
              " s"};
}

Outcome experiment(const fs::path& work, int epochs) {
  const auto t0 = Clock::now();
  const auto data = work / "experiment_data";
  const auto runs = work / "experiment_runs";
  fs::remove_all(data);
  fs::remove_all(runs);
  const auto summary = dataset::generate_dataset(dataset::GenConfig{}, data, false);
  progress(summary.listing());
  progress("data generated in " + fmt(since(t0)) + " s");

  training::TrainConfig base;
  base.epochs = epochs;
  base.batch_size = kExperimentBatch;
  const auto result = training::run_experiment_matrix(training::default_matrix(), base, nlohmann::json::object(),
                                                      data, runs, progress);
  report::write_matrix_index(result);
  const auto rep = report::write_report({runs}, runs / "report");
  const double wall = since(t0);

  std::vector<std::string> problems;
  std::ostringstream roads;
  for (const auto& c : result.cells) {
    if (!c.error.empty()) {
      problems.push_back(c.cell.name + " failed: " + c.error);
      continue;
    }
    const double road = c.test->overall.road().value_or(0.0);
    roads << (roads.tellp() > 0 ? ", " : "") << training::cell_slug(c.cell) << " " << fmt(road, 4);
    if (!(road > kExperimentRoadIou)) problems.push_back(c.cell.name + " test road " + fmt(road, 4));
  }
  for (const char* split : {"val", "test"}) {
    const auto problem = table_schema_problem(runs / "report" / (std::string("table_") + split + ".txt"),
                                              runs / "report" / (std::string("table_") + split + ".json"));
    if (!problem.empty()) problems.push_back(std::string(split) + " table: " + problem);
  }
  int traces = 0;
  for (const auto& e : fs::directory_iterator(runs / "report")) {
    if (e.path().filename().string().rfind("trace_test_", 0) == 0) ++traces;
  }
  if (traces == 0) problems.push_back("no test-route traces");
  if (wall > kExperimentBudgetS) problems.push_back("over budget");

  if (rep.test) progress("\n" + report::table_to_text(*rep.test));
  if (rep.val) progress("\n" + report::table_to_text(*rep.val));
  for (const auto& f : rep.findings) progress("ordering: " + f);

  std::string detail = std::to_string(epochs) + " epochs; test road " + roads.str() + "; " + std::to_string(traces) +
                       " test traces; " + fmt(wall / 3600.0) + " h";
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

Outcome determinism(const fs::path& work) {
  auto gen = dataset::GenConfig{};
  gen.routes_per_town = 3;
  gen.frames_per_route = 4;
  const auto a = work / "det_a", b = work / "det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  dataset::generate_dataset(gen, a, false);
  dataset::generate_dataset(gen, b, false);
  const auto ta = testing::tree_bytes(a);
  const bool same_data = !ta.empty() && ta == testing::tree_bytes(b);

  double worst = 0;
  bool ok = true;
  for (const char* arch : {"cvt", "unet"}) {
    training::TrainConfig c;
    c.model = {{"arch", arch}};
    c.epochs = 1;
    c.batch_size = 4;
    c.seed = 11;
    const auto ra = training::train_model(c, a, work / (std::string("det_run_a_") + arch));
    const auto rb = training::train_model(c, a, work / (std::string("det_run_b_") + arch));
    ok = ok && ra.epochs.size() == rb.epochs.size();
    for (std::size_t i = 0; ok && i < ra.epochs.size(); ++i) {
      worst = std::max({worst, std::abs(ra.epochs[i].train_loss - rb.epochs[i].train_loss),
                        std::abs(ra.epochs[i].val_loss - rb.epochs[i].val_loss)});
    }
  }
  return {same_data && ok && worst <= kCurveTol,
          std::string(same_data ? "datasets byte-identical (" : "datasets differ (") + std::to_string(ta.size()) +
              " files); loss curves differ by " + fmt(worst)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<std::string> only, skip;
  std::string work = (fs::temp_directory_path() / "bevcvt_acceptance").string();
  int epochs = kExperimentEpochs;
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--skip", skip, "Skip these criteria");
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--epochs", epochs, "Epochs for the desk-scale experiment");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"tables", [&] { return tables(work); }},
      {"geometry", geometry_suite},
      {"intrinsics", intrinsics},
      {"loss_gradients", loss_gradients},
      {"iou_oracle", iou_oracle},
      {"permutation", permutation},
      {"trainability_cvt", [] { return overfit("cvt"); }},
      {"trainability_unet", [] { return overfit("unet"); }},
      {"experiment", [&] { return experiment(work, epochs); }},
      {"determinism", [&] { return determinism(work); }},
  };
  std::set<std::string> known;
  for (const auto& [name, fn] : criteria) known.insert(name);
  for (const auto& n : only)
    if (!known.count(n)) return std::cerr << "unknown criterion " << n << "\n", 2;
  for (const auto& n : skip)
    if (!known.count(n)) return std::cerr << "unknown criterion " << n << "\n", 2;

  fs::create_directories(work);
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    if (std::find(skip.begin(), skip.end(), name) != skip.end()) continue;
    std::cerr << "[" << name << "]" << std::endl;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& ex) {
      o = {false, std::string("error: ") + ex.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}

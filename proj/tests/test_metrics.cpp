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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "error.hpp"
#include "metrics.hpp"

using namespace bevcvt;
using namespace bevcvt::metrics;

namespace {

BinaryGrid random_masks(std::mt19937_64& rng, int rows, int cols, double density) {
  BinaryGrid g(3, rows, cols);
  std::bernoulli_distribution bit(density);
  for (auto& c : g.cells) c = bit(rng);
  return g;
}

// Scalar double-loop IoU for one channel; nullopt on an empty union.
std::optional<double> loop_iou(const BinaryGrid& a, const BinaryGrid& b, int ch) {
  int inter = 0, uni = 0;
  for (int r = 0; r < a.rows; ++r)
    for (int c = 0; c < a.cols; ++c) {
      inter += a.at(ch, r, c) && b.at(ch, r, c);
      uni += a.at(ch, r, c) || b.at(ch, r, c);
    }
  if (uni == 0) return std::nullopt;
  return static_cast<double>(inter) / uni;
}

ChannelIoU make_iou(std::optional<double> road, std::optional<double> lane, std::optional<double> traj) {
  ChannelIoU c;
  c.value = {road, lane, traj};
  for (int k = 0; k < 3; ++k) c.n_samples[k] = c.value[k] ? 1 : 0;
  return c;
}

}  // namespace

TEST_CASE("binarize") {
  const std::vector<float> zeros(3 * 4 * 4, 0.0f), tens(3 * 4 * 4, 10.0f);
  CHECK(binarize(zeros, 3, 4, 4).count(0) == 0);
  const auto all = binarize(tens, 3, 4, 4);
  for (int c = 0; c < 3; ++c) CHECK(all.count(c) == 16);

  std::mt19937_64 rng(1);
  std::normal_distribution<float> n(0.0f, 3.0f);
  std::vector<float> logits(3 * 8 * 8);
  for (auto& v : logits) v = n(rng);
  const auto mask = binarize(logits, 3, 8, 8);
  for (std::size_t i = 0; i < logits.size(); ++i) CHECK(mask.cells[i] == (logits[i] > 0.0f));
  const auto strict = binarize(logits, 3, 8, 8, 0.9);
  for (std::size_t i = 0; i < logits.size(); ++i) CHECK(strict.cells[i] == (1.0 / (1.0 + std::exp(-logits[i])) > 0.9));

  CHECK_THROWS_AS(binarize(logits, 3, 8, 8, 0.0), Error);
  CHECK_THROWS_AS(binarize(logits, 3, 8, 8, 1.0), Error);
  CHECK_THROWS_AS(binarize(logits, 3, 8, 7), Error);
}

TEST_CASE("IoU hand cases") {
  BinaryGrid top(3, 8, 8), left(3, 8, 8);
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) {
        top.at(ch, r, c) = r < 4;
        left.at(ch, r, c) = c < 4;
      }
  const auto third = iou_per_channel(top, left);
  for (int ch = 0; ch < 3; ++ch) CHECK(*third.value[ch] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const auto same = iou_per_channel(top, top);
  CHECK(*same.road() == 1.0);

  BinaryGrid bottom = top;
  for (auto& c : bottom.cells) c = !c;
  CHECK(*iou_per_channel(top, bottom).lane() == 0.0);

  const BinaryGrid empty(3, 8, 8);
  const auto undefined = iou_per_channel(empty, empty);
  for (int ch = 0; ch < 3; ++ch) {
    CHECK_FALSE(undefined.value[ch].has_value());
    CHECK(undefined.n_samples[ch] == 0);
  }
  CHECK_THROWS_AS(iou_per_channel(empty, BinaryGrid(3, 8, 9)), Error);
  CHECK_THROWS_AS(iou_per_channel(BinaryGrid(1, 8, 8), BinaryGrid(1, 8, 8)), Error);
}

TEST_CASE("IoU equals a double-loop oracle") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_masks(rng, 16, 16, density(rng) * (i % 10 == 0 ? 0.01 : 1.0));
    const auto b = random_masks(rng, 16, 16, density(rng) * (i % 10 == 0 ? 0.01 : 1.0));
    const auto v = iou_per_channel(a, b);
    const auto sym = iou_per_channel(b, a);
    for (int ch = 0; ch < 3; ++ch) {
      CHECK(v.value[ch] == loop_iou(a, b, ch));
      CHECK(v.value[ch] == sym.value[ch]);
    }
  }
}

TEST_CASE("IoU grows with the intersection at a fixed union") {
  BinaryGrid gt(3, 1, 10), pred(3, 1, 10);
  for (int c = 0; c < 10; ++c) gt.at(0, 0, c) = 1;
  double previous = -1;
  for (int k = 1; k <= 10; ++k) {
    pred.at(0, 0, k - 1) = 1;
    const double v = *iou_per_channel(pred, gt).road();
    CHECK(v > previous);
    previous = v;
  }
  CHECK(previous == 1.0);
}

TEST_CASE("mean IoU") {
  const auto one = make_iou(0.3, std::nullopt, 0.9);
  const auto single = mean_iou(std::vector<ChannelIoU>{one});
  CHECK(*single.road() == 0.3);
  CHECK_FALSE(single.lane().has_value());
  CHECK(*single.trajectory() == 0.9);

  const std::vector<ChannelIoU> pair{make_iou(0.2, 0.5, 0.1), make_iou(0.6, std::nullopt, 0.3)};
  const auto m = mean_iou(pair);
  CHECK(*m.road() == doctest::Approx(0.4));
  CHECK(*m.lane() == 0.5);
  CHECK(m.n_samples[kRoad] == 2);
  CHECK(m.n_samples[kLane] == 1);

  // Hand count: lane is defined in two of three samples.
  const std::vector<ChannelIoU> mix{make_iou(1.0, 0.2, 1.0), make_iou(0.0, std::nullopt, 0.5), make_iou(0.5, 0.4, 0.0)};
  const auto mm = mean_iou(mix);
  CHECK(*mm.lane() == doctest::Approx(0.3));
  CHECK(mm.n_samples[kLane] == 2);
  CHECK(*mm.road() == doctest::Approx(0.5));

  std::vector<ChannelIoU> shuffled = mix;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto s = mean_iou(shuffled);
    for (int ch = 0; ch < 3; ++ch) CHECK(*s.value[ch] == doctest::Approx(*mm.value[ch]).epsilon(1e-15));
  }
  const auto none = mean_iou(std::vector<ChannelIoU>{make_iou(std::nullopt, std::nullopt, std::nullopt)});
  CHECK_FALSE(none.road().has_value());
  CHECK(none.n_samples[kRoad] == 0);
}

TEST_CASE("segment labels on an L-shaped route") {
  const std::vector<world::Point2> corners{{0, 0}, {50, 0}, {50, 50}};
  std::vector<double> positions;
  for (double s = 0.5; s < 100.0; s += 1.0) positions.push_back(s);
  const auto labels = label_route_positions(corners, {}, positions);
  REQUIRE(labels.size() == positions.size());
  // Chord-angle oracle on the known polyline: within a window of the corner
  // the chords (s - w, s) and (s, s + w) meet at atan(d / (w - d)).
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const double d = kCurvatureWindowM - std::abs(positions[i] - 50.0);
    const bool at_corner = d > 0 && std::atan2(d, kCurvatureWindowM - d) / kCurvatureWindowM > kTurnCurvature;
    CHECK(labels[i] == (at_corner ? SegmentLabel::Turn : SegmentLabel::Straight));
  }
  std::vector<SegmentLabel> runs;
  for (auto l : labels)
    if (runs.empty() || runs.back() != l) runs.push_back(l);
  CHECK(runs == std::vector<SegmentLabel>{SegmentLabel::Straight, SegmentLabel::Turn, SegmentLabel::Straight});

  const auto with_junction = label_route_positions(corners, {{20, 0}}, positions);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (std::abs(positions[i] - 20.0) <= kJunctionRadiusM) CHECK(with_junction[i] == SegmentLabel::Intersection);
  }
  CHECK(label_name(SegmentLabel::Turn) == "turn");
}

TEST_CASE("a gentle bend is not a turn") {
  // 0.04 rad/m sustained curvature stays under the threshold.
  std::vector<world::Point2> arc;
  const double radius = 25.0;
  for (int k = 0; k <= 60; ++k) {
    const double t = k * 0.02;
    arc.emplace_back(radius * std::sin(t), radius * (1 - std::cos(t)));
  }
  std::vector<double> positions{2.0, 10.0, 20.0};
  for (auto l : label_route_positions(arc, {}, positions)) CHECK(l == SegmentLabel::Straight);
}

TEST_CASE("segment traces") {
  std::vector<ChannelIoU> perfect(7, make_iou(1.0, 1.0, 1.0));
  std::vector<SegmentLabel> labels(7, SegmentLabel::Straight);
  const auto t = segment_trace(perfect, labels);
  CHECK(t.values.size() == 7);
  for (double v : t.values) CHECK(v == 1.0);

  const std::vector<ChannelIoU> mixed{make_iou(0.2, std::nullopt, 0.6), make_iou(std::nullopt, std::nullopt, std::nullopt)};
  const auto m = segment_trace(mixed, std::vector<SegmentLabel>(2, SegmentLabel::Turn));
  CHECK(m.values[0] == doctest::Approx(0.4));
  CHECK(m.values[1] == 1.0);
  CHECK_THROWS_AS(segment_trace(mixed, labels), Error);
}

TEST_CASE("metrics JSON round trip") {
  MetricsReport r;
  r.model = "CVT, Focal loss - 4 cams";
  r.split = "test";
  r.overall = make_iou(0.5, std::nullopt, 0.25);
  RouteBreakdown b;
  b.town = "Town02";
  b.route = "route00";
  b.iou = r.overall;
  b.trace = segment_trace(std::vector<ChannelIoU>{r.overall}, std::vector<SegmentLabel>{SegmentLabel::Intersection});
  b.frames = {0};
  r.routes.push_back(b);
  const auto j = report_to_json(r);
  CHECK(report_to_json(report_from_json(j)) == j);
  CHECK(j.dump().find("null") != std::string::npos);
}

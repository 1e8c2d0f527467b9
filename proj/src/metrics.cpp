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

#include "metrics.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace bevcvt::metrics {
namespace {

using nlohmann::json;

std::vector<double> cumulative(const std::vector<world::Point2>& line) {
  std::vector<double> out(line.size(), 0.0);
  for (std::size_t i = 1; i < line.size(); ++i) out[i] = out[i - 1] + (line[i] - line[i - 1]).norm();
  return out;
}

world::Point2 point_at(const std::vector<world::Point2>& line, const std::vector<double>& cum, double s) {
  if (line.size() == 1) return line.front();
  s = std::clamp(s, 0.0, cum.back());
  std::size_t i = 1;
  while (i + 1 < line.size() && cum[i] < s) ++i;
  const double seg = cum[i] - cum[i - 1];
  const double t = seg > 0.0 ? (s - cum[i - 1]) / seg : 0.0;
  return line[i - 1] + t * (line[i] - line[i - 1]);
}

double heading(const world::Point2& from, const world::Point2& to) {
  const world::Point2 d = to - from;
  return std::atan2(d.y(), d.x());
}

}  // namespace

BinaryGrid binarize(std::span<const float> logits, int channels, int rows, int cols, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorCode::InvalidArgument, "binarize: threshold must lie in (0, 1)");
  BinaryGrid out(channels, rows, cols);
  if (logits.size() != out.cells.size()) fail(ErrorCode::Shape, "binarize: logit count does not match the grid");
  // sigmoid(z) > t  <=>  z > logit(t)
  const double cut = std::log(threshold / (1.0 - threshold));
  for (std::size_t i = 0; i < logits.size(); ++i) out.cells[i] = static_cast<double>(logits[i]) > cut;
  return out;
}

ChannelIoU iou_per_channel(const BinaryGrid& pred, const BinaryGrid& gt) {
  if (pred.channels != gt.channels || pred.rows != gt.rows || pred.cols != gt.cols) {
    fail(ErrorCode::Shape, "iou_per_channel: mask shapes differ");
  }
  if (pred.channels != 3) fail(ErrorCode::Shape, "iou_per_channel: expected 3 channels");
  ChannelIoU out;
  const std::size_t plane = static_cast<std::size_t>(pred.rows) * pred.cols;
  for (int c = 0; c < 3; ++c) {
    std::size_t inter = 0, uni = 0;
    const auto* p = pred.cells.data() + c * plane;
    const auto* g = gt.cells.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const bool a = p[i] != 0, b = g[i] != 0;
      inter += a && b;
      uni += a || b;
    }
    if (uni > 0) {
      out.value[c] = static_cast<double>(inter) / static_cast<double>(uni);
      out.n_samples[c] = 1;
    }
  }
  return out;
}

ChannelIoU mean_iou(std::span<const ChannelIoU> samples) {
  ChannelIoU out;
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0;
    int n = 0;
    for (const auto& s : samples) {
      if (s.value[c]) {
        sum += *s.value[c];
        ++n;
      }
    }
    out.n_samples[c] = n;
    if (n > 0) out.value[c] = sum / n;
  }
  return out;
}

std::string label_name(SegmentLabel label) {
  switch (label) {
    case SegmentLabel::Straight: return "straight";
    case SegmentLabel::Turn: return "turn";
    case SegmentLabel::Intersection: return "intersection";
  }
  return "straight";
}

std::vector<SegmentLabel> label_route_positions(const std::vector<world::Point2>& corners,
                                                const std::vector<world::Point2>& junctions,
                                                std::span<const double> positions) {
  std::vector<SegmentLabel> labels(positions.size(), SegmentLabel::Straight);
  if (corners.empty()) return labels;
  const auto cum = cumulative(corners);
  const double length = cum.back();

  // Dense curvature profile, then keep only sufficiently long runs.
  constexpr double step = 0.25;
  const int n = static_cast<int>(std::floor(length / step)) + 1;
  std::vector<bool> curved(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    const double s = i * step;
    const auto here = point_at(corners, cum, s);
    const auto back = point_at(corners, cum, s - kCurvatureWindowM);
    const auto ahead = point_at(corners, cum, s + kCurvatureWindowM);
    if ((here - back).norm() < 1e-9 || (ahead - here).norm() < 1e-9) continue;
    const double turn = std::abs(world::wrap_angle(heading(here, ahead) - heading(back, here)));
    curved[i] = turn / kCurvatureWindowM > kTurnCurvature;
  }
  std::vector<bool> turn(curved.size(), false);
  for (int i = 0; i < n;) {
    if (!curved[i]) {
      ++i;
      continue;
    }
    int j = i;
    while (j < n && curved[j]) ++j;
    if ((j - i) * step >= kTurnMinLengthM) std::fill(turn.begin() + i, turn.begin() + j, true);
    i = j;
  }

  for (std::size_t k = 0; k < positions.size(); ++k) {
    const double s = std::clamp(positions[k], 0.0, length);
    const auto p = point_at(corners, cum, s);
    const bool near_junction = std::any_of(junctions.begin(), junctions.end(),
                                           [&](const world::Point2& j) { return (j - p).norm() <= kJunctionRadiusM; });
    const int idx = std::clamp(static_cast<int>(std::lround(s / step)), 0, n - 1);
    if (near_junction) labels[k] = SegmentLabel::Intersection;
    else if (turn[idx]) labels[k] = SegmentLabel::Turn;
  }
  return labels;
}

SegmentTrace segment_trace(std::span<const ChannelIoU> per_frame, std::span<const SegmentLabel> labels) {
  if (per_frame.size() != labels.size()) fail(ErrorCode::Shape, "segment_trace: one label per frame required");
  SegmentTrace trace;
  trace.labels.assign(labels.begin(), labels.end());
  for (const auto& f : per_frame) {
    double sum = 0.0;
    int n = 0;
    for (const auto& v : f.value) {
      if (v) {
        sum += *v;
        ++n;
      }
    }
    trace.values.push_back(n > 0 ? sum / n : 1.0);
  }
  return trace;
}

json channel_iou_to_json(const ChannelIoU& c) {
  auto v = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
  return json{{"road", v(c.road())},
              {"trajectory", v(c.trajectory())},
              {"lane", v(c.lane())},
              {"n_samples", {{"road", c.n_samples[kRoad]}, {"trajectory", c.n_samples[kTrajectory]}, {"lane", c.n_samples[kLane]}}}};
}

ChannelIoU channel_iou_from_json(const json& j) {
  ChannelIoU c;
  auto v = [](const json& x) { return x.is_null() ? std::optional<double>{} : std::optional<double>{x.get<double>()}; };
  c.value[kRoad] = v(j.at("road"));
  c.value[kTrajectory] = v(j.at("trajectory"));
  c.value[kLane] = v(j.at("lane"));
  if (j.contains("n_samples")) {
    c.n_samples[kRoad] = j["n_samples"].value("road", 0);
    c.n_samples[kTrajectory] = j["n_samples"].value("trajectory", 0);
    c.n_samples[kLane] = j["n_samples"].value("lane", 0);
  }
  return c;
}

json report_to_json(const MetricsReport& r) {
  json routes = json::array();
  for (const auto& b : r.routes) {
    json labels = json::array();
    for (auto l : b.trace.labels) labels.push_back(label_name(l));
    routes.push_back({{"town", b.town},
                      {"route", b.route},
                      {"iou", channel_iou_to_json(b.iou)},
                      {"frames", b.frames},
                      {"trace", {{"values", b.trace.values}, {"labels", std::move(labels)}}}});
  }
  return json{{"model", r.model}, {"split", r.split}, {"overall", channel_iou_to_json(r.overall)}, {"routes", std::move(routes)}};
}

MetricsReport report_from_json(const json& j) {
  MetricsReport r;
  try {
    r.model = j.at("model").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.overall = channel_iou_from_json(j.at("overall"));
    for (const auto& b : j.value("routes", json::array())) {
      RouteBreakdown rb;
      rb.town = b.at("town").get<std::string>();
      rb.route = b.at("route").get<std::string>();
      rb.iou = channel_iou_from_json(b.at("iou"));
      rb.frames = b.value("frames", std::vector<int>{});
      rb.trace.values = b.at("trace").at("values").get<std::vector<double>>();
      for (const auto& l : b.at("trace").at("labels")) {
        const auto s = l.get<std::string>();
        rb.trace.labels.push_back(s == "turn" ? SegmentLabel::Turn
                                  : s == "intersection" ? SegmentLabel::Intersection
                                                        : SegmentLabel::Straight);
      }
      r.routes.push_back(std::move(rb));
    }
  } catch (const json::exception& ex) {
    fail(ErrorCode::Format, std::string("metrics report: ") + ex.what());
  }
  return r;
}

}  // namespace bevcvt::metrics

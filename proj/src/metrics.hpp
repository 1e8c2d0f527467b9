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
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grid.hpp"
#include "synthworld.hpp"

namespace bevcvt::metrics {

/// Channel k set where sigmoid(logit) > threshold (strict).
BinaryGrid binarize(std::span<const float> logits, int channels, int rows, int cols, double threshold = 0.5);

/// Per-channel IoU, indexed by BevChannel. A channel whose prediction and
/// ground-truth are both empty is undefined for that sample and is skipped
/// when averaging; `n_samples` counts the samples that were scored.
struct ChannelIoU {
  std::array<std::optional<double>, 3> value{};
  std::array<int, 3> n_samples{};

  std::optional<double> road() const { return value[kRoad]; }
  std::optional<double> lane() const { return value[kLane]; }
  std::optional<double> trajectory() const { return value[kTrajectory]; }
};

ChannelIoU iou_per_channel(const BinaryGrid& pred, const BinaryGrid& gt);

/// Arithmetic mean over the samples where each channel is defined.
ChannelIoU mean_iou(std::span<const ChannelIoU> samples);

enum class SegmentLabel { Straight, Turn, Intersection };
std::string label_name(SegmentLabel label);

/// Curvature window and thresholds for route segmentation.
inline constexpr double kCurvatureWindowM = 4.0;
inline constexpr double kTurnCurvature = 0.05;  // rad/m
inline constexpr double kTurnMinLengthM = 4.0;
inline constexpr double kJunctionRadiusM = 8.0;

/// Labels arc-length positions along a route polyline: near a junction
/// (degree >= 3 node) -> Intersection; inside a run of curvature above
/// kTurnCurvature lasting at least kTurnMinLengthM -> Turn; else Straight.
std::vector<SegmentLabel> label_route_positions(const std::vector<world::Point2>& corners,
                                                const std::vector<world::Point2>& junctions,
                                                std::span<const double> positions);

struct SegmentTrace {
  std::vector<double> values;  // per-frame mean over defined channels
  std::vector<SegmentLabel> labels;
};

/// Frames with no defined channel (everything empty in both) score 1.0.
SegmentTrace segment_trace(std::span<const ChannelIoU> per_frame, std::span<const SegmentLabel> labels);

struct RouteBreakdown {
  std::string town;
  std::string route;
  ChannelIoU iou;
  SegmentTrace trace;
  std::vector<int> frames;
};

struct MetricsReport {
  std::string model;
  std::string split;
  ChannelIoU overall;
  std::vector<RouteBreakdown> routes;
};

nlohmann::json channel_iou_to_json(const ChannelIoU& c);
ChannelIoU channel_iou_from_json(const nlohmann::json& j);
nlohmann::json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);

}  // namespace bevcvt::metrics

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
#include <optional>
#include <utility>
#include <vector>

namespace bevcvt {

/// Ego-centred BEV raster layout. Rows run forward-to-back, columns
/// left-to-right; the ego sits at the centre of cell (anchor_row, anchor_col)
/// facing towards row 0.
struct GridSpec {
  int rows = 128;
  int cols = 128;
  double cell_m = 0.25;
  int anchor_row = 96;
  int anchor_col = 64;

  /// (forward, left) metres in the ego frame.
  std::pair<double, double> cell_to_ego(int row, int col) const {
    return {(anchor_row - row) * cell_m, (anchor_col - col) * cell_m};
  }
  std::optional<std::pair<int, int>> ego_to_cell(double forward, double left) const;

  bool operator==(const GridSpec&) const = default;
};

/// Channel-major binary raster (values 0/1).
struct BinaryGrid {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> cells;

  BinaryGrid() = default;
  BinaryGrid(int c, int r, int w) : channels(c), rows(r), cols(w), cells(static_cast<std::size_t>(c) * r * w, 0) {}

  std::uint8_t& at(int c, int r, int col) {
    return cells[(static_cast<std::size_t>(c) * rows + r) * cols + col];
  }
  std::uint8_t at(int c, int r, int col) const {
    return cells[(static_cast<std::size_t>(c) * rows + r) * cols + col];
  }
  std::size_t count(int c) const;

  bool operator==(const BinaryGrid&) const = default;
};

/// BEV channel order.
enum BevChannel : int { kRoad = 0, kLane = 1, kTrajectory = 2 };

}  // namespace bevcvt

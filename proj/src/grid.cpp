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

#include "grid.hpp"

#include <algorithm>
#include <cmath>

namespace bevcvt {

std::optional<std::pair<int, int>> GridSpec::ego_to_cell(double forward, double left) const {
  const int row = anchor_row - static_cast<int>(std::lround(forward / cell_m));
  const int col = anchor_col - static_cast<int>(std::lround(left / cell_m));
  if (row < 0 || row >= rows || col < 0 || col >= cols) return std::nullopt;
  return std::make_pair(row, col);
}

std::size_t BinaryGrid::count(int c) const {
  const auto begin = cells.begin() + static_cast<std::ptrdiff_t>(c) * rows * cols;
  return static_cast<std::size_t>(std::count_if(begin, begin + static_cast<std::ptrdiff_t>(rows) * cols,
                                                [](std::uint8_t v) { return v != 0; }));
}

}  // namespace bevcvt

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

#include <torch/torch.h>

#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <span>
#include <string>

#include "dataset.hpp"

namespace bevcvt::model {

/// One mini-batch in model layout.
struct BatchTensors {
  torch::Tensor images;      // (B, N, 3, H, W) float in [0, 1]
  torch::Tensor unproject;   // (B, N, 3, 3) float64, R^-1 K^-1 per view
  torch::Tensor trajectory;  // (B, 1, rows, cols) float {0, 1}
  torch::Tensor targets;     // (B, 3, rows, cols) float {0, 1}

  int views() const { return static_cast<int>(images.size(1)); }
  /// Same batch with views reordered by `order`.
  BatchTensors permuted(const std::vector<int>& order) const;
};

/// R^-1 K^-1 for one calibrated view.
Eigen::Matrix3d unproject_matrix(const geometry::CameraModel& cam);

BatchTensors to_tensors(std::span<const dataset::Sample> samples);

/// Common interface of the BEV predictors; forward returns (B, 3, rows,
/// cols) logits.
class BevNet : public torch::nn::Module {
 public:
  virtual torch::Tensor forward(const BatchTensors& batch) = 0;
  virtual std::string arch() const = 0;
  virtual nlohmann::json config_json() const = 0;
  virtual int n_views() const = 0;
};

std::int64_t parameter_count(const torch::nn::Module& m);

/// Builds an untrained model from {"arch": "cvt"|"unet", ...config}. The
/// global torch seed must be set by the caller for reproducible init.
std::shared_ptr<BevNet> make_model(const nlohmann::json& spec);

inline constexpr int kCheckpointVersion = 1;

/// Single archive: {"version", "arch", "config", ...extra} JSON plus the
/// named parameters and buffers.
void save_checkpoint(const std::shared_ptr<BevNet>& model, const std::filesystem::path& path,
                     const nlohmann::json& extra = nlohmann::json::object());

struct LoadedModel {
  std::shared_ptr<BevNet> net;
  nlohmann::json meta;
};

LoadedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace bevcvt::model

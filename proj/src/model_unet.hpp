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

#include <nlohmann/json.hpp>
#include <vector>

#include "model_common.hpp"
#include "model_cvt.hpp"

namespace bevcvt::model {

struct UnetConfig {
  /// Encoder widths, one per resolution level starting at full grid size.
  std::vector<int> widths{8, 16, 32, 64, 128};
  int n_views = 4;
  GridSpec grid;
};

UnetConfig unet_config_from_json(const nlohmann::json& j);
nlohmann::json unet_config_to_json(const UnetConfig& c);
void validate(const UnetConfig& c);

struct DoubleConvImpl : torch::nn::Module {
  DoubleConvImpl(int in, int out);
  torch::Tensor forward(const torch::Tensor& x);

  ConvBnRelu a{nullptr}, b{nullptr};
};
TORCH_MODULE(DoubleConv);

/// Image-space baseline: camera views are resized to the BEV grid and
/// stacked channel-wise with the trajectory raster. No calibration is used.
class UNet : public BevNet {
 public:
  explicit UNet(UnetConfig config);

  torch::Tensor forward(const BatchTensors& batch) override;
  std::string arch() const override { return "unet"; }
  nlohmann::json config_json() const override { return unet_config_to_json(config_); }
  int n_views() const override { return config_.n_views; }
  const UnetConfig& config() const { return config_; }

  /// Replaces every skip tensor with zeros when set.
  bool ablate_skips = false;

  /// (B, 3N + 1, rows, cols) network input for a batch.
  torch::Tensor stack_input(const BatchTensors& batch) const;

 private:
  UnetConfig config_;
  std::vector<DoubleConv> down_;
  std::vector<torch::nn::ConvTranspose2d> up_;
  std::vector<DoubleConv> merge_;
  torch::nn::Conv2d head_{nullptr};
};

}  // namespace bevcvt::model

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

#include "model_unet.hpp"

#include "error.hpp"

namespace bevcvt::model {

namespace F = torch::nn::functional;

UnetConfig unet_config_from_json(const nlohmann::json& j) {
  UnetConfig c;
  try {
    c.widths = j.value("widths", c.widths);
    c.n_views = j.value("n_views", c.n_views);
    if (j.contains("grid")) c.grid = dataset::grid_from_json(j.at("grid"));
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::Config, std::string("unet config: ") + ex.what());
  }
  validate(c);
  return c;
}

nlohmann::json unet_config_to_json(const UnetConfig& c) {
  return {{"widths", c.widths}, {"n_views", c.n_views}, {"grid", dataset::grid_to_json(c.grid)}};
}

void validate(const UnetConfig& c) {
  if (c.widths.size() < 2) fail(ErrorCode::Config, "unet: need at least two levels");
  for (int w : c.widths) {
    if (w <= 0) fail(ErrorCode::Config, "unet: widths must be positive");
  }
  if (c.n_views < 1) fail(ErrorCode::Config, "unet: n_views must be positive");
  const int f = 1 << (c.widths.size() - 1);
  if (c.grid.rows % f != 0 || c.grid.cols % f != 0) {
    fail(ErrorCode::Config, "unet: grid size must be divisible by 2^(levels-1)");
  }
}

DoubleConvImpl::DoubleConvImpl(int in, int out) {
  a = register_module("a", ConvBnRelu(in, out));
  b = register_module("b", ConvBnRelu(out, out));
}

torch::Tensor DoubleConvImpl::forward(const torch::Tensor& x) { return b(a(x)); }

UNet::UNet(UnetConfig config) : config_(std::move(config)) {
  validate(config_);
  const auto& w = config_.widths;
  int in = 3 * config_.n_views + 1;
  for (std::size_t i = 0; i < w.size(); ++i) {
    down_.push_back(register_module("down" + std::to_string(i), DoubleConv(in, w[i])));
    in = w[i];
  }
  for (std::size_t i = w.size() - 1; i > 0; --i) {
    const auto name = std::to_string(i - 1);
    up_.push_back(register_module(
        "up" + name, torch::nn::ConvTranspose2d(torch::nn::ConvTranspose2dOptions(w[i], w[i - 1], 2).stride(2))));
    merge_.push_back(register_module("merge" + name, DoubleConv(2 * w[i - 1], w[i - 1])));
  }
  head_ = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(w[0], 3, 1)));
}

torch::Tensor UNet::stack_input(const BatchTensors& batch) const {
  if (batch.views() != config_.n_views) {
    fail(ErrorCode::Config, "unet: model expects " + std::to_string(config_.n_views) + " views, batch has " +
                                std::to_string(batch.views()));
  }
  const auto b = batch.images.size(0);
  auto images = batch.images.flatten(1, 2);  // (B, 3N, H, W)
  if (images.size(2) != config_.grid.rows || images.size(3) != config_.grid.cols) {
    images = F::interpolate(images, F::InterpolateFuncOptions()
                                        .size(std::vector<int64_t>{config_.grid.rows, config_.grid.cols})
                                        .mode(torch::kBilinear)
                                        .align_corners(false));
  }
  if (batch.trajectory.size(0) != b) fail(ErrorCode::Shape, "unet: trajectory batch size mismatch");
  return torch::cat({images, batch.trajectory}, 1);
}

torch::Tensor UNet::forward(const BatchTensors& batch) {
  auto x = stack_input(batch);
  std::vector<torch::Tensor> skips;
  for (std::size_t i = 0; i < down_.size(); ++i) {
    if (i > 0) x = F::max_pool2d(x, F::MaxPool2dFuncOptions(2));
    x = down_[i]->forward(x);
    skips.push_back(x);
  }
  for (std::size_t j = 0; j < up_.size(); ++j) {
    x = up_[j]->forward(x);
    auto skip = skips[skips.size() - 2 - j];
    if (ablate_skips) skip = torch::zeros_like(skip);
    x = merge_[j]->forward(torch::cat({x, skip}, 1));
  }
  return head_(x);
}

}  // namespace bevcvt::model

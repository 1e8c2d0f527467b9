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

#include <array>
#include <nlohmann/json.hpp>
#include <string>

namespace bevcvt::losses {

enum class LossKind { Focal, L1 };

struct LossConfig {
  LossKind kind = LossKind::Focal;
  double gamma = 2.0;
  double alpha = 0.25;
  std::array<double, 3> channel_weights{1.0, 1.0, 1.0};
};

std::string kind_name(LossKind kind);
LossKind kind_from_name(const std::string& name);
nlohmann::json loss_config_to_json(const LossConfig& c);
LossConfig loss_config_from_json(const nlohmann::json& j);

/// Loss value together with its gradient with respect to the logits.
struct LossWithGrad {
  torch::Tensor value;
  torch::Tensor grad;
};

/// Mean of w * (-alpha_t (1 - p_t)^gamma log p_t), evaluated through
/// log-sigmoid. `weights` broadcasts against the logits; pass an undefined
/// tensor for uniform weighting.
LossWithGrad focal_loss_with_grad(const torch::Tensor& logits, const torch::Tensor& targets,
                                  const torch::Tensor& weights, double gamma, double alpha);

/// Mean of w * |sigmoid(logit) - target|.
LossWithGrad l1_loss_with_grad(const torch::Tensor& logits, const torch::Tensor& targets,
                               const torch::Tensor& weights);

// Autograd-aware wrappers backed by the analytic gradients above.
torch::Tensor focal_loss(const torch::Tensor& logits, const torch::Tensor& targets, double gamma, double alpha,
                         const torch::Tensor& weights = {});
torch::Tensor l1_loss(const torch::Tensor& logits, const torch::Tensor& targets, const torch::Tensor& weights = {});

/// Applies the configured loss to (B, 3, H, W) logits with per-channel
/// weights.
torch::Tensor compute_loss(const LossConfig& config, const torch::Tensor& logits, const torch::Tensor& targets);

}  // namespace bevcvt::losses

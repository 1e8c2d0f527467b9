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

#include "losses.hpp"

#include "error.hpp"

namespace bevcvt::losses {
namespace {

void check_shapes(const torch::Tensor& logits, const torch::Tensor& targets, const char* who) {
  if (logits.sizes() != targets.sizes()) {
    std::ostringstream os;
    os << who << ": logits " << logits.sizes() << " vs targets " << targets.sizes();
    fail(ErrorCode::Shape, os.str());
  }
}

torch::Tensor weighted(const torch::Tensor& t, const torch::Tensor& weights) {
  return weights.defined() ? t * weights : t;
}

struct FocalFunction : torch::autograd::Function<FocalFunction> {
  static torch::Tensor forward(torch::autograd::AutogradContext* ctx, const torch::Tensor& logits,
                               const torch::Tensor& targets, const torch::Tensor& weights, double gamma, double alpha) {
    auto r = focal_loss_with_grad(logits.detach(), targets, weights, gamma, alpha);
    ctx->save_for_backward({r.grad});
    return r.value;
  }
  static torch::autograd::tensor_list backward(torch::autograd::AutogradContext* ctx,
                                               torch::autograd::tensor_list grad_out) {
    const auto grad = ctx->get_saved_variables()[0];
    return {grad * grad_out[0], torch::Tensor(), torch::Tensor(), torch::Tensor(), torch::Tensor()};
  }
};

struct L1Function : torch::autograd::Function<L1Function> {
  static torch::Tensor forward(torch::autograd::AutogradContext* ctx, const torch::Tensor& logits,
                               const torch::Tensor& targets, const torch::Tensor& weights) {
    auto r = l1_loss_with_grad(logits.detach(), targets, weights);
    ctx->save_for_backward({r.grad});
    return r.value;
  }
  static torch::autograd::tensor_list backward(torch::autograd::AutogradContext* ctx,
                                               torch::autograd::tensor_list grad_out) {
    const auto grad = ctx->get_saved_variables()[0];
    return {grad * grad_out[0], torch::Tensor(), torch::Tensor()};
  }
};

}  // namespace

std::string kind_name(LossKind kind) { return kind == LossKind::Focal ? "focal" : "l1"; }

LossKind kind_from_name(const std::string& name) {
  if (name == "focal") return LossKind::Focal;
  if (name == "l1") return LossKind::L1;
  fail(ErrorCode::Config, "unknown loss kind: " + name);
}

nlohmann::json loss_config_to_json(const LossConfig& c) {
  return {{"kind", kind_name(c.kind)}, {"gamma", c.gamma}, {"alpha", c.alpha}, {"channel_weights", c.channel_weights}};
}

LossConfig loss_config_from_json(const nlohmann::json& j) {
  LossConfig c;
  try {
    if (j.contains("kind")) c.kind = kind_from_name(j.at("kind").get<std::string>());
    c.gamma = j.value("gamma", c.gamma);
    c.alpha = j.value("alpha", c.alpha);
    if (j.contains("channel_weights")) c.channel_weights = j.at("channel_weights").get<std::array<double, 3>>();
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::Config, std::string("loss config: ") + ex.what());
  }
  if (c.gamma < 0.0) fail(ErrorCode::Config, "focal gamma must be >= 0");
  if (!(c.alpha > 0.0 && c.alpha <= 1.0)) fail(ErrorCode::Config, "focal alpha must lie in (0, 1]");
  return c;
}

LossWithGrad focal_loss_with_grad(const torch::Tensor& logits, const torch::Tensor& targets,
                                  const torch::Tensor& weights, double gamma, double alpha) {
  check_shapes(logits, targets, "focal_loss");
  const auto y = targets.to(logits.dtype());
  const auto sign = 2.0 * y - 1.0;
  const auto zt = sign * logits;
  const auto log_pt = torch::log_sigmoid(zt);
  const auto pt = torch::sigmoid(zt);
  const auto one_minus_pt = torch::sigmoid(-zt);
  const auto alpha_t = y * alpha + (1.0 - y) * (1.0 - alpha);
  const auto modulation = one_minus_pt.pow(gamma);
  const auto n = static_cast<double>(logits.numel());

  const auto per_cell = -alpha_t * modulation * log_pt;
  // d/dz of -alpha_t (1-p_t)^g log p_t with p_t = sigmoid(s z).
  const auto grad = -sign * alpha_t * modulation * (one_minus_pt - gamma * pt * log_pt);
  return {weighted(per_cell, weights).sum() / n, weighted(grad, weights) / n};
}

LossWithGrad l1_loss_with_grad(const torch::Tensor& logits, const torch::Tensor& targets, const torch::Tensor& weights) {
  check_shapes(logits, targets, "l1_loss");
  const auto y = targets.to(logits.dtype());
  const auto p = torch::sigmoid(logits);
  const auto diff = p - y;
  const auto n = static_cast<double>(logits.numel());
  const auto grad = torch::sign(diff) * p * (1.0 - p);
  return {weighted(diff.abs(), weights).sum() / n, weighted(grad, weights) / n};
}

torch::Tensor focal_loss(const torch::Tensor& logits, const torch::Tensor& targets, double gamma, double alpha,
                         const torch::Tensor& weights) {
  return FocalFunction::apply(logits, targets, weights.defined() ? weights : torch::ones({}, logits.options()), gamma,
                              alpha);
}

torch::Tensor l1_loss(const torch::Tensor& logits, const torch::Tensor& targets, const torch::Tensor& weights) {
  return L1Function::apply(logits, targets, weights.defined() ? weights : torch::ones({}, logits.options()));
}

torch::Tensor compute_loss(const LossConfig& config, const torch::Tensor& logits, const torch::Tensor& targets) {
  torch::Tensor weights;
  if (config.channel_weights != std::array<double, 3>{1.0, 1.0, 1.0}) {
    if (logits.dim() != 4 || logits.size(1) != 3) fail(ErrorCode::Shape, "channel weights need (B, 3, H, W) logits");
    weights = torch::tensor(std::vector<double>(config.channel_weights.begin(), config.channel_weights.end()),
                            logits.options())
                  .view({1, 3, 1, 1});
  }
  if (config.kind == LossKind::Focal) return focal_loss(logits, targets, config.gamma, config.alpha, weights);
  return l1_loss(logits, targets, weights);
}

}  // namespace bevcvt::losses

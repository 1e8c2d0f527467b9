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

#include "model_cvt.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "error.hpp"

namespace bevcvt::model {

namespace F = torch::nn::functional;

CvtConfig cvt_config_from_json(const nlohmann::json& j) {
  CvtConfig c;
  try {
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.n_resolutions = j.value("n_resolutions", c.n_resolutions);
    c.backbone_widths = j.value("backbone_widths", c.backbone_widths);
    c.fine_stride = j.value("fine_stride", c.fine_stride);
    c.map_size = j.value("map_size", c.map_size);
    c.decoder_widths = j.value("decoder_widths", c.decoder_widths);
    c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
    c.n_views = j.value("n_views", c.n_views);
    c.image_height = j.value("image_height", c.image_height);
    c.image_width = j.value("image_width", c.image_width);
    if (j.contains("grid")) c.grid = dataset::grid_from_json(j.at("grid"));
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::Config, std::string("cvt config: ") + ex.what());
  }
  validate(c);
  return c;
}

nlohmann::json cvt_config_to_json(const CvtConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"n_heads", c.n_heads},
          {"n_resolutions", c.n_resolutions},
          {"backbone_widths", c.backbone_widths},
          {"fine_stride", c.fine_stride},
          {"map_size", c.map_size},
          {"decoder_widths", c.decoder_widths},
          {"mlp_ratio", c.mlp_ratio},
          {"n_views", c.n_views},
          {"image_height", c.image_height},
          {"image_width", c.image_width},
          {"grid", dataset::grid_to_json(c.grid)}};
}

void validate(const CvtConfig& c) {
  if (c.embed_dim <= 0 || c.n_heads <= 0 || c.embed_dim % c.n_heads != 0) {
    fail(ErrorCode::Config, "cvt: embed_dim must be a positive multiple of n_heads");
  }
  if (c.n_resolutions < 1 || c.n_resolutions > 2) fail(ErrorCode::Config, "cvt: n_resolutions must be 1 or 2");
  if (c.backbone_widths.size() != 4) fail(ErrorCode::Config, "cvt: backbone_widths needs four entries");
  if (c.fine_stride != 4 && c.fine_stride != 8) fail(ErrorCode::Config, "cvt: fine_stride must be 4 or 8");
  if (c.n_views < 1) fail(ErrorCode::Config, "cvt: n_views must be positive");
  const int coarse = 2 * c.fine_stride;
  if (c.image_height % coarse != 0 || c.image_width % coarse != 0) {
    fail(ErrorCode::Config, "cvt: image size must be divisible by the coarse stride " + std::to_string(coarse));
  }
  if (c.map_size <= 0 || c.grid.rows % c.map_size != 0 || c.grid.cols % c.map_size != 0 || c.grid.rows != c.grid.cols) {
    fail(ErrorCode::Config, "cvt: map_size must divide a square BEV grid");
  }
  const int ratio = c.grid.rows / c.map_size;
  if ((ratio & (ratio - 1)) != 0 || (1 << c.decoder_widths.size()) != ratio) {
    fail(ErrorCode::Config, "cvt: decoder needs log2(grid / map_size) x2 stages");
  }
}

ConvBnReluImpl::ConvBnReluImpl(int in, int out, int stride, int kernel) {
  conv = register_module(
      "conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2).bias(false)));
  bn = register_module("bn", torch::nn::BatchNorm2d(out));
}

torch::Tensor ConvBnReluImpl::forward(const torch::Tensor& x) { return torch::relu(bn(conv(x))); }

BackboneImpl::BackboneImpl(const std::vector<int>& w, int fine_stride) {
  block1 = register_module("block1", torch::nn::Sequential(ConvBnRelu(3, w[0], 2)));
  block2 = register_module("block2", torch::nn::Sequential(ConvBnRelu(w[0], w[1], 2), ConvBnRelu(w[1], w[1])));
  block3 = register_module("block3", torch::nn::Sequential(ConvBnRelu(w[1], w[2], fine_stride / 4), ConvBnRelu(w[2], w[2])));
  block4 = register_module("block4", torch::nn::Sequential(ConvBnRelu(w[2], w[3], 2), ConvBnRelu(w[3], w[3])));
}

std::pair<torch::Tensor, torch::Tensor> BackboneImpl::forward(const torch::Tensor& x) {
  const auto fine = block3->forward(block2->forward(block1->forward(x)));
  const auto coarse = block4->forward(fine);
  return {coarse, fine};
}

torch::Tensor ray_directions(const torch::Tensor& unproject, int image_h, int image_w, int fh, int fw) {
  auto opts = torch::TensorOptions().dtype(torch::kDouble);
  const auto v = (torch::arange(fh, opts) + 0.5) * (static_cast<double>(image_h) / fh);
  const auto u = (torch::arange(fw, opts) + 0.5) * (static_cast<double>(image_w) / fw);
  const auto grid = torch::meshgrid({v, u}, "ij");
  const auto pixels = torch::stack({grid[1].reshape(-1), grid[0].reshape(-1), torch::ones({fh * fw}, opts)});
  auto d = torch::matmul(unproject.to(torch::kDouble), pixels);  // (B, N, 3, L)
  d = d / d.norm(2, 2, true);
  return d.transpose(2, 3).to(torch::kFloat).contiguous();
}

CameraEmbeddingImpl::CameraEmbeddingImpl(int dim) {
  fc1 = register_module("fc1", torch::nn::Linear(3, dim));
  fc2 = register_module("fc2", torch::nn::Linear(dim, dim));
}

torch::Tensor CameraEmbeddingImpl::forward(const torch::Tensor& directions) { return fc2(torch::relu(fc1(directions))); }

torch::Tensor attend(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v, int n_heads) {
  const auto b = q.size(0);
  const auto dim = q.size(2);
  const auto dh = dim / n_heads;
  auto split = [&](const torch::Tensor& t) { return t.view({b, t.size(1), n_heads, dh}).permute({0, 2, 1, 3}); };
  const auto qh = split(q), kh = split(k), vh = split(v);
  const auto logits = torch::matmul(qh, kh.transpose(-2, -1)) / std::sqrt(static_cast<double>(dh));
  const auto out = torch::matmul(torch::softmax(logits, -1), vh);  // (B, H, Lq, dh)
  return out.permute({0, 2, 1, 3}).reshape({b, q.size(1), dim});
}

CrossViewAttentionImpl::CrossViewAttentionImpl(int d, int heads, int mlp_ratio) : dim(d), n_heads(heads) {
  q_norm = register_module("q_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  // Keys carry no additive parameters: a shift common to every key cancels in
  // the softmax and would never receive gradient.
  k_norm = register_module("k_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d}).elementwise_affine(false)));
  v_norm = register_module("v_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  to_q = register_module("to_q", torch::nn::Linear(d, d));
  to_k = register_module("to_k", torch::nn::Linear(torch::nn::LinearOptions(d, d).bias(false)));
  to_v = register_module("to_v", torch::nn::Linear(d, d));
  to_out = register_module("to_out", torch::nn::Linear(d, d));
  // Projections start as in torch::nn::MultiheadAttention.
  for (auto* lin : {&to_q, &to_k, &to_v, &to_out}) {
    torch::nn::init::xavier_uniform_((*lin)->weight);
    if ((*lin)->bias.defined()) torch::nn::init::zeros_((*lin)->bias);
  }
  mlp_norm = register_module("mlp_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  mlp = register_module("mlp", torch::nn::Sequential(torch::nn::Linear(d, d * mlp_ratio), torch::nn::GELU(),
                                                     torch::nn::Linear(d * mlp_ratio, d)));
  refine = register_module(
      "refine", torch::nn::Sequential(ConvBnRelu(d, d),
                                      torch::nn::Conv2d(torch::nn::Conv2dOptions(d, d, 3).padding(1).bias(false)),
                                      torch::nn::BatchNorm2d(d)));
}

torch::Tensor CrossViewAttentionImpl::forward(const torch::Tensor& map, const torch::Tensor& bev_pos,
                                              const torch::Tensor& features, const torch::Tensor& embeddings) {
  if (features.sizes() != embeddings.sizes() || features.size(-1) != dim || map.size(1) != dim) {
    fail(ErrorCode::Shape, "cross_view_attention: feature/embedding/map dimensions disagree");
  }
  const auto b = map.size(0), h = map.size(2), w = map.size(3);
  const auto tokens = map.flatten(2).transpose(1, 2);  // (B, hw, D)
  const auto queries = (map + bev_pos.unsqueeze(0)).flatten(2).transpose(1, 2);
  const auto keys = (features + embeddings).reshape({b, -1, dim});
  const auto values = features.reshape({b, -1, dim});

  auto x = tokens + to_out(attend(to_q(q_norm(queries)), to_k(k_norm(keys)), to_v(v_norm(values)), n_heads));
  x = x + mlp->forward(mlp_norm(x));
  const auto grid = x.transpose(1, 2).reshape({b, dim, h, w});
  return torch::relu(grid + refine->forward(grid));
}

torch::Tensor bev_sinusoidal_encoding(int dim, int map_size, const GridSpec& grid) {
  const int n_freq = dim / 4;
  const double cells_per = static_cast<double>(grid.rows) / map_size;
  auto enc = torch::zeros({dim, map_size, map_size}, torch::kFloat);
  auto acc = enc.accessor<float, 3>();
  // Wavelengths from 2 m to the full grid extent.
  const double w_max = 2.0 * std::numbers::pi / 2.0;
  const double w_min = 2.0 * std::numbers::pi / (grid.rows * grid.cell_m);
  for (int i = 0; i < map_size; ++i) {
    for (int j = 0; j < map_size; ++j) {
      const double row = (i + 0.5) * cells_per - 0.5;
      const double col = (j + 0.5) * cells_per - 0.5;
      const double fwd = (grid.anchor_row - row) * grid.cell_m;
      const double left = (grid.anchor_col - col) * grid.cell_m;
      for (int k = 0; k < n_freq; ++k) {
        const double t = n_freq > 1 ? static_cast<double>(k) / (n_freq - 1) : 0.0;
        const double omega = w_max * std::pow(w_min / w_max, t);
        acc[4 * k + 0][i][j] = static_cast<float>(std::sin(omega * fwd));
        acc[4 * k + 1][i][j] = static_cast<float>(std::cos(omega * fwd));
        acc[4 * k + 2][i][j] = static_cast<float>(std::sin(omega * left));
        acc[4 * k + 3][i][j] = static_cast<float>(std::cos(omega * left));
      }
    }
  }
  return enc;
}

CrossViewTransformer::CrossViewTransformer(CvtConfig config) : config_(std::move(config)) {
  validate(config_);
  const int d = config_.embed_dim;
  const auto& w = config_.backbone_widths;
  backbone_ = register_module("backbone", Backbone(w, config_.fine_stride));
  proj_coarse_ = register_module("proj_coarse", torch::nn::Conv2d(torch::nn::Conv2dOptions(w[3], d, 1)));
  proj_fine_ = register_module("proj_fine", torch::nn::Conv2d(torch::nn::Conv2dOptions(w[2], d, 1)));
  for (int r = 0; r < config_.n_resolutions; ++r) {
    cam_embed_.push_back(register_module("cam_embed" + std::to_string(r), CameraEmbedding(d)));
    stages_.push_back(register_module("stage" + std::to_string(r), CrossViewAttention(d, config_.n_heads, config_.mlp_ratio)));
  }
  map_embedding_ = register_parameter("map_embedding", 0.1 * torch::randn({d, config_.map_size, config_.map_size}));
  bev_pos_ = register_buffer("bev_pos", bev_sinusoidal_encoding(d, config_.map_size, config_.grid));
  map_init_ = register_module("map_init", torch::nn::Conv2d(torch::nn::Conv2dOptions(d + 1, d, 1)));

  decoder_ = register_module("decoder", torch::nn::Sequential());
  int in = d;
  for (int width : config_.decoder_widths) {
    decoder_->push_back(torch::nn::Upsample(
        torch::nn::UpsampleOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kBilinear).align_corners(false)));
    decoder_->push_back(ConvBnRelu(in, width));
    in = width;
  }
  decoder_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, 3, 1)));
}

std::vector<torch::Tensor> CrossViewTransformer::encode_images(const torch::Tensor& images) {
  if (images.dim() != 5 || images.size(2) != 3 || images.size(3) != config_.image_height ||
      images.size(4) != config_.image_width) {
    std::ostringstream os;
    os << "cvt: expected (B, N, 3, " << config_.image_height << ", " << config_.image_width << ") images, got "
       << images.sizes();
    fail(ErrorCode::Shape, os.str());
  }
  const auto b = images.size(0), n = images.size(1);
  const auto [coarse, fine] = backbone_->forward(images.flatten(0, 1));
  auto unflatten = [&](const torch::Tensor& t) { return t.view({b, n, t.size(1), t.size(2), t.size(3)}); };
  std::vector<torch::Tensor> out{unflatten(proj_coarse_(coarse))};
  if (config_.n_resolutions > 1) out.push_back(unflatten(proj_fine_(fine)));
  return out;
}

torch::Tensor CrossViewTransformer::camera_positional_embedding(int r, const torch::Tensor& unproject, int fh, int fw) {
  return cam_embed_.at(static_cast<std::size_t>(r))
      ->forward(ray_directions(unproject, config_.image_height, config_.image_width, fh, fw));
}

torch::Tensor CrossViewTransformer::initial_map(const torch::Tensor& trajectory) {
  const auto b = trajectory.size(0);
  const int k = config_.grid.rows / config_.map_size;
  const auto pooled = F::avg_pool2d(trajectory, F::AvgPool2dFuncOptions(k).stride(k));
  return map_init_(torch::cat({map_embedding_.unsqueeze(0).expand({b, -1, -1, -1}), pooled}, 1));
}

torch::Tensor CrossViewTransformer::forward(const BatchTensors& batch) {
  if (batch.views() != config_.n_views) {
    fail(ErrorCode::Config, "cvt: model expects " + std::to_string(config_.n_views) + " views, batch has " +
                                std::to_string(batch.views()));
  }
  const auto features = encode_images(batch.images);
  auto map = initial_map(batch.trajectory);
  for (int r = 0; r < config_.n_resolutions; ++r) {
    const auto& f = features[static_cast<std::size_t>(r)];  // (B, N, D, h, w)
    const int fh = static_cast<int>(f.size(3)), fw = static_cast<int>(f.size(4));
    const auto tokens = f.flatten(3).transpose(2, 3);  // (B, N, hw, D)
    const auto emb = camera_positional_embedding(r, batch.unproject, fh, fw);
    map = stages_[static_cast<std::size_t>(r)]->forward(map, bev_pos_, tokens, emb);
  }
  return decoder_->forward(map);
}

}  // namespace bevcvt::model

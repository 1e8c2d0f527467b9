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

namespace bevcvt::model {

struct CvtConfig {
  int embed_dim = 64;
  int n_heads = 4;
  int n_resolutions = 2;
  /// Four backbone blocks; block 3 yields the fine features, block 4 the
  /// coarse ones at twice the fine stride.
  std::vector<int> backbone_widths{16, 32, 64, 128};
  /// Stride of the fine feature map, 4 or 8.
  int fine_stride = 8;
  int map_size = 16;
  /// One x2 upsampling stage per entry.
  std::vector<int> decoder_widths{32, 16, 16};
  int mlp_ratio = 2;
  int n_views = 4;
  int image_height = 128;
  int image_width = 128;
  GridSpec grid;
};

CvtConfig cvt_config_from_json(const nlohmann::json& j);
nlohmann::json cvt_config_to_json(const CvtConfig& c);
/// Throws Config on violated invariants.
void validate(const CvtConfig& c);

struct ConvBnReluImpl : torch::nn::Module {
  ConvBnReluImpl(int in, int out, int stride = 1, int kernel = 3);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv{nullptr};
  torch::nn::BatchNorm2d bn{nullptr};
};
TORCH_MODULE(ConvBnRelu);

/// Shared per-view encoder with two output resolutions.
struct BackboneImpl : torch::nn::Module {
  BackboneImpl(const std::vector<int>& widths, int fine_stride);
  /// x: (M, 3, H, W). Returns {coarse, fine} maps.
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& x);

  torch::nn::Sequential block1{nullptr}, block2{nullptr}, block3{nullptr}, block4{nullptr};
};
TORCH_MODULE(Backbone);

/// Unit-length ray directions R^-1 K^-1 x for the centres of an
/// (fh, fw) feature grid laid over an (H, W) image. unproject is (B, N, 3, 3)
/// float64; result is (B, N, fh*fw, 3) float32.
torch::Tensor ray_directions(const torch::Tensor& unproject, int image_h, int image_w, int fh, int fw);

/// Shared MLP turning ray directions into D-dimensional embeddings.
struct CameraEmbeddingImpl : torch::nn::Module {
  explicit CameraEmbeddingImpl(int dim);
  /// directions (..., 3) -> (..., D)
  torch::Tensor forward(const torch::Tensor& directions);

  torch::nn::Linear fc1{nullptr}, fc2{nullptr};
};
TORCH_MODULE(CameraEmbedding);

/// Scaled dot-product attention over the key axis. q (B, Lq, D), k and v
/// (B, Lk, D); heads split D evenly.
torch::Tensor attend(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v, int n_heads);

/// One refinement stage: map queries attend over the keys/values of every
/// view at one feature resolution, followed by an MLP and a residual conv
/// block on the BEV grid.
struct CrossViewAttentionImpl : torch::nn::Module {
  CrossViewAttentionImpl(int dim, int n_heads, int mlp_ratio);
  /// map (B, D, h, w); bev_pos (D, h, w); features and embeddings
  /// (B, N, L, D). Returns the refined map (B, D, h, w).
  torch::Tensor forward(const torch::Tensor& map, const torch::Tensor& bev_pos, const torch::Tensor& features,
                        const torch::Tensor& embeddings);

  int dim;
  int n_heads;
  torch::nn::LayerNorm q_norm{nullptr}, k_norm{nullptr}, v_norm{nullptr}, mlp_norm{nullptr};
  torch::nn::Linear to_q{nullptr}, to_k{nullptr}, to_v{nullptr}, to_out{nullptr};
  torch::nn::Sequential mlp{nullptr};
  torch::nn::Sequential refine{nullptr};
};
TORCH_MODULE(CrossViewAttention);

/// Fixed sinusoidal encoding of the metric (forward, left) position of each
/// map cell centre. Returns (D, map, map).
torch::Tensor bev_sinusoidal_encoding(int dim, int map_size, const GridSpec& grid);

class CrossViewTransformer : public BevNet {
 public:
  explicit CrossViewTransformer(CvtConfig config);

  torch::Tensor forward(const BatchTensors& batch) override;
  std::string arch() const override { return "cvt"; }
  nlohmann::json config_json() const override { return cvt_config_to_json(config_); }
  int n_views() const override { return config_.n_views; }
  const CvtConfig& config() const { return config_; }

  /// (B, N, 3, H, W) -> per resolution (coarse first) (B, N, D, h, w).
  std::vector<torch::Tensor> encode_images(const torch::Tensor& images);
  /// Camera-aware embedding of stage `r` for an (fh, fw) grid: (B, N, fh*fw, D).
  torch::Tensor camera_positional_embedding(int r, const torch::Tensor& unproject, int fh, int fw);
  /// Initial map state from the learned grid and the pooled trajectory.
  torch::Tensor initial_map(const torch::Tensor& trajectory);

 private:
  CvtConfig config_;
  Backbone backbone_{nullptr};
  torch::nn::Conv2d proj_coarse_{nullptr}, proj_fine_{nullptr};
  std::vector<CameraEmbedding> cam_embed_;
  std::vector<CrossViewAttention> stages_;
  torch::Tensor map_embedding_;
  torch::Tensor bev_pos_;
  torch::nn::Conv2d map_init_{nullptr};
  torch::nn::Sequential decoder_{nullptr};
};

}  // namespace bevcvt::model

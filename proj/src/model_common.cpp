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

#include "model_common.hpp"

#include "error.hpp"
#include "model_cvt.hpp"
#include "model_unet.hpp"

namespace bevcvt::model {

BatchTensors BatchTensors::permuted(const std::vector<int>& order) const {
  const auto idx = torch::tensor(std::vector<std::int64_t>(order.begin(), order.end()), torch::kLong);
  BatchTensors out = *this;
  out.images = images.index_select(1, idx);
  out.unproject = unproject.index_select(1, idx);
  return out;
}

Eigen::Matrix3d unproject_matrix(const geometry::CameraModel& cam) {
  return cam.world_to_optical().transpose() * cam.intrinsics.inverse();
}

BatchTensors to_tensors(std::span<const dataset::Sample> samples) {
  if (samples.empty()) fail(ErrorCode::InvalidArgument, "to_tensors: empty batch");
  const auto& first = samples.front();
  const int b = static_cast<int>(samples.size());
  const int n = static_cast<int>(first.views.size());
  const int h = first.views.front().image.height;
  const int w = first.views.front().image.width;
  const int rows = first.grid.rows, cols = first.grid.cols;

  auto images = torch::empty({b, n, 3, h, w}, torch::kFloat);
  auto unproject = torch::empty({b, n, 3, 3}, torch::kDouble);
  auto trajectory = torch::empty({b, 1, rows, cols}, torch::kFloat);
  auto targets = torch::empty({b, 3, rows, cols}, torch::kFloat);
  auto img_acc = images.accessor<float, 5>();
  auto unp_acc = unproject.accessor<double, 4>();
  auto traj_acc = trajectory.accessor<float, 4>();
  auto tgt_acc = targets.accessor<float, 4>();
  for (int i = 0; i < b; ++i) {
    const auto& s = samples[i];
    if (static_cast<int>(s.views.size()) != n || s.grid.rows != rows || s.grid.cols != cols) {
      fail(ErrorCode::Shape, "to_tensors: samples in a batch disagree on views or grid");
    }
    for (int k = 0; k < n; ++k) {
      const auto& img = s.views[k].image;
      if (img.width != w || img.height != h || img.channels != 3) fail(ErrorCode::Shape, "to_tensors: view resolution mismatch");
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) img_acc[i][k][c][y][x] = img.at(x, y, c) / 255.0f;
      const Eigen::Matrix3d m = unproject_matrix(s.views[k].camera);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) unp_acc[i][k][r][c] = m(r, c);
    }
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) traj_acc[i][0][r][c] = s.trajectory.at(0, r, c);
    for (int ch = 0; ch < 3; ++ch)
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) tgt_acc[i][ch][r][c] = s.bev_gt.at(ch, r, c);
  }
  return {images, unproject, trajectory, targets};
}

std::int64_t parameter_count(const torch::nn::Module& m) {
  std::int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

std::shared_ptr<BevNet> make_model(const nlohmann::json& spec) {
  const std::string arch = spec.value("arch", std::string("cvt"));
  if (arch == "cvt") return std::make_shared<CrossViewTransformer>(cvt_config_from_json(spec));
  if (arch == "unet") return std::make_shared<UNet>(unet_config_from_json(spec));
  fail(ErrorCode::Config, "unknown model architecture: " + arch);
}

void save_checkpoint(const std::shared_ptr<BevNet>& model, const std::filesystem::path& path, const nlohmann::json& extra) {
  nlohmann::json meta = extra;
  meta["version"] = kCheckpointVersion;
  meta["arch"] = model->arch();
  meta["config"] = model->config_json();
  torch::serialize::OutputArchive archive;
  archive.write("bevcvt_meta", c10::IValue(meta.dump()));
  model->save(archive);
  try {
    archive.save_to(path.string());
  } catch (const c10::Error& ex) {
    fail(ErrorCode::Io, "cannot write checkpoint " + path.string() + ": " + ex.what_without_backtrace());
  }
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::NotFound, "checkpoint not found: " + path.string());
  torch::serialize::InputArchive archive;
  nlohmann::json meta;
  try {
    archive.load_from(path.string());
    c10::IValue value;
    archive.read("bevcvt_meta", value);
    meta = nlohmann::json::parse(value.toStringRef());
  } catch (const c10::Error& ex) {
    fail(ErrorCode::Format, "cannot read checkpoint " + path.string() + ": " + ex.what_without_backtrace());
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::Format, "checkpoint " + path.string() + ": " + ex.what());
  }
  if (meta.value("version", 0) != kCheckpointVersion) {
    fail(ErrorCode::Format, "checkpoint " + path.string() + ": unsupported version");
  }
  nlohmann::json spec = meta.at("config");
  spec["arch"] = meta.at("arch");
  auto net = make_model(spec);
  try {
    net->load(archive);
  } catch (const c10::Error& ex) {
    fail(ErrorCode::Format, "checkpoint " + path.string() + ": " + ex.what_without_backtrace());
  }
  net->eval();
  return {net, meta};
}

}  // namespace bevcvt::model

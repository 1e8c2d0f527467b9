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
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "model_common.hpp"

namespace bevcvt::training {

namespace fs = std::filesystem;

inline constexpr int kDefaultEpochs = 20;
inline constexpr int kLongEpochs = 50;

enum class LrSchedule { Constant, Cosine };

struct TrainConfig {
  std::string name;
  /// Architecture options passed to model::make_model; "arch" selects the
  /// network. n_views, grid and image size are filled in from the data.
  nlohmann::json model = {{"arch", "cvt"}};
  int n_views = 4;
  losses::LossConfig loss;
  int epochs = kDefaultEpochs;
  int batch_size = 8;
  double learning_rate = 3e-4;
  LrSchedule schedule = LrSchedule::Constant;
  std::uint64_t seed = 0;
  /// Keep an extra checkpoint every k epochs; 0 keeps only best and last.
  int checkpoint_every = 0;
  /// Truncate the train split to its first k frames when > 0.
  int max_train_frames = 0;

  std::string arch() const;
};

TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& c);
void validate(const TrainConfig& c);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;
  double wall_s = 0.0;
  std::vector<std::string> checkpoints;
};

struct RunRecord {
  std::string name;
  nlohmann::json config;
  std::vector<EpochRecord> epochs;
  fs::path best_checkpoint;
  fs::path last_checkpoint;
  int best_epoch = 0;
  double wall_s = 0.0;
};

nlohmann::json epoch_to_json(const EpochRecord& e);
EpochRecord epoch_from_json(const nlohmann::json& j);
/// Reads <dir>/config.json and <dir>/run.jsonl.
RunRecord read_run_record(const fs::path& dir);

using Logger = std::function<void(const std::string&)>;

/// How a rig with `data_views` cameras feeds a model taking `model_views`:
/// true when the rear view must be dropped. Throws Config otherwise.
bool needs_rear_drop(int model_views, int data_views);

/// Trains on the manifest's train split, validating on its val split every
/// epoch. Writes config.json, run.jsonl, best.pt and last.pt to `out_dir`.
RunRecord train_model(const TrainConfig& config, const fs::path& data_root, const fs::path& out_dir,
                      const Logger& log = {});

/// Mean loss over `frames` with the model in inference mode.
double validation_loss(model::BevNet& net, const losses::LossConfig& loss, const std::vector<fs::path>& frames,
                       int batch_size, bool drop_rear);

/// Optimizes `net` on a fixed in-memory set for `steps` steps and returns
/// the per-step training loss.
std::vector<double> fit_samples(model::BevNet& net, const std::vector<dataset::Sample>& samples,
                                const losses::LossConfig& loss, int steps, int batch_size, double learning_rate,
                                std::uint64_t seed);

inline constexpr double kDefaultThreshold = 0.5;

/// Per-channel IoUs of one forward pass over `samples`.
std::vector<metrics::ChannelIoU> predict_iou(model::BevNet& net, const std::vector<dataset::Sample>& samples,
                                             double threshold = kDefaultThreshold);

metrics::MetricsReport evaluate(model::BevNet& net, const std::string& model_name, const fs::path& data_root,
                                const std::string& split, int batch_size = 8, double threshold = kDefaultThreshold);

metrics::MetricsReport evaluate_checkpoint(const fs::path& checkpoint, const fs::path& data_root,
                                           const std::string& split, const std::string& model_name = {});

struct MatrixCell {
  std::string name;
  std::string arch;
  losses::LossKind loss = losses::LossKind::Focal;
  int n_views = 4;
};

/// CVT x {focal, L1} x {4, 3} views and UNet x {focal, L1} at 4 views.
std::vector<MatrixCell> default_matrix();
std::string cell_name(const std::string& arch, losses::LossKind loss, int n_views);
std::string cell_slug(const MatrixCell& cell);

struct CellResult {
  MatrixCell cell;
  std::optional<RunRecord> run;
  std::optional<metrics::MetricsReport> val;
  std::optional<metrics::MetricsReport> test;
  std::string error;
};

struct MatrixResult {
  std::vector<CellResult> cells;
  fs::path out_dir;
};

/// Trains and evaluates every cell with `base` as the shared configuration.
/// A failing cell is recorded and the remaining cells still run.
MatrixResult run_experiment_matrix(const std::vector<MatrixCell>& cells, const TrainConfig& base,
                                   const nlohmann::json& model_overrides, const fs::path& data_root,
                                   const fs::path& out_dir, const Logger& log = {});

}  // namespace bevcvt::training

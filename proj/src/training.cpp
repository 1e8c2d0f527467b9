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

#include "training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "error.hpp"

namespace bevcvt::training {

using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void emit(const Logger& log, const std::string& line) {
  if (log) log(line);
}

std::string schedule_name(LrSchedule s) { return s == LrSchedule::Cosine ? "cosine" : "constant"; }

LrSchedule schedule_from_name(const std::string& name) {
  if (name == "constant") return LrSchedule::Constant;
  if (name == "cosine") return LrSchedule::Cosine;
  fail(ErrorCode::Config, "unknown learning-rate schedule: " + name);
}

double scheduled_lr(const TrainConfig& c, int epoch) {
  if (c.schedule == LrSchedule::Constant) return c.learning_rate;
  return 0.5 * c.learning_rate * (1.0 + std::cos(std::numbers::pi * epoch / c.epochs));
}

void set_lr(torch::optim::Adam& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

void seed_everything(std::uint64_t seed) {
  torch::manual_seed(seed);
  at::globalContext().setDeterministicAlgorithms(true, false);
}

double checked_loss(const torch::Tensor& loss, const std::string& where) {
  const double v = loss.item<double>();
  if (!std::isfinite(v)) fail(ErrorCode::Runtime, "non-finite loss (" + std::to_string(v) + ") at " + where);
  return v;
}

std::string batch_label(int epoch, std::size_t batch, const std::vector<dataset::Sample>& samples) {
  std::ostringstream os;
  os << "epoch " << epoch << " batch " << batch << " (first sample " << samples.front().id.relative_path() << ")";
  return os.str();
}

// Fills in the data-dependent parts of the model description.
json resolve_model_spec(const TrainConfig& c, const dataset::SplitManifest& m) {
  json spec = c.model;
  spec["n_views"] = c.n_views;
  spec["grid"] = dataset::grid_to_json(m.grid);
  if (c.arch() == "cvt" && !m.cameras.empty()) {
    spec["image_height"] = m.cameras.front().height;
    spec["image_width"] = m.cameras.front().width;
  }
  return spec;
}

std::vector<dataset::Sample> load_frames(const std::vector<fs::path>& frames, int n_views, bool drop_rear) {
  std::vector<dataset::Sample> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    auto s = dataset::read_sample(f, n_views + (drop_rear ? 1 : 0));
    out.push_back(drop_rear ? dataset::drop_rear_view(s) : std::move(s));
  }
  return out;
}

}  // namespace

std::string TrainConfig::arch() const { return model.value("arch", std::string("cvt")); }

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  try {
    c.name = j.value("name", c.name);
    if (j.contains("model")) c.model = j.at("model");
    if (j.contains("arch")) c.model["arch"] = j.at("arch");
    c.n_views = j.value("n_views", c.n_views);
    if (j.contains("loss")) c.loss = losses::loss_config_from_json(j.at("loss"));
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.schedule = schedule_from_name(j.value("schedule", schedule_name(c.schedule)));
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.max_train_frames = j.value("max_train_frames", c.max_train_frames);
  } catch (const json::exception& ex) {
    fail(ErrorCode::Config, std::string("train config: ") + ex.what());
  }
  validate(c);
  return c;
}

json train_config_to_json(const TrainConfig& c) {
  return {{"name", c.name},
          {"model", c.model},
          {"n_views", c.n_views},
          {"loss", losses::loss_config_to_json(c.loss)},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"schedule", schedule_name(c.schedule)},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"max_train_frames", c.max_train_frames}};
}

void validate(const TrainConfig& c) {
  if (c.epochs < 1) fail(ErrorCode::Config, "epochs must be >= 1");
  if (c.batch_size < 1) fail(ErrorCode::Config, "batch_size must be >= 1");
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) fail(ErrorCode::Config, "learning_rate must be positive");
  if (c.n_views != 3 && c.n_views != 4) fail(ErrorCode::Config, "n_views must be 3 or 4");
  if (c.arch() != "cvt" && c.arch() != "unet") fail(ErrorCode::Config, "unknown model architecture: " + c.arch());
  if (c.checkpoint_every < 0 || c.max_train_frames < 0) fail(ErrorCode::Config, "negative checkpoint or frame limit");
}

json epoch_to_json(const EpochRecord& e) {
  return {{"epoch", e.epoch},
          {"train_loss", e.train_loss},
          {"val_loss", e.val_loss},
          {"learning_rate", e.learning_rate},
          {"wall_s", e.wall_s},
          {"checkpoints", e.checkpoints}};
}

EpochRecord epoch_from_json(const json& j) {
  EpochRecord e;
  try {
    e.epoch = j.at("epoch").get<int>();
    e.train_loss = j.at("train_loss").get<double>();
    e.val_loss = j.at("val_loss").get<double>();
    e.learning_rate = j.value("learning_rate", 0.0);
    e.wall_s = j.value("wall_s", 0.0);
    e.checkpoints = j.value("checkpoints", std::vector<std::string>{});
  } catch (const json::exception& ex) {
    fail(ErrorCode::Format, std::string("run record line: ") + ex.what());
  }
  return e;
}

RunRecord read_run_record(const fs::path& dir) {
  RunRecord r;
  std::ifstream cfg(dir / "config.json");
  if (!cfg) fail(ErrorCode::NotFound, "missing run config: " + (dir / "config.json").string());
  std::ifstream lines(dir / "run.jsonl");
  if (!lines) fail(ErrorCode::NotFound, "missing run record: " + (dir / "run.jsonl").string());
  try {
    r.config = json::parse(cfg);
    std::string line;
    while (std::getline(lines, line)) {
      if (!line.empty()) r.epochs.push_back(epoch_from_json(json::parse(line)));
    }
  } catch (const json::parse_error& ex) {
    fail(ErrorCode::Format, "run record in " + dir.string() + ": " + ex.what());
  }
  r.name = r.config.value("name", dir.filename().string());
  r.best_checkpoint = dir / "best.pt";
  r.last_checkpoint = dir / "last.pt";
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : r.epochs) {
    r.wall_s += e.wall_s;
    if (e.val_loss < best) {
      best = e.val_loss;
      r.best_epoch = e.epoch;
    }
  }
  return r;
}

bool needs_rear_drop(int model_views, int data_views) {
  if (model_views == data_views) return false;
  if (model_views == 3 && data_views == 4) return true;
  fail(ErrorCode::Config, "model expects " + std::to_string(model_views) + " views but the dataset rig has " +
                              std::to_string(data_views));
}

double validation_loss(model::BevNet& net, const losses::LossConfig& loss, const std::vector<fs::path>& frames,
                       int batch_size, bool drop_rear) {
  const bool was_training = net.is_training();
  net.eval();
  torch::NoGradGuard no_grad;
  dataset::BatchLoader loader(frames, batch_size, false, 0, net.n_views() + (drop_rear ? 1 : 0), drop_rear);
  double total = 0.0;
  std::size_t n = 0;
  for (auto batch = loader.next(); !batch.empty(); batch = loader.next()) {
    const auto t = model::to_tensors(batch);
    total += checked_loss(losses::compute_loss(loss, net.forward(t), t.targets),
                          "validation batch starting at " + batch.front().id.relative_path()) *
             static_cast<double>(batch.size());
    n += batch.size();
  }
  net.train(was_training);
  if (n == 0) fail(ErrorCode::NotFound, "validation split is empty");
  return total / static_cast<double>(n);
}

RunRecord train_model(const TrainConfig& config, const fs::path& data_root, const fs::path& out_dir,
                      const Logger& log) {
  validate(config);
  const auto manifest = dataset::read_manifest(data_root);
  const bool drop_rear = needs_rear_drop(config.n_views, manifest.n_views);
  auto train_frames = dataset::list_split(data_root, manifest, "train");
  const auto val_frames = dataset::list_split(data_root, manifest, "val");
  if (train_frames.empty()) fail(ErrorCode::NotFound, "train split is empty in " + data_root.string());
  if (val_frames.empty()) fail(ErrorCode::NotFound, "val split is empty in " + data_root.string());
  if (config.max_train_frames > 0 && train_frames.size() > static_cast<std::size_t>(config.max_train_frames)) {
    train_frames.resize(static_cast<std::size_t>(config.max_train_frames));
  }

  seed_everything(config.seed);
  const json spec = resolve_model_spec(config, manifest);
  auto net = model::make_model(spec);
  net->train();
  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(config.learning_rate));

  fs::create_directories(out_dir);
  RunRecord run;
  run.name = config.name.empty() ? fs::path(out_dir).filename().string() : config.name;
  run.config = train_config_to_json(config);
  run.config["name"] = run.name;
  run.config["resolved_model"] = spec;
  run.config["data_root"] = fs::absolute(data_root).string();
  run.best_checkpoint = out_dir / "best.pt";
  run.last_checkpoint = out_dir / "last.pt";
  {
    std::ofstream cfg(out_dir / "config.json");
    cfg << run.config.dump(2) << "\n";
  }
  std::ofstream jsonl(out_dir / "run.jsonl", std::ios::trunc);
  if (!jsonl) fail(ErrorCode::Io, "cannot write " + (out_dir / "run.jsonl").string());

  emit(log, run.name + ": " + std::to_string(model::parameter_count(*net)) + " parameters, " +
                std::to_string(train_frames.size()) + " train / " + std::to_string(val_frames.size()) + " val frames");

  dataset::BatchLoader loader(train_frames, config.batch_size, true, config.seed, config.n_views + (drop_rear ? 1 : 0),
                              drop_rear);
  double best_val = std::numeric_limits<double>::infinity();
  const auto run_t0 = std::chrono::steady_clock::now();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = scheduled_lr(config, epoch - 1);
    set_lr(opt, rec.learning_rate);
    loader.start_epoch(epoch);
    double total = 0.0;
    std::size_t n = 0, batch_idx = 0;
    for (auto batch = loader.next(); !batch.empty(); batch = loader.next(), ++batch_idx) {
      const auto t = model::to_tensors(batch);
      const auto loss = losses::compute_loss(config.loss, net->forward(t), t.targets);
      total += checked_loss(loss, batch_label(epoch, batch_idx, batch)) * static_cast<double>(batch.size());
      n += batch.size();
      opt.zero_grad();
      loss.backward();
      opt.step();
    }
    rec.train_loss = total / static_cast<double>(n);
    rec.val_loss = validation_loss(*net, config.loss, val_frames, config.batch_size, drop_rear);

    json extra = {{"run", run.name}, {"epoch", epoch}, {"val_loss", rec.val_loss}};
    model::save_checkpoint(net, run.last_checkpoint, extra);
    rec.checkpoints.push_back(run.last_checkpoint.string());
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      run.best_epoch = epoch;
      model::save_checkpoint(net, run.best_checkpoint, extra);
      rec.checkpoints.push_back(run.best_checkpoint.string());
    }
    if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03d.pt", epoch);
      model::save_checkpoint(net, out_dir / name, extra);
      rec.checkpoints.push_back((out_dir / name).string());
    }
    rec.wall_s = seconds_since(t0);
    jsonl << epoch_to_json(rec).dump() << "\n" << std::flush;
    std::ostringstream os;
    os << run.name << ": epoch " << epoch << "/" << config.epochs << " train " << rec.train_loss << " val "
       << rec.val_loss << " (" << static_cast<int>(rec.wall_s) << " s)";
    emit(log, os.str());
    run.epochs.push_back(std::move(rec));
  }
  run.wall_s = seconds_since(run_t0);
  return run;
}

std::vector<double> fit_samples(model::BevNet& net, const std::vector<dataset::Sample>& samples,
                                const losses::LossConfig& loss, int steps, int batch_size, double learning_rate,
                                std::uint64_t seed) {
  if (samples.empty() || steps < 1 || batch_size < 1) fail(ErrorCode::InvalidArgument, "fit_samples: empty problem");
  seed_everything(seed);
  std::vector<model::BatchTensors> batches;
  for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(batch_size)) {
    const auto n = std::min(samples.size() - i, static_cast<std::size_t>(batch_size));
    batches.push_back(model::to_tensors(std::span(samples).subspan(i, n)));
  }
  net.train();
  torch::optim::Adam opt(net.parameters(), torch::optim::AdamOptions(learning_rate));
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(steps));
  for (int step = 0; step < steps; ++step) {
    const auto& t = batches[static_cast<std::size_t>(step) % batches.size()];
    const auto l = losses::compute_loss(loss, net.forward(t), t.targets);
    curve.push_back(checked_loss(l, "step " + std::to_string(step)));
    opt.zero_grad();
    l.backward();
    opt.step();
  }
  return curve;
}

std::vector<metrics::ChannelIoU> predict_iou(model::BevNet& net, const std::vector<dataset::Sample>& samples,
                                             double threshold) {
  const bool was_training = net.is_training();
  net.eval();
  torch::NoGradGuard no_grad;
  std::vector<metrics::ChannelIoU> out;
  constexpr std::size_t kChunk = 8;
  for (std::size_t i = 0; i < samples.size(); i += kChunk) {
    const auto n = std::min(samples.size() - i, kChunk);
    const auto chunk = std::span(samples).subspan(i, n);
    const auto logits = net.forward(model::to_tensors(chunk)).contiguous();
    for (std::size_t k = 0; k < n; ++k) {
      const auto one = logits[static_cast<std::int64_t>(k)].contiguous();
      const auto pred = metrics::binarize(std::span<const float>(one.data_ptr<float>(), one.numel()),
                                          static_cast<int>(one.size(0)), static_cast<int>(one.size(1)),
                                          static_cast<int>(one.size(2)), threshold);
      out.push_back(metrics::iou_per_channel(pred, chunk[k].bev_gt));
    }
  }
  net.train(was_training);
  return out;
}

metrics::MetricsReport evaluate(model::BevNet& net, const std::string& model_name, const fs::path& data_root,
                                const std::string& split, int batch_size, double threshold) {
  if (split != "train" && split != "val" && split != "test") fail(ErrorCode::InvalidArgument, "unknown split: " + split);
  const auto manifest = dataset::read_manifest(data_root);
  const bool drop_rear = needs_rear_drop(net.n_views(), manifest.n_views);
  const auto& routes = manifest.split(split);
  if (routes.empty()) fail(ErrorCode::NotFound, "split " + split + " has no routes in " + data_root.string());

  metrics::MetricsReport report;
  report.model = model_name;
  report.split = split;
  std::vector<metrics::ChannelIoU> all;
  for (const auto& key : routes) {
    dataset::SplitManifest one = manifest;
    one.train = {key};
    const auto frames = dataset::list_split(data_root, one, "train");
    const auto record = dataset::read_route(data_root, key);
    metrics::RouteBreakdown rb;
    rb.town = key.first;
    rb.route = key.second;
    std::vector<metrics::ChannelIoU> per_frame;
    std::vector<double> positions;
    for (std::size_t i = 0; i < frames.size(); i += static_cast<std::size_t>(batch_size)) {
      const auto n = std::min(frames.size() - i, static_cast<std::size_t>(batch_size));
      const auto samples =
          load_frames(std::vector<fs::path>(frames.begin() + static_cast<std::ptrdiff_t>(i),
                                            frames.begin() + static_cast<std::ptrdiff_t>(i + n)),
                      net.n_views(), drop_rear);
      const auto ious = predict_iou(net, samples, threshold);
      per_frame.insert(per_frame.end(), ious.begin(), ious.end());
      for (const auto& s : samples) {
        positions.push_back(s.route_s);
        rb.frames.push_back(s.id.frame);
      }
    }
    rb.iou = metrics::mean_iou(per_frame);
    const auto labels = metrics::label_route_positions(record.route.corners, record.junctions, positions);
    rb.trace = metrics::segment_trace(per_frame, labels);
    all.insert(all.end(), per_frame.begin(), per_frame.end());
    report.routes.push_back(std::move(rb));
  }
  if (all.empty()) fail(ErrorCode::NotFound, "split " + split + " has no frames");
  report.overall = metrics::mean_iou(all);
  return report;
}

metrics::MetricsReport evaluate_checkpoint(const fs::path& checkpoint, const fs::path& data_root,
                                           const std::string& split, const std::string& model_name) {
  auto loaded = model::load_checkpoint(checkpoint);
  std::string name = model_name;
  if (name.empty()) name = loaded.meta.value("run", checkpoint.stem().string());
  return evaluate(*loaded.net, name, data_root, split);
}

std::string cell_name(const std::string& arch, losses::LossKind loss, int n_views) {
  const std::string a = arch == "cvt" ? "CVT" : "Unet";
  const std::string l = loss == losses::LossKind::Focal ? "Focal loss" : "L1";
  return a + ", " + l + " - " + std::to_string(n_views) + " cams";
}

std::vector<MatrixCell> default_matrix() {
  using losses::LossKind;
  std::vector<MatrixCell> cells;
  auto add = [&](const std::string& arch, LossKind loss, int views) {
    cells.push_back({cell_name(arch, loss, views), arch, loss, views});
  };
  add("cvt", LossKind::Focal, 4);
  add("unet", LossKind::Focal, 4);
  add("cvt", LossKind::L1, 4);
  add("unet", LossKind::L1, 4);
  add("cvt", LossKind::Focal, 3);
  add("cvt", LossKind::L1, 3);
  return cells;
}

std::string cell_slug(const MatrixCell& cell) {
  return cell.arch + "_" + losses::kind_name(cell.loss) + "_" + std::to_string(cell.n_views) + "cams";
}

MatrixResult run_experiment_matrix(const std::vector<MatrixCell>& cells, const TrainConfig& base,
                                   const json& model_overrides, const fs::path& data_root, const fs::path& out_dir,
                                   const Logger& log) {
  MatrixResult result;
  result.out_dir = out_dir;
  fs::create_directories(out_dir);
  for (const auto& cell : cells) {
    CellResult cr;
    cr.cell = cell;
    try {
      TrainConfig cfg = base;
      cfg.name = cell.name;
      cfg.model = json{{"arch", cell.arch}};
      if (model_overrides.contains(cell.arch)) cfg.model.update(model_overrides.at(cell.arch));
      cfg.n_views = cell.n_views;
      cfg.loss.kind = cell.loss;
      const fs::path dir = out_dir / cell_slug(cell);
      cr.run = train_model(cfg, data_root, dir, log);
      auto loaded = model::load_checkpoint(cr.run->last_checkpoint);
      for (const std::string split : {"val", "test"}) {
        auto report = evaluate(*loaded.net, cell.name, data_root, split, cfg.batch_size);
        std::ofstream(dir / ("metrics_" + split + ".json")) << metrics::report_to_json(report).dump(2) << "\n";
        (split == "val" ? cr.val : cr.test) = std::move(report);
      }
    } catch (const std::exception& ex) {
      cr.error = ex.what();
      emit(log, cell.name + ": FAILED: " + cr.error);
    }
    result.cells.push_back(std::move(cr));
  }
  return result;
}

}  // namespace bevcvt::training

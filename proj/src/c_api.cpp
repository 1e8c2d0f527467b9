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

#include "bevcvt/bevcvt.h"

#include <cstring>
#include <memory>
#include <new>
#include <nlohmann/json.hpp>
#include <string>

#include "dataset.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "model_common.hpp"
#include "report.hpp"
#include "training.hpp"

using nlohmann::json;
using namespace bevcvt;

struct bevcvt_camera {
  geometry::CameraModel model;
};

struct bevcvt_model {
  model::LoadedModel loaded;
};

namespace {

thread_local std::string g_last_error;

bevcvt_status record(bevcvt_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

bevcvt_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return BEVCVT_ERR_INVALID_ARGUMENT;
    case ErrorCode::Io: return BEVCVT_ERR_IO;
    case ErrorCode::Format: return BEVCVT_ERR_FORMAT;
    case ErrorCode::Config: return BEVCVT_ERR_CONFIG;
    case ErrorCode::Geometry: return BEVCVT_ERR_GEOMETRY;
    case ErrorCode::BehindCamera: return BEVCVT_ERR_BEHIND_CAMERA;
    case ErrorCode::NotFound: return BEVCVT_ERR_NOT_FOUND;
    case ErrorCode::NoRoute: return BEVCVT_ERR_NO_ROUTE;
    case ErrorCode::Shape: return BEVCVT_ERR_SHAPE;
    case ErrorCode::Runtime: return BEVCVT_ERR_RUNTIME;
  }
  return BEVCVT_ERR_UNKNOWN;
}

template <class F>
bevcvt_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return BEVCVT_OK;
  } catch (const Error& ex) {
    return record(to_status(ex.code()), ex.what());
  } catch (const json::exception& ex) {
    return record(BEVCVT_ERR_FORMAT, std::string("json: ") + ex.what());
  } catch (const c10::Error& ex) {
    return record(BEVCVT_ERR_RUNTIME, ex.what_without_backtrace());
  } catch (const std::filesystem::filesystem_error& ex) {
    return record(BEVCVT_ERR_IO, ex.what());
  } catch (const std::bad_alloc&) {
    return record(BEVCVT_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& ex) {
    return record(BEVCVT_ERR_UNKNOWN, ex.what());
  }
}

void require(bool ok, const char* what) {
  if (!ok) fail(ErrorCode::InvalidArgument, what);
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_out(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

json parse_or_empty(const char* text) {
  if (!text || !*text) return json::object();
  try {
    return json::parse(text);
  } catch (const json::parse_error& ex) {
    fail(ErrorCode::Config, std::string("malformed JSON: ") + ex.what());
  }
}

training::Logger make_logger(bevcvt_log_fn log, void* user) {
  if (!log) return {};
  return [log, user](const std::string& line) { log(line.c_str(), user); };
}

json run_to_json(const training::RunRecord& run) {
  json epochs = json::array();
  for (const auto& e : run.epochs) epochs.push_back(training::epoch_to_json(e));
  return {{"name", run.name},
          {"config", run.config},
          {"epochs", epochs},
          {"best_checkpoint", run.best_checkpoint.string()},
          {"last_checkpoint", run.last_checkpoint.string()},
          {"best_epoch", run.best_epoch},
          {"wall_s", run.wall_s}};
}

void copy_matrix(const Eigen::Ref<const Eigen::MatrixXd>& m, double* out) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[r * m.cols() + c] = m(r, c);
}

}  // namespace

extern "C" {

const char* bevcvt_last_error(void) { return g_last_error.c_str(); }

const char* bevcvt_status_name(bevcvt_status status) {
  switch (status) {
    case BEVCVT_OK: return "ok";
    case BEVCVT_ERR_UNKNOWN: return "unknown";
    default:
      if (status >= BEVCVT_ERR_INVALID_ARGUMENT && status <= BEVCVT_ERR_RUNTIME) {
        return error_code_name(static_cast<ErrorCode>(status));
      }
      return "unknown";
  }
}

const char* bevcvt_version(void) { return "0.1.0"; }

void bevcvt_string_free(char* s) { std::free(s); }

bevcvt_status bevcvt_camera_create(const char* name, int width, int height, double fov_deg, const double position[3],
                                   const double angles_deg[3], bevcvt_camera** out) {
  return guarded([&] {
    require(out && position && angles_deg, "camera_create: null argument");
    *out = nullptr;
    auto cam = std::make_unique<bevcvt_camera>();
    cam->model = geometry::make_camera(name ? name : "camera", width, height, fov_deg,
                                       geometry::Vec3(position[0], position[1], position[2]),
                                       geometry::Angles{angles_deg[0], angles_deg[1], angles_deg[2]});
    *out = cam.release();
  });
}

void bevcvt_camera_destroy(bevcvt_camera* camera) { delete camera; }

bevcvt_status bevcvt_camera_intrinsics(const bevcvt_camera* camera, double k[9]) {
  return guarded([&] {
    require(camera && k, "camera_intrinsics: null argument");
    copy_matrix(camera->model.intrinsics.matrix(), k);
  });
}

bevcvt_status bevcvt_camera_extrinsics(const bevcvt_camera* camera, double e[16]) {
  return guarded([&] {
    require(camera && e, "camera_extrinsics: null argument");
    copy_matrix(camera->model.extrinsics.matrix(), e);
  });
}

bevcvt_status bevcvt_intrinsics_from_fov(int width, int height, double fov_deg, double k[9]) {
  return guarded([&] {
    require(k != nullptr, "intrinsics_from_fov: null argument");
    copy_matrix(geometry::intrinsics_from_fov(width, height, fov_deg).matrix(), k);
  });
}

bevcvt_status bevcvt_project(const bevcvt_camera* camera, const double world[3], double pixel[2]) {
  return guarded([&] {
    require(camera && world && pixel, "project: null argument");
    const auto p = geometry::project(geometry::Vec3(world[0], world[1], world[2]), camera->model);
    pixel[0] = p.x();
    pixel[1] = p.y();
  });
}

bevcvt_status bevcvt_unproject(const bevcvt_camera* camera, const double pixel[2], double direction[3]) {
  return guarded([&] {
    require(camera && pixel && direction, "unproject: null argument");
    const auto d = geometry::unproject_direction(geometry::Vec2(pixel[0], pixel[1]), camera->model);
    for (int i = 0; i < 3; ++i) direction[i] = d[i];
  });
}

bevcvt_status bevcvt_geometric_similarity(const bevcvt_camera* camera, const double pixel[2], const double world[3],
                                          double* similarity) {
  return guarded([&] {
    require(camera && pixel && world && similarity, "geometric_similarity: null argument");
    *similarity = geometry::geometric_similarity(geometry::Vec2(pixel[0], pixel[1]),
                                                 geometry::Vec3(world[0], world[1], world[2]), camera->model);
  });
}

bevcvt_status bevcvt_generate_dataset(const char* config_json, const char* root, int force, char** summary_out) {
  return guarded([&] {
    require(root && *root, "generate_dataset: root is required");
    const auto config = dataset::gen_config_from_json(parse_or_empty(config_json));
    const auto summary = dataset::generate_dataset(config, root, force != 0);
    set_out(summary_out, summary.listing());
  });
}

bevcvt_status bevcvt_ingest_external(const char* source, const char* root, const char* rig_override, int force) {
  return guarded([&] {
    require(source && root, "ingest_external: null argument");
    std::optional<std::string> rig;
    if (rig_override && *rig_override) rig = rig_override;
    dataset::ingest_external(source, root, rig, force != 0);
  });
}

bevcvt_status bevcvt_train(const char* config_json, const char* data_root, const char* out_dir, bevcvt_log_fn log,
                           void* user, char** run_json_out) {
  return guarded([&] {
    require(data_root && out_dir, "train: null argument");
    const auto config = training::train_config_from_json(parse_or_empty(config_json));
    const auto run = training::train_model(config, data_root, out_dir, make_logger(log, user));
    set_out(run_json_out, run_to_json(run).dump());
  });
}

bevcvt_status bevcvt_run_matrix(const char* base_config_json, const char* model_overrides_json, const char* cells_json,
                                const char* data_root, const char* out_dir, bevcvt_log_fn log, void* user,
                                char** result_json_out) {
  return guarded([&] {
    require(data_root && out_dir, "run_matrix: null argument");
    const auto base = training::train_config_from_json(parse_or_empty(base_config_json));
    const auto overrides = parse_or_empty(model_overrides_json);
    auto cells = training::default_matrix();
    if (cells_json && *cells_json) {
      const auto wanted = json::parse(cells_json);
      if (!wanted.is_array() || wanted.empty()) fail(ErrorCode::Config, "cells must be a non-empty array of slugs");
      std::vector<training::MatrixCell> chosen;
      for (const auto& w : wanted) {
        const auto name = w.get<std::string>();
        const auto it = std::find_if(cells.begin(), cells.end(),
                                     [&](const training::MatrixCell& c) { return training::cell_slug(c) == name; });
        if (it == cells.end()) fail(ErrorCode::Config, "unknown matrix cell: " + name);
        chosen.push_back(*it);
      }
      cells = std::move(chosen);
    }
    const auto result =
        training::run_experiment_matrix(cells, base, overrides, data_root, out_dir, make_logger(log, user));
    report::write_matrix_index(result);
    json out = json::array();
    for (const auto& c : result.cells) {
      json cell{{"name", c.cell.name}, {"slug", training::cell_slug(c.cell)}, {"error", c.error}};
      if (c.run) cell["run"] = run_to_json(*c.run);
      if (c.val) cell["val"] = metrics::report_to_json(*c.val);
      if (c.test) cell["test"] = metrics::report_to_json(*c.test);
      out.push_back(std::move(cell));
    }
    set_out(result_json_out, json{{"out_dir", result.out_dir.string()}, {"cells", out}}.dump());
  });
}

bevcvt_status bevcvt_model_load(const char* checkpoint, bevcvt_model** out) {
  return guarded([&] {
    require(checkpoint && out, "model_load: null argument");
    *out = nullptr;
    auto m = std::make_unique<bevcvt_model>();
    m->loaded = model::load_checkpoint(checkpoint);
    *out = m.release();
  });
}

void bevcvt_model_destroy(bevcvt_model* model) { delete model; }

bevcvt_status bevcvt_model_info(const bevcvt_model* model, char** json_out) {
  return guarded([&] {
    require(model && json_out, "model_info: null argument");
    const auto& net = *model->loaded.net;
    set_out(json_out, json{{"arch", net.arch()},
                           {"n_views", net.n_views()},
                           {"parameters", model::parameter_count(net)},
                           {"config", net.config_json()},
                           {"meta", model->loaded.meta}}
                          .dump());
  });
}

bevcvt_status bevcvt_model_evaluate(bevcvt_model* model, const char* data_root, const char* split,
                                    const char* model_name, char** report_json_out) {
  return guarded([&] {
    require(model && data_root && split, "model_evaluate: null argument");
    std::string name = model_name ? model_name : "";
    if (name.empty()) name = model->loaded.meta.value("run", model->loaded.net->arch());
    const auto report = training::evaluate(*model->loaded.net, name, data_root, split);
    set_out(report_json_out, metrics::report_to_json(report).dump());
  });
}

bevcvt_status bevcvt_report(const char* const* inputs, size_t n_inputs, const char* out_dir, char** summary_json_out) {
  return guarded([&] {
    require(out_dir && (inputs || n_inputs == 0), "report: null argument");
    std::vector<std::filesystem::path> paths;
    for (size_t i = 0; i < n_inputs; ++i) {
      require(inputs[i] != nullptr, "report: null input path");
      paths.emplace_back(inputs[i]);
    }
    const auto out = report::write_report(paths, out_dir);
    json files = json::array();
    for (const auto& f : out.files) files.push_back(f.string());
    json summary{{"files", files}, {"findings", out.findings}};
    if (out.val) summary["val"] = report::table_to_json(*out.val);
    if (out.test) summary["test"] = report::table_to_json(*out.test);
    set_out(summary_json_out, summary.dump());
  });
}

bevcvt_status bevcvt_visualize(const char* checkpoint, const char* data_root, const char* const* sample_ids,
                               size_t n_samples, const char* out_dir, double threshold, char** files_json_out) {
  return guarded([&] {
    require(checkpoint && data_root && out_dir && (sample_ids || n_samples == 0), "visualize: null argument");
    std::vector<std::string> ids;
    for (size_t i = 0; i < n_samples; ++i) {
      require(sample_ids[i] != nullptr, "visualize: null sample id");
      ids.emplace_back(sample_ids[i]);
    }
    const auto written = report::visualize(checkpoint, data_root, ids, out_dir, threshold);
    json files = json::array();
    for (const auto& f : written) files.push_back(f.string());
    set_out(files_json_out, files.dump());
  });
}

}  // extern "C"

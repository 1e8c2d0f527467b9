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

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "bevcvt/bevcvt.h"

using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Failure {
  int exit_code;
};

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { bevcvt_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

void check(bevcvt_status s) {
  if (s == BEVCVT_OK) return;
  std::cerr << "bevcvt: error [" << bevcvt_status_name(s) << "]: " << bevcvt_last_error() << "\n";
  const bool usage = s == BEVCVT_ERR_CONFIG || s == BEVCVT_ERR_INVALID_ARGUMENT;
  throw Failure{usage ? kExitUsage : kExitFailure};
}

[[noreturn]] void usage_error(const std::string& msg) {
  std::cerr << "bevcvt: " << msg << "\n";
  throw Failure{kExitUsage};
}

void print_line(const char* line, void*) { std::cout << line << std::endl; }

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

// defaults < config file < --set overrides; defaults are applied by the library.
json load_config(const std::string& path, const std::vector<std::string>& sets) {
  json cfg = json::object();
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) usage_error("cannot read config file " + path);
    try {
      cfg = json::parse(f);
    } catch (const json::parse_error& ex) {
      usage_error("malformed config file " + path + ": " + ex.what());
    }
  }
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) usage_error("--set expects key=value, got '" + kv + "'");
    std::string key = kv.substr(0, eq);
    std::string pointer;
    for (char c : key) pointer += c == '.' ? '/' : c;
    cfg[json::json_pointer("/" + pointer)] = parse_value(kv.substr(eq + 1));
  }
  return cfg;
}

std::string default_root() {
  const char* env = std::getenv("BEVCVT_DATA_ROOT");
  return env ? env : "";
}

std::string require_root(const std::string& root) {
  if (root.empty()) usage_error("no data root: pass --root or set BEVCVT_DATA_ROOT");
  return root;
}

void print_table(const json& t) {
  std::cout << t.at("title").get<std::string>() << "\n";
  for (const auto& r : t.at("rows")) {
    std::cout << "  " << r.at("model").get<std::string>();
    for (const char* k : {"road", "trajectory", "lane"}) {
      std::cout << " | " << k << " ";
      if (r.at(k).is_null()) {
        std::cout << "-";
      } else {
        std::cout << r.at(k).get<double>();
      }
    }
    std::cout << "\n";
  }
}

json run_report(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<const char*> ptrs;
  for (const auto& s : inputs) ptrs.push_back(s.c_str());
  OwnedString summary;
  check(bevcvt_report(ptrs.data(), ptrs.size(), out.c_str(), &summary.p));
  const auto j = json::parse(summary.str());
  for (const char* split : {"val", "test"}) {
    if (j.contains(split)) print_table(j.at(split));
  }
  for (const auto& f : j.at("findings")) std::cout << f.get<std::string>() << "\n";
  std::cout << "wrote " << j.at("files").size() << " report files to " << out << "\n";
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BEV map prediction from multi-camera images: data generation, training, evaluation, reporting"};
  app.require_subcommand(1);

  std::string config_path, root = default_root(), out;
  std::vector<std::string> sets;
  bool force = false;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset, or ingest a recorded one");
  std::string ingest_source, rig;
  gen->add_option("--config", config_path, "JSON config file");
  gen->add_option("--set", sets, "Override a config key (dotted.key=value)");
  gen->add_option("--out", out, "Dataset root (default: $BEVCVT_DATA_ROOT)");
  gen->add_flag("--force", force, "Overwrite an existing dataset root");
  gen->add_option("--ingest", ingest_source, "Import a recorded dataset instead of generating one");
  gen->add_option("--rig", rig, "Rig for ingested data (default3 or default4)");

  auto* train = app.add_subcommand("train", "Train one model or the six-cell experiment matrix");
  bool matrix = false;
  std::vector<std::string> cells;
  train->add_option("--config", config_path, "JSON config file");
  train->add_option("--set", sets, "Override a config key (dotted.key=value)");
  train->add_option("--root", root, "Dataset root (default: $BEVCVT_DATA_ROOT)");
  train->add_option("--out", out, "Run output directory")->required();
  train->add_flag("--matrix", matrix, "Train every matrix cell and write the combined report");
  train->add_option("--cells", cells, "Restrict the matrix to these cells (e.g. cvt_l1_4cams)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  std::string checkpoint, split = "test", name;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--root", root, "Dataset root (default: $BEVCVT_DATA_ROOT)");
  eval->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--name", name, "Model name used in tables");
  eval->add_option("--out", out, "Directory for metrics_<split>.json (default: the checkpoint's)");

  auto* rep = app.add_subcommand("report", "Emit tables, loss curves and segment traces");
  std::vector<std::string> inputs;
  rep->add_option("inputs", inputs, "Run or matrix directories")->required();
  rep->add_option("--out", out, "Report directory")->required();

  auto* vis = app.add_subcommand("visualize", "Write inference panels for samples");
  std::vector<std::string> samples;
  double threshold = 0.5;
  vis->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  vis->add_option("--root", root, "Dataset root (default: $BEVCVT_DATA_ROOT)");
  vis->add_option("--samples", samples, "Sample ids town/route/frame")->required();
  vis->add_option("--out", out, "Panel directory")->required();
  vis->add_option("--threshold", threshold, "Probability threshold")->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) {
      if (out.empty()) out = require_root(root);
      if (!ingest_source.empty()) {
        check(bevcvt_ingest_external(ingest_source.c_str(), out.c_str(), rig.empty() ? nullptr : rig.c_str(),
                                     force ? 1 : 0));
        std::cout << "ingested " << ingest_source << " into " << out << "\n";
      } else {
        const auto cfg = load_config(config_path, sets).dump();
        OwnedString listing;
        check(bevcvt_generate_dataset(cfg.c_str(), out.c_str(), force ? 1 : 0, &listing.p));
        std::cout << listing.str();
      }
    } else if (*train) {
      json cfg = load_config(config_path, sets);
      const auto data = require_root(root);
      if (matrix || !cells.empty()) {
        json overrides = cfg.contains("model_overrides") ? cfg.at("model_overrides") : json::object();
        cfg.erase("model_overrides");
        if (cfg.contains("cells") && cells.empty()) cells = cfg.at("cells").get<std::vector<std::string>>();
        cfg.erase("cells");
        const auto base = cfg.dump(), ov = overrides.dump();
        const auto cells_json = cells.empty() ? std::string() : json(cells).dump();
        OwnedString result;
        check(bevcvt_run_matrix(base.c_str(), ov.c_str(), cells_json.empty() ? nullptr : cells_json.c_str(),
                                data.c_str(), out.c_str(), print_line, nullptr, &result.p));
        const auto r = json::parse(result.str());
        bool all_ok = true;
        for (const auto& c : r.at("cells")) {
          if (!c.at("error").get<std::string>().empty()) all_ok = false;
        }
        run_report({out}, out + "/report");
        if (!all_ok) {
          std::cerr << "bevcvt: some matrix cells failed; see " << out << "/matrix.json\n";
          return kExitFailure;
        }
      } else {
        const auto text = cfg.dump();
        OwnedString run;
        check(bevcvt_train(text.c_str(), data.c_str(), out.c_str(), print_line, nullptr, &run.p));
        const auto r = json::parse(run.str());
        std::cout << "best checkpoint " << r.at("best_checkpoint").get<std::string>() << " (epoch "
                  << r.at("best_epoch").get<int>() << ")\n";
      }
    } else if (*eval) {
      const auto data = require_root(root);
      bevcvt_model* model = nullptr;
      check(bevcvt_model_load(checkpoint.c_str(), &model));
      std::unique_ptr<bevcvt_model, void (*)(bevcvt_model*)> guard(model, bevcvt_model_destroy);
      OwnedString report;
      check(bevcvt_model_evaluate(model, data.c_str(), split.c_str(), name.empty() ? nullptr : name.c_str(),
                                  &report.p));
      if (out.empty()) out = std::filesystem::path(checkpoint).parent_path().string();
      if (out.empty()) out = ".";
      std::filesystem::create_directories(out);
      const auto path = std::filesystem::path(out) / ("metrics_" + split + ".json");
      const auto j = json::parse(report.str());
      std::ofstream(path) << j.dump(2) << "\n";
      const auto& o = j.at("overall");
      std::cout << j.at("model").get<std::string>() << " on " << split << ": road " << o.at("road") << ", trajectory "
                << o.at("trajectory") << ", lane " << o.at("lane") << "\nwrote " << path.string() << "\n";
    } else if (*rep) {
      run_report(inputs, out);
    } else if (*vis) {
      const auto data = require_root(root);
      std::vector<const char*> ids;
      for (const auto& s : samples) ids.push_back(s.c_str());
      OwnedString files;
      check(bevcvt_visualize(checkpoint.c_str(), data.c_str(), ids.data(), ids.size(), out.c_str(), threshold,
                             &files.p));
      for (const auto& f : json::parse(files.str())) std::cout << "wrote " << f.get<std::string>() << "\n";
    }
  } catch (const Failure& f) {
    return f.exit_code;
  } catch (const std::exception& ex) {
    std::cerr << "bevcvt: " << ex.what() << "\n";
    return kExitFailure;
  }
  return 0;
}

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

#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "error.hpp"

namespace bevcvt::report {

using nlohmann::json;

namespace {

constexpr std::array<const char*, 6> kSeriesColors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, '|')) out.push_back(trim(cell));
  return out;
}

std::string format_value(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", kTableDecimals, *v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text, ReportOutputs& out) {
  std::ofstream f(path);
  if (!f) fail(ErrorCode::Io, "cannot write " + path.string());
  f << text;
  out.files.push_back(path);
}

const char* label_color(metrics::SegmentLabel l) {
  switch (l) {
    case metrics::SegmentLabel::Straight: return "#ececec";
    case metrics::SegmentLabel::Turn: return "#fdd9a8";
    case metrics::SegmentLabel::Intersection: return "#c6dcf2";
  }
  return "#ffffff";
}

struct RunInput {
  fs::path dir;
  std::optional<training::RunRecord> run;
  std::map<std::string, metrics::MetricsReport> metrics;
};

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> dirs;
  for (const auto& in : inputs) {
    if (fs::exists(in / "matrix.json")) {
      std::ifstream f(in / "matrix.json");
      const auto j = json::parse(f);
      const auto errors = j.value("errors", json::object());
      for (const auto& cell : j.at("cells")) {
        const auto name = cell.get<std::string>();
        if (!errors.contains(name)) dirs.push_back(in / name);
      }
    } else {
      dirs.push_back(in);
    }
  }
  return dirs;
}

std::string table_title(const std::string& split, const std::vector<const metrics::MetricsReport*>& reports) {
  std::string town = "unknown";
  if (!reports.empty() && !reports.front()->routes.empty()) town = reports.front()->routes.front().town;
  if (split == "val") {
    std::string route = reports.front()->routes.front().route;
    return "Mean IoU per channel for different models from " + town + " - Validation route (" + route + ")";
  }
  return "Mean IoU per channel for different models from " + town + " - all routes";
}

// Compares the best CVT row against the best UNet row per channel.
std::vector<std::string> ordering_findings(const Table& table) {
  std::vector<std::string> out;
  for (int c : {0, 1}) {
    std::optional<double> cvt, unet;
    for (const auto& row : table.rows) {
      if (!row.values[c]) continue;
      auto& slot = row.model.rfind("CVT", 0) == 0 ? cvt : unet;
      slot = std::max(slot.value_or(-1.0), *row.values[c]);
    }
    if (!cvt || !unet) continue;
    std::ostringstream os;
    os << std::fixed << std::setprecision(kTableDecimals) << table.title << ": " << kColumns[c] << " best CVT "
       << *cvt << " vs best UNet " << *unet << (*cvt > *unet ? " (CVT ahead)" : " (UNet ahead or tied)");
    out.push_back(os.str());
  }
  return out;
}

}  // namespace

double round_to_decimals(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

Table make_table(const std::string& title, std::span<const metrics::MetricsReport> reports) {
  Table t;
  t.title = title;
  for (const auto& r : reports) {
    TableRow row;
    row.model = r.model;
    const std::array<std::optional<double>, 3> v{r.overall.road(), r.overall.trajectory(), r.overall.lane()};
    for (std::size_t i = 0; i < 3; ++i) {
      if (v[i]) row.values[i] = round_to_decimals(*v[i]);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string table_to_text(const Table& table) {
  std::size_t name_w = std::string("Model").size();
  for (const auto& r : table.rows) name_w = std::max(name_w, r.model.size());
  std::array<std::size_t, 3> w{};
  for (std::size_t i = 0; i < 3; ++i) w[i] = std::max<std::size_t>(std::string(kColumns[i]).size(), kTableDecimals + 2);
  std::ostringstream os;
  os << table.title << "\n" << std::left << std::setw(static_cast<int>(name_w)) << "Model";
  for (std::size_t i = 0; i < 3; ++i) os << " | " << std::setw(static_cast<int>(w[i])) << kColumns[i];
  os << "\n" << std::string(name_w, '-');
  for (std::size_t i = 0; i < 3; ++i) os << "-+-" << std::string(w[i], '-');
  os << "\n";
  for (const auto& r : table.rows) {
    os << std::setw(static_cast<int>(name_w)) << r.model;
    for (std::size_t i = 0; i < 3; ++i) os << " | " << std::setw(static_cast<int>(w[i])) << format_value(r.values[i]);
    os << "\n";
  }
  return os.str();
}

Table table_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  Table t;
  if (!std::getline(is, t.title)) fail(ErrorCode::Format, "table text: missing title");
  std::string header, rule;
  if (!std::getline(is, header) || !std::getline(is, rule)) fail(ErrorCode::Format, "table text: missing header");
  const auto cols = split_cells(header);
  if (cols.size() != 4 || cols[0] != "Model" || cols[1] != kColumns[0] || cols[2] != kColumns[1] || cols[3] != kColumns[2]) {
    fail(ErrorCode::Format, "table text: unexpected header: " + header);
  }
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_cells(line);
    if (cells.size() != 4) fail(ErrorCode::Format, "table text: malformed row: " + line);
    TableRow row;
    row.model = cells[0];
    for (std::size_t i = 0; i < 3; ++i) {
      if (cells[i + 1] != "-") row.values[i] = std::stod(cells[i + 1]);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

json table_to_json(const Table& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    json row{{"model", r.model}};
    for (std::size_t i = 0; i < 3; ++i) {
      std::string key = kColumns[i];
      std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
      row[key] = r.values[i] ? json(*r.values[i]) : json(nullptr);
    }
    rows.push_back(std::move(row));
  }
  return {{"title", table.title}, {"columns", {"Model", "Road", "Trajectory", "Lane"}}, {"rows", rows}};
}

Table table_from_json(const json& j) {
  Table t;
  try {
    t.title = j.at("title").get<std::string>();
    for (const auto& r : j.at("rows")) {
      TableRow row;
      row.model = r.at("model").get<std::string>();
      const std::array<const char*, 3> keys{"road", "trajectory", "lane"};
      for (std::size_t i = 0; i < 3; ++i) {
        if (!r.at(keys[i]).is_null()) row.values[i] = r.at(keys[i]).get<double>();
      }
      t.rows.push_back(std::move(row));
    }
  } catch (const json::exception& ex) {
    fail(ErrorCode::Format, std::string("table json: ") + ex.what());
  }
  return t;
}

std::string line_plot_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                          std::span<const Series> series, std::span<const Band> bands,
                          std::optional<std::pair<double, double>> y_range) {
  constexpr double W = 760, H = 380, L = 70, R = 190, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  for (const auto& b : bands) {
    x0 = std::min(x0, b.x0);
    x1 = std::max(x1, b.x1);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  if (y_range) std::tie(y0, y1) = *y_range;
  if (!std::isfinite(y0)) y0 = 0, y1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) {
    const double pad = std::max(1e-3, std::abs(y0) * 0.1);
    y0 -= pad;
    y1 += pad;
  } else if (!y_range) {
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
  }
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << " " << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
     << "</text>\n";
  for (const auto& b : bands) {
    os << "<rect x=\"" << px(b.x0) << "\" y=\"" << T << "\" width=\"" << std::max(0.0, px(b.x1) - px(b.x0))
       << "\" height=\"" << H - T - B << "\" fill=\"" << b.color << "\"><title>" << xml_escape(b.label)
       << "</title></rect>\n";
  }
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = y0 + (y1 - y0) * i / 4.0;
    const double x = x0 + (x1 - x0) * i / 4.0;
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << std::setprecision(3) << y
       << "</text>\n";
    os << "<text x=\"" << px(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << x << "</text>\n"
       << std::setprecision(6);
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xml_escape(x_label)
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (T + H - B) / 2 << ")\">" << xml_escape(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kSeriesColors[k % kSeriesColors.size()];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (std::isfinite(s.y[i])) os << px(s.x[i]) << "," << py(std::clamp(s.y[i], y0, y1)) << " ";
    }
    os << "\"/>\n";
    const double ly = T + 14 + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly - 4
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 36 << "\" y=\"" << ly << "\">" << xml_escape(s.label) << "</text>\n";
  }
  double ly = T + 14 + 18.0 * static_cast<double>(series.size()) + 8;
  std::map<std::string, std::string> legend;
  for (const auto& b : bands) legend.emplace(b.label, b.color);
  for (const auto& [label, color] : legend) {
    os << "<rect x=\"" << W - R + 10 << "\" y=\"" << ly - 10 << "\" width=\"20\" height=\"10\" fill=\"" << color
       << "\" stroke=\"#999\"/>\n";
    os << "<text x=\"" << W - R + 36 << "\" y=\"" << ly << "\">" << xml_escape(label) << "</text>\n";
    ly += 18;
  }
  os << "</svg>\n";
  return os.str();
}

std::string loss_curve_svg(const training::RunRecord& run) {
  std::array<Series, 2> s{Series{"train", {}, {}}, Series{"validation", {}, {}}};
  for (const auto& e : run.epochs) {
    s[0].x.push_back(e.epoch);
    s[0].y.push_back(e.train_loss);
    s[1].x.push_back(e.epoch);
    s[1].y.push_back(e.val_loss);
  }
  return line_plot_svg("Training and validation loss: " + run.name, "epoch", "loss", s);
}

std::string trace_svg(const std::string& title, std::span<const TraceSeries> series) {
  std::vector<Series> lines;
  std::vector<Band> bands;
  for (const auto& t : series) {
    Series s{t.model, {}, t.trace.values};
    for (std::size_t i = 0; i < t.trace.values.size(); ++i) s.x.push_back(static_cast<double>(i));
    lines.push_back(std::move(s));
  }
  if (!series.empty()) {
    const auto& labels = series.front().trace.labels;
    for (std::size_t i = 0; i < labels.size();) {
      std::size_t j = i;
      while (j < labels.size() && labels[j] == labels[i]) ++j;
      bands.push_back({static_cast<double>(i) - 0.5, static_cast<double>(j) - 0.5, label_color(labels[i]),
                       metrics::label_name(labels[i])});
      i = j;
    }
  }
  return line_plot_svg(title, "frame", "mean IoU", lines, bands, std::pair{0.0, 1.0});
}

std::string slug(const std::string& text) {
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      out += static_cast<char>(std::tolower(c));
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

void write_matrix_index(const training::MatrixResult& result) {
  json cells = json::array();
  json errors = json::object();
  for (const auto& c : result.cells) {
    cells.push_back(training::cell_slug(c.cell));
    if (!c.error.empty()) errors[training::cell_slug(c.cell)] = c.error;
  }
  std::ofstream f(result.out_dir / "matrix.json");
  if (!f) fail(ErrorCode::Io, "cannot write " + (result.out_dir / "matrix.json").string());
  f << json{{"cells", cells}, {"errors", errors}}.dump(2) << "\n";
}

ReportOutputs write_report(const std::vector<fs::path>& inputs, const fs::path& out_dir) {
  if (inputs.empty()) fail(ErrorCode::InvalidArgument, "report: no inputs given");
  std::vector<RunInput> runs;
  std::vector<std::string> missing;
  for (const auto& dir : expand_inputs(inputs)) {
    RunInput in;
    in.dir = dir;
    if (fs::exists(dir / "run.jsonl") && fs::exists(dir / "config.json")) in.run = training::read_run_record(dir);
    for (const std::string split : {"val", "test"}) {
      const auto p = dir / ("metrics_" + split + ".json");
      if (!fs::exists(p)) continue;
      std::ifstream f(p);
      try {
        in.metrics.emplace(split, metrics::report_from_json(json::parse(f)));
      } catch (const json::exception& ex) {
        fail(ErrorCode::Format, p.string() + ": " + ex.what());
      }
    }
    if (in.metrics.empty()) missing.push_back((dir / "metrics_val.json").string() + " or metrics_test.json");
    runs.push_back(std::move(in));
  }
  if (!missing.empty()) {
    std::string msg = "report: missing evaluation outputs:";
    for (const auto& m : missing) msg += "\n  " + m;
    fail(ErrorCode::NotFound, msg);
  }

  fs::create_directories(out_dir);
  ReportOutputs out;
  for (const std::string split : {"val", "test"}) {
    std::vector<metrics::MetricsReport> reports;
    std::vector<const metrics::MetricsReport*> ptrs;
    for (const auto& r : runs) {
      const auto it = r.metrics.find(split);
      if (it != r.metrics.end()) reports.push_back(it->second);
    }
    if (reports.empty()) continue;
    for (const auto& r : reports) ptrs.push_back(&r);
    const Table table = make_table(table_title(split, ptrs), reports);
    write_text(out_dir / ("table_" + split + ".txt"), table_to_text(table), out);
    write_text(out_dir / ("table_" + split + ".json"), table_to_json(table).dump(2) + "\n", out);
    (split == "val" ? out.val : out.test) = table;

    // One trace plot per route, every model on the same axes.
    std::map<std::pair<std::string, std::string>, std::vector<TraceSeries>> by_route;
    for (const auto& r : reports) {
      for (const auto& rb : r.routes) by_route[{rb.town, rb.route}].push_back({r.model, rb.trace});
    }
    for (const auto& [key, series] : by_route) {
      const auto name = "trace_" + split + "_" + slug(key.first) + "_" + slug(key.second) + ".svg";
      write_text(out_dir / name, trace_svg("Per-frame IoU along " + key.first + " " + key.second, series), out);
    }
  }
  for (const auto& r : runs) {
    if (!r.run || r.run->epochs.empty()) continue;
    write_text(out_dir / ("loss_" + slug(r.run->name) + ".svg"), loss_curve_svg(*r.run), out);
  }
  if (out.test) out.findings = ordering_findings(*out.test);
  std::string findings;
  for (const auto& f : out.findings) findings += f + "\n";
  write_text(out_dir / "findings.txt", findings, out);
  return out;
}

std::array<int, 4> tile_rect(int index, int tile_w, int tile_h) {
  return {kTileGap + index * (tile_w + kTileGap), kTileGap, tile_w, tile_h};
}

Image render_panel(const dataset::Sample& sample, const Image& gt, const BinaryGrid& prediction) {
  const int tw = sample.grid.cols, th = sample.grid.rows;
  if (gt.width != tw || gt.height != th || gt.channels != 3) fail(ErrorCode::Shape, "render_panel: GT image does not match the grid");
  if (prediction.channels != 3 || prediction.rows != th || prediction.cols != tw) {
    fail(ErrorCode::Shape, "render_panel: prediction does not match the grid");
  }
  const int n_tiles = static_cast<int>(sample.views.size()) + 3;
  Image panel(kTileGap + n_tiles * (tw + kTileGap), th + 2 * kTileGap, 3, 40);
  auto blit = [&](int index, const Image& src) {
    const auto [x0, y0, w, h] = tile_rect(index, tw, th);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int sx = x * src.width / w, sy = y * src.height / h;
        for (int c = 0; c < 3; ++c) panel.at(x0 + x, y0 + y, c) = src.at(sx, sy, src.channels == 1 ? 0 : c);
      }
    }
  };
  int index = 0;
  for (const auto& v : sample.views) blit(index++, v.image);
  blit(index++, dataset::grid_to_image(sample.trajectory));
  blit(index++, gt);
  blit(index++, dataset::grid_to_image(prediction));
  return panel;
}

std::vector<fs::path> visualize(const fs::path& checkpoint, const fs::path& data_root,
                                const std::vector<std::string>& sample_ids, const fs::path& out_dir,
                                double threshold) {
  if (sample_ids.empty()) fail(ErrorCode::InvalidArgument, "visualize: no sample ids given");
  auto loaded = model::load_checkpoint(checkpoint);
  auto& net = *loaded.net;
  const auto manifest = dataset::read_manifest(data_root);
  const bool drop_rear = training::needs_rear_drop(net.n_views(), manifest.n_views);
  std::vector<dataset::Sample> samples;
  for (const auto& text : sample_ids) {
    const auto id = dataset::SampleId::parse(text);
    const auto dir = data_root / id.relative_path();
    if (!fs::is_directory(dir)) fail(ErrorCode::NotFound, "unknown sample id: " + text);
    auto s = dataset::read_sample(dir, manifest.n_views);
    samples.push_back(drop_rear ? dataset::drop_rear_view(s) : std::move(s));
  }
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  torch::NoGradGuard no_grad;
  for (const auto& s : samples) {
    const std::vector<dataset::Sample> one{s};
    const auto logits = net.forward(model::to_tensors(one))[0].contiguous();
    const auto pred = metrics::binarize(std::span<const float>(logits.data_ptr<float>(), logits.numel()),
                                        static_cast<int>(logits.size(0)), static_cast<int>(logits.size(1)),
                                        static_cast<int>(logits.size(2)), threshold);
    const Image gt = read_png(data_root / s.id.relative_path() / "bev_gt.png");
    const auto path = out_dir / ("panel_" + slug(s.id.town) + "_" + slug(s.id.route) + "_" +
                                 std::to_string(s.id.frame) + ".png");
    write_png(path, render_panel(s, gt, pred));
    written.push_back(path);
  }
  return written;
}

}  // namespace bevcvt::report

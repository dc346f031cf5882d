// Copyright 2026 The scenept Authors
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

#include "scenept/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace scenept
{

namespace
{

std::string num(double v)
{
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double to_double(const std::string & s)
{
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw std::invalid_argument("metric csv: bad number '" + s + "'");
  return v;
}

std::string fixed(double v, int digits)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape(const std::string & s)
{
  std::string out;
  for (char c : s) {
    if (c == '<') {
      out += "&lt;";
    } else if (c == '>') {
      out += "&gt;";
    } else if (c == '&') {
      out += "&amp;";
    } else {
      out += c;
    }
  }
  return out;
}

}  // namespace

bool MetricRow::operator==(const MetricRow & o) const
{
  return run_id == o.run_id && stage == o.stage && epoch == o.epoch && split == o.split &&
         m.b_minFDE6 == o.m.b_minFDE6 && m.minADE6 == o.m.minADE6 && m.minFDE6 == o.m.minFDE6 && m.MR6 == o.m.MR6 &&
         m.minADE1 == o.m.minADE1 && m.minFDE1 == o.m.minFDE1 && m.MR1 == o.m.MR1 && wallclock_s == o.wallclock_s;
}

std::string to_csv_line(const MetricRow & r)
{
  if (r.run_id.find(',') != std::string::npos || r.stage.find(',') != std::string::npos) {
    throw std::invalid_argument("metric csv: run_id and stage must not contain commas");
  }
  std::string s = r.run_id + "," + r.stage + "," + std::to_string(r.epoch) + "," + r.split;
  for (double v : {r.m.b_minFDE6, r.m.minADE6, r.m.minFDE6, r.m.MR6, r.m.minADE1, r.m.minFDE1, r.m.MR1, r.wallclock_s}) {
    s += "," + num(v);
  }
  return s;
}

MetricRow parse_csv_line(const std::string & line)
{
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (cells.size() != 12) throw std::invalid_argument("metric csv: expected 12 columns in '" + line + "'");
  MetricRow r;
  r.run_id = cells[0];
  r.stage = cells[1];
  r.epoch = std::stoi(cells[2]);
  r.split = cells[3];
  r.m.b_minFDE6 = to_double(cells[4]);
  r.m.minADE6 = to_double(cells[5]);
  r.m.minFDE6 = to_double(cells[6]);
  r.m.MR6 = to_double(cells[7]);
  r.m.minADE1 = to_double(cells[8]);
  r.m.minFDE1 = to_double(cells[9]);
  r.m.MR1 = to_double(cells[10]);
  r.wallclock_s = to_double(cells[11]);
  return r;
}

void write_metric_csv(const std::filesystem::path & path, std::span<const MetricRow> rows)
{
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kMetricCsvHeader << "\n";
  for (const auto & r : rows) out << to_csv_line(r) << "\n";
}

std::vector<MetricRow> read_metric_csv(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kMetricCsvHeader) throw std::invalid_argument("metric csv: unexpected header in " + path.string());
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(parse_csv_line(line));
  }
  return rows;
}

MeanStd mean_std(std::span<const double> values)
{
  MeanStd r;
  if (values.empty()) return r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  if (values.size() < 2) return r;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return r;
}

SvgFrame make_frame(double half_extent, double pixels)
{
  SvgFrame f;
  f.width = pixels;
  f.height = pixels;
  f.cx = pixels / 2.0;
  f.cy = pixels / 2.0;
  f.scale = pixels / (2.0 * half_extent);
  return f;
}

std::string scene_svg(const Scene & prepared, const PredictionValues & pred, const SvgFrame & frame, const std::string & title)
{
  std::ostringstream s;
  const auto pt = [&](const Eigen::Vector2d & p) {
    const auto q = frame.map(p);
    return fixed(q.x(), 2) + "," + fixed(q.y(), 2);
  };
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << frame.width << "\" height=\"" << frame.height
    << "\" viewBox=\"0 0 " << frame.width << " " << frame.height << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<title>" << escape(title) << "</title>\n";
  s << "<g id=\"roads\" stroke=\"#bbbbbb\" stroke-width=\"1\">\n";
  for (const auto & r : prepared.roads) {
    const auto a = frame.map(r.start);
    const auto b = frame.map(r.end);
    s << "<line x1=\"" << fixed(a.x(), 2) << "\" y1=\"" << fixed(a.y(), 2) << "\" x2=\"" << fixed(b.x(), 2) << "\" y2=\""
      << fixed(b.y(), 2) << "\"/>\n";
  }
  s << "</g>\n<g id=\"history\" fill=\"none\" stroke-width=\"2\">\n";
  for (std::size_t a = 0; a < prepared.agents.size(); ++a) {
    std::string pts;
    for (const auto & st : prepared.agents[a].states) {
      if (st.valid) pts += pt({st.x, st.y}) + " ";
    }
    if (pts.empty()) continue;
    const bool target = static_cast<int>(a) == prepared.target_index;
    s << "<polyline stroke=\"" << (target ? "#1f77b4" : "#7f7f7f") << "\" points=\"" << pts << "\"/>\n";
  }
  s << "</g>\n";
  if (prepared.future) {
    std::string pts = pt({0.0, 0.0}) + " ";
    for (const auto & p : *prepared.future) pts += pt(p) + " ";
    s << "<polyline id=\"ground_truth\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"2\" points=\"" << pts << "\"/>\n";
  }
  s << "<g id=\"predictions\" fill=\"none\" stroke=\"#d62728\">\n";
  for (std::size_t i = 0; i < pred.trajectories.size(); ++i) {
    const auto & t = pred.trajectories[i];
    std::string pts = pt({0.0, 0.0}) + " ";
    for (Eigen::Index k = 0; k < t.rows(); ++k) pts += pt(t.row(k).transpose()) + " ";
    const double p = pred.scores(static_cast<Eigen::Index>(i));
    s << "<polyline stroke-width=\"" << fixed(0.5 + 3.0 * p, 2) << "\" points=\"" << pts << "\"/>\n";
    const auto end = frame.map(t.row(t.rows() - 1).transpose());
    s << "<text x=\"" << fixed(end.x() + 3, 2) << "\" y=\"" << fixed(end.y(), 2) << "\" font-size=\"10\" fill=\"#d62728\">"
      << fixed(p, 2) << "</text>\n";
  }
  s << "</g>\n</svg>\n";
  return s.str();
}

std::string curves_svg(std::span<const Curve> curves, const std::string & y_label)
{
  const double W = 640;
  const double H = 400;
  const double left = 60;
  const double right = 170;
  const double top = 20;
  const double bottom = 40;
  std::size_t n = 1;
  double lo = 1e300;
  double hi = -1e300;
  for (const auto & c : curves) {
    n = std::max(n, c.y.size());
    for (double v : c.y) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (lo > hi) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const auto X = [&](std::size_t e) {
    return left + (W - left - right) * (n > 1 ? static_cast<double>(e) / static_cast<double>(n - 1) : 0.0);
  };
  const auto Y = [&](double v) { return top + (H - top - bottom) * (hi - v) / (hi - lo); };
  static const char * palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << left << "\" y=\"" << H - 8 << "\" font-size=\"12\">epoch 1 .. " << n << "</text>\n";
  s << "<text x=\"4\" y=\"" << top + 10 << "\" font-size=\"12\">" << escape(y_label) << "</text>\n";
  s << "<text x=\"4\" y=\"" << Y(hi) + 12 << "\" font-size=\"10\">" << fixed(hi, 3) << "</text>\n";
  s << "<text x=\"4\" y=\"" << Y(lo) << "\" font-size=\"10\">" << fixed(lo, 3) << "</text>\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto & c = curves[i];
    const char * color = palette[i % 8];
    std::string pts;
    for (std::size_t e = 0; e < c.y.size(); ++e) pts += fixed(X(e), 2) + "," + fixed(Y(c.y[e]), 2) + " ";
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"" << (c.dashed ? " stroke-dasharray=\"5,3\"" : "")
      << " points=\"" << pts << "\"/>\n";
    const double ly = top + 14.0 * static_cast<double>(i + 1);
    s << "<line x1=\"" << W - right + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - right + 30 << "\" y2=\"" << ly - 4
      << "\" stroke=\"" << color << "\"" << (c.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
    s << "<text x=\"" << W - right + 34 << "\" y=\"" << ly << "\" font-size=\"11\">" << escape(c.label) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace scenept

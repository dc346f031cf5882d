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

#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "scenept/scene.hpp"
#include "scenept/tasks.hpp"

namespace scenept
{

/// One line of the metric CSV.
struct MetricRow
{
  std::string run_id;
  std::string stage;
  int epoch = 0;
  std::string split;
  MetricSummary m;
  double wallclock_s = 0.0;

  bool operator==(const MetricRow & o) const;
};

inline constexpr const char * kMetricCsvHeader =
  "run_id,stage,epoch,split,b_minFDE6,minADE6,minFDE6,MR6,minADE1,minFDE1,MR1,wallclock_s";

/// Doubles are written with enough digits to read back exactly.
std::string to_csv_line(const MetricRow & row);
MetricRow parse_csv_line(const std::string & line);
void write_metric_csv(const std::filesystem::path & path, std::span<const MetricRow> rows);
std::vector<MetricRow> read_metric_csv(const std::filesystem::path & path);

struct MeanStd
{
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

/// Affine map from scene meters to SVG pixels: u = cx + scale * x, v = cy - scale * y.
struct SvgFrame
{
  double cx = 0.0;
  double cy = 0.0;
  double scale = 1.0;
  double width = 0.0;
  double height = 0.0;

  Eigen::Vector2d map(const Eigen::Vector2d & p) const { return {cx + scale * p.x(), cy - scale * p.y()}; }
};

/// Frame covering [-half_extent, half_extent]^2 meters around the origin.
SvgFrame make_frame(double half_extent, double pixels);

/// Road vectors, histories, ground-truth future and the predictions (with scores) of one
/// prepared scene, in its target frame.
std::string scene_svg(
  const Scene & prepared, const PredictionValues & pred, const SvgFrame & frame, const std::string & title);

struct Curve
{
  std::string label;
  std::vector<double> y;  // one value per epoch, from epoch 1
  bool dashed = false;
};

/// Line chart of per-epoch values.
std::string curves_svg(std::span<const Curve> curves, const std::string & y_label);

}  // namespace scenept

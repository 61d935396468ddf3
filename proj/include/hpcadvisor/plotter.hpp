#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hpcadvisor/dataset.hpp"

namespace hpcadvisor {

enum class PlotKind { time_vs_nodes, time_vs_cost, speedup, efficiency };

std::string_view to_string(PlotKind kind) noexcept;
PlotKind parse_plot_kind(std::string_view text);
inline constexpr PlotKind kAllPlotKinds[] = {PlotKind::time_vs_nodes, PlotKind::time_vs_cost, PlotKind::speedup,
                                             PlotKind::efficiency};

struct PlotSpec {
  PlotKind kind = PlotKind::time_vs_nodes;
  DataFilter filter;
  std::optional<std::string> subtitle;
  std::filesystem::path output_path;  // empty: plot_<kind>.svg in the current directory
  bool log_x = false;
};

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y)
  bool connect = true;

  bool operator==(const PlotSeries&) const = default;
};

struct PlotData {
  PlotKind kind = PlotKind::time_vs_nodes;
  std::vector<PlotSeries> series;
  bool superlinear = false;  // some efficiency above 1
};

PlotData build_series(std::span<const RunRecord> records, PlotKind kind);
// Throws Error when the filter selects nothing.
PlotData build_series(const DatasetStore& store, const PlotSpec& spec);

struct RenderedPlot {
  std::string svg;
  std::string csv;  // series,x,y rows with shortest round-trip formatting
};

RenderedPlot render(const PlotData& data, const PlotSpec& spec);

std::filesystem::path plot_output_path(const PlotSpec& spec);
// Writes the SVG to `svg_path` and the CSV next to it with a .csv extension.
void write_plot(const RenderedPlot& plot, const std::filesystem::path& svg_path);

}  // namespace hpcadvisor

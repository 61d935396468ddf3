#include "hpcadvisor/plotter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "hpcadvisor/analytics.hpp"
#include "hpcadvisor/errors.hpp"

namespace hpcadvisor {

std::string_view to_string(PlotKind kind) noexcept {
  switch (kind) {
    case PlotKind::time_vs_nodes: return "time_vs_nodes";
    case PlotKind::time_vs_cost: return "time_vs_cost";
    case PlotKind::speedup: return "speedup";
    case PlotKind::efficiency: return "efficiency";
  }
  return "time_vs_nodes";
}

PlotKind parse_plot_kind(std::string_view text) {
  for (auto k : kAllPlotKinds)
    if (to_string(k) == text) return k;
  throw ConfigError("kind", fmt::format("unknown plot kind '{}'", text));
}

namespace {

std::string inputs_label(const AppInputs& inputs) {
  std::string s;
  for (const auto& [k, v] : inputs) s += fmt::format("{}{}={}", s.empty() ? "" : " ", k, v);
  return s;
}

}  // namespace

PlotData build_series(std::span<const RunRecord> records, PlotKind kind) {
  PlotData data;
  data.kind = kind;
  std::set<AppInputs> combos;
  for (const auto& r : records) combos.insert(r.appinputs);
  const bool mixed = combos.size() > 1;
  auto label_for = [&](std::string_view sku, const AppInputs& inputs) {
    auto base = canonical_sku(sku);
    return mixed ? fmt::format("{} {}", base, inputs_label(inputs)) : base;
  };

  if (kind == PlotKind::time_vs_cost) {
    std::map<std::pair<std::string, AppInputs>, PlotSeries> groups;
    for (const auto& r : records) {
      auto& s = groups[{canonical_sku(r.sku), r.appinputs}];
      s.label = label_for(r.sku, r.appinputs);
      s.connect = false;
      s.points.emplace_back(r.cost, r.exectime_seconds);
    }
    for (auto& [key, s] : groups) {
      std::sort(s.points.begin(), s.points.end());
      data.series.push_back(std::move(s));
    }
    return data;
  }

  for (const auto& series : build_scaling_series(records)) {
    PlotSeries s;
    s.label = label_for(series.sku, series.appinputs);
    if (kind == PlotKind::time_vs_nodes) {
      for (const auto& p : series.points) s.points.emplace_back(p.nnodes, p.exectime_seconds);
    } else {
      const auto metric = kind == PlotKind::speedup ? speedup(series) : efficiency(series);
      if (kind == PlotKind::efficiency && has_superlinear(metric)) data.superlinear = true;
      for (const auto& m : metric) s.points.emplace_back(m.nnodes, m.value);
    }
    data.series.push_back(std::move(s));
  }
  return data;
}

PlotData build_series(const DatasetStore& store, const PlotSpec& spec) {
  const auto records = store.query(spec.filter);
  if (records.empty()) throw Error("no records match the plot filter");
  return build_series(records, spec.kind);
}

namespace {

constexpr double kWidth = 800, kHeight = 520;
constexpr double kLeft = 80, kRight = 190, kTop = 70, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1 : f < 3 ? 2 : f < 7 ? 5 : 10) * mag;
}

std::vector<double> linear_ticks(double lo, double hi) {
  const double step = nice_step(hi - lo, 6);
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step - 1e-9) * step; t <= hi + step * 1e-9; t += step)
    ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  return ticks;
}

std::string tick_label(double v) {
  if (std::abs(v - std::round(v)) < 1e-9) return fmt::format("{:.0f}", v);
  return fmt::format("{:g}", v);
}

struct Axes {
  std::string title, x, y;
};

Axes axes_for(PlotKind kind) {
  switch (kind) {
    case PlotKind::time_vs_nodes: return {"Execution Time vs Number of Nodes", "Number of nodes", "Execution time (s)"};
    case PlotKind::time_vs_cost: return {"Execution Time vs Cost", "Cost ($)", "Execution time (s)"};
    case PlotKind::speedup: return {"Speed up", "Number of nodes", "Speed up"};
    case PlotKind::efficiency: return {"Efficiency", "Number of nodes", "Efficiency"};
  }
  return {};
}

}  // namespace

RenderedPlot render(const PlotData& data, const PlotSpec& spec) {
  if (data.series.empty()) throw Error("nothing to plot");
  RenderedPlot out;

  out.csv = "series,x,y\n";
  for (const auto& s : data.series)
    for (const auto& [x, y] : s.points) out.csv += fmt::format("{},{},{}\n", csv_field(s.label), x, y);

  const bool log_x = spec.log_x && data.kind != PlotKind::time_vs_cost;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  std::set<double> xs;
  for (const auto& s : data.series) {
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
      xs.insert(x);
    }
  }
  const bool reference_line = data.kind == PlotKind::efficiency;
  if (reference_line) {
    ymin = std::min(ymin, 1.0);
    ymax = std::max(ymax, 1.0);
  }
  ymin = std::min(ymin, 0.0);
  if (ymax <= ymin) ymax = ymin + 1.0;
  ymax += (ymax - ymin) * 0.05;
  if (log_x) {
    xmin = std::log2(std::max(xmin, 1e-12));
    xmax = std::log2(std::max(xmax, 1e-12));
  }
  if (xmax <= xmin) {
    xmin -= 1.0;
    xmax += 1.0;
  } else {
    const double pad = (xmax - xmin) * 0.05;
    xmin -= pad;
    xmax += pad;
  }

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + ((log_x ? std::log2(x) : x) - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - ymin) / (ymax - ymin) * ph; };

  const auto axes = axes_for(data.kind);
  std::string& svg = out.svg;
  svg += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.0f}\" height=\"{1:.0f}\" viewBox=\"0 0 {0:.0f} {1:.0f}\" "
      "font-family=\"sans-serif\">\n",
      kWidth, kHeight);
  svg += fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n", kWidth, kHeight);
  svg += fmt::format("<text x=\"{:.1f}\" y=\"28\" font-size=\"18\" text-anchor=\"middle\">{}</text>\n",
                     kLeft + pw / 2, xml_escape(axes.title));
  if (spec.subtitle && !spec.subtitle->empty())
    svg += fmt::format("<text x=\"{:.1f}\" y=\"50\" font-size=\"13\" text-anchor=\"middle\" fill=\"#444\">{}</text>\n",
                       kLeft + pw / 2, xml_escape(*spec.subtitle));

  // grid and ticks
  svg += "<g class=\"grid\" stroke=\"#ddd\" stroke-width=\"1\">\n";
  const auto yticks = linear_ticks(ymin, ymax);
  for (double t : yticks)
    svg += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\"/>\n", kLeft, py(t), kLeft + pw,
                       py(t));
  std::vector<double> xticks;
  if (log_x || (data.kind != PlotKind::time_vs_cost && xs.size() <= 12)) {
    xticks.assign(xs.begin(), xs.end());
  } else {
    xticks = linear_ticks(xmin, xmax);
  }
  for (double t : xticks)
    svg += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\"/>\n", px(t), kTop, px(t),
                       kTop + ph);
  svg += "</g>\n";
  svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" stroke=\"#000\"/>\n",
                     kLeft, kTop, pw, ph);
  svg += "<g class=\"ticks\" font-size=\"11\">\n";
  for (double t : yticks)
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{}</text>\n", kLeft - 6, py(t) + 4,
                       tick_label(t));
  for (double t : xticks)
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", px(t), kTop + ph + 16,
                       tick_label(t));
  svg += "</g>\n";
  svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"13\" text-anchor=\"middle\">{}{}</text>\n",
                     kLeft + pw / 2, kHeight - 18, xml_escape(axes.x), log_x ? " (log scale)" : "");
  svg += fmt::format(
      "<text x=\"20\" y=\"{0:.1f}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 20 {0:.1f})\">{1}</text>\n",
      kTop + ph / 2, xml_escape(axes.y));

  if (reference_line)
    svg += fmt::format(
        "<line class=\"reference\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#555\" "
        "stroke-dasharray=\"6 4\"/>\n",
        kLeft, py(1.0), kLeft + pw, py(1.0));

  for (std::size_t i = 0; i < data.series.size(); ++i) {
    const auto& s = data.series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    svg += fmt::format("<g class=\"series\" data-label=\"{}\">\n", xml_escape(s.label));
    if (s.connect && s.points.size() > 1) {
      std::string pts;
      for (const auto& [x, y] : s.points) pts += fmt::format("{}{:.2f},{:.2f}", pts.empty() ? "" : " ", px(x), py(y));
      svg += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", pts, color);
    }
    for (const auto& [x, y] : s.points)
      svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"4\" fill=\"{}\"/>\n", px(x), py(y), color);
    svg += "</g>\n";
  }

  // legend
  const double lx = kLeft + pw + 16;
  svg += "<g class=\"legend\" font-size=\"12\">\n";
  for (std::size_t i = 0; i < data.series.size(); ++i) {
    const double ly = kTop + 12 + 20.0 * i;
    svg += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n", lx, ly - 10,
                       kPalette[i % std::size(kPalette)]);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", lx + 18, ly, xml_escape(data.series[i].label));
  }
  if (data.superlinear)
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" fill=\"#b00\">efficiency &gt; 1: superlinear</text>\n", lx,
                       kTop + 12 + 20.0 * data.series.size() + 8);
  svg += "</g>\n</svg>\n";
  return out;
}

std::filesystem::path plot_output_path(const PlotSpec& spec) {
  if (!spec.output_path.empty()) return spec.output_path;
  return std::filesystem::path(fmt::format("plot_{}.svg", to_string(spec.kind)));
}

void write_plot(const RenderedPlot& plot, const std::filesystem::path& svg_path) {
  auto write = [](const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write plot output '{}'", p.string()));
    out << content;
    if (!out) throw Error(fmt::format("write to '{}' failed", p.string()));
  };
  write(svg_path, plot.svg);
  auto csv_path = svg_path;
  csv_path.replace_extension(".csv");
  write(csv_path, plot.csv);
}

}  // namespace hpcadvisor

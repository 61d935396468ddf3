#include <gtest/gtest.h>

#include <charconv>
#include <filesystem>
#include <sstream>

#include "hpcadvisor/analytics.hpp"
#include "hpcadvisor/errors.hpp"
#include "hpcadvisor/plotter.hpp"

using namespace hpcadvisor;

namespace {

RunRecord rec(std::string sku, int n, double t, AppInputs in = {{"mesh", "80 24 24"}}) {
  RunRecord r;
  r.task_id = sku + std::to_string(n) + in.begin()->second;
  r.sku = std::move(sku);
  r.nnodes = n;
  r.ppn = 120;
  r.appinputs = std::move(in);
  r.exectime_seconds = t;
  r.cost = t / 3600.0 * n * 3.6;
  return r;
}

std::vector<RunRecord> sample() {
  return {rec("Standard_HB120rs_v3", 1, 400.1), rec("Standard_HB120rs_v3", 2, 190.3),
          rec("Standard_HB120rs_v3", 4, 98.7),  rec("Standard_HC44rs", 1, 1000.0),
          rec("Standard_HC44rs", 2, 520.0),     rec("Standard_HC44rs", 4, 300.0)};
}

struct CsvRow {
  std::string series;
  double x, y;
};

std::vector<CsvRow> parse_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "series,x,y");
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    const auto c2 = line.rfind(',');
    const auto c1 = line.rfind(',', c2 - 1);
    CsvRow r;
    r.series = line.substr(0, c1);
    std::from_chars(line.data() + c1 + 1, line.data() + c2, r.x);
    std::from_chars(line.data() + c2 + 1, line.data() + line.size(), r.y);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST(Plot, KindNames) {
  for (auto k : kAllPlotKinds) EXPECT_EQ(parse_plot_kind(to_string(k)), k);
  EXPECT_THROW(parse_plot_kind("pie"), Error);
  PlotSpec spec;
  spec.kind = PlotKind::speedup;
  EXPECT_EQ(plot_output_path(spec), "plot_speedup.svg");
}

TEST(Plot, SeriesMatchAnalytics) {
  const auto records = sample();
  const auto data = build_series(records, PlotKind::speedup);
  const auto scaling = build_scaling_series(records);
  ASSERT_EQ(data.series.size(), scaling.size());
  for (std::size_t i = 0; i < scaling.size(); ++i) {
    EXPECT_EQ(data.series[i].label, canonical_sku(scaling[i].sku));
    const auto s = speedup(scaling[i]);
    ASSERT_EQ(data.series[i].points.size(), s.size());
    for (std::size_t j = 0; j < s.size(); ++j) EXPECT_EQ(data.series[i].points[j].second, s[j].value);
  }
}

TEST(Plot, CsvRoundTripsExactly) {
  const auto records = sample();
  for (auto kind : kAllPlotKinds) {
    PlotSpec spec;
    spec.kind = kind;
    const auto data = build_series(records, kind);
    const auto plot = render(data, spec);
    const auto rows = parse_csv(plot.csv);
    std::size_t k = 0;
    for (const auto& s : data.series)
      for (const auto& [x, y] : s.points) {
        ASSERT_LT(k, rows.size());
        EXPECT_EQ(rows[k].series, s.label);
        EXPECT_EQ(rows[k].x, x);
        EXPECT_EQ(rows[k].y, y);
        ++k;
      }
    EXPECT_EQ(k, rows.size());
  }
}

TEST(Plot, DeterministicSvg) {
  const auto records = sample();
  PlotSpec spec;
  spec.kind = PlotKind::time_vs_cost;
  spec.subtitle = "VM cost only <draft>";
  const auto a = render(build_series(records, spec.kind), spec);
  const auto b = render(build_series(records, spec.kind), spec);
  EXPECT_EQ(a.svg, b.svg);
  EXPECT_EQ(a.csv, b.csv);
  EXPECT_NE(a.svg.find("<svg"), std::string::npos);
  EXPECT_NE(a.svg.find("VM cost only &lt;draft&gt;"), std::string::npos);
  EXPECT_NE(a.svg.find("</svg>"), std::string::npos);
}

TEST(Plot, EfficiencyReferenceAndSuperlinear) {
  std::vector<RunRecord> records = {rec("a", 1, 100), rec("a", 2, 45), rec("a", 4, 30)};
  const auto data = build_series(records, PlotKind::efficiency);
  EXPECT_TRUE(data.superlinear);
  PlotSpec spec;
  spec.kind = PlotKind::efficiency;
  const auto svg = render(data, spec).svg;
  EXPECT_NE(svg.find("class=\"reference\""), std::string::npos);
  EXPECT_NE(svg.find("superlinear"), std::string::npos);

  const auto plain = render(build_series(records, PlotKind::time_vs_nodes), PlotSpec{}).svg;
  EXPECT_EQ(plain.find("class=\"reference\""), std::string::npos);
}

TEST(Plot, MixedInputsLabelled) {
  auto records = sample();
  records.push_back(rec("Standard_HC44rs", 1, 700, {{"mesh", "60 16 16"}}));
  const auto data = build_series(records, PlotKind::time_vs_nodes);
  ASSERT_EQ(data.series.size(), 3u);
  for (const auto& s : data.series) EXPECT_NE(s.label.find("mesh"), std::string::npos) << s.label;
}

TEST(Plot, EmptySelectionThrows) {
  DatasetStore store;
  PlotSpec spec;
  EXPECT_THROW(build_series(store, spec), Error);
}

TEST(Plot, WritesSvgAndCsv) {
  const auto dir = std::filesystem::temp_directory_path() / "hpca_plot";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  PlotSpec spec;
  write_plot(render(build_series(sample(), spec.kind), spec), dir / "p.svg");
  EXPECT_TRUE(std::filesystem::exists(dir / "p.svg"));
  EXPECT_TRUE(std::filesystem::exists(dir / "p.csv"));
  std::filesystem::remove_all(dir);
}

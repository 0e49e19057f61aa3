#include "probekit/report.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "fixtures.hpp"
#include "probekit/errors.hpp"

namespace probekit {
namespace {

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

EvalReport sample_report() {
  EvalReport r;
  for (std::uint32_t layer = 0; layer < 3; ++layer) {
    for (const char* probe : {"diffmean", "logistic", "hinge"}) {
      r.add({"synth/m/last/pca8", layer, layer / 2.0, probe, "test_auroc", 0.5 + 0.1 * layer, {}, {}});
    }
  }
  r.add({"synth/m/last/pca8", 1, 0.5, "logistic~hinge", "spearman", 0.97, 0.95, 0.99});
  r.skipped.push_back({"synth/m/last/pca8", 7, "missing file"});
  r.provenance = {{"seed", 0}, {"files", {{"a.rqac", "0123"}}}};
  return r;
}

TEST(EvalReportTest, EmptyReportIsHeaderOnly) {
  EXPECT_EQ(report_csv(EvalReport{}), std::string(kReportCsvHeader) + "\n");
}

TEST(EvalReportTest, RowsAreKeyOrdered) {
  EvalReport r;
  r.add({"b", 0, 0, "p", "m", 1, {}, {}});
  r.add({"a", 2, 0, "p", "m", 2, {}, {}});
  r.add({"a", 1, 0, "q", "m", 3, {}, {}});
  r.add({"a", 1, 0, "p", "m", 4, {}, {}});
  const auto rows = r.rows();
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].value, 4);
  EXPECT_EQ(rows[1].value, 3);
  EXPECT_EQ(rows[2].value, 2);
  EXPECT_EQ(rows[3].value, 1);
}

TEST(EvalReportTest, RejectsDuplicatesAndNonFinite) {
  EvalReport r;
  r.add({"s", 0, 0, "p", "m", 1, {}, {}});
  EXPECT_THROW(r.add({"s", 0, 0, "p", "m", 2, {}, {}}), InvariantError);
  EXPECT_THROW(r.add({"s", 1, 0, "p", "m", std::nan(""), {}, {}}), InvariantError);
  EXPECT_THROW(r.add({"s", 2, 0, "p", "m", 0.0, INFINITY, {}}), InvariantError);
}

TEST(EvalReportTest, LookupAndMerge) {
  auto a = sample_report();
  EXPECT_EQ(a.value("synth/m/last/pca8", 1, "logistic~hinge", "spearman"), 0.97);
  EXPECT_EQ(a.find("synth/m/last/pca8", 9, "hinge", "test_auroc"), nullptr);
  EXPECT_THROW(a.value("nope", 0, "hinge", "test_auroc"), InvariantError);

  EvalReport b;
  b.add({"other", 0, 0, "hinge", "test_auroc", 0.6, {}, {}});
  b.skipped.push_back({"other", 3, "x"});
  const auto before = a.size();
  a.merge(b);
  EXPECT_EQ(a.size(), before + 1);
  EXPECT_EQ(a.skipped.size(), 2u);
  EXPECT_THROW(a.merge(b), InvariantError);
}

TEST(ReportCsv, ColumnsAndQuoting) {
  EvalReport r;
  r.add({"set,with\"comma", 4, 0.25, "p", "m", 0.125, -1.0, 2.0});
  r.add({"plain", 1, 1, "p", "m", 0.1, {}, {}});
  const auto csv = report_csv(r);
  std::istringstream in(csv);
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(header, kReportCsvHeader);
  EXPECT_EQ(first, "plain,1,1,p,m,0.10000000000000001,,");
  EXPECT_EQ(second, "\"set,with\"\"comma\",4,0.25,p,m,0.125,-1,2");
}

TEST(ReportJson, RoundTrips) {
  const auto r = sample_report();
  const auto back = report_from_json(nlohmann::json::parse(report_to_json(r).dump()));
  EXPECT_EQ(back.rows(), r.rows());
  EXPECT_EQ(back.skipped, r.skipped);
  EXPECT_EQ(back.provenance, r.provenance);
  EXPECT_EQ(report_csv(back), report_csv(r));
}

TEST(ReportJson, SchemaShape) {
  const auto j = report_to_json(sample_report());
  ASSERT_TRUE(j["settings"].is_object());
  const auto& layer = j["settings"]["synth/m/last/pca8"]["1"];
  EXPECT_EQ(layer["normalized_layer"], 0.5);
  ASSERT_TRUE(layer["metrics"].is_array());
  for (const auto& m : layer["metrics"]) {
    for (const char* key : {"probe", "metric", "value", "ci_low", "ci_high"}) {
      EXPECT_TRUE(m.contains(key)) << key;
    }
  }
  EXPECT_EQ(j["skipped"][0]["reason"], "missing file");
}

TEST(ReportJson, MalformedInputIsFormatError) {
  EXPECT_THROW(report_from_json(nlohmann::json::parse("{}")), FormatError);
  EXPECT_THROW(report_from_json(nlohmann::json::parse(R"({"settings": {"s": {"x": {}}}})")),
               FormatError);
  testing::TempDir dir;
  std::ofstream(dir.file("r.json")) << "[1,";
  EXPECT_THROW(read_report_json(dir.file("r.json")), FormatError);
  EXPECT_THROW(read_report_json(dir.file("none.json")), NotFoundError);
}

TEST(ReportSvg, OnePolylinePerSeries) {
  const auto svg = report_svg(sample_report(), "test_auroc");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_EQ(count_of(svg, "<polyline"), 3u);
  EXPECT_NE(svg.find("data-probe=\"hinge\""), std::string::npos);
  // Three points per series, one per layer.
  const std::regex points("points=\"([^\"]*)\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), points); it != std::sregex_iterator();
       ++it) {
    EXPECT_EQ(count_of((*it)[1].str(), ","), 3u);
  }
  EXPECT_EQ(count_of(report_svg(sample_report(), "spearman"), "<polyline"), 1u);
  EXPECT_EQ(count_of(report_svg(EvalReport{}, "test_auroc"), "<polyline"), 0u);
}

TEST(EmitReport, WritesRequestedFiles) {
  testing::TempDir dir;
  const auto prefix = dir.file("out/r");
  std::filesystem::create_directories(dir.path() / "out");
  EmitOptions opt;
  opt.svg = true;
  const auto written = emit_report(sample_report(), prefix, opt);
  ASSERT_EQ(written.size(), 3u);
  for (const auto& p : written) EXPECT_TRUE(std::filesystem::exists(p)) << p;
  EXPECT_EQ(read_report_json(prefix + ".json").rows(), sample_report().rows());
  opt = {};
  opt.json = false;
  EXPECT_EQ(emit_report(sample_report(), dir.file("csv_only"), opt).size(), 1u);
}

}  // namespace
}  // namespace probekit

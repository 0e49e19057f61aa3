#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

namespace probekit {

struct ReportRow {
  std::string setting;
  std::uint32_t layer = 0;
  double normalized_layer = 0.0;
  std::string probe;
  std::string metric;
  double value = 0.0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;

  bool operator==(const ReportRow&) const = default;
};

struct SkippedLayer {
  std::string setting;
  std::uint32_t layer = 0;
  std::string reason;

  bool operator==(const SkippedLayer&) const = default;
};

// Metric table keyed by (setting, layer, probe, metric). Rows are kept in key
// order so every serialization is canonical.
class EvalReport {
 public:
  using Key = std::tuple<std::string, std::uint32_t, std::string, std::string>;

  // Throws InvariantError on a duplicate key or a non-finite value.
  void add(ReportRow row);
  void merge(const EvalReport& other);

  std::vector<ReportRow> rows() const;
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  const ReportRow* find(const std::string& setting, std::uint32_t layer, const std::string& probe,
                        const std::string& metric) const;
  // Throws InvariantError when the key is absent.
  double value(const std::string& setting, std::uint32_t layer, const std::string& probe,
               const std::string& metric) const;

  nlohmann::json provenance = nlohmann::json::object();
  std::vector<SkippedLayer> skipped;

 private:
  std::map<Key, ReportRow> rows_;
};

inline constexpr std::string_view kReportCsvHeader =
    "setting,layer,normalized_layer,probe,metric,value,ci_low,ci_high";

std::string report_csv(const EvalReport& report);
nlohmann::ordered_json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

// Line chart of `metric` against normalized layer: one polyline per
// (setting, probe) series.
std::string report_svg(const EvalReport& report, std::string_view metric);

struct EmitOptions {
  bool csv = true;
  bool json = true;
  bool svg = false;
  std::string svg_metric = "test_auroc";
};

// Writes <prefix>.csv / <prefix>.json / <prefix>.svg. Returns written paths.
std::vector<std::string> emit_report(const EvalReport& report, const std::string& prefix,
                                     const EmitOptions& options = {});

EvalReport read_report_json(const std::string& path);

}  // namespace probekit

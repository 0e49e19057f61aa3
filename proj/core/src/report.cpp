#include "probekit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "binary_io.hpp"
#include "probekit/errors.hpp"

namespace probekit {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* probe_color(const std::string& probe, std::size_t fallback) {
  if (probe == "diffmean") return "#1f77b4";
  if (probe == "logistic") return "#d62728";
  if (probe == "hinge") return "#2ca02c";
  static const char* palette[] = {"#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
                                  "#17becf"};
  return palette[fallback % 6];
}

}  // namespace

void EvalReport::add(ReportRow row) {
  if (!std::isfinite(row.value)) {
    throw InvariantError("report: non-finite value for " + row.setting + "/" + row.probe + "/" +
                         row.metric);
  }
  if ((row.ci_low && !std::isfinite(*row.ci_low)) || (row.ci_high && !std::isfinite(*row.ci_high))) {
    throw InvariantError("report: non-finite interval for " + row.metric);
  }
  Key key{row.setting, row.layer, row.probe, row.metric};
  if (rows_.contains(key)) {
    throw InvariantError("report: duplicate row (" + row.setting + ", L" +
                         std::to_string(row.layer) + ", " + row.probe + ", " + row.metric + ")");
  }
  rows_.emplace(std::move(key), std::move(row));
}

void EvalReport::merge(const EvalReport& other) {
  for (const auto& [key, row] : other.rows_) add(row);
  skipped.insert(skipped.end(), other.skipped.begin(), other.skipped.end());
  if (other.provenance.empty()) return;
  if (provenance.empty()) {
    provenance = other.provenance;
  } else if (provenance != other.provenance) {
    provenance["merged"].push_back(other.provenance);
  }
}

std::vector<ReportRow> EvalReport::rows() const {
  std::vector<ReportRow> out;
  out.reserve(rows_.size());
  for (const auto& [key, row] : rows_) out.push_back(row);
  return out;
}

const ReportRow* EvalReport::find(const std::string& setting, std::uint32_t layer,
                                  const std::string& probe, const std::string& metric) const {
  const auto it = rows_.find(Key{setting, layer, probe, metric});
  return it == rows_.end() ? nullptr : &it->second;
}

double EvalReport::value(const std::string& setting, std::uint32_t layer, const std::string& probe,
                         const std::string& metric) const {
  const auto* row = find(setting, layer, probe, metric);
  if (!row) {
    throw InvariantError("report: no row (" + setting + ", L" + std::to_string(layer) + ", " +
                         probe + ", " + metric + ")");
  }
  return row->value;
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << kReportCsvHeader << "\n";
  for (const auto& r : report.rows()) {
    out << csv_field(r.setting) << ',' << r.layer << ',' << fmt_double(r.normalized_layer) << ','
        << csv_field(r.probe) << ',' << csv_field(r.metric) << ',' << fmt_double(r.value) << ','
        << (r.ci_low ? fmt_double(*r.ci_low) : "") << ','
        << (r.ci_high ? fmt_double(*r.ci_high) : "") << "\n";
  }
  return out.str();
}

nlohmann::ordered_json report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["provenance"] = report.provenance;
  auto& skipped = j["skipped"] = nlohmann::ordered_json::array();
  for (const auto& s : report.skipped) {
    skipped.push_back({{"setting", s.setting}, {"layer", s.layer}, {"reason", s.reason}});
  }
  auto& settings = j["settings"] = nlohmann::ordered_json::object();
  for (const auto& r : report.rows()) {
    auto& layer = settings[r.setting][std::to_string(r.layer)];
    layer["normalized_layer"] = r.normalized_layer;
    nlohmann::ordered_json m;
    m["probe"] = r.probe;
    m["metric"] = r.metric;
    m["value"] = r.value;
    m["ci_low"] = r.ci_low ? nlohmann::ordered_json(*r.ci_low) : nlohmann::ordered_json(nullptr);
    m["ci_high"] = r.ci_high ? nlohmann::ordered_json(*r.ci_high) : nlohmann::ordered_json(nullptr);
    layer["metrics"].push_back(std::move(m));
  }
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport report;
  try {
    if (j.contains("provenance")) report.provenance = j["provenance"];
    if (j.contains("skipped")) {
      for (const auto& s : j["skipped"]) {
        report.skipped.push_back({s.at("setting").get<std::string>(),
                                  s.at("layer").get<std::uint32_t>(),
                                  s.at("reason").get<std::string>()});
      }
    }
    for (const auto& [setting, layers] : j.at("settings").items()) {
      for (const auto& [layer_key, layer] : layers.items()) {
        const auto layer_index = static_cast<std::uint32_t>(std::stoul(layer_key));
        const double normalized = layer.at("normalized_layer").get<double>();
        for (const auto& m : layer.at("metrics")) {
          ReportRow row;
          row.setting = setting;
          row.layer = layer_index;
          row.normalized_layer = normalized;
          row.probe = m.at("probe").get<std::string>();
          row.metric = m.at("metric").get<std::string>();
          row.value = m.at("value").get<double>();
          if (m.contains("ci_low") && !m["ci_low"].is_null()) row.ci_low = m["ci_low"].get<double>();
          if (m.contains("ci_high") && !m["ci_high"].is_null()) {
            row.ci_high = m["ci_high"].get<double>();
          }
          report.add(std::move(row));
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report json: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw FormatError("report json: layer keys must be integers");
  }
  return report;
}

std::string report_svg(const EvalReport& report, std::string_view metric) {
  struct Series {
    std::string setting;
    std::string probe;
    std::vector<std::pair<double, double>> points;
  };
  std::vector<Series> series;
  double y_min = std::numeric_limits<double>::infinity();
  double y_max = -std::numeric_limits<double>::infinity();
  for (const auto& r : report.rows()) {
    if (r.metric != metric) continue;
    auto it = std::find_if(series.begin(), series.end(), [&](const Series& s) {
      return s.setting == r.setting && s.probe == r.probe;
    });
    if (it == series.end()) {
      series.push_back({r.setting, r.probe, {}});
      it = series.end() - 1;
    }
    it->points.emplace_back(r.normalized_layer, r.value);
    y_min = std::min(y_min, r.value);
    y_max = std::max(y_max, r.value);
  }
  if (series.empty()) {
    y_min = 0.0;
    y_max = 1.0;
  }
  if (y_min >= 0.0 && y_max <= 1.0) {
    y_min = 0.0;
    y_max = 1.0;
  } else if (y_max - y_min < 1e-12) {
    y_min -= 0.5;
    y_max += 0.5;
  }

  constexpr double width = 640, height = 400, left = 60, right = 170, top = 30, bottom = 50;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  auto px = [&](double x) { return left + x * plot_w; };
  auto py = [&](double y) { return top + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h; };

  std::ostringstream out;
  char buf[128];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "  <title>" << xml_escape(metric) << " vs normalized layer</title>\n";
  out << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  out << "  <g stroke=\"black\" stroke-width=\"1\">\n";
  std::snprintf(buf, sizeof(buf), "    <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\"/>\n",
                left, top + plot_h, left + plot_w, top + plot_h);
  out << buf;
  std::snprintf(buf, sizeof(buf), "    <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\"/>\n",
                left, top, left, top + plot_h);
  out << buf << "  </g>\n";
  out << "  <g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int t = 0; t <= 4; ++t) {
    const double x = t / 4.0;
    const double y = y_min + (y_max - y_min) * t / 4.0;
    std::snprintf(buf, sizeof(buf), "    <text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%.2f</text>\n",
                  px(x), top + plot_h + 16, x);
    out << buf;
    std::snprintf(buf, sizeof(buf), "    <text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.3g</text>\n",
                  left - 6, py(y) + 4, y);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "    <text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">",
                left + plot_w / 2, height - 12);
  out << buf << "normalized layer</text>\n";
  std::snprintf(buf, sizeof(buf), "    <text x=\"14\" y=\"%.1f\" transform=\"rotate(-90 14 %.1f)\" text-anchor=\"middle\">",
                top + plot_h / 2, top + plot_h / 2);
  out << buf << xml_escape(metric) << "</text>\n  </g>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    auto& s = series[i];
    std::sort(s.points.begin(), s.points.end());
    const char* color = probe_color(s.probe, i);
    out << "  <polyline data-setting=\"" << xml_escape(s.setting) << "\" data-probe=\""
        << xml_escape(s.probe) << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t p = 0; p < s.points.size(); ++p) {
      std::snprintf(buf, sizeof(buf), "%s%.2f,%.2f", p ? " " : "", px(s.points[p].first),
                    py(s.points[p].second));
      out << buf;
    }
    out << "\"/>\n";
    const double ly = top + 14.0 * static_cast<double>(i) + 8;
    std::snprintf(buf, sizeof(buf),
                  "  <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" stroke-width=\"2\"/>\n",
                  left + plot_w + 10, ly, left + plot_w + 30, ly, color);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "  <text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\">",
                  left + plot_w + 34, ly + 4);
    out << buf << xml_escape(series.size() > 3 ? s.setting + " " + s.probe : s.probe)
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::vector<std::string> emit_report(const EvalReport& report, const std::string& prefix,
                                     const EmitOptions& options) {
  std::vector<std::string> written;
  if (options.csv) {
    detail::write_text_file(prefix + ".csv", report_csv(report));
    written.push_back(prefix + ".csv");
  }
  if (options.json) {
    detail::write_text_file(prefix + ".json", report_to_json(report).dump(2) + "\n");
    written.push_back(prefix + ".json");
  }
  if (options.svg) {
    detail::write_text_file(prefix + ".svg", report_svg(report, options.svg_metric));
    written.push_back(prefix + ".svg");
  }
  return written;
}

EvalReport read_report_json(const std::string& path) {
  const auto text = detail::read_text_file(path);
  try {
    return report_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace probekit

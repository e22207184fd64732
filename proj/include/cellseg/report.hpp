#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cellseg/error.hpp"
#include "cellseg/metrics.hpp"

namespace cellseg {

struct ImageRecord {
  std::string id;
  std::optional<double> pcc;
  std::optional<double> iou;
  std::optional<double> map;
  std::vector<double> precisions;  // one per map_thresholds() entry when map is set
};

struct Aggregate {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

struct MetricsReport {
  std::vector<ImageRecord> records;
  std::map<std::string, Aggregate> aggregates;  // keyed by metric name
  std::optional<double> pooled_iou;
};

namespace detail {

inline Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  a.count = values.size();
  if (values.empty()) return a;
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.std = std::sqrt(ss / static_cast<double>(values.size()));
  return a;
}

}  // namespace detail

/// Mean and population std per metric. Records lacking a metric are skipped
/// for that metric only; the count says how many contributed.
inline MetricsReport summarize(std::vector<ImageRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "summarize needs at least one record");
  std::map<std::string, std::vector<double>> columns;
  for (const auto& r : records) {
    if (r.iou) columns["iou"].push_back(*r.iou);
    if (r.map) columns["map"].push_back(*r.map);
    if (r.pcc) columns["pcc"].push_back(*r.pcc);
  }
  MetricsReport report;
  report.records = std::move(records);
  for (const auto& [name, values] : columns) report.aggregates[name] = detail::aggregate(values);
  return report;
}

inline nlohmann::ordered_json to_json(const MetricsReport& report) {
  using nlohmann::ordered_json;
  ordered_json images = ordered_json::array();
  for (const auto& r : report.records) {
    ordered_json row;
    row["id"] = r.id;
    if (r.iou) row["iou"] = *r.iou;
    if (r.map) row["map"] = *r.map;
    if (r.pcc) row["pcc"] = *r.pcc;
    if (!r.precisions.empty()) row["precisions"] = r.precisions;
    images.push_back(std::move(row));
  }
  ordered_json agg = ordered_json::object();
  for (const auto& [name, a] : report.aggregates) {
    agg[name] = {{"count", a.count}, {"mean", a.mean}, {"std", a.std}};
  }
  ordered_json out;
  out["images"] = std::move(images);
  out["aggregate"] = std::move(agg);
  if (report.pooled_iou) out["pooled_iou"] = *report.pooled_iou;
  out["thresholds"] = map_thresholds();
  return out;
}

/// One row per image, then "#mean" and "#std" rows. Absent values are empty
/// cells.
inline std::string to_csv(const MetricsReport& report) {
  bool has_iou = false;
  bool has_map = false;
  bool has_pcc = false;
  for (const auto& r : report.records) {
    has_iou |= r.iou.has_value();
    has_map |= r.map.has_value();
    has_pcc |= r.pcc.has_value();
  }
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  auto cell = [&](const std::optional<double>& v) {
    out << ',';
    if (v) out << *v;
  };
  out << "image_id";
  if (has_iou) out << ",iou";
  if (has_map) {
    out << ",map";
    for (double t : map_thresholds()) out << ",p" << static_cast<int>(std::lround(t * 100));
  }
  if (has_pcc) out << ",pcc";
  out << '\n';
  for (const auto& r : report.records) {
    out << r.id;
    if (has_iou) cell(r.iou);
    if (has_map) {
      cell(r.map);
      for (std::size_t i = 0; i < map_thresholds().size(); ++i) {
        cell(i < r.precisions.size() ? std::optional<double>(r.precisions[i]) : std::nullopt);
      }
    }
    if (has_pcc) cell(r.pcc);
    out << '\n';
  }
  auto stat_row = [&](const char* name, auto pick) {
    out << name;
    auto emit = [&](const char* metric) {
      const auto it = report.aggregates.find(metric);
      cell(it == report.aggregates.end() ? std::nullopt : std::optional<double>(pick(it->second)));
    };
    if (has_iou) emit("iou");
    if (has_map) {
      emit("map");
      for (std::size_t i = 0; i < map_thresholds().size(); ++i) out << ',';
    }
    if (has_pcc) emit("pcc");
    out << '\n';
  };
  stat_row("#mean", [](const Aggregate& a) { return a.mean; });
  stat_row("#std", [](const Aggregate& a) { return a.std; });
  return out.str();
}

}  // namespace cellseg

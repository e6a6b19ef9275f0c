// Copyright 2026 The miniorch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "miniorch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace miniorch {

namespace {

std::int64_t field(const Sample& s, std::string_view metric) {
  if (metric == "cpu_millicores_used") return s.cpu_millicores_used;
  if (metric == "memory_bytes_used") return s.memory_bytes_used;
  if (metric == "net_rx_bytes") return s.net_rx_bytes;
  if (metric == "net_tx_bytes") return s.net_tx_bytes;
  if (metric == "gpus_allocated") return s.gpus_allocated;
  throw Error(ErrorCode::kUnknownMetric, std::string(metric));
}

double aggregate(const std::vector<std::int64_t>& values, Aggregation agg) {
  switch (agg) {
    case Aggregation::kMax: return static_cast<double>(*std::max_element(values.begin(), values.end()));
    case Aggregation::kSum: {
      std::int64_t sum = 0;
      for (auto v : values) sum += v;
      return static_cast<double>(sum);
    }
    case Aggregation::kAvg: {
      std::int64_t sum = 0;
      for (auto v : values) sum += v;
      return static_cast<double>(sum) / static_cast<double>(values.size());
    }
  }
  return 0;
}

}  // namespace

bool is_rate_metric(std::string_view metric) { return metric == "net_rx_bytes" || metric == "net_tx_bytes"; }

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"cpu_millicores_used", "memory_bytes_used", "net_rx_bytes",
                                                 "net_tx_bytes", "gpus_allocated"};
  return names;
}

void MetricsRegistry::register_pod(const std::string& pod, const std::string& step, const ResourceVector& requests,
                                   Tick start) {
  std::lock_guard lock(mu_);
  if (pods_.contains(pod)) throw Error(ErrorCode::kDuplicateName, "metrics pod " + pod);
  pods_[pod] = PodRecord{step, requests, start, std::nullopt, 0};
  if (std::find(step_order_.begin(), step_order_.end(), step) == step_order_.end()) step_order_.push_back(step);
}

void MetricsRegistry::retire_pod(const std::string& pod, Tick end) {
  std::lock_guard lock(mu_);
  auto it = pods_.find(pod);
  if (it == pods_.end()) throw Error(ErrorCode::kUnknownPod, pod);
  it->second.end = end;
}

bool MetricsRegistry::is_active(const std::string& pod) const {
  std::lock_guard lock(mu_);
  auto it = pods_.find(pod);
  return it != pods_.end() && !it->second.end;
}

void MetricsRegistry::record_sample(Sample sample) {
  std::lock_guard lock(mu_);
  auto it = pods_.find(sample.pod);
  if (it == pods_.end() || it->second.end) throw Error(ErrorCode::kUnknownPod, sample.pod);
  const auto& req = it->second.requests;
  if (sample.cpu_millicores_used < 0 || sample.cpu_millicores_used > req.cpu_millicores) {
    throw Error(ErrorCode::kInvalidArgument, sample.pod + " cpu sample outside request");
  }
  if (sample.gpus_allocated != req.gpu_count) {
    throw Error(ErrorCode::kInvalidArgument, sample.pod + " gpu sample differs from request");
  }
  auto key = std::make_pair(sample.tick, sample.pod);
  samples_[key] = std::move(sample);
}

void MetricsRegistry::add_data_processed(const std::string& pod, std::int64_t bytes) {
  std::lock_guard lock(mu_);
  auto it = pods_.find(pod);
  if (it == pods_.end()) throw Error(ErrorCode::kUnknownPod, pod);
  it->second.data_processed += bytes;
}

std::vector<QueryRow> MetricsRegistry::query(std::string_view metric, Aggregation agg, TickWindow window,
                                             GroupBy group_by) const {
  if (std::find(metric_names().begin(), metric_names().end(), metric) == metric_names().end()) {
    throw Error(ErrorCode::kUnknownMetric, std::string(metric));
  }
  const bool rate = is_rate_metric(metric);
  std::lock_guard lock(mu_);
  // Per (group, tick) totals inside the window. Rate metrics use the delta
  // from the same pod's previous sample, which may lie before the window.
  std::map<std::string, std::map<Tick, std::int64_t>> series;
  std::map<std::string, std::int64_t, std::less<>> last_counter;
  for (const auto& [key, s] : samples_) {
    std::int64_t v = field(s, metric);
    if (rate) {
      auto prev = last_counter.find(s.pod);
      std::int64_t before = prev == last_counter.end() ? 0 : prev->second;
      last_counter[s.pod] = v;
      v -= before;
    }
    if (s.tick < window.first || s.tick > window.last) continue;
    std::string group;
    switch (group_by) {
      case GroupBy::kNone: break;
      case GroupBy::kPod: group = s.pod; break;
      case GroupBy::kStep: group = pods_.at(s.pod).step; break;
    }
    series[group][s.tick] += v;
  }
  if (series.empty()) {
    throw Error(ErrorCode::kEmptyWindow, "no samples in [" + std::to_string(window.first) + ", " +
                                             std::to_string(window.last) + "]");
  }
  std::vector<QueryRow> rows;
  for (const auto& [group, per_tick] : series) {
    std::vector<std::int64_t> values;
    values.reserve(per_tick.size());
    for (const auto& [tick, v] : per_tick) values.push_back(v);
    rows.push_back({group, aggregate(values, agg)});
  }
  return rows;
}

StepSummary MetricsRegistry::step_summary(std::string_view step) const {
  std::lock_guard lock(mu_);
  StepSummary summary;
  summary.step = std::string(step);
  std::optional<Tick> first_start;
  std::optional<Tick> last_end;
  std::map<Tick, ResourceVector> allocated;
  std::map<Tick, std::int64_t> memory;
  for (const auto& [name, rec] : pods_) {
    if (rec.step != step) continue;
    ++summary.pods;
    summary.data_processed_bytes += rec.data_processed;
    first_start = first_start ? std::min(*first_start, rec.start) : rec.start;
    if (rec.end) last_end = last_end ? std::max(*last_end, *rec.end) : *rec.end;
  }
  if (summary.pods == 0) throw Error(ErrorCode::kUnknownStep, std::string(step));
  for (const auto& [key, s] : samples_) {
    const auto& rec = pods_.at(s.pod);
    if (rec.step != step) continue;
    allocated[s.tick] += rec.requests;
    memory[s.tick] += s.memory_bytes_used;
  }
  std::int64_t peak_cpu = 0;
  for (const auto& [tick, r] : allocated) {
    peak_cpu = std::max(peak_cpu, r.cpu_millicores);
    summary.gpus = std::max(summary.gpus, r.gpu_count);
  }
  summary.cpus = ceil_div(peak_cpu, 1000);
  for (const auto& [tick, m] : memory) summary.memory_peak_bytes = std::max(summary.memory_peak_bytes, m);
  summary.total_ticks = last_end ? *last_end - *first_start : 0;
  return summary;
}

std::vector<std::string> MetricsRegistry::steps() const {
  std::lock_guard lock(mu_);
  return step_order_;
}

std::vector<Sample> MetricsRegistry::samples() const {
  std::lock_guard lock(mu_);
  std::vector<Sample> out;
  out.reserve(samples_.size());
  for (const auto& [key, s] : samples_) out.push_back(s);
  return out;
}

std::string MetricsRegistry::samples_jsonl() const {
  std::ostringstream out;
  for (const auto& s : samples()) {
    nlohmann::ordered_json line;
    line["tick"] = s.tick;
    line["pod"] = s.pod;
    line["cpu_millicores_used"] = s.cpu_millicores_used;
    line["memory_bytes_used"] = s.memory_bytes_used;
    line["net_rx_bytes"] = s.net_rx_bytes;
    line["net_tx_bytes"] = s.net_tx_bytes;
    line["gpus_allocated"] = s.gpus_allocated;
    out << line.dump() << '\n';
  }
  return out.str();
}

namespace {

std::string format_scaled(double v) {
  char buf[64];
  if (v >= 100) {
    std::snprintf(buf, sizeof(buf), "%.0f", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    std::string s(buf);
    if (s.ends_with(".0")) s.resize(s.size() - 2);
    return s;
  }
  return buf;
}

}  // namespace

std::string format_bytes(std::int64_t bytes) {
  static constexpr const char* kUnits[] = {"B", "KB", "MB", "GB", "TB", "PB"};
  double v = static_cast<double>(bytes);
  int unit = 0;
  while (v >= 1000.0 && unit < 5) {
    v /= 1000.0;
    ++unit;
  }
  // Rounding can carry into the next unit ("999.97MB" -> "1000MB").
  if (unit < 5 && v >= 100 && std::round(v) >= 1000.0) {
    v /= 1000.0;
    ++unit;
  }
  return format_scaled(v) + kUnits[unit];
}

std::string format_minutes(std::int64_t ticks, double seconds_per_tick) {
  if (ticks == 0) return "NA";
  return format_scaled(static_cast<double>(ticks) * seconds_per_tick / 60.0) + "m";
}

std::string render_table(const std::vector<StepSummary>& summaries, double seconds_per_tick) {
  static const std::vector<std::string> kLabels = {"# of Pods", "# of CPUs", "# of GPUs",
                                                   "Data Processed", "Memory", "Total Time"};
  std::vector<std::vector<std::string>> columns;
  for (const auto& s : summaries) {
    columns.push_back({s.step, std::to_string(s.pods), std::to_string(s.cpus), std::to_string(s.gpus),
                       format_bytes(s.data_processed_bytes), format_bytes(s.memory_peak_bytes),
                       format_minutes(s.total_ticks, seconds_per_tick)});
  }
  std::size_t label_width = 0;
  for (const auto& l : kLabels) label_width = std::max(label_width, l.size());
  std::vector<std::size_t> widths;
  for (const auto& col : columns) {
    std::size_t w = 0;
    for (const auto& cell : col) w = std::max(w, cell.size());
    widths.push_back(w);
  }
  auto row = [&](const std::string& label, std::size_t index) {
    std::string line = label + std::string(label_width - label.size(), ' ');
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const std::string& cell = columns[c][index];
      line += " | " + cell;
      if (c + 1 < columns.size()) line += std::string(widths[c] - cell.size(), ' ');
    }
    return line + "\n";
  };
  std::string out = row("", 0);
  std::string rule(label_width, '-');
  for (std::size_t c = 0; c < columns.size(); ++c) rule += "-+-" + std::string(widths[c], '-');
  out += rule + "\n";
  for (std::size_t r = 0; r < kLabels.size(); ++r) out += row(kLabels[r], r + 1);
  return out;
}

std::string query_csv(const std::vector<QueryRow>& rows) {
  std::ostringstream out;
  out << "group,value\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", r.value);
    out << r.group << ',' << buf << '\n';
  }
  return out.str();
}

}  // namespace miniorch

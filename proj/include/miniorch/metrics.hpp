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

#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "miniorch/common.hpp"
#include "miniorch/resources.hpp"

namespace miniorch {

/// One scrape of one pod. net_rx_bytes / net_tx_bytes are cumulative
/// counters since pod start; queries turn them into per-tick deltas.
struct Sample {
  Tick tick = 0;
  std::string pod;
  std::int64_t cpu_millicores_used = 0;
  std::int64_t memory_bytes_used = 0;
  std::int64_t net_rx_bytes = 0;
  std::int64_t net_tx_bytes = 0;
  std::int64_t gpus_allocated = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

enum class Aggregation { kMax, kSum, kAvg };
enum class GroupBy { kNone, kPod, kStep };

/// Inclusive tick range.
struct TickWindow {
  Tick first = 0;
  Tick last = 0;
};

struct QueryRow {
  std::string group;  // "" for GroupBy::kNone
  double value = 0;

  friend bool operator==(const QueryRow&, const QueryRow&) = default;
};

/// Per-step roll-up; the row set of the resource summary table.
struct StepSummary {
  std::string step;
  std::int64_t pods = 0;
  std::int64_t cpus = 0;  // peak concurrently allocated cores, rounded up
  std::int64_t gpus = 0;  // peak concurrently allocated
  std::int64_t data_processed_bytes = 0;
  std::int64_t memory_peak_bytes = 0;
  std::int64_t total_ticks = 0;

  friend bool operator==(const StepSummary&, const StepSummary&) = default;
};

bool is_rate_metric(std::string_view metric);
const std::vector<std::string>& metric_names();

/// Time-series store for pod samples. Pods must be registered before they
/// are sampled and stop accepting samples once retired.
class MetricsRegistry {
 public:
  void register_pod(const std::string& pod, const std::string& step, const ResourceVector& requests, Tick start);
  /// Marks the pod finished at `end`; later samples are rejected.
  void retire_pod(const std::string& pod, Tick end);
  bool is_active(const std::string& pod) const;

  /// Appends a sample; a second sample for the same (tick, pod) replaces the
  /// first. Throws kUnknownPod for unregistered or retired pods and
  /// kInvalidArgument when the sample exceeds the pod's requests.
  void record_sample(Sample sample);

  void add_data_processed(const std::string& pod, std::int64_t bytes);

  std::vector<QueryRow> query(std::string_view metric, Aggregation agg, TickWindow window, GroupBy group_by) const;

  StepSummary step_summary(std::string_view step) const;
  std::vector<std::string> steps() const;  // in registration order

  /// Samples ordered by (tick, pod).
  std::vector<Sample> samples() const;
  std::string samples_jsonl() const;

 private:
  struct PodRecord {
    std::string step;
    ResourceVector requests;
    Tick start = 0;
    std::optional<Tick> end;
    std::int64_t data_processed = 0;
  };

  mutable std::mutex mu_;
  std::map<std::string, PodRecord, std::less<>> pods_;
  std::vector<std::string> step_order_;
  std::map<std::pair<Tick, std::string>, Sample> samples_;
};

/// Human-readable decimal units: "381MB", "5.8GB", "246GB".
std::string format_bytes(std::int64_t bytes);
/// Minutes, "NA" for zero.
std::string format_minutes(std::int64_t ticks, double seconds_per_tick);

/// Fixed-width table, one column per step; rows: # of Pods, # of CPUs,
/// # of GPUs, Data Processed, Memory, Total Time.
std::string render_table(const std::vector<StepSummary>& summaries, double seconds_per_tick = 1.0);

std::string query_csv(const std::vector<QueryRow>& rows);

}  // namespace miniorch

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
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "miniorch/cluster_state.hpp"
#include "miniorch/faults.hpp"
#include "miniorch/metrics.hpp"
#include "miniorch/object_store.hpp"
#include "miniorch/resources.hpp"
#include "miniorch/transfer.hpp"

namespace miniorch {

enum class StepKind { kQueueFanout, kSingle, kPartitionedFanout, kSummary };

std::string_view step_kind_name(StepKind kind);

struct QueueConfig {
  std::int64_t urls_per_message = 100;
  Tick lease_ticks = kDefaultLeaseTicks;
  int retry_limit = 3;
};

/// Per-step task parameters. Which fields matter depends on the step kind;
/// unset inputs/output get kind-specific defaults at parse time.
struct TaskParams {
  std::vector<std::string> inputs;
  std::string output;
  std::int64_t ticks = 30;          // single: training duration
  std::int64_t ticks_per_item = 1;  // partitioned_fanout
  int fetch_parallelism = 20;       // queue_fanout
  std::int64_t bytes_per_tick = 100000;  // queue_fanout: per-worker bandwidth
  std::optional<std::int64_t> model_bytes;  // single; default scales 381MB by the archive fraction
  double memory_factor = 1.2;
  std::int64_t memory_overhead_bytes = 50 * kMB;
  ResourceVector queue_requests{1000, 0, 2 * kGB};
  ResourceVector coordinator_requests{1000, 0, 1 * kGB};
};

struct StepSpec {
  std::string name;
  StepKind kind = StepKind::kSingle;
  std::int64_t workers = 1;
  ResourceVector requests{1000, 0, 1 * kGB};
  std::map<std::string, std::string> node_selector;
  std::int64_t backoff_limit = 6;
  TaskParams task;
};

struct PipelineSpec {
  std::string name;
  std::string namespace_name;
  CatalogConfig catalog;
  /// False when the spec omits catalog.seed; the run seed then drives it.
  bool catalog_seed_pinned = false;
  QueueConfig queue;
  std::vector<StepSpec> steps;
  Tick stall_limit = 500;
  double seconds_per_tick = 1.0;

  const StepSpec& step(std::string_view name) const;
};

/// Strict JSON parse: unknown fields are ParseErrors, defaults are filled,
/// and structural problems (duplicate step names, bad worker counts) are
/// kValidationError.
PipelineSpec parse_spec(std::string_view text);

enum class Severity { kError, kWarning };

struct Issue {
  Severity severity = Severity::kError;
  std::string step;
  std::string message;
};

/// Checks a parsed spec against a cluster fixture: template feasibility,
/// capacity and quota for the declared parallelism, bucket dataflow. An empty
/// list means valid. `preseeded_buckets` count as already produced.
std::vector<Issue> validate(const PipelineSpec& spec, const ClusterFixture& cluster,
                            const std::vector<std::string>& preseeded_buckets = {});

/// The catalog a run with `run_seed` uses: the spec's own seed when pinned,
/// otherwise the run seed's "catalog" stream.
CatalogConfig effective_catalog(const PipelineSpec& spec, std::uint64_t run_seed);

/// k sizes differing by at most one, summing to n, larger parts first.
std::vector<std::int64_t> partition_even(std::int64_t n_items, std::int64_t k);

// ---------------------------------------------------------------------------
// Running

enum class TransferMode { kSimulated, kLoopbackHttp };

struct RunOptions {
  std::uint64_t seed = 0;
  FaultSchedule faults;
  TransferMode mode = TransferMode::kSimulated;
  /// Re-verify cluster invariants after every store mutation.
  bool check_invariants = false;
};

struct StepTimeline {
  std::string step;
  Tick first_tick = 0;  // absolute run ticks
  Tick last_tick = 0;
};

struct AppliedFault {
  Tick tick = 0;
  std::string event;
};

/// Step-1 data-plane counters.
struct TransferReport {
  std::int64_t messages = 0;
  std::int64_t completion_true = 0;
  std::int64_t completion_false = 0;
  std::int64_t urls_fetched = 0;
  std::int64_t bytes_downloaded = 0;
  std::int64_t catalog_total_bytes = 0;
  std::int64_t catalog_subset_bytes = 0;
  int max_in_flight = 0;
  std::int64_t stale_acks = 0;
  std::int64_t max_delivery_count = 0;
};

struct ObjectRecord {
  std::string bucket;
  std::string key;
  std::int64_t size_bytes = 0;
  std::string etag;
};

inline constexpr int kRunReportSchemaVersion = 1;

struct RunReport {
  std::string pipeline;
  std::string namespace_name;
  std::uint64_t seed = 0;
  std::string hash_algorithm;
  double seconds_per_tick = 1.0;
  std::vector<StepSummary> steps;
  std::vector<StepTimeline> timeline;
  std::vector<AppliedFault> faults_applied;
  TransferReport transfer;
  std::vector<ObjectRecord> objects;
  std::string table;
  /// Hash over stored objects only; unchanged by faults that leave the run
  /// able to finish.
  std::string data_digest;
  /// Hash over stored objects and every step summary.
  std::string digest;
  Tick total_ticks = 0;
  bool ok = true;
  std::string failed_step;
  std::string failure_reason;

  std::string to_json() const;
  static RunReport from_json(std::string_view text);
};

std::string compute_data_digest(const std::vector<ObjectRecord>& objects);
std::string compute_digest(const std::string& data_digest, const std::vector<StepSummary>& steps);

/// A run stopped: validation backstop, stall, or failed job. Carries the
/// partial report.
class RunFailed : public Error {
 public:
  RunFailed(std::string step, std::string reason, RunReport partial)
      : Error(ErrorCode::kRunFailed, step + ": " + reason),
        step_(std::move(step)),
        reason_(std::move(reason)),
        report_(std::make_shared<RunReport>(std::move(partial))) {}

  const std::string& step() const noexcept { return step_; }
  const std::string& reason() const noexcept { return reason_; }
  const RunReport& report() const noexcept { return *report_; }

 private:
  std::string step_;
  std::string reason_;
  std::shared_ptr<RunReport> report_;
};

/// Everything a run leaves behind besides the report.
struct RunArtifacts {
  std::string metrics_jsonl;
  std::map<std::string, std::string> queue_dumps;       // queue name -> jsonl
  std::map<std::string, std::string> completion_sets;   // set name -> keys, one per line
};

/// Executes every step in order on a fresh simulated cluster. Objects land in
/// `store` (an in-memory store is used when null).
RunReport run(const PipelineSpec& spec, const ClusterFixture& cluster, const RunOptions& options,
              ObjectStore* store = nullptr, RunArtifacts* artifacts = nullptr);

/// Runs exactly one step against the objects under `state_dir`/objects and
/// writes its outputs there. Throws kMissingInput when an input bucket is
/// absent or empty.
StepSummary run_step(const PipelineSpec& spec, const ClusterFixture& cluster, std::string_view step_name,
                     const std::filesystem::path& state_dir, const RunOptions& options,
                     RunArtifacts* artifacts = nullptr);

/// Writes <dir>/objects/<ns>/<bucket>/<key>, <dir>/queues/<name>.jsonl and
/// <dir>/completions/<name>.txt.
void export_state(const ObjectStore& store, const RunArtifacts& artifacts, const std::filesystem::path& dir);
/// The queue and completion-set part of export_state.
void export_artifacts(const RunArtifacts& artifacts, const std::filesystem::path& dir);

std::vector<ObjectRecord> object_records(const ObjectStore& store, std::string_view namespace_name);

}  // namespace miniorch

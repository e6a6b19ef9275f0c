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
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "miniorch/cluster_state.hpp"
#include "miniorch/metrics.hpp"
#include "miniorch/scheduler.hpp"

namespace miniorch {

// ---------------------------------------------------------------------------
// Task runtime: what a Running pod does each tick.

enum class TaskStatus { kRunning, kSucceeded, kFailed };

/// Resource use during one tick. Network figures are bytes moved this tick.
struct TaskUsage {
  std::int64_t cpu_millicores = 0;
  std::int64_t memory_bytes = 0;
  std::int64_t net_rx_bytes = 0;
  std::int64_t net_tx_bytes = 0;
};

struct TaskTick {
  TaskStatus status = TaskStatus::kRunning;
  /// False when the task finished without doing work this tick; the pod then
  /// ends at the current tick instead of the next one.
  bool consumed_tick = true;
  TaskUsage usage;
  std::int64_t data_processed = 0;
  std::string reason;
};

class Task {
 public:
  virtual ~Task() = default;
  virtual TaskTick tick(Tick now) = 0;
};

using TaskFactory = std::function<std::unique_ptr<Task>(const Pod& pod)>;

/// Runs for `ticks` ticks then succeeds. Zero ticks finishes immediately.
std::unique_ptr<Task> make_fixed_task(std::int64_t ticks, TaskUsage usage = {});

// ---------------------------------------------------------------------------
// Controllers

struct JobSpec {
  std::string name;
  std::string namespace_name;
  std::int64_t parallelism = 1;
  std::int64_t completions = 1;
  PodSpec pod_template;
  std::int64_t backoff_limit = 6;
  /// Each pod gets task param "index"; a replacement reuses the index of the
  /// pod it replaces.
  bool indexed = false;
  /// When set, completion is drain-based: the job keeps `parallelism` pods
  /// alive until drained() holds, and is Complete once drained with no
  /// active pods. `completions` is then ignored.
  std::function<bool()> drained;
};

enum class JobState { kRunning, kComplete, kFailed };

std::string_view job_state_name(JobState s);

struct JobStatus {
  std::int64_t succeeded = 0;
  /// Task-level failures only; these count against backoff_limit.
  std::int64_t failed_attempts = 0;
  /// Evictions (node loss, kills); never count against backoff_limit.
  std::int64_t evicted = 0;
  std::int64_t active = 0;
  std::int64_t created = 0;
  JobState state = JobState::kRunning;
  /// Last admission problem, e.g. "QuotaExceeded: gpu ...". Empty when none.
  std::string condition;
  std::optional<Tick> completed_at;
};

struct ReplicaSetSpec {
  std::string name;
  std::string namespace_name;
  std::int64_t replicas = 1;
  PodSpec pod_template;
};

struct TickReport {
  Tick tick = 0;
  std::int64_t bindings = 0;
  std::int64_t pods_created = 0;
  std::int64_t pods_started = 0;
  std::int64_t pods_completed = 0;
  std::int64_t pods_failed = 0;
  std::int64_t pods_evicted = 0;
  std::vector<std::string> jobs_completed;
  std::vector<std::string> events;  // applied faults and recorded action failures

  /// True when nothing changed phase this tick.
  bool quiet() const {
    return bindings == 0 && pods_created == 0 && pods_started == 0 && pods_completed == 0 && pods_failed == 0 &&
           pods_evicted == 0 && jobs_completed.empty();
  }
};

/// Single-threaded reconciliation loop over the cluster store. Each tick:
///   1. node lifecycle events and tick hooks,
///   2. reconcile every Job, then every ReplicaSet, in registration order,
///   3. schedule Pending pods,
///   4. start newly bound pods and advance every Running task one tick
///      (scheduled pod kills strike here, before the task runs),
///   5. record one metrics sample per pod that ran,
///   6. report.
class ControlLoop {
 public:
  ControlLoop(ClusterState& state, MetricsRegistry& metrics);

  void register_task(TaskRef ref, TaskFactory factory);

  void add_job(JobSpec spec);
  void add_replicaset(ReplicaSetSpec spec);
  void scale_replicaset(std::string_view name, std::int64_t replicas);

  /// Reconciles one controller now; returns pods created.
  std::int64_t reconcile_job(std::string_view name);
  std::int64_t reconcile_replicaset(std::string_view name);

  JobStatus job_status(std::string_view name) const;
  std::vector<Pod> live_replicaset_pods(std::string_view name) const;

  void schedule_node_event(Tick tick, std::string node, bool ready);
  void schedule_pod_kill(Tick tick, std::string namespace_name, std::string pod);
  /// Runs during step 1 of every tick.
  void add_tick_hook(std::function<void(Tick)> hook);

  TickReport control_loop_tick();

  /// Last tick run (0 before the first).
  Tick now() const { return now_; }
  void set_now(Tick now) { now_ = now; }

  static std::string job_owner(const JobSpec& spec) { return "job/" + spec.namespace_name + "/" + spec.name; }
  static std::string replicaset_owner(const ReplicaSetSpec& spec) {
    return "rs/" + spec.namespace_name + "/" + spec.name;
  }

 private:
  struct JobEntry {
    JobSpec spec;
    JobStatus status;
    std::set<PodId> accounted;
    std::set<std::int64_t> done_indices;
  };
  struct ReplicaSetEntry {
    ReplicaSetSpec spec;
    std::int64_t created = 0;
  };
  struct RunningTask {
    std::unique_ptr<Task> task;
    std::string metrics_name;
    std::string start_error;
    std::int64_t rx_total = 0;
    std::int64_t tx_total = 0;
  };

  JobEntry& job_entry(std::string_view name);
  ReplicaSetEntry& rs_entry(std::string_view name);
  std::int64_t reconcile(JobEntry& job, TickReport* report);
  std::int64_t reconcile(ReplicaSetEntry& rs, TickReport* report);
  void reap(Tick now);
  void run_pods(Tick now, TickReport& report);

  ClusterState& state_;
  MetricsRegistry& metrics_;
  Scheduler scheduler_;
  Tick now_ = 0;
  std::map<TaskRef, TaskFactory, std::less<>> factories_;
  std::deque<JobEntry> jobs_;
  std::deque<ReplicaSetEntry> replicasets_;
  std::multimap<Tick, std::pair<std::string, bool>> node_events_;
  std::multimap<Tick, std::pair<std::string, std::string>> pod_kills_;
  std::vector<std::function<void(Tick)>> hooks_;
  std::map<PodId, RunningTask> running_;
};

}  // namespace miniorch

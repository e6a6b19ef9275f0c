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

#include "miniorch/controllers.hpp"

#include <algorithm>

namespace miniorch {

namespace {

class FixedTask final : public Task {
 public:
  FixedTask(std::int64_t ticks, TaskUsage usage) : remaining_(ticks), usage_(usage) {}

  TaskTick tick(Tick) override {
    TaskTick t;
    if (remaining_ <= 0) {
      t.status = TaskStatus::kSucceeded;
      t.consumed_tick = false;
      return t;
    }
    t.usage = usage_;
    if (--remaining_ == 0) t.status = TaskStatus::kSucceeded;
    return t;
  }

 private:
  std::int64_t remaining_;
  TaskUsage usage_;
};

std::string metrics_step(const Pod& pod) {
  auto it = pod.spec.task_params.find("step");
  if (it != pod.spec.task_params.end()) return it->second;
  return pod.owner.value_or("default");
}

}  // namespace

std::unique_ptr<Task> make_fixed_task(std::int64_t ticks, TaskUsage usage) {
  return std::make_unique<FixedTask>(ticks, usage);
}

std::string_view job_state_name(JobState s) {
  switch (s) {
    case JobState::kRunning: return "Running";
    case JobState::kComplete: return "Complete";
    case JobState::kFailed: return "Failed";
  }
  return "?";
}

ControlLoop::ControlLoop(ClusterState& state, MetricsRegistry& metrics)
    : state_(state), metrics_(metrics), scheduler_(state) {}

void ControlLoop::register_task(TaskRef ref, TaskFactory factory) { factories_[std::move(ref)] = std::move(factory); }

void ControlLoop::add_job(JobSpec spec) {
  if (spec.parallelism < 1 || spec.completions < 1 || spec.backoff_limit < 0) {
    throw Error(ErrorCode::kInvalidArgument, "job " + spec.name + ": parallelism/completions must be >= 1");
  }
  if (!state_.has_namespace(spec.namespace_name)) throw Error(ErrorCode::kUnknownNamespace, spec.namespace_name);
  for (const auto& j : jobs_) {
    if (j.spec.name == spec.name && j.spec.namespace_name == spec.namespace_name) {
      throw Error(ErrorCode::kDuplicateName, "job " + spec.name);
    }
  }
  jobs_.push_back(JobEntry{std::move(spec), {}, {}, {}});
}

void ControlLoop::add_replicaset(ReplicaSetSpec spec) {
  if (spec.replicas < 0) throw Error(ErrorCode::kInvalidArgument, "replicaset " + spec.name + ": replicas < 0");
  if (!state_.has_namespace(spec.namespace_name)) throw Error(ErrorCode::kUnknownNamespace, spec.namespace_name);
  for (const auto& r : replicasets_) {
    if (r.spec.name == spec.name && r.spec.namespace_name == spec.namespace_name) {
      throw Error(ErrorCode::kDuplicateName, "replicaset " + spec.name);
    }
  }
  replicasets_.push_back(ReplicaSetEntry{std::move(spec), 0});
}

void ControlLoop::scale_replicaset(std::string_view name, std::int64_t replicas) {
  if (replicas < 0) throw Error(ErrorCode::kInvalidArgument, "replicas < 0");
  rs_entry(name).spec.replicas = replicas;
}

ControlLoop::JobEntry& ControlLoop::job_entry(std::string_view name) {
  for (auto& j : jobs_) {
    if (j.spec.name == name) return j;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown job " + std::string(name));
}

ControlLoop::ReplicaSetEntry& ControlLoop::rs_entry(std::string_view name) {
  for (auto& r : replicasets_) {
    if (r.spec.name == name) return r;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown replicaset " + std::string(name));
}

std::int64_t ControlLoop::reconcile_job(std::string_view name) {
  reap(now_);
  return reconcile(job_entry(name), nullptr);
}

std::int64_t ControlLoop::reconcile_replicaset(std::string_view name) {
  reap(now_);
  return reconcile(rs_entry(name), nullptr);
}

JobStatus ControlLoop::job_status(std::string_view name) const {
  for (const auto& j : jobs_) {
    if (j.spec.name == name) return j.status;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown job " + std::string(name));
}

std::vector<Pod> ControlLoop::live_replicaset_pods(std::string_view name) const {
  for (const auto& r : replicasets_) {
    if (r.spec.name != name) continue;
    auto pods = state_.pods_owned_by(replicaset_owner(r.spec));
    std::erase_if(pods, [](const Pod& p) { return !is_live(p.phase); });
    return pods;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown replicaset " + std::string(name));
}

std::int64_t ControlLoop::reconcile(JobEntry& job, TickReport* report) {
  JobStatus& st = job.status;
  const std::string owner = job_owner(job.spec);
  std::set<std::int64_t> active_indices;
  st.active = 0;
  std::vector<PodId> live;
  for (const Pod& pod : state_.pods_owned_by(owner)) {
    std::int64_t index = -1;
    if (auto it = pod.spec.task_params.find("index"); it != pod.spec.task_params.end()) index = std::stoll(it->second);
    if (is_live(pod.phase)) {
      ++st.active;
      live.push_back(pod.id);
      active_indices.insert(index);
      continue;
    }
    if (!job.accounted.insert(pod.id).second) continue;
    switch (pod.phase) {
      case PodPhase::kSucceeded:
        ++st.succeeded;
        if (job.spec.indexed) job.done_indices.insert(index);
        break;
      case PodPhase::kFailed: ++st.failed_attempts; break;
      case PodPhase::kEvicted: ++st.evicted; break;
      default: break;
    }
  }
  if (st.state != JobState::kRunning) return 0;

  if (st.failed_attempts > job.spec.backoff_limit) {
    st.state = JobState::kFailed;
    for (PodId id : live) {
      state_.evict_pod(id, now_, "job " + job.spec.name + " failed");
      if (report) ++report->pods_evicted;
    }
    st.active = 0;
    return 0;
  }

  const bool drain_mode = static_cast<bool>(job.spec.drained);
  const bool drained = drain_mode && job.spec.drained();
  if (drain_mode ? (drained && st.active == 0) : st.succeeded >= job.spec.completions) {
    st.state = JobState::kComplete;
    st.completed_at = now_;
    if (report) report->jobs_completed.push_back(job.spec.name);
    return 0;
  }

  std::int64_t want = 0;
  if (drain_mode) {
    want = drained ? 0 : job.spec.parallelism - st.active;
  } else {
    want = std::min(job.spec.parallelism - st.active, job.spec.completions - st.succeeded - st.active);
  }
  std::int64_t created = 0;
  st.condition.clear();
  for (std::int64_t i = 0; i < want; ++i) {
    PodSpec spec = job.spec.pod_template;
    spec.namespace_name = job.spec.namespace_name;
    spec.name = job.spec.name + "-" + std::to_string(st.created + 1);
    if (job.spec.indexed) {
      std::int64_t index = 0;
      while (job.done_indices.contains(index) || active_indices.contains(index)) ++index;
      if (index >= job.spec.completions) break;
      active_indices.insert(index);
      spec.task_params["index"] = std::to_string(index);
    }
    try {
      state_.admit_pod(std::move(spec), owner);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kQuotaExceeded) throw;
      // Quota stalls the job; it retries next tick.
      st.condition = e.what();
      if (report) report->events.push_back("job " + job.spec.name + ": " + e.what());
      break;
    }
    ++st.created;
    ++st.active;
    ++created;
  }
  if (report) report->pods_created += created;
  return created;
}

std::int64_t ControlLoop::reconcile(ReplicaSetEntry& rs, TickReport* report) {
  const std::string owner = replicaset_owner(rs.spec);
  auto pods = state_.pods_owned_by(owner);
  std::erase_if(pods, [](const Pod& p) { return !is_live(p.phase); });
  auto live = static_cast<std::int64_t>(pods.size());
  std::int64_t created = 0;
  if (live > rs.spec.replicas) {
    // Newest first: pods come back in id order.
    for (auto it = pods.rbegin(); it != pods.rend() && live > rs.spec.replicas; ++it, --live) {
      state_.evict_pod(it->id, now_, "scaled down");
      if (report) ++report->pods_evicted;
    }
    return 0;
  }
  for (; live < rs.spec.replicas; ++live) {
    PodSpec spec = rs.spec.pod_template;
    spec.namespace_name = rs.spec.namespace_name;
    spec.name = rs.spec.name + "-" + std::to_string(rs.created + 1);
    try {
      state_.admit_pod(std::move(spec), owner);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kQuotaExceeded) throw;
      if (report) report->events.push_back("replicaset " + rs.spec.name + ": " + e.what());
      break;
    }
    ++rs.created;
    ++created;
  }
  if (report) report->pods_created += created;
  return created;
}

void ControlLoop::schedule_node_event(Tick tick, std::string node, bool ready) {
  node_events_.emplace(tick, std::make_pair(std::move(node), ready));
}

void ControlLoop::schedule_pod_kill(Tick tick, std::string namespace_name, std::string pod) {
  pod_kills_.emplace(tick, std::make_pair(std::move(namespace_name), std::move(pod)));
}

void ControlLoop::add_tick_hook(std::function<void(Tick)> hook) { hooks_.push_back(std::move(hook)); }

// Drops task instances of pods that left the live phases outside the task
// path (node loss, kills, scale-down, job failure).
void ControlLoop::reap(Tick now) {
  for (auto it = running_.begin(); it != running_.end();) {
    Pod pod = state_.pod(it->first);
    if (is_live(pod.phase)) {
      ++it;
      continue;
    }
    if (metrics_.is_active(it->second.metrics_name)) metrics_.retire_pod(it->second.metrics_name, pod.end_tick.value_or(now));
    it = running_.erase(it);
  }
}

void ControlLoop::run_pods(Tick now, TickReport& report) {
  std::set<std::pair<std::string, std::string>> kills;
  auto range = pod_kills_.equal_range(now);
  for (auto it = range.first; it != range.second; ++it) kills.insert(it->second);

  struct Executed {
    PodId id;
    std::string name;
    ResourceVector requests;
    TaskTick result;
    std::optional<Tick> end;
  };
  std::vector<Executed> executed;

  std::vector<Pod> candidates;
  for (const Pod& pod : state_.pods()) {
    if (is_bound(pod.phase)) candidates.push_back(pod);
  }
  for (const Pod& pod : candidates) {
    const std::string& name = pod.spec.name;
    if (kills.erase({pod.spec.namespace_name, name}) > 0) {
      state_.evict_pod(pod.id, now, "killed");
      ++report.pods_evicted;
      report.events.push_back("pod_kill " + name);
      if (auto it = running_.find(pod.id); it != running_.end()) {
        metrics_.retire_pod(it->second.metrics_name, now);
        running_.erase(it);
      }
      continue;
    }
    if (pod.phase == PodPhase::kScheduled) {
      state_.start_pod(pod.id, now);
      ++report.pods_started;
      RunningTask rt;
      rt.metrics_name = name;
      auto factory = factories_.find(pod.spec.task);
      if (factory == factories_.end()) {
        rt.start_error = "unknown task '" + pod.spec.task + "'";
      } else {
        try {
          rt.task = factory->second(state_.pod(pod.id));
        } catch (const std::exception& e) {
          rt.start_error = e.what();
        }
      }
      metrics_.register_pod(name, metrics_step(pod), pod.spec.requests, now);
      running_[pod.id] = std::move(rt);
    }
    RunningTask& rt = running_.at(pod.id);
    Executed ex{pod.id, name, pod.spec.requests, {}, std::nullopt};
    if (!rt.task) {
      ex.result.status = TaskStatus::kFailed;
      ex.result.consumed_tick = false;
      ex.result.reason = rt.start_error;
    } else {
      try {
        ex.result = rt.task->tick(now);
      } catch (const std::exception& e) {
        ex.result = TaskTick{};
        ex.result.status = TaskStatus::kFailed;
        ex.result.reason = e.what();
      }
    }
    rt.rx_total += ex.result.usage.net_rx_bytes;
    rt.tx_total += ex.result.usage.net_tx_bytes;
    if (ex.result.status != TaskStatus::kRunning) {
      Tick end = ex.result.consumed_tick ? now + 1 : now;
      if (ex.result.status == TaskStatus::kSucceeded) {
        state_.finish_pod(pod.id, PodPhase::kSucceeded, end);
        ++report.pods_completed;
      } else {
        state_.finish_pod(pod.id, PodPhase::kFailed, end, ex.result.reason);
        ++report.pods_failed;
        report.events.push_back("pod " + name + " failed: " + ex.result.reason);
      }
      ex.end = end;
    }
    executed.push_back(std::move(ex));
  }
  for (const auto& [ns, name] : kills) report.events.push_back("pod_kill " + name + " (no running pod)");

  // Step 5: one sample per pod that ran this tick.
  for (auto& ex : executed) {
    RunningTask& rt = running_.at(ex.id);
    Sample s;
    s.tick = now;
    s.pod = rt.metrics_name;
    s.cpu_millicores_used = std::clamp<std::int64_t>(ex.result.usage.cpu_millicores, 0, ex.requests.cpu_millicores);
    s.memory_bytes_used = std::max<std::int64_t>(0, ex.result.usage.memory_bytes);
    s.net_rx_bytes = rt.rx_total;
    s.net_tx_bytes = rt.tx_total;
    s.gpus_allocated = ex.requests.gpu_count;
    metrics_.record_sample(std::move(s));
    if (ex.result.data_processed != 0) metrics_.add_data_processed(rt.metrics_name, ex.result.data_processed);
    if (ex.end) {
      metrics_.retire_pod(rt.metrics_name, *ex.end);
      running_.erase(ex.id);
    }
  }
}

TickReport ControlLoop::control_loop_tick() {
  const Tick now = ++now_;
  TickReport report;
  report.tick = now;

  auto range = node_events_.equal_range(now);
  for (auto it = range.first; it != range.second; ++it) {
    const auto& [node, ready] = it->second;
    auto evicted = state_.set_node_ready(node, ready, now);
    report.pods_evicted += static_cast<std::int64_t>(evicted.size());
    report.events.push_back(std::string(ready ? "node_online " : "node_offline ") + node);
  }
  for (auto& hook : hooks_) hook(now);

  for (auto& job : jobs_) reconcile(job, &report);
  for (auto& rs : replicasets_) reconcile(rs, &report);
  reap(now);

  report.bindings = static_cast<std::int64_t>(scheduler_.schedule_pending(now).size());

  run_pods(now, report);
  return report;
}

}  // namespace miniorch

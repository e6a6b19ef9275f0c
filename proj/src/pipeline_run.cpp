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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "miniorch/controllers.hpp"
#include "miniorch/digest.hpp"
#include "miniorch/pipeline.hpp"
#include "miniorch/workqueue.hpp"

namespace miniorch {

namespace {

constexpr std::string_view kListBucket = "urllists";
constexpr std::string_view kMergedPrefix = "merged/";
constexpr std::string_view kSegmentPrefix = "segments/part_";
constexpr std::string_view kModelKey = "model.bin";
constexpr std::string_view kStatsKey = "summary.json";
// Default model size: 381MB at the full 455GB archive, scaled to the catalog.
constexpr double kModelBytesPerArchiveByte = 381e6 / 455e9;

std::string indexed_key(std::string_view prefix, std::int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(index));
  return std::string(prefix) + buf;
}

std::int64_t memory_model(const TaskParams& t, std::int64_t input_bytes) {
  return static_cast<std::int64_t>(std::llround(static_cast<double>(input_bytes) * t.memory_factor)) +
         t.memory_overhead_bytes;
}

// Shared by the runner and every task of one step.
struct StepRuntime {
  const StepSpec* step = nullptr;
  std::string namespace_name;
  std::string queue;
  std::string completion_set;
  bool seeded = false;
  std::int64_t messages = 0;
  // Partitioned fan-out: every container member of the first input, in
  // (container key, member) order, plus a digest over the other inputs.
  struct Item {
    std::string container;
    std::size_t member = 0;
  };
  bool items_loaded = false;
  std::vector<Item> items;
  std::map<std::string, MergedContainer> containers;
  std::string context_digest;
  std::vector<std::int64_t> partition_starts;
};

}  // namespace

// One simulated cluster plus the shared services every step uses.
class PipelineRunner {
 public:
  PipelineRunner(const PipelineSpec& spec, const ClusterFixture& cluster, const RunOptions& options,
                 ObjectStore& store)
      : spec_(spec),
        options_(options),
        seeds_(options.seed),
        store_(store),
        state_(options.check_invariants),
        loop_(state_, metrics_) {
    cluster.apply_to(state_);
    for (const auto& ev : options.faults.events) {
      switch (ev.kind) {
        case FaultKind::kNodeOffline: loop_.schedule_node_event(ev.tick, ev.target, false); break;
        case FaultKind::kNodeOnline: loop_.schedule_node_event(ev.tick, ev.target, true); break;
        case FaultKind::kPodKill: loop_.schedule_pod_kill(ev.tick, spec.namespace_name, ev.target); break;
        case FaultKind::kTransferFaultRate: break;
      }
    }
    loop_.add_tick_hook([this](Tick now) {
      for (const auto& ev : options_.faults.events) {
        if (ev.tick != now) continue;
        std::string what = std::string(fault_kind_name(ev.kind));
        if (ev.kind == FaultKind::kTransferFaultRate) {
          fault_rate_ = ev.value;
          char buf[32];
          std::snprintf(buf, sizeof(buf), " %g", ev.value);
          what += buf;
        } else {
          what += " " + ev.target;
        }
        applied_.push_back({now, std::move(what)});
      }
      queues_.expire_leases(now);
    });
  }

  ~PipelineRunner() {
    if (server_) server_->stop();
  }

  void execute(const StepSpec& step);

  StepSummary summary(const std::string& step) const { return metrics_.step_summary(step); }
  std::vector<StepSummary> summaries() const {
    std::vector<StepSummary> out;
    for (const auto& name : completed_) out.push_back(metrics_.step_summary(name));
    return out;
  }

  RunReport report() const;
  void collect(RunArtifacts& artifacts) const;

 private:
  const SourceCatalog& catalog();
  SourceFetcher& fetcher();
  FaultInjector injector_at(Tick now) const;

  void install_queue_fanout(const std::shared_ptr<StepRuntime>& rt);
  void install_single(const std::shared_ptr<StepRuntime>& rt);
  void install_partitioned(const std::shared_ptr<StepRuntime>& rt);
  void install_summary(const std::shared_ptr<StepRuntime>& rt);

  PodSpec pod_template(const StepSpec& step, std::string role, const ResourceVector& requests) const {
    PodSpec pod;
    pod.namespace_name = spec_.namespace_name;
    pod.requests = requests;
    pod.task = step.name + "/" + role;
    pod.task_params["step"] = step.name;
    pod.node_selector = step.node_selector;
    return pod;
  }

  JobSpec job(const StepSpec& step, std::string name, PodSpec pod) const {
    JobSpec j;
    j.name = std::move(name);
    j.namespace_name = spec_.namespace_name;
    j.pod_template = std::move(pod);
    j.backoff_limit = step.backoff_limit;
    return j;
  }

  [[noreturn]] void fail(const std::string& step, const std::string& reason) const {
    RunReport partial = report();
    partial.ok = false;
    partial.failed_step = step;
    partial.failure_reason = reason;
    throw RunFailed(step, reason, std::move(partial));
  }

  std::string diagnose_stall(const std::vector<std::string>& jobs) const;

  const PipelineSpec& spec_;
  const RunOptions& options_;
  SeedStreams seeds_;
  ObjectStore& store_;
  ClusterState state_;
  MetricsRegistry metrics_;
  WorkQueues queues_;
  ControlLoop loop_;
  std::optional<SourceCatalog> catalog_;
  std::unique_ptr<SourceFetcher> fetcher_;
  std::unique_ptr<CatalogServer> server_;
  double fault_rate_ = 0;
  std::vector<AppliedFault> applied_;
  std::vector<StepTimeline> timeline_;
  std::vector<std::string> completed_;
  std::vector<std::string> queue_names_;
  std::vector<std::string> set_names_;
  TransferReport transfer_;
};

namespace {

class QueueServerTask final : public Task {
 public:
  QueueServerTask(const TaskParams& params, const ResourceVector& requests) : params_(params), requests_(requests) {}

  TaskTick tick(Tick) override {
    TaskTick t;
    t.usage.cpu_millicores = requests_.cpu_millicores / 10;
    t.usage.memory_bytes = params_.memory_overhead_bytes;
    return t;
  }

 private:
  const TaskParams& params_;
  ResourceVector requests_;
};

class CoordinatorTask final : public Task {
 public:
  CoordinatorTask(std::function<void(Tick)> seed, const ResourceVector& requests, std::int64_t memory)
      : seed_(std::move(seed)), requests_(requests), memory_(memory) {}

  TaskTick tick(Tick now) override {
    seed_(now);
    TaskTick t;
    t.status = TaskStatus::kSucceeded;
    t.usage.cpu_millicores = requests_.cpu_millicores;
    t.usage.memory_bytes = memory_;
    return t;
  }

 private:
  std::function<void(Tick)> seed_;
  ResourceVector requests_;
  std::int64_t memory_;
};

// Claims a message, fetches and stores its container at claim time, then
// stays busy for bytes / bytes_per_tick ticks and acks on the last one.
class DownloadTask final : public Task {
 public:
  struct Hooks {
    std::function<FaultInjector(Tick)> injector;
    std::function<bool()> drained;
    std::function<void(const WorkerOutcome&, const QueueMessage&)> on_claim;
    std::function<void(const WorkerOutcome&)> on_finish;
  };

  DownloadTask(std::string worker, WorkQueues& queues, ObjectStore& store, SourceFetcher& source,
               DownloadConfig config, const StepSpec& step, Hooks hooks)
      : client_(source),
        worker_(std::move(worker), queues, store, client_, std::move(config)),
        step_(step),
        hooks_(std::move(hooks)) {}

  TaskTick tick(Tick now) override {
    TaskTick t;
    if (!current_) {
      client_.set_fault_injector(hooks_.injector(now));
      std::optional<ClaimedWork> work;
      try {
        work = worker_.begin(now);
      } catch (const Error& e) {
        // The lease stays outstanding and expires; the message is redelivered.
        if (e.code() != ErrorCode::kBatchFailed) throw;
        return idle();
      }
      if (!work) {
        if (hooks_.drained()) {
          t.status = TaskStatus::kSucceeded;
          t.consumed_tick = false;
          return t;
        }
        return idle();
      }
      hooks_.on_claim(work->outcome, work->message);
      busy_total_ = std::max<std::int64_t>(1, ceil_div(work->outcome.bytes_fetched, step_.task.bytes_per_tick));
      busy_done_ = 0;
      rx_left_ = work->outcome.bytes_fetched;
      t.data_processed = work->outcome.bytes_fetched;
      current_ = std::move(work);
    }
    ++busy_done_;
    std::int64_t remaining_ticks = busy_total_ - busy_done_ + 1;
    std::int64_t rx = rx_left_ / remaining_ticks;
    rx_left_ -= rx;
    t.usage.cpu_millicores = step_.requests.cpu_millicores;
    t.usage.memory_bytes = memory_model(step_.task, current_->outcome.bytes_fetched);
    t.usage.net_rx_bytes = rx;
    if (busy_done_ == busy_total_) {
      hooks_.on_finish(worker_.finish(*current_));
      current_.reset();
    }
    return t;
  }

 private:
  TaskTick idle() const {
    TaskTick t;
    t.usage.cpu_millicores = step_.requests.cpu_millicores / 10;
    t.usage.memory_bytes = step_.task.memory_overhead_bytes;
    return t;
  }

  TransferClient client_;
  DownloadWorker worker_;
  const StepSpec& step_;
  Hooks hooks_;
  std::optional<ClaimedWork> current_;
  std::int64_t busy_total_ = 0;
  std::int64_t busy_done_ = 0;
  std::int64_t rx_left_ = 0;
};

// Reads the inputs on its first tick and writes its output on its last.
// Zero-length work completes in the tick it starts without consuming it.
class BatchTask final : public Task {
 public:
  struct Work {
    std::int64_t input_bytes = 0;
    std::int64_t ticks = 0;
    std::function<void(Tick)> write;
  };

  BatchTask(std::function<Work()> load, const StepSpec& step) : load_(std::move(load)), step_(step) {}

  TaskTick tick(Tick now) override {
    TaskTick t;
    if (!work_) {
      work_ = load_();
      t.data_processed = work_->input_bytes;
    }
    t.usage.cpu_millicores = step_.requests.cpu_millicores;
    t.usage.memory_bytes = memory_model(step_.task, work_->input_bytes);
    if (work_->ticks == 0) {
      work_->write(now);
      t.status = TaskStatus::kSucceeded;
      t.consumed_tick = false;
      return t;
    }
    if (++done_ == work_->ticks) {
      work_->write(now);
      t.status = TaskStatus::kSucceeded;
    }
    return t;
  }

 private:
  std::function<Work()> load_;
  const StepSpec& step_;
  std::optional<Work> work_;
  std::int64_t done_ = 0;
};

}  // namespace

const SourceCatalog& PipelineRunner::catalog() {
  if (!catalog_) {
    catalog_ = SourceCatalog::generate(effective_catalog(spec_, seeds_.root()));
    transfer_.catalog_total_bytes = catalog_->total_bytes();
    transfer_.catalog_subset_bytes = catalog_->subset_bytes();
  }
  return *catalog_;
}

SourceFetcher& PipelineRunner::fetcher() {
  if (!fetcher_) {
    if (options_.mode == TransferMode::kLoopbackHttp) {
      server_ = std::make_unique<CatalogServer>(catalog());
      int port = server_->start("127.0.0.1", 0);
      fetcher_ = std::make_unique<HttpFetcher>("127.0.0.1", port);
    } else {
      fetcher_ = std::make_unique<CatalogFetcher>(catalog());
    }
  }
  return *fetcher_;
}

FaultInjector PipelineRunner::injector_at(Tick now) const {
  if (fault_rate_ <= 0) return {};
  // Salting with the tick gives a redelivered message fresh draws.
  FaultInjector base = hashed_fault_rate(seeds_.seed_for("transfer"), fault_rate_);
  std::string salt = "@" + std::to_string(now);
  return [base, salt](std::string_view url, int attempt) { return base(std::string(url) + salt, attempt); };
}

void PipelineRunner::install_queue_fanout(const std::shared_ptr<StepRuntime>& rt) {
  const StepSpec& step = *rt->step;
  rt->queue = step.name;
  rt->completion_set = step.name + "-done";
  queues_.create_queue(spec_.namespace_name, rt->queue);
  queues_.create_completion_set(spec_.namespace_name, rt->completion_set);
  queue_names_.push_back(rt->queue);
  set_names_.push_back(rt->completion_set);
  store_.create_bucket(spec_.namespace_name, kListBucket);
  store_.create_bucket(spec_.namespace_name, step.task.output);
  catalog();
  fetcher();

  DownloadConfig config;
  config.namespace_name = spec_.namespace_name;
  config.queue = rt->queue;
  config.completion_set = rt->completion_set;
  config.list_bucket = std::string(kListBucket);
  config.output_bucket = step.task.output;
  config.output_prefix = std::string(kMergedPrefix);
  config.lease_ticks = spec_.queue.lease_ticks;
  config.fetch.section = spec_.catalog.subset_section;
  config.fetch.parallelism = step.task.fetch_parallelism;
  config.fetch.retry_limit = spec_.queue.retry_limit;

  auto drained = [this, rt] { return rt->seeded && queues_.counts(spec_.namespace_name, rt->queue).drained(); };

  loop_.register_task(step.name + "/queue", [&step](const Pod&) {
    return std::make_unique<QueueServerTask>(step.task, step.task.queue_requests);
  });
  loop_.register_task(step.name + "/coordinator", [this, rt, config, &step](const Pod&) {
    auto seed = [this, rt, config](Tick now) {
      if (rt->seeded) return;
      rt->messages = static_cast<std::int64_t>(
          seed_download_queue(*catalog_, spec_.queue.urls_per_message, config, queues_, store_, now));
      transfer_.messages += rt->messages;
      rt->seeded = true;
    };
    return std::make_unique<CoordinatorTask>(seed, step.task.coordinator_requests, step.task.memory_overhead_bytes);
  });
  loop_.register_task(step.name + "/worker", [this, rt, config, drained, &step](const Pod& pod) {
    DownloadTask::Hooks hooks;
    hooks.injector = [this](Tick now) { return injector_at(now); };
    hooks.drained = drained;
    hooks.on_claim = [this](const WorkerOutcome& out, const QueueMessage& msg) {
      transfer_.urls_fetched += out.fetched;
      transfer_.bytes_downloaded += out.bytes_fetched;
      transfer_.completion_true += out.completions_new;
      transfer_.completion_false += out.completions_repeated;
      transfer_.max_in_flight = std::max(transfer_.max_in_flight, out.max_in_flight);
      transfer_.max_delivery_count = std::max<std::int64_t>(transfer_.max_delivery_count, msg.delivery_count);
    };
    hooks.on_finish = [this](const WorkerOutcome& out) {
      if (out.kind == WorkerOutcomeKind::kStale) ++transfer_.stale_acks;
    };
    return std::make_unique<DownloadTask>(pod.spec.name, queues_, store_, *fetcher_, config, step, std::move(hooks));
  });

  // Jobs reconcile before ReplicaSets, so the coordinator gets the lowest pod
  // id and seeds the queue before any worker runs in the first tick.
  loop_.add_job(job(step, step.name + "-coordinator",
                    pod_template(step, "coordinator", step.task.coordinator_requests)));
  JobSpec workers = job(step, step.name + "-worker", pod_template(step, "worker", step.requests));
  workers.parallelism = step.workers;
  workers.drained = drained;
  loop_.add_job(std::move(workers));
  ReplicaSetSpec rs;
  rs.name = step.name + "-queue";
  rs.namespace_name = spec_.namespace_name;
  rs.replicas = 1;
  rs.pod_template = pod_template(step, "queue", step.task.queue_requests);
  loop_.add_replicaset(std::move(rs));
}

void PipelineRunner::install_single(const std::shared_ptr<StepRuntime>& rt) {
  const StepSpec& step = *rt->step;
  store_.create_bucket(spec_.namespace_name, step.task.output);
  loop_.register_task(step.name + "/worker", [this, &step](const Pod&) {
    auto load = [this, &step] {
      BatchTask::Work work;
      Sha256 reduction;
      for (const auto& bucket : step.task.inputs) {
        for (const auto& key : store_.list(spec_.namespace_name, bucket)) {
          Bytes content = store_.get(spec_.namespace_name, bucket, key);
          work.input_bytes += static_cast<std::int64_t>(content.size());
          reduction.field(bucket).field(key).update(content);
        }
      }
      std::string digest = reduction.hex_digest();
      std::int64_t model_bytes = step.task.model_bytes.value_or(static_cast<std::int64_t>(
          std::llround(static_cast<double>(catalog().total_bytes()) * kModelBytesPerArchiveByte)));
      work.ticks = step.task.ticks;
      work.write = [this, &step, digest, model_bytes](Tick now) {
        Bytes model = generate_section_bytes(fnv1a64(digest), kModelKey, "weights", model_bytes);
        store_.put(spec_.namespace_name, step.task.output, kModelKey, std::move(model), now);
      };
      return work;
    };
    return std::make_unique<BatchTask>(load, step);
  });
  loop_.add_job(job(step, step.name, pod_template(step, "worker", step.requests)));
}

void PipelineRunner::install_partitioned(const std::shared_ptr<StepRuntime>& rt) {
  const StepSpec& step = *rt->step;
  store_.create_bucket(spec_.namespace_name, step.task.output);
  auto ensure_items = [this, rt] {
    if (rt->items_loaded) return;
    const StepSpec& s = *rt->step;
    const std::string& primary = s.task.inputs.front();
    for (const auto& key : store_.list(spec_.namespace_name, primary)) {
      Bytes wire = store_.get(spec_.namespace_name, primary, key);
      MergedContainer c = MergedContainer::parse(wire);
      for (std::size_t m = 0; m < c.members.size(); ++m) rt->items.push_back({key, m});
      rt->containers.emplace(key, std::move(c));
    }
    Sha256 context;
    for (std::size_t i = 1; i < s.task.inputs.size(); ++i) {
      for (const auto& key : store_.list(spec_.namespace_name, s.task.inputs[i])) {
        auto obj = store_.stat(spec_.namespace_name, s.task.inputs[i], key);
        context.field(s.task.inputs[i]).field(key).field(obj->etag);
      }
    }
    rt->context_digest = context.hex_digest();
    auto sizes = partition_even(static_cast<std::int64_t>(rt->items.size()), s.workers);
    std::int64_t start = 0;
    for (auto size : sizes) {
      rt->partition_starts.push_back(start);
      start += size;
    }
    rt->partition_starts.push_back(start);
    rt->items_loaded = true;
  };

  loop_.register_task(step.name + "/worker", [this, rt, ensure_items, &step](const Pod& pod) {
    std::int64_t index = std::stoll(pod.spec.task_params.at("index"));
    auto load = [this, rt, ensure_items, index, &step] {
      ensure_items();
      BatchTask::Work work;
      auto first = static_cast<std::size_t>(rt->partition_starts[static_cast<std::size_t>(index)]);
      auto last = static_cast<std::size_t>(rt->partition_starts[static_cast<std::size_t>(index) + 1]);
      std::string lines;
      for (std::size_t i = first; i < last; ++i) {
        const auto& item = rt->items[i];
        const MergedContainer& c = rt->containers.at(item.container);
        auto bytes = c.member_bytes(item.member);
        work.input_bytes += static_cast<std::int64_t>(bytes.size());
        Sha256 h;
        h.field(rt->context_digest).update(bytes);
        lines += c.members[item.member].url + " " + h.hex_digest() + "\n";
      }
      work.ticks = step.task.ticks_per_item * static_cast<std::int64_t>(last - first);
      work.write = [this, &step, index, lines = std::move(lines)](Tick now) {
        store_.put(spec_.namespace_name, step.task.output, indexed_key(kSegmentPrefix, index), to_bytes(lines), now);
      };
      return work;
    };
    return std::make_unique<BatchTask>(load, step);
  });
  JobSpec j = job(step, step.name, pod_template(step, "worker", step.requests));
  j.parallelism = step.workers;
  j.completions = step.workers;
  j.indexed = true;
  loop_.add_job(std::move(j));
}

void PipelineRunner::install_summary(const std::shared_ptr<StepRuntime>& rt) {
  const StepSpec& step = *rt->step;
  store_.create_bucket(spec_.namespace_name, step.task.output);
  loop_.register_task(step.name + "/worker", [this, &step](const Pod&) {
    auto load = [this, &step] {
      BatchTask::Work work;
      nlohmann::ordered_json stats;
      stats["pipeline"] = spec_.name;
      nlohmann::ordered_json buckets = nlohmann::ordered_json::object();
      std::int64_t objects = 0;
      for (const auto& bucket : step.task.inputs) {
        std::int64_t count = 0;
        std::int64_t bytes = 0;
        for (const auto& key : store_.list(spec_.namespace_name, bucket)) {
          ++count;
          bytes += store_.stat(spec_.namespace_name, bucket, key)->size_bytes;
        }
        buckets[bucket] = {{"objects", count}, {"bytes", bytes}};
        objects += count;
        work.input_bytes += bytes;
      }
      stats["buckets"] = std::move(buckets);
      stats["objects"] = objects;
      stats["bytes"] = work.input_bytes;
      work.ticks = 0;
      work.write = [this, &step, text = stats.dump(1) + "\n"](Tick now) {
        store_.put(spec_.namespace_name, step.task.output, kStatsKey, to_bytes(text), now);
      };
      return work;
    };
    return std::make_unique<BatchTask>(load, step);
  });
  loop_.add_job(job(step, step.name, pod_template(step, "worker", step.requests)));
}

std::string PipelineRunner::diagnose_stall(const std::vector<std::string>& jobs) const {
  Scheduler scheduler(const_cast<ClusterState&>(state_));
  for (const Pod& pod : state_.pods_in_phase(PodPhase::kPending)) {
    if (scheduler.feasible_nodes(pod.id).empty()) {
      return "no feasible node for pending pod " + pod.spec.name + " " + pod.spec.requests.to_string();
    }
  }
  for (const auto& name : jobs) {
    auto status = loop_.job_status(name);
    if (!status.condition.empty()) return "job " + name + " blocked: " + status.condition;
  }
  return "no progress for " + std::to_string(spec_.stall_limit) + " ticks";
}

void PipelineRunner::execute(const StepSpec& step) {
  auto rt = std::make_shared<StepRuntime>();
  rt->step = &step;
  rt->namespace_name = spec_.namespace_name;
  std::vector<std::string> jobs;
  std::string replicaset;
  switch (step.kind) {
    case StepKind::kQueueFanout:
      install_queue_fanout(rt);
      jobs = {step.name + "-coordinator", step.name + "-worker"};
      replicaset = step.name + "-queue";
      break;
    case StepKind::kSingle:
      install_single(rt);
      jobs = {step.name};
      break;
    case StepKind::kPartitionedFanout:
      install_partitioned(rt);
      jobs = {step.name};
      break;
    case StepKind::kSummary:
      install_summary(rt);
      jobs = {step.name};
      break;
  }

  const Tick first = loop_.now() + 1;
  Tick last_progress = loop_.now();
  std::uint64_t transitions = queues_.transitions();
  bool scaled_down = false;
  while (true) {
    TickReport report = loop_.control_loop_tick();
    bool all_complete = true;
    for (const auto& name : jobs) {
      auto status = loop_.job_status(name);
      if (status.state == JobState::kFailed) {
        fail(step.name, "job " + name + " failed after " + std::to_string(status.failed_attempts) + " attempts");
      }
      all_complete = all_complete && status.state == JobState::kComplete;
    }
    bool progressed = !report.quiet();
    if (all_complete && !replicaset.empty() && !scaled_down) {
      loop_.scale_replicaset(replicaset, 0);
      scaled_down = true;
      progressed = true;
    }
    bool finished = all_complete && (replicaset.empty() || loop_.live_replicaset_pods(replicaset).empty());
    if (finished) break;

    std::uint64_t now_transitions = queues_.transitions();
    if (progressed || now_transitions != transitions) {
      last_progress = report.tick;
      transitions = now_transitions;
    } else if (report.tick - last_progress >= spec_.stall_limit) {
      timeline_.push_back({step.name, first, report.tick});
      fail(step.name, diagnose_stall(jobs));
    }
  }
  timeline_.push_back({step.name, first, loop_.now()});
  completed_.push_back(step.name);
}

RunReport PipelineRunner::report() const {
  RunReport r;
  r.pipeline = spec_.name;
  r.namespace_name = spec_.namespace_name;
  r.seed = options_.seed;
  r.hash_algorithm = std::string(kDigestAlgorithm);
  r.seconds_per_tick = spec_.seconds_per_tick;
  r.steps = summaries();
  r.timeline = timeline_;
  r.faults_applied = applied_;
  r.transfer = transfer_;
  r.objects = object_records(store_, spec_.namespace_name);
  r.table = r.steps.empty() ? std::string() : render_table(r.steps, spec_.seconds_per_tick);
  r.data_digest = compute_data_digest(r.objects);
  r.digest = compute_digest(r.data_digest, r.steps);
  r.total_ticks = loop_.now();
  return r;
}

void PipelineRunner::collect(RunArtifacts& artifacts) const {
  artifacts.metrics_jsonl = metrics_.samples_jsonl();
  for (const auto& q : queue_names_) artifacts.queue_dumps[q] = queues_.dump_jsonl(spec_.namespace_name, q);
  for (const auto& s : set_names_) {
    std::string keys;
    for (const auto& k : queues_.completion_keys(spec_.namespace_name, s)) keys += k + "\n";
    artifacts.completion_sets[s] = std::move(keys);
  }
}

CatalogConfig effective_catalog(const PipelineSpec& spec, std::uint64_t run_seed) {
  CatalogConfig config = spec.catalog;
  if (!spec.catalog_seed_pinned) config.seed = SeedStreams(run_seed).seed_for("catalog");
  return config;
}

std::vector<ObjectRecord> object_records(const ObjectStore& store, std::string_view namespace_name) {
  std::vector<ObjectRecord> out;
  for (const auto& obj : store.inventory()) {
    if (obj.namespace_name != namespace_name) continue;
    out.push_back({obj.bucket, obj.key, obj.size_bytes, obj.etag});
  }
  return out;
}

RunReport run(const PipelineSpec& spec, const ClusterFixture& cluster, const RunOptions& options, ObjectStore* store,
              RunArtifacts* artifacts) {
  std::unique_ptr<ObjectStore> owned;
  if (!store) {
    owned = ObjectStore::in_memory();
    store = owned.get();
  }
  options.faults.validate(cluster);
  PipelineRunner runner(spec, cluster, options, *store);
  for (const auto& issue : validate(spec, cluster)) {
    if (issue.severity != Severity::kError) continue;
    RunReport partial = runner.report();
    partial.ok = false;
    partial.failed_step = issue.step.empty() ? "validation" : issue.step;
    partial.failure_reason = issue.message;
    throw RunFailed(partial.failed_step, issue.message, std::move(partial));
  }
  try {
    for (const auto& step : spec.steps) runner.execute(step);
  } catch (...) {
    if (artifacts) runner.collect(*artifacts);
    throw;
  }
  if (artifacts) runner.collect(*artifacts);
  return runner.report();
}

StepSummary run_step(const PipelineSpec& spec, const ClusterFixture& cluster, std::string_view step_name,
                     const std::filesystem::path& state_dir, const RunOptions& options, RunArtifacts* artifacts) {
  const StepSpec& step = spec.step(step_name);
  options.faults.validate(cluster);
  auto store = ObjectStore::on_disk(state_dir / "objects");
  for (const auto& input : step.task.inputs) {
    if (!store->has_bucket(spec.namespace_name, input) || store->list(spec.namespace_name, input).empty()) {
      throw Error(ErrorCode::kMissingInput, spec.namespace_name + "/" + input);
    }
  }
  PipelineRunner runner(spec, cluster, options, *store);
  RunArtifacts local;
  try {
    runner.execute(step);
  } catch (...) {
    runner.collect(local);
    export_artifacts(local, state_dir);
    if (artifacts) *artifacts = std::move(local);
    throw;
  }
  runner.collect(local);
  export_artifacts(local, state_dir);
  if (artifacts) *artifacts = std::move(local);
  return runner.summary(step.name);
}

}  // namespace miniorch

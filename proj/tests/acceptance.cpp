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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Expected values come from independent recomputation, never from
// the code under test.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "miniorch/controllers.hpp"
#include "miniorch/harness.hpp"
#include "miniorch/pipeline.hpp"
#include "miniorch/scheduler.hpp"
#include "support.hpp"

namespace miniorch {
namespace {

using testing::make_node;
using testing::make_pod;
using testing::source_path;
using testing::TempDir;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool ok = true;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

PipelineSpec demo_spec() { return parse_spec(read_text_file(source_path("demo/pipeline.json"))); }
ClusterFixture demo_cluster() { return ClusterFixture::parse(read_text_file(source_path("demo/cluster.json"))); }
FaultSchedule churn() { return FaultSchedule::parse(read_text_file(source_path("demo/faults_churn.json"))); }

RunReport demo_run(std::uint64_t seed, FaultSchedule faults = {}, RunArtifacts* artifacts = nullptr,
                   ObjectStore* store = nullptr) {
  RunOptions options;
  options.seed = seed;
  options.faults = std::move(faults);
  return run(demo_spec(), demo_cluster(), options, store, artifacts);
}

std::set<std::string> lines_of(const std::string& text) {
  std::set<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.insert(line);
  return out;
}

// 1. Every url downloaded exactly once under pod kills and node loss.
Outcome exactly_once() {
  auto start = Clock::now();
  RunArtifacts artifacts;
  auto store = ObjectStore::in_memory();
  auto report = demo_run(7, churn(), &artifacts, store.get());
  double elapsed = seconds_since(start);
  auto catalog = SourceCatalog::generate(effective_catalog(demo_spec(), 7));
  auto urls = catalog.urls();
  std::set<std::string> expected(urls.begin(), urls.end());
  // Count each url across every merged container actually stored.
  std::map<std::string, int> seen;
  for (const auto& key : store->list("connect", "archive")) {
    auto c = MergedContainer::parse(store->get("connect", "archive", key));
    for (const auto& m : c.members) ++seen[m.url];
  }
  bool once = seen.size() == expected.size();
  for (const auto& [url, n] : seen) once = once && n == 1 && expected.contains(url);
  bool set_ok = lines_of(artifacts.completion_sets.at("download-done")) == expected;
  Outcome o;
  o.ok = report.ok && once && set_ok && report.faults_applied.size() == 3 && elapsed < 10.0;
  o.detail = std::to_string(seen.size()) + " urls, each stored once=" + (once ? "yes" : "no") +
             ", completion set exact=" + (set_ok ? "yes" : "no") + ", max deliveries " +
             std::to_string(report.transfer.max_delivery_count) + ", " + std::to_string(elapsed) + "s";
  return o;
}

// 2. Bounded fetch concurrency reaches but never exceeds the limit.
Outcome bounded_concurrency() {
  auto report = demo_run(7);
  Outcome o;
  o.ok = report.transfer.max_in_flight == 20;
  o.detail = "max in flight " + std::to_string(report.transfer.max_in_flight) + " (limit 20)";
  return o;
}

// 3. Subsetting moves only the IVT section, about 246/455 of the archive.
Outcome subset_ratio() {
  auto report = demo_run(7);
  auto catalog = SourceCatalog::generate(effective_catalog(demo_spec(), 7));
  std::int64_t ivt = 0;
  std::int64_t all = 0;
  for (const auto& obj : catalog.objects()) {
    ivt += obj.sections.at("IVT");
    for (const auto& [name, size] : obj.sections) all += size;
  }
  double ratio = static_cast<double>(report.transfer.bytes_downloaded) / static_cast<double>(all);
  double target = 246.0 / 455.0;
  Outcome o;
  o.ok = report.transfer.bytes_downloaded == ivt && std::abs(ratio - target) <= 0.01 * target;
  o.detail = "downloaded " + std::to_string(report.transfer.bytes_downloaded) + " of " + std::to_string(all) +
             " bytes, ratio " + std::to_string(ratio);
  return o;
}

// 4. Even partitioning: sizes sum to n and differ by at most one.
Outcome partitioning() {
  auto start = Clock::now();
  std::mt19937_64 rng(4);
  bool ok = true;
  int rounds = 0;
  for (; rounds < 10000 && ok; ++rounds) {
    auto n = static_cast<std::int64_t>(rng() % 1'000'001);
    auto k = static_cast<std::int64_t>(rng() % 1000) + 1;
    auto parts = partition_even(n, k);
    auto [lo, hi] = std::minmax_element(parts.begin(), parts.end());
    ok = static_cast<std::int64_t>(parts.size()) == k &&
         std::accumulate(parts.begin(), parts.end(), std::int64_t{0}) == n && *hi - *lo <= 1 && *lo == n / k;
  }
  double elapsed = seconds_since(start);
  Outcome o;
  o.ok = ok && elapsed < 1.0;
  o.detail = std::to_string(rounds) + " random (n, k) pairs in " + std::to_string(elapsed) + "s";
  return o;
}

// 5. Scheduler never over-commits and leaves no placeable pod pending.
Outcome scheduler_oracle() {
  auto start = Clock::now();
  std::mt19937_64 rng(5);
  auto pick = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng); };
  int violations = 0;
  for (int round = 0; round < 200; ++round) {
    ClusterState s;
    int nodes = static_cast<int>(pick(1, 8));
    for (int i = 0; i < nodes; ++i) {
      s.register_node(make_node("n" + std::to_string(i), pick(0, 24) * 1000, pick(0, 8), pick(0, 96) * kGB,
                                {{"kind", pick(0, 1) ? "gpu" : "cpu"}}));
      if (pick(0, 6) == 0) s.set_node_ready("n" + std::to_string(i), false, 0);
    }
    s.create_namespace("ns", std::nullopt, "admin");
    Scheduler sched(s);
    int pods = static_cast<int>(pick(0, 60));
    for (int i = 0; i < pods; ++i) {
      PodSpec p = make_pod("p" + std::to_string(i), "ns", {pick(0, 8) * 1000, pick(0, 2), pick(0, 32) * kGB});
      if (pick(0, 3) == 0) p.node_selector = {{"kind", pick(0, 1) ? "gpu" : "cpu"}};
      s.admit_pod(p);
      if (pick(0, 5) == 0) sched.schedule_pending(i);
    }
    sched.schedule_pending(pods);
    std::map<std::string, ResourceVector> used;
    for (const Pod& p : s.pods()) {
      if (is_bound(p.phase)) used[*p.node] += p.spec.requests;
    }
    for (const Node& n : s.nodes()) {
      const auto& u = used[n.name];
      if (u.cpu_millicores > n.capacity.cpu_millicores || u.gpu_count > n.capacity.gpu_count ||
          u.memory_bytes > n.capacity.memory_bytes) {
        ++violations;
      }
    }
    for (const Pod& p : s.pods_in_phase(PodPhase::kPending)) {
      for (const Node& n : s.nodes()) {
        bool selector_ok = true;
        for (const auto& [k, v] : p.spec.node_selector) selector_ok = selector_ok && n.labels.count(k) && n.labels.at(k) == v;
        const auto& u = used[n.name];
        bool fits = n.ready && selector_ok &&
                    p.spec.requests.cpu_millicores <= n.capacity.cpu_millicores - u.cpu_millicores &&
                    p.spec.requests.gpu_count <= n.capacity.gpu_count - u.gpu_count &&
                    p.spec.requests.memory_bytes <= n.capacity.memory_bytes - u.memory_bytes;
        if (fits) ++violations;
      }
    }
  }
  double elapsed = seconds_since(start);
  Outcome o;
  o.ok = violations == 0 && elapsed < 5.0;
  o.detail = "200 random clusters, " + std::to_string(violations) + " violations, " + std::to_string(elapsed) + "s";
  return o;
}

// 6. Controllers heal: a job survives pod kills and node loss; a replica set
// restores its count within deficit + 2 ticks.
Outcome self_healing() {
  ClusterState state(true);
  for (int i = 1; i <= 4; ++i) state.register_node(make_node("n" + std::to_string(i), 8000, 0, 32 * kGB));
  state.create_namespace("ns", std::nullopt, "admin");
  MetricsRegistry metrics;
  ControlLoop loop(state, metrics);
  loop.register_task("work", [](const Pod&) { return make_fixed_task(3, {500, kMB, 0, 0}); });
  loop.register_task("serve", [](const Pod&) { return make_fixed_task(1'000'000, {100, kMB, 0, 0}); });
  JobSpec job;
  job.name = "batch";
  job.namespace_name = "ns";
  job.parallelism = 10;
  job.completions = 100;
  job.pod_template = make_pod("", "ns", {1000, 0, kGB}, "work");
  loop.add_job(job);
  for (int k = 1; k <= 5; ++k) loop.schedule_pod_kill(2 * k, "ns", "batch-" + std::to_string(k));
  loop.schedule_node_event(6, "n2", false);
  loop.schedule_node_event(15, "n2", true);
  for (int i = 0; i < 200 && loop.job_status("batch").state == JobState::kRunning; ++i) loop.control_loop_tick();
  auto st = loop.job_status("batch");
  std::int64_t succeeded_pods = 0;
  for (const Pod& p : state.pods_owned_by("job/ns/batch")) succeeded_pods += p.phase == PodPhase::kSucceeded ? 1 : 0;
  bool job_ok = st.state == JobState::kComplete && succeeded_pods == 100 && st.evicted > 0;

  ReplicaSetSpec rs;
  rs.name = "server";
  rs.namespace_name = "ns";
  rs.replicas = 4;
  rs.pod_template = make_pod("", "ns", {500, 0, kGB}, "serve");
  loop.add_replicaset(rs);
  loop.control_loop_tick();
  Tick strike = loop.now() + 1;
  loop.schedule_pod_kill(strike, "ns", "server-1");
  loop.schedule_pod_kill(strike, "ns", "server-3");
  loop.control_loop_tick();
  const std::int64_t deficit = 2;
  Tick recovered = -1;
  for (int i = 0; i < 10 && recovered < 0; ++i) {
    loop.control_loop_tick();
    std::int64_t running = 0;
    for (const Pod& p : loop.live_replicaset_pods("server")) running += p.phase == PodPhase::kRunning ? 1 : 0;
    if (running == 4) recovered = loop.now();
  }
  bool rs_ok = recovered > 0 && recovered - strike <= deficit + 2;
  Outcome o;
  o.ok = job_ok && rs_ok;
  o.detail = "job " + std::string(job_state_name(st.state)) + " with " + std::to_string(succeeded_pods) +
             " succeeded pods after " + std::to_string(st.evicted) + " evictions; replica set back to 4 in " +
             std::to_string(recovered - strike) + " ticks";
  return o;
}

// 7. Metrics roll-ups agree with a recomputation from raw samples, and the
// demo table matches the golden copy.
Outcome metrics_rollup() {
  RunArtifacts artifacts;
  auto report = demo_run(7, {}, &artifacts);
  std::map<Tick, std::int64_t> gpus_per_tick;
  std::set<std::string> pods;
  std::istringstream in(artifacts.metrics_jsonl);
  for (std::string line; std::getline(in, line);) {
    if (line.find("\"pod\":\"inference-") == std::string::npos) continue;
    auto field = [&](const std::string& name) {
      auto at = line.find("\"" + name + "\":") + name.size() + 3;
      return line.substr(at, line.find_first_of(",}", at) - at);
    };
    std::string pod = field("pod");
    pods.insert(pod.substr(1, pod.size() - 2));
    gpus_per_tick[std::stoll(field("tick"))] += std::stoll(field("gpus_allocated"));
  }
  std::int64_t peak_gpus = 0;
  for (const auto& [tick, g] : gpus_per_tick) peak_gpus = std::max(peak_gpus, g);
  const StepSummary* inference = nullptr;
  for (const auto& s : report.steps) {
    if (s.step == "inference") inference = &s;
  }
  bool golden = report.table == read_text_file(source_path("tests/golden/demo_table.txt"));
  Outcome o;
  o.ok = inference && inference->pods == 50 && inference->cpus == 50 && inference->gpus == 50 &&
         static_cast<std::int64_t>(pods.size()) == inference->pods && peak_gpus == inference->gpus && golden;
  o.detail = "inference pods/cpus/gpus " +
             (inference ? std::to_string(inference->pods) + "/" + std::to_string(inference->cpus) + "/" +
                              std::to_string(inference->gpus)
                        : std::string("missing")) +
             ", recomputed " + std::to_string(pods.size()) + " pods peak " + std::to_string(peak_gpus) +
             " gpus, golden table " + (golden ? "match" : "differs");
  return o;
}

// 8. Same seed gives a byte-identical report; recoverable faults leave the
// data digest unchanged.
Outcome determinism() {
  auto a = demo_run(7);
  auto b = demo_run(7);
  auto faulted = demo_run(7, churn());
  Outcome o;
  o.ok = a.to_json() == b.to_json() && faulted.ok && faulted.data_digest == a.data_digest &&
         faulted.digest != a.digest;
  o.detail = "reports identical=" + std::string(a.to_json() == b.to_json() ? "yes" : "no") +
             ", data digest under churn " + (faulted.data_digest == a.data_digest ? "unchanged" : "changed");
  return o;
}

// 9. Running the steps one at a time against persisted state gives the same
// objects as one full run.
Outcome compositionality() {
  auto spec = demo_spec();
  RunOptions options;
  options.seed = 7;
  auto full = run(spec, demo_cluster(), options);
  TempDir dir("acceptance-compose");
  for (const auto& step : spec.steps) run_step(spec, demo_cluster(), step.name, dir.path(), options);
  auto disk = ObjectStore::on_disk(dir.path() / "objects");
  auto records = object_records(*disk, spec.namespace_name);
  Outcome o;
  o.ok = compute_data_digest(records) == full.data_digest && records.size() == full.objects.size();
  o.detail = std::to_string(records.size()) + " objects from step-by-step runs, digest " +
             (o.ok ? "matches" : "differs from") + " the full run";
  return o;
}

}  // namespace
}  // namespace miniorch

int main() {
  using miniorch::Outcome;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"exactly-once download under churn", miniorch::exactly_once},
      {"bounded fetch concurrency", miniorch::bounded_concurrency},
      {"subset transfer ratio", miniorch::subset_ratio},
      {"even partitioning", miniorch::partitioning},
      {"scheduler placement", miniorch::scheduler_oracle},
      {"controller self-healing", miniorch::self_healing},
      {"metrics roll-up and table", miniorch::metrics_rollup},
      {"determinism and fault transparency", miniorch::determinism},
      {"step compositionality", miniorch::compositionality},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += o.ok ? 0 : 1;
    std::printf("%s criterion %zu: %s (%s)\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
  }
  return failures == 0 ? 0 : 1;
}

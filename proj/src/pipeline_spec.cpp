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
#include <set>

#include "json_util.hpp"
#include "miniorch/pipeline.hpp"
#include "miniorch/scheduler.hpp"

namespace miniorch {

namespace {

using detail::json;
using detail::Reader;

constexpr std::string_view kListBucket = "urllists";

StepKind parse_kind(const Reader& r, const std::string& kind) {
  if (kind == "queue_fanout") return StepKind::kQueueFanout;
  if (kind == "single") return StepKind::kSingle;
  if (kind == "partitioned_fanout") return StepKind::kPartitionedFanout;
  if (kind == "summary") return StepKind::kSummary;
  throw ParseError(r.line_of(kind), "unknown step kind \"" + kind + "\"");
}

std::string default_output(StepKind kind) {
  switch (kind) {
    case StepKind::kQueueFanout: return "archive";
    case StepKind::kSingle: return "models";
    case StepKind::kPartitionedFanout: return "results";
    case StepKind::kSummary: return "stats";
  }
  return {};
}

void validation_error(const std::string& what) { throw Error(ErrorCode::kValidationError, what); }

TaskParams parse_task(const Reader& r, const json& t, StepKind kind, const std::vector<std::string>& earlier_outputs) {
  TaskParams p;
  r.check_keys(t,
               {"inputs", "output", "ticks", "ticks_per_item", "fetch_parallelism", "bytes_per_tick", "model_bytes",
                "memory_factor", "memory_overhead_bytes", "queue_requests", "coordinator_requests"},
               "task");
  if (auto it = t.find("inputs"); it != t.end()) {
    if (!it->is_array()) throw ParseError(r.line_of("inputs"), "\"inputs\" must be an array");
    for (const auto& v : *it) p.inputs.push_back(r.as_string(v, "inputs"));
  } else if (kind == StepKind::kSummary) {
    p.inputs = earlier_outputs;
  } else if (kind != StepKind::kQueueFanout && !earlier_outputs.empty()) {
    p.inputs = {earlier_outputs.back()};
  }
  p.output = r.string_or(t, "output", default_output(kind));
  p.ticks = r.int_or(t, "ticks", p.ticks);
  p.ticks_per_item = r.int_or(t, "ticks_per_item", p.ticks_per_item);
  p.fetch_parallelism = static_cast<int>(r.int_or(t, "fetch_parallelism", p.fetch_parallelism));
  p.bytes_per_tick = r.int_or(t, "bytes_per_tick", p.bytes_per_tick);
  if (auto it = t.find("model_bytes"); it != t.end()) p.model_bytes = r.as_int(*it, "model_bytes");
  p.memory_factor = r.number_or(t, "memory_factor", p.memory_factor);
  p.memory_overhead_bytes = r.int_or(t, "memory_overhead_bytes", p.memory_overhead_bytes);
  if (auto it = t.find("queue_requests"); it != t.end()) p.queue_requests = detail::parse_resources(r, *it, "queue_requests");
  if (auto it = t.find("coordinator_requests"); it != t.end()) {
    p.coordinator_requests = detail::parse_resources(r, *it, "coordinator_requests");
  }
  return p;
}

void check_step(const StepSpec& s) {
  const std::string ctx = "step " + s.name + ": ";
  if (s.workers < 1) validation_error(ctx + "workers must be >= 1");
  if ((s.kind == StepKind::kSingle || s.kind == StepKind::kSummary) && s.workers != 1) {
    validation_error(ctx + std::string(step_kind_name(s.kind)) + " steps run exactly one worker");
  }
  if (!s.requests.non_negative() || !s.task.queue_requests.non_negative() ||
      !s.task.coordinator_requests.non_negative()) {
    validation_error(ctx + "negative resource request");
  }
  if (s.backoff_limit < 0) validation_error(ctx + "backoff_limit must be >= 0");
  const TaskParams& t = s.task;
  if (t.output.empty()) validation_error(ctx + "empty output bucket");
  if (t.ticks < 0 || t.ticks_per_item < 0) validation_error(ctx + "tick counts must be >= 0");
  if (t.fetch_parallelism < 1) validation_error(ctx + "fetch_parallelism must be >= 1");
  if (t.bytes_per_tick < 1) validation_error(ctx + "bytes_per_tick must be >= 1");
  if (t.model_bytes && *t.model_bytes < 0) validation_error(ctx + "model_bytes must be >= 0");
  if (t.memory_factor < 0 || t.memory_overhead_bytes < 0) validation_error(ctx + "negative memory model");
  if (s.kind == StepKind::kPartitionedFanout && t.inputs.empty()) {
    validation_error(ctx + "partitioned_fanout needs an input bucket to partition");
  }
}

}  // namespace

std::string_view step_kind_name(StepKind kind) {
  switch (kind) {
    case StepKind::kQueueFanout: return "queue_fanout";
    case StepKind::kSingle: return "single";
    case StepKind::kPartitionedFanout: return "partitioned_fanout";
    case StepKind::kSummary: return "summary";
  }
  return "?";
}

const StepSpec& PipelineSpec::step(std::string_view step_name) const {
  for (const auto& s : steps) {
    if (s.name == step_name) return s;
  }
  throw Error(ErrorCode::kUnknownStep, std::string(step_name));
}

PipelineSpec parse_spec(std::string_view text) {
  Reader r(text);
  json doc = detail::parse_json(text);
  r.check_keys(doc, {"name", "namespace", "catalog", "queue", "steps", "stall_limit", "seconds_per_tick"},
               "pipeline spec");
  PipelineSpec spec;
  spec.name = r.require_string(doc, "name", "pipeline spec");
  spec.namespace_name = r.require_string(doc, "namespace", "pipeline spec");
  spec.stall_limit = r.int_or(doc, "stall_limit", spec.stall_limit);
  spec.seconds_per_tick = r.number_or(doc, "seconds_per_tick", spec.seconds_per_tick);

  if (auto it = doc.find("catalog"); it != doc.end()) {
    const json& c = *it;
    r.check_keys(c, {"files", "sections", "subset_section", "size_jitter", "seed"}, "catalog");
    spec.catalog.files = r.int_or(c, "files", spec.catalog.files);
    if (auto s = c.find("sections"); s != c.end()) {
      r.expect_object(*s, "sections");
      spec.catalog.sections.clear();
      for (const auto& [name, size] : s->items()) spec.catalog.sections.emplace_back(name, r.as_int(size, name));
    }
    spec.catalog.subset_section = r.string_or(c, "subset_section", spec.catalog.subset_section);
    spec.catalog.size_jitter = r.number_or(c, "size_jitter", spec.catalog.size_jitter);
    if (auto s = c.find("seed"); s != c.end()) {
      if (!s->is_number_unsigned() && !s->is_number_integer()) throw ParseError(r.line_of("seed"), "\"seed\" must be an integer");
      spec.catalog.seed = s->get<std::uint64_t>();
      spec.catalog_seed_pinned = true;
    }
  }
  if (auto it = doc.find("queue"); it != doc.end()) {
    const json& q = *it;
    r.check_keys(q, {"urls_per_message", "lease_ticks", "retry_limit"}, "queue");
    spec.queue.urls_per_message = r.int_or(q, "urls_per_message", spec.queue.urls_per_message);
    spec.queue.lease_ticks = r.int_or(q, "lease_ticks", spec.queue.lease_ticks);
    spec.queue.retry_limit = static_cast<int>(r.int_or(q, "retry_limit", spec.queue.retry_limit));
  }

  const json& steps = r.require(doc, "steps", "pipeline spec");
  if (!steps.is_array()) throw ParseError(r.line_of("steps"), "\"steps\" must be an array");
  std::vector<std::string> outputs;
  for (const auto& s : steps) {
    r.check_keys(s, {"name", "kind", "workers", "requests", "node_selector", "backoff_limit", "task"}, "step");
    StepSpec step;
    step.name = r.require_string(s, "name", "step");
    step.kind = parse_kind(r, r.require_string(s, "kind", "step"));
    step.workers = r.int_or(s, "workers", step.workers);
    if (auto it = s.find("requests"); it != s.end()) step.requests = detail::parse_resources(r, *it, "requests");
    if (auto it = s.find("node_selector"); it != s.end()) {
      r.expect_object(*it, "node_selector");
      for (const auto& [k, v] : it->items()) step.node_selector[k] = r.as_string(v, k);
    }
    step.backoff_limit = r.int_or(s, "backoff_limit", step.backoff_limit);
    step.task = parse_task(r, s.value("task", json::object()), step.kind, outputs);
    outputs.push_back(step.task.output);
    spec.steps.push_back(std::move(step));
  }

  if (spec.name.empty()) validation_error("empty pipeline name");
  if (spec.namespace_name.empty()) validation_error("empty namespace");
  if (spec.steps.empty()) validation_error("pipeline has no steps");
  if (spec.stall_limit < 1) validation_error("stall_limit must be >= 1");
  if (spec.seconds_per_tick <= 0) validation_error("seconds_per_tick must be > 0");
  if (spec.catalog.files < 0) validation_error("catalog.files must be >= 0");
  if (spec.catalog.sections.empty()) validation_error("catalog has no sections");
  for (const auto& [name, size] : spec.catalog.sections) {
    if (size < 0) validation_error("catalog section " + name + " has negative size");
  }
  if (std::none_of(spec.catalog.sections.begin(), spec.catalog.sections.end(),
                   [&](const auto& s) { return s.first == spec.catalog.subset_section; })) {
    validation_error("subset_section " + spec.catalog.subset_section + " is not a catalog section");
  }
  if (spec.catalog.size_jitter < 0 || spec.catalog.size_jitter >= 1) validation_error("size_jitter must be in [0, 1)");
  if (spec.queue.urls_per_message < 1) validation_error("urls_per_message must be >= 1");
  if (spec.queue.lease_ticks < 1) validation_error("lease_ticks must be >= 1");
  if (spec.queue.retry_limit < 1) validation_error("retry_limit must be >= 1");
  std::set<std::string, std::less<>> names;
  for (const auto& s : spec.steps) {
    if (s.name.empty()) validation_error("empty step name");
    if (!names.insert(s.name).second) validation_error("duplicate step name " + s.name);
    check_step(s);
  }
  return spec;
}

std::vector<std::int64_t> partition_even(std::int64_t n_items, std::int64_t k) {
  if (n_items < 0 || k < 1) throw Error(ErrorCode::kInvalidArgument, "partition_even needs n >= 0 and k >= 1");
  std::vector<std::int64_t> sizes(static_cast<std::size_t>(k), n_items / k);
  for (std::int64_t i = 0; i < n_items % k; ++i) ++sizes[static_cast<std::size_t>(i)];
  return sizes;
}

std::vector<Issue> validate(const PipelineSpec& spec, const ClusterFixture& cluster,
                            const std::vector<std::string>& preseeded_buckets) {
  std::vector<Issue> issues;
  auto error = [&](const std::string& step, std::string msg) { issues.push_back({Severity::kError, step, std::move(msg)}); };
  auto warning = [&](const std::string& step, std::string msg) {
    issues.push_back({Severity::kWarning, step, std::move(msg)});
  };

  const NamespaceInfo* ns = nullptr;
  for (const auto& n : cluster.namespaces) {
    if (n.name == spec.namespace_name) ns = &n;
  }
  if (!ns) error("", "namespace " + spec.namespace_name + " does not exist in the cluster");
  if (spec.stall_limit <= spec.queue.lease_ticks) {
    warning("", "stall_limit does not exceed lease_ticks; a lost lease may be reported as a stall");
  }

  std::set<std::string, std::less<>> produced(preseeded_buckets.begin(), preseeded_buckets.end());
  for (const auto& step : spec.steps) {
    struct Template {
      std::string role;
      ResourceVector requests;
      std::int64_t count;
    };
    std::vector<Template> templates = {{"worker", step.requests, step.workers}};
    if (step.kind == StepKind::kQueueFanout) {
      templates.push_back({"queue", step.task.queue_requests, 1});
      templates.push_back({"coordinator", step.task.coordinator_requests, 1});
    }

    PodSpec probe;
    probe.node_selector = step.node_selector;
    ResourceVector matching_capacity;
    for (const auto& node : cluster.nodes) {
      if (Scheduler::selector_matches(probe, node)) matching_capacity += node.capacity;
    }
    ResourceVector total;
    for (const auto& t : templates) {
      bool fits = std::any_of(cluster.nodes.begin(), cluster.nodes.end(), [&](const Node& node) {
        return Scheduler::selector_matches(probe, node) && t.requests.fits_within(node.capacity);
      });
      if (!fits) {
        error(step.name, "infeasible template: " + t.role + " pod requests " + t.requests.to_string() +
                             " and no node can fit it");
      }
      if (ns && ns->quota && !t.requests.fits_within(*ns->quota)) {
        error(step.name, "quota: " + t.role + " pod requests " + t.requests.to_string() + " beyond namespace quota " +
                             ns->quota->to_string());
      }
      for (std::int64_t i = 0; i < t.count; ++i) total += t.requests;
    }
    if (total.gpu_count > matching_capacity.gpu_count) {
      warning(step.name, "parallelism exceeds cluster GPU capacity; step will stall");
    }
    if (total.cpu_millicores > matching_capacity.cpu_millicores) {
      warning(step.name, "parallelism exceeds cluster CPU capacity; step will stall");
    }
    if (total.memory_bytes > matching_capacity.memory_bytes) {
      warning(step.name, "parallelism exceeds cluster memory capacity; step will stall");
    }
    if (ns && ns->quota && !total.fits_within(*ns->quota)) {
      warning(step.name, "quota insufficient for declared parallelism; step will run in waves or stall");
    }

    for (const auto& input : step.task.inputs) {
      if (!produced.contains(input)) {
        error(step.name, "dataflow: input bucket " + input + " is never produced by an earlier step");
      }
    }
    if (step.kind == StepKind::kQueueFanout) produced.insert(std::string(kListBucket));
    produced.insert(step.task.output);
  }
  return issues;
}

}  // namespace miniorch

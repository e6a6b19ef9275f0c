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

#include "miniorch/cluster_state.hpp"

#include <algorithm>
#include <utility>

#include "json_util.hpp"

namespace miniorch {

std::string_view phase_name(PodPhase phase) {
  switch (phase) {
    case PodPhase::kPending: return "Pending";
    case PodPhase::kScheduled: return "Scheduled";
    case PodPhase::kRunning: return "Running";
    case PodPhase::kSucceeded: return "Succeeded";
    case PodPhase::kFailed: return "Failed";
    case PodPhase::kEvicted: return "Evicted";
  }
  return "?";
}

bool is_legal_transition(PodPhase from, PodPhase to) {
  switch (from) {
    case PodPhase::kPending: return to == PodPhase::kScheduled || to == PodPhase::kEvicted;
    case PodPhase::kScheduled: return to == PodPhase::kRunning || to == PodPhase::kEvicted;
    case PodPhase::kRunning:
      return to == PodPhase::kSucceeded || to == PodPhase::kFailed || to == PodPhase::kEvicted;
    default: return false;
  }
}

void ClusterState::register_node(Node node) {
  std::lock_guard lock(mu_);
  if (nodes_.contains(node.name)) throw Error(ErrorCode::kDuplicateName, "node " + node.name);
  if (!node.capacity.non_negative()) {
    throw Error(ErrorCode::kInvalidArgument, "negative capacity on node " + node.name);
  }
  node.allocated = {};
  node.ready = true;
  std::string name = node.name;
  nodes_.emplace(std::move(name), std::move(node));
  after_mutation_locked();
}

std::vector<PodId> ClusterState::set_node_ready(std::string_view name, bool ready, Tick now) {
  std::lock_guard lock(mu_);
  auto it = nodes_.find(name);
  if (it == nodes_.end()) throw Error(ErrorCode::kUnknownNode, std::string(name));
  std::vector<PodId> evicted;
  it->second.ready = ready;
  if (!ready) {
    for (auto& [id, pod] : pods_) {
      if (is_bound(pod.phase) && pod.node == name) {
        transition_locked(pod, PodPhase::kEvicted, now);
        pod.reason = "node " + std::string(name) + " offline";
        evicted.push_back(id);
      }
    }
    it->second.allocated = {};
  }
  after_mutation_locked();
  return evicted;
}

void ClusterState::create_namespace(std::string name, std::optional<ResourceVector> quota,
                                    std::string admin) {
  std::lock_guard lock(mu_);
  if (namespaces_.contains(name)) throw Error(ErrorCode::kDuplicateName, "namespace " + name);
  if (quota && !quota->non_negative()) {
    throw Error(ErrorCode::kInvalidArgument, "negative quota on namespace " + name);
  }
  NamespaceInfo info{name, quota, std::move(admin), {}};
  namespaces_.emplace(std::move(name), std::move(info));
}

ResourceVector ClusterState::namespace_usage(std::string_view name) const {
  std::lock_guard lock(mu_);
  auto it = namespaces_.find(name);
  if (it == namespaces_.end()) throw Error(ErrorCode::kUnknownNamespace, std::string(name));
  return it->second.usage;
}

PodId ClusterState::admit_pod(PodSpec spec, std::optional<std::string> owner) {
  std::lock_guard lock(mu_);
  auto ns = namespaces_.find(spec.namespace_name);
  if (ns == namespaces_.end()) throw Error(ErrorCode::kUnknownNamespace, spec.namespace_name);
  if (!spec.requests.non_negative()) {
    throw Error(ErrorCode::kInvalidArgument, "negative requests on pod " + spec.name);
  }
  for (const auto& [id, pod] : pods_) {
    if (pod.spec.namespace_name == spec.namespace_name && pod.spec.name == spec.name) {
      throw Error(ErrorCode::kDuplicateName, "pod " + spec.namespace_name + "/" + spec.name);
    }
  }
  if (ns->second.quota) {
    ResourceVector after = ns->second.usage + spec.requests;
    if (auto component = after.first_exceeding(*ns->second.quota)) {
      throw Error(ErrorCode::kQuotaExceeded,
                  std::string(*component) + " (namespace " + spec.namespace_name + ", pod " + spec.name + ")");
    }
  }
  ns->second.usage += spec.requests;
  PodId id{next_pod_id_++};
  Pod pod;
  pod.id = id;
  pod.spec = std::move(spec);
  pod.owner = std::move(owner);
  pods_.emplace(id, std::move(pod));
  after_mutation_locked();
  return id;
}

void ClusterState::bind_pod(PodId id, std::string_view node_name, Tick now) {
  std::lock_guard lock(mu_);
  Pod& pod = pod_locked(id);
  auto it = nodes_.find(node_name);
  if (it == nodes_.end()) throw Error(ErrorCode::kUnknownNode, std::string(node_name));
  Node& node = it->second;
  if (!node.ready) throw Error(ErrorCode::kInvalidArgument, "node " + node.name + " not ready");
  if (!(node.allocated + pod.spec.requests).fits_within(node.capacity)) {
    throw Error(ErrorCode::kInvalidArgument, "node " + node.name + " lacks capacity for " + pod.spec.name);
  }
  transition_locked(pod, PodPhase::kScheduled, now);
  pod.node = node.name;
  node.allocated += pod.spec.requests;
  after_mutation_locked();
}

void ClusterState::start_pod(PodId id, Tick now) {
  std::lock_guard lock(mu_);
  Pod& pod = pod_locked(id);
  transition_locked(pod, PodPhase::kRunning, now);
  pod.start_tick = now;
  after_mutation_locked();
}

void ClusterState::finish_pod(PodId id, PodPhase outcome, Tick now, std::string reason) {
  if (outcome != PodPhase::kSucceeded && outcome != PodPhase::kFailed) {
    throw Error(ErrorCode::kInvalidArgument, "finish_pod outcome must be Succeeded or Failed");
  }
  std::lock_guard lock(mu_);
  Pod& pod = pod_locked(id);
  transition_locked(pod, outcome, now);
  pod.reason = std::move(reason);
  after_mutation_locked();
}

void ClusterState::evict_pod(PodId id, Tick now, std::string reason) {
  std::lock_guard lock(mu_);
  Pod& pod = pod_locked(id);
  transition_locked(pod, PodPhase::kEvicted, now);
  pod.reason = std::move(reason);
  after_mutation_locked();
}

Pod& ClusterState::pod_locked(PodId id) {
  auto it = pods_.find(id);
  if (it == pods_.end()) throw Error(ErrorCode::kUnknownPod, "pod id " + std::to_string(to_underlying(id)));
  return it->second;
}

void ClusterState::transition_locked(Pod& pod, PodPhase to, Tick now) {
  if (!is_legal_transition(pod.phase, to)) {
    throw Error(ErrorCode::kInvalidTransition, pod.spec.name + ": " + std::string(phase_name(pod.phase)) +
                                                   " -> " + std::string(phase_name(to)));
  }
  PodPhase from = pod.phase;
  pod.phase = to;
  if (is_terminal(to)) {
    if (from == PodPhase::kRunning || pod.start_tick) pod.end_tick = now;
    release_locked(pod);
  }
}

// Terminal transition: return the pod's requests to its node and namespace.
void ClusterState::release_locked(Pod& pod) {
  if (pod.node) {
    auto node = nodes_.find(*pod.node);
    // An offline node has already been zeroed by set_node_ready.
    if (node != nodes_.end() && node->second.ready) node->second.allocated -= pod.spec.requests;
  }
  auto ns = namespaces_.find(pod.spec.namespace_name);
  if (ns != namespaces_.end()) ns->second.usage -= pod.spec.requests;
}

Pod ClusterState::pod(PodId id) const {
  std::lock_guard lock(mu_);
  auto it = pods_.find(id);
  if (it == pods_.end()) throw Error(ErrorCode::kUnknownPod, "pod id " + std::to_string(to_underlying(id)));
  return it->second;
}

std::optional<Pod> ClusterState::find_pod(std::string_view namespace_name, std::string_view name) const {
  std::lock_guard lock(mu_);
  for (const auto& [id, pod] : pods_) {
    if (pod.spec.namespace_name == namespace_name && pod.spec.name == name) return pod;
  }
  return std::nullopt;
}

std::vector<Pod> ClusterState::pods() const {
  std::lock_guard lock(mu_);
  std::vector<Pod> out;
  out.reserve(pods_.size());
  for (const auto& [id, pod] : pods_) out.push_back(pod);
  return out;
}

std::vector<Pod> ClusterState::pods_in_phase(PodPhase phase) const {
  std::lock_guard lock(mu_);
  std::vector<Pod> out;
  for (const auto& [id, pod] : pods_) {
    if (pod.phase == phase) out.push_back(pod);
  }
  return out;
}

std::vector<Pod> ClusterState::pods_owned_by(std::string_view owner) const {
  std::lock_guard lock(mu_);
  std::vector<Pod> out;
  for (const auto& [id, pod] : pods_) {
    if (pod.owner && *pod.owner == owner) out.push_back(pod);
  }
  return out;
}

Node ClusterState::node(std::string_view name) const {
  std::lock_guard lock(mu_);
  auto it = nodes_.find(name);
  if (it == nodes_.end()) throw Error(ErrorCode::kUnknownNode, std::string(name));
  return it->second;
}

std::vector<Node> ClusterState::nodes() const {
  std::lock_guard lock(mu_);
  std::vector<Node> out;
  out.reserve(nodes_.size());
  for (const auto& [name, node] : nodes_) out.push_back(node);
  return out;
}

bool ClusterState::has_node(std::string_view name) const {
  std::lock_guard lock(mu_);
  return nodes_.find(name) != nodes_.end();
}

NamespaceInfo ClusterState::namespace_info(std::string_view name) const {
  std::lock_guard lock(mu_);
  auto it = namespaces_.find(name);
  if (it == namespaces_.end()) throw Error(ErrorCode::kUnknownNamespace, std::string(name));
  return it->second;
}

bool ClusterState::has_namespace(std::string_view name) const {
  std::lock_guard lock(mu_);
  return namespaces_.find(name) != namespaces_.end();
}

std::int64_t ClusterState::max_node_gpu_capacity() const {
  std::lock_guard lock(mu_);
  std::int64_t best = 0;
  for (const auto& [name, node] : nodes_) best = std::max(best, node.capacity.gpu_count);
  return best;
}

ResourceVector ClusterState::total_capacity() const {
  std::lock_guard lock(mu_);
  ResourceVector total;
  for (const auto& [name, node] : nodes_) total += node.capacity;
  return total;
}

void ClusterState::verify_invariants() const {
  std::lock_guard lock(mu_);
  verify_locked();
}

void ClusterState::verify_locked() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvariantViolation, what); };
  std::map<std::string, ResourceVector, std::less<>> bound;
  std::map<std::string, ResourceVector, std::less<>> charged;
  for (const auto& [id, pod] : pods_) {
    if (is_bound(pod.phase)) {
      if (!pod.node) fail(pod.spec.name + " bound without node");
      auto node = nodes_.find(*pod.node);
      if (node == nodes_.end() || !node->second.ready) fail(pod.spec.name + " bound to non-ready node");
      bound[*pod.node] += pod.spec.requests;
    }
    if (is_live(pod.phase)) charged[pod.spec.namespace_name] += pod.spec.requests;
  }
  for (const auto& [name, node] : nodes_) {
    if (!node.allocated.non_negative()) fail("node " + name + " negative allocation");
    if (!node.allocated.fits_within(node.capacity)) fail("node " + name + " over capacity");
    if (node.allocated != bound[name]) fail("node " + name + " allocation drift");
  }
  for (const auto& [name, ns] : namespaces_) {
    if (!ns.usage.non_negative()) fail("namespace " + name + " negative usage");
    if (ns.quota && !ns.usage.fits_within(*ns.quota)) fail("namespace " + name + " over quota");
    if (ns.usage != charged[name]) fail("namespace " + name + " usage drift");
  }
}

ClusterFixture ClusterFixture::parse(std::string_view json_text) {
  detail::Reader r(json_text);
  auto doc = detail::parse_json(json_text);
  r.check_keys(doc, {"nodes", "namespaces"}, "cluster fixture");
  ClusterFixture fixture;
  if (auto it = doc.find("nodes"); it != doc.end()) {
    if (!it->is_array()) throw ParseError(r.line_of("nodes"), "\"nodes\" must be an array");
    for (const auto& n : *it) {
      r.check_keys(n, {"name", "cpu_millicores", "gpu_count", "memory_bytes", "labels"}, "node");
      Node node;
      node.name = r.require_string(n, "name", "node");
      node.capacity = {r.int_or(n, "cpu_millicores", 0), r.int_or(n, "gpu_count", 0), r.int_or(n, "memory_bytes", 0)};
      if (auto labels = n.find("labels"); labels != n.end()) {
        r.expect_object(*labels, "labels");
        for (const auto& [k, v] : labels->items()) node.labels[k] = r.as_string(v, k);
      }
      fixture.nodes.push_back(std::move(node));
    }
  }
  if (auto it = doc.find("namespaces"); it != doc.end()) {
    if (!it->is_array()) throw ParseError(r.line_of("namespaces"), "\"namespaces\" must be an array");
    for (const auto& n : *it) {
      r.check_keys(n, {"name", "admin", "quota"}, "namespace");
      NamespaceInfo ns;
      ns.name = r.require_string(n, "name", "namespace");
      ns.admin = r.string_or(n, "admin", "");
      if (auto q = n.find("quota"); q != n.end() && !q->is_null()) ns.quota = detail::parse_resources(r, *q, "quota");
      fixture.namespaces.push_back(std::move(ns));
    }
  }
  return fixture;
}

void ClusterFixture::apply_to(ClusterState& state) const {
  for (const auto& node : nodes) state.register_node(node);
  for (const auto& ns : namespaces) state.create_namespace(ns.name, ns.quota, ns.admin);
}

}  // namespace miniorch

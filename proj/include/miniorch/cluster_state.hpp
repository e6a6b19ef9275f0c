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

enum class PodId : std::uint64_t {};

inline std::uint64_t to_underlying(PodId id) { return static_cast<std::uint64_t>(id); }

struct Node {
  std::string name;
  ResourceVector capacity;
  bool ready = true;
  std::map<std::string, std::string> labels;
  ResourceVector allocated;  // derived; ignored on registration

  ResourceVector free() const { return capacity - allocated; }
};

struct NamespaceInfo {
  std::string name;
  std::optional<ResourceVector> quota;
  std::string admin;
  ResourceVector usage;  // derived
};

/// Opaque task reference; resolved by whoever runs pods (see controllers.hpp).
using TaskRef = std::string;

struct PodSpec {
  std::string name;
  std::string namespace_name;
  ResourceVector requests;
  TaskRef task;
  std::map<std::string, std::string> task_params;
  std::map<std::string, std::string> node_selector;  // exact-match labels
  bool restartable = true;
};

enum class PodPhase { kPending, kScheduled, kRunning, kSucceeded, kFailed, kEvicted };

std::string_view phase_name(PodPhase phase);

constexpr bool is_terminal(PodPhase p) {
  return p == PodPhase::kSucceeded || p == PodPhase::kFailed || p == PodPhase::kEvicted;
}
constexpr bool is_bound(PodPhase p) { return p == PodPhase::kScheduled || p == PodPhase::kRunning; }
constexpr bool is_live(PodPhase p) { return p == PodPhase::kPending || is_bound(p); }

/// Legal edges: Pending->Scheduled->Running->{Succeeded|Failed|Evicted}, plus
/// Pending->Evicted (deleted before binding) and Scheduled->Evicted (node loss
/// before start).
bool is_legal_transition(PodPhase from, PodPhase to);

struct Pod {
  PodId id{};
  PodSpec spec;
  PodPhase phase = PodPhase::kPending;
  std::optional<std::string> node;
  std::optional<std::string> owner;
  std::optional<Tick> start_tick;
  std::optional<Tick> end_tick;
  std::string reason;  // set on Failed / Evicted
};

/// Authoritative cluster store. All mutations are serialized under one mutex;
/// reads return copies, so callers always see a consistent snapshot.
class ClusterState {
 public:
  /// With `check_invariants` set, every mutation re-verifies capacity, quota,
  /// and binding invariants and throws kInvariantViolation on failure.
  explicit ClusterState(bool check_invariants = false) : check_invariants_(check_invariants) {}

  ClusterState(const ClusterState&) = delete;
  ClusterState& operator=(const ClusterState&) = delete;

  void register_node(Node node);
  /// Taking a node offline evicts everything bound to it and returns the
  /// evicted pods in id order.
  std::vector<PodId> set_node_ready(std::string_view name, bool ready, Tick now);

  void create_namespace(std::string name, std::optional<ResourceVector> quota, std::string admin);
  ResourceVector namespace_usage(std::string_view name) const;

  /// Stores the pod as Pending and charges its namespace quota.
  PodId admit_pod(PodSpec spec, std::optional<std::string> owner = std::nullopt);

  /// Pending -> Scheduled. Fails with kInvalidArgument if the node is not
  /// ready or lacks free capacity.
  void bind_pod(PodId id, std::string_view node, Tick now);
  /// Scheduled -> Running.
  void start_pod(PodId id, Tick now);
  /// Running -> Succeeded | Failed.
  void finish_pod(PodId id, PodPhase outcome, Tick now, std::string reason = {});
  /// Any live phase -> Evicted.
  void evict_pod(PodId id, Tick now, std::string reason);

  Pod pod(PodId id) const;
  std::optional<Pod> find_pod(std::string_view namespace_name, std::string_view name) const;
  std::vector<Pod> pods() const;
  std::vector<Pod> pods_in_phase(PodPhase phase) const;
  std::vector<Pod> pods_owned_by(std::string_view owner) const;

  Node node(std::string_view name) const;
  std::vector<Node> nodes() const;  // sorted by name
  bool has_node(std::string_view name) const;
  NamespaceInfo namespace_info(std::string_view name) const;
  bool has_namespace(std::string_view name) const;

  /// Largest single-node GPU capacity among registered nodes.
  std::int64_t max_node_gpu_capacity() const;
  ResourceVector total_capacity() const;

  /// Throws kInvariantViolation describing the first broken invariant.
  void verify_invariants() const;

 private:
  Pod& pod_locked(PodId id);
  void transition_locked(Pod& pod, PodPhase to, Tick now);
  void release_locked(Pod& pod);
  void verify_locked() const;
  void after_mutation_locked() const {
    if (check_invariants_) verify_locked();
  }

  mutable std::mutex mu_;
  bool check_invariants_;
  std::map<std::string, Node, std::less<>> nodes_;
  std::map<std::string, NamespaceInfo, std::less<>> namespaces_;
  std::map<PodId, Pod> pods_;
  std::uint64_t next_pod_id_ = 1;
};

/// Parsed cluster fixture file:
/// {"nodes":[{"name","cpu_millicores","gpu_count","memory_bytes","labels"}],
///  "namespaces":[{"name","admin","quota"?}]}
struct ClusterFixture {
  std::vector<Node> nodes;
  std::vector<NamespaceInfo> namespaces;

  static ClusterFixture parse(std::string_view json_text);
  void apply_to(ClusterState& state) const;
};

}  // namespace miniorch

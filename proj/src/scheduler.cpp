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

#include "miniorch/scheduler.hpp"

#include <algorithm>
#include <tuple>

namespace miniorch {

bool Scheduler::selector_matches(const PodSpec& spec, const Node& node) {
  for (const auto& [key, value] : spec.node_selector) {
    auto it = node.labels.find(key);
    if (it == node.labels.end() || it->second != value) return false;
  }
  return true;
}

std::vector<std::string> Scheduler::order_feasible(const PodSpec& spec, const std::vector<Node>& nodes) {
  std::vector<const Node*> fit;
  for (const auto& node : nodes) {
    if (node.ready && selector_matches(spec, node) && spec.requests.fits_within(node.free())) {
      fit.push_back(&node);
    }
  }
  std::sort(fit.begin(), fit.end(), [](const Node* a, const Node* b) {
    auto fa = a->free();
    auto fb = b->free();
    return std::tie(fb.gpu_count, fb.cpu_millicores, a->name) < std::tie(fa.gpu_count, fa.cpu_millicores, b->name);
  });
  std::vector<std::string> names;
  names.reserve(fit.size());
  for (const Node* n : fit) names.push_back(n->name);
  return names;
}

std::vector<std::string> Scheduler::feasible_nodes(PodId pod) const {
  return order_feasible(state_.pod(pod).spec, state_.nodes());
}

std::vector<Binding> Scheduler::schedule_pending(Tick now) {
  auto pending = state_.pods_in_phase(PodPhase::kPending);
  // Pod ids are assigned in admission order, so a stable sort by namespace
  // keeps admission order within each namespace.
  std::stable_sort(pending.begin(), pending.end(),
                   [](const Pod& a, const Pod& b) { return a.spec.namespace_name < b.spec.namespace_name; });
  std::vector<Node> nodes = state_.nodes();
  std::vector<Binding> bindings;
  for (const Pod& pod : pending) {
    auto feasible = order_feasible(pod.spec, nodes);
    if (feasible.empty()) continue;
    state_.bind_pod(pod.id, feasible.front(), now);
    for (auto& node : nodes) {
      if (node.name == feasible.front()) node.allocated += pod.spec.requests;
    }
    bindings.push_back({pod.id, feasible.front(), now});
  }
  return bindings;
}

}  // namespace miniorch

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

#include <string>
#include <vector>

#include "miniorch/cluster_state.hpp"

namespace miniorch {

struct Binding {
  PodId pod{};
  std::string node;
  Tick tick = 0;

  friend bool operator==(const Binding&, const Binding&) = default;
};

/// First-fit over a most-free-GPU-first node order. No preemption, no
/// priorities; node selectors are exact label matches checked before
/// capacity.
class Scheduler {
 public:
  explicit Scheduler(ClusterState& state) : state_(state) {}

  /// Ready nodes that fit the pod, ordered by (free GPU desc, free CPU desc,
  /// name asc).
  std::vector<std::string> feasible_nodes(PodId pod) const;

  /// Binds every Pending pod it can, in (namespace, admission) order. Later
  /// pods see capacity consumed by earlier bindings in the same pass.
  std::vector<Binding> schedule_pending(Tick now);

  static bool selector_matches(const PodSpec& spec, const Node& node);
  static std::vector<std::string> order_feasible(const PodSpec& spec, const std::vector<Node>& nodes);

 private:
  ClusterState& state_;
};

}  // namespace miniorch

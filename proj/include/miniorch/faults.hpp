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
#include <string_view>
#include <vector>

#include "miniorch/cluster_state.hpp"
#include "miniorch/common.hpp"

namespace miniorch {

enum class FaultKind { kNodeOffline, kNodeOnline, kPodKill, kTransferFaultRate };

std::string_view fault_kind_name(FaultKind kind);

struct FaultEvent {
  Tick tick = 0;
  FaultKind kind = FaultKind::kNodeOffline;
  std::string target;  // node name or pod name
  double value = 0;    // transfer_fault_rate only
};

/// Faults file: {"events":[{"tick":N,"kind":"node_offline","target":"n1"},
///                         {"tick":N,"kind":"transfer_fault_rate","value":0.05}]}
struct FaultSchedule {
  std::vector<FaultEvent> events;

  static FaultSchedule parse(std::string_view json_text);
  /// Node targets must exist in the fixture. Throws kValidationError.
  void validate(const ClusterFixture& fixture) const;
  bool empty() const { return events.empty(); }
};

}  // namespace miniorch

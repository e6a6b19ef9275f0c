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

#include "miniorch/faults.hpp"

#include <algorithm>

#include "json_util.hpp"

namespace miniorch {

std::string_view fault_kind_name(FaultKind kind) {
  switch (kind) {
    case FaultKind::kNodeOffline: return "node_offline";
    case FaultKind::kNodeOnline: return "node_online";
    case FaultKind::kPodKill: return "pod_kill";
    case FaultKind::kTransferFaultRate: return "transfer_fault_rate";
  }
  return "?";
}

FaultSchedule FaultSchedule::parse(std::string_view json_text) {
  detail::Reader r(json_text);
  auto doc = detail::parse_json(json_text);
  r.check_keys(doc, {"events"}, "faults file");
  FaultSchedule schedule;
  auto it = doc.find("events");
  if (it == doc.end()) return schedule;
  if (!it->is_array()) throw ParseError(r.line_of("events"), "\"events\" must be an array");
  for (const auto& e : *it) {
    r.check_keys(e, {"tick", "kind", "target", "value"}, "fault event");
    FaultEvent ev;
    ev.tick = r.require_int(e, "tick", "fault event");
    if (ev.tick < 0) throw ParseError(r.line_of("tick"), "fault tick must be non-negative");
    std::string kind = r.require_string(e, "kind", "fault event");
    if (kind == "node_offline") ev.kind = FaultKind::kNodeOffline;
    else if (kind == "node_online") ev.kind = FaultKind::kNodeOnline;
    else if (kind == "pod_kill") ev.kind = FaultKind::kPodKill;
    else if (kind == "transfer_fault_rate") ev.kind = FaultKind::kTransferFaultRate;
    else throw ParseError(r.line_of(kind), "unknown fault kind \"" + kind + "\"");
    if (ev.kind == FaultKind::kTransferFaultRate) {
      ev.value = r.as_number(r.require(e, "value", "fault event"), "value");
      if (ev.value < 0 || ev.value > 1) throw ParseError(r.line_of("value"), "fault rate must be in [0, 1]");
    } else {
      ev.target = r.require_string(e, "target", "fault event");
      if (ev.target.empty()) throw ParseError(r.line_of("target"), "empty fault target");
    }
    schedule.events.push_back(std::move(ev));
  }
  std::stable_sort(schedule.events.begin(), schedule.events.end(),
                   [](const FaultEvent& a, const FaultEvent& b) { return a.tick < b.tick; });
  return schedule;
}

void FaultSchedule::validate(const ClusterFixture& fixture) const {
  for (const auto& ev : events) {
    if (ev.kind != FaultKind::kNodeOffline && ev.kind != FaultKind::kNodeOnline) continue;
    bool known = std::any_of(fixture.nodes.begin(), fixture.nodes.end(),
                             [&](const Node& n) { return n.name == ev.target; });
    if (!known) throw Error(ErrorCode::kValidationError, "fault targets unknown node " + ev.target);
  }
}

}  // namespace miniorch

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
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "miniorch/common.hpp"

namespace miniorch {


enum class MessageState { kReady, kLeased, kDone };

std::string_view message_state_name(MessageState s);

struct QueueMessage {
  std::uint64_t id = 0;
  Bytes payload;
  MessageState state = MessageState::kReady;
  std::optional<std::string> lease_owner;
  std::optional<Tick> lease_expiry;
  int delivery_count = 0;
};

struct QueueCounts {
  std::size_t ready = 0;
  std::size_t leased = 0;
  std::size_t done = 0;

  std::size_t total() const { return ready + leased + done; }
  bool drained() const { return ready == 0 && leased == 0; }
};

inline constexpr Tick kDefaultLeaseTicks = 60;

/// Lease-based at-least-once queues plus insert-only completion sets, all
/// scoped by namespace. Every operation is atomic with respect to the others.
class WorkQueues {
 public:
  void create_queue(std::string_view namespace_name, std::string_view name);
  void create_completion_set(std::string_view namespace_name, std::string_view name);
  bool has_queue(const QualifiedName& q) const;

  std::uint64_t push(std::string_view caller_namespace, std::string_view queue, Bytes payload);

  /// Leases the lowest-id Ready message to `worker` until now + lease_ticks.
  std::optional<QueueMessage> claim(std::string_view caller_namespace, std::string_view queue,
                                    std::string_view worker, Tick lease_ticks, Tick now);

  /// Marks the message Done. Throws kStaleLease if `worker` no longer holds
  /// the lease and kUnknownMessage for unknown or already-Done messages.
  void ack(std::string_view caller_namespace, std::string_view queue, std::uint64_t id,
           std::string_view worker);

  /// Returns every Leased message with expiry <= now to Ready, across all
  /// queues. Result is ordered by (queue, id).
  std::vector<std::pair<QualifiedName, std::uint64_t>> expire_leases(Tick now);
  /// Same, restricted to one queue; ids ascending.
  std::vector<std::uint64_t> expire_leases(std::string_view caller_namespace, std::string_view queue, Tick now);

  /// True iff `key` was absent. Callers skip keyed side effects on false.
  bool record_completion(std::string_view caller_namespace, std::string_view set, std::string_view key);
  bool is_complete(std::string_view caller_namespace, std::string_view set, std::string_view key) const;
  std::vector<std::string> completion_keys(std::string_view caller_namespace, std::string_view set) const;

  QueueCounts counts(std::string_view caller_namespace, std::string_view queue) const;
  std::vector<QueueMessage> messages(std::string_view caller_namespace, std::string_view queue) const;

  /// One JSON object per line with every message field.
  std::string dump_jsonl(std::string_view caller_namespace, std::string_view queue) const;

  /// Monotone count of message state changes (push, claim, ack, expiry).
  std::uint64_t transitions() const;

 private:
  struct Queue {
    std::map<std::uint64_t, QueueMessage> messages;
    std::uint64_t next_id = 1;
  };

  Queue& queue_locked(const QualifiedName& q);
  const Queue& queue_locked(const QualifiedName& q) const;
  std::set<std::string, std::less<>>& set_locked(const QualifiedName& s);
  const std::set<std::string, std::less<>>& set_locked(const QualifiedName& s) const;
  std::vector<std::uint64_t> expire_locked(Queue& queue, Tick now);

  mutable std::mutex mu_;
  std::map<QualifiedName, Queue> queues_;
  std::map<QualifiedName, std::set<std::string, std::less<>>> sets_;
  std::uint64_t transitions_ = 0;
};

}  // namespace miniorch

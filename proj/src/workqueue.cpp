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

#include "miniorch/workqueue.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

namespace miniorch {

std::string_view message_state_name(MessageState s) {
  switch (s) {
    case MessageState::kReady: return "Ready";
    case MessageState::kLeased: return "Leased";
    case MessageState::kDone: return "Done";
  }
  return "?";
}

void WorkQueues::create_queue(std::string_view namespace_name, std::string_view name) {
  std::lock_guard lock(mu_);
  QualifiedName q{std::string(namespace_name), std::string(name)};
  if (queues_.contains(q)) throw Error(ErrorCode::kDuplicateName, "queue " + q.str());
  queues_.emplace(std::move(q), Queue{});
}

void WorkQueues::create_completion_set(std::string_view namespace_name, std::string_view name) {
  std::lock_guard lock(mu_);
  QualifiedName s{std::string(namespace_name), std::string(name)};
  if (sets_.contains(s)) throw Error(ErrorCode::kDuplicateName, "completion set " + s.str());
  sets_.emplace(std::move(s), std::set<std::string, std::less<>>{});
}

bool WorkQueues::has_queue(const QualifiedName& q) const {
  std::lock_guard lock(mu_);
  return queues_.contains(q);
}

WorkQueues::Queue& WorkQueues::queue_locked(const QualifiedName& q) {
  auto it = queues_.find(q);
  if (it == queues_.end()) throw Error(ErrorCode::kUnknownQueue, q.str());
  return it->second;
}

const WorkQueues::Queue& WorkQueues::queue_locked(const QualifiedName& q) const {
  auto it = queues_.find(q);
  if (it == queues_.end()) throw Error(ErrorCode::kUnknownQueue, q.str());
  return it->second;
}

std::set<std::string, std::less<>>& WorkQueues::set_locked(const QualifiedName& s) {
  auto it = sets_.find(s);
  if (it == sets_.end()) throw Error(ErrorCode::kUnknownSet, s.str());
  return it->second;
}

const std::set<std::string, std::less<>>& WorkQueues::set_locked(const QualifiedName& s) const {
  auto it = sets_.find(s);
  if (it == sets_.end()) throw Error(ErrorCode::kUnknownSet, s.str());
  return it->second;
}

std::uint64_t WorkQueues::push(std::string_view caller_namespace, std::string_view queue, Bytes payload) {
  std::lock_guard lock(mu_);
  Queue& q = queue_locked(qualify(caller_namespace, queue));
  QueueMessage msg;
  msg.id = q.next_id++;
  msg.payload = std::move(payload);
  auto id = msg.id;
  q.messages.emplace(id, std::move(msg));
  ++transitions_;
  return id;
}

std::optional<QueueMessage> WorkQueues::claim(std::string_view caller_namespace, std::string_view queue,
                                              std::string_view worker, Tick lease_ticks, Tick now) {
  if (lease_ticks < 1) throw Error(ErrorCode::kInvalidArgument, "lease_ticks must be >= 1");
  std::lock_guard lock(mu_);
  Queue& q = queue_locked(qualify(caller_namespace, queue));
  for (auto& [id, msg] : q.messages) {
    if (msg.state != MessageState::kReady) continue;
    msg.state = MessageState::kLeased;
    msg.lease_owner = std::string(worker);
    msg.lease_expiry = now + lease_ticks;
    ++msg.delivery_count;
    ++transitions_;
    return msg;
  }
  return std::nullopt;
}

void WorkQueues::ack(std::string_view caller_namespace, std::string_view queue, std::uint64_t id,
                     std::string_view worker) {
  std::lock_guard lock(mu_);
  auto name = qualify(caller_namespace, queue);
  Queue& q = queue_locked(name);
  auto it = q.messages.find(id);
  if (it == q.messages.end() || it->second.state == MessageState::kDone) {
    throw Error(ErrorCode::kUnknownMessage, name.str() + "#" + std::to_string(id));
  }
  QueueMessage& msg = it->second;
  if (msg.state != MessageState::kLeased || msg.lease_owner != worker) {
    throw Error(ErrorCode::kStaleLease, name.str() + "#" + std::to_string(id) + " not leased by " + std::string(worker));
  }
  msg.state = MessageState::kDone;
  msg.lease_owner.reset();
  msg.lease_expiry.reset();
  ++transitions_;
}

std::vector<std::uint64_t> WorkQueues::expire_locked(Queue& queue, Tick now) {
  std::vector<std::uint64_t> expired;
  for (auto& [id, msg] : queue.messages) {
    if (msg.state == MessageState::kLeased && *msg.lease_expiry <= now) {
      msg.state = MessageState::kReady;
      msg.lease_owner.reset();
      msg.lease_expiry.reset();
      expired.push_back(id);
      ++transitions_;
    }
  }
  return expired;
}

std::vector<std::pair<QualifiedName, std::uint64_t>> WorkQueues::expire_leases(Tick now) {
  std::lock_guard lock(mu_);
  std::vector<std::pair<QualifiedName, std::uint64_t>> out;
  for (auto& [name, queue] : queues_) {
    for (auto id : expire_locked(queue, now)) out.emplace_back(name, id);
  }
  return out;
}

std::vector<std::uint64_t> WorkQueues::expire_leases(std::string_view caller_namespace, std::string_view queue,
                                                     Tick now) {
  std::lock_guard lock(mu_);
  return expire_locked(queue_locked(qualify(caller_namespace, queue)), now);
}

bool WorkQueues::record_completion(std::string_view caller_namespace, std::string_view set, std::string_view key) {
  std::lock_guard lock(mu_);
  return set_locked(qualify(caller_namespace, set)).emplace(key).second;
}

bool WorkQueues::is_complete(std::string_view caller_namespace, std::string_view set, std::string_view key) const {
  std::lock_guard lock(mu_);
  const auto& s = set_locked(qualify(caller_namespace, set));
  return s.find(key) != s.end();
}

std::vector<std::string> WorkQueues::completion_keys(std::string_view caller_namespace, std::string_view set) const {
  std::lock_guard lock(mu_);
  const auto& s = set_locked(qualify(caller_namespace, set));
  return {s.begin(), s.end()};
}

QueueCounts WorkQueues::counts(std::string_view caller_namespace, std::string_view queue) const {
  std::lock_guard lock(mu_);
  QueueCounts c;
  for (const auto& [id, msg] : queue_locked(qualify(caller_namespace, queue)).messages) {
    switch (msg.state) {
      case MessageState::kReady: ++c.ready; break;
      case MessageState::kLeased: ++c.leased; break;
      case MessageState::kDone: ++c.done; break;
    }
  }
  return c;
}

std::vector<QueueMessage> WorkQueues::messages(std::string_view caller_namespace, std::string_view queue) const {
  std::lock_guard lock(mu_);
  std::vector<QueueMessage> out;
  for (const auto& [id, msg] : queue_locked(qualify(caller_namespace, queue)).messages) out.push_back(msg);
  return out;
}

std::string WorkQueues::dump_jsonl(std::string_view caller_namespace, std::string_view queue) const {
  std::ostringstream out;
  for (const auto& msg : messages(caller_namespace, queue)) {
    nlohmann::ordered_json line;
    line["id"] = msg.id;
    line["payload"] = to_string(msg.payload);
    line["state"] = message_state_name(msg.state);
    line["lease_owner"] = msg.lease_owner ? nlohmann::ordered_json(*msg.lease_owner) : nlohmann::ordered_json(nullptr);
    line["lease_expiry"] = msg.lease_expiry ? nlohmann::ordered_json(*msg.lease_expiry) : nlohmann::ordered_json(nullptr);
    line["delivery_count"] = msg.delivery_count;
    out << line.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace) << '\n';
  }
  return out.str();
}

std::uint64_t WorkQueues::transitions() const {
  std::lock_guard lock(mu_);
  return transitions_;
}

}  // namespace miniorch

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

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "miniorch/common.hpp"
#include "miniorch/object_store.hpp"
#include "miniorch/workqueue.hpp"

namespace miniorch {

// ---------------------------------------------------------------------------
// Synthetic source archive

struct CatalogConfig {
  std::int64_t files = 1000;
  /// Mean size in bytes of each named section per file, in declaration order.
  std::vector<std::pair<std::string, std::int64_t>> sections = {{"IVT", 27035}, {"OTHER", 22965}};
  std::string subset_section = "IVT";
  /// Per-file sizes are drawn uniformly from mean * [1 - jitter, 1 + jitter].
  double size_jitter = 0.1;
  std::uint64_t seed = 0;
};

struct SourceObject {
  std::string url;
  std::map<std::string, std::int64_t> sections;

  std::int64_t total_size() const;
};

/// Deterministic archive of sectioned files. Content for (url, section) is a
/// pure function of (seed, url, section) and is generated on demand.
class SourceCatalog {
 public:
  static SourceCatalog generate(const CatalogConfig& config);
  /// Rebuilds a catalog from the JSON manifest written by `manifest_json`.
  static SourceCatalog from_manifest(std::string_view json_text);

  const std::vector<SourceObject>& objects() const { return objects_; }
  const std::string& subset_section() const { return subset_section_; }
  std::uint64_t seed() const { return seed_; }

  const SourceObject& find(std::string_view url) const;
  bool contains(std::string_view url) const;
  Bytes section_content(std::string_view url, std::string_view section) const;

  std::int64_t total_bytes() const;
  std::int64_t subset_bytes() const;
  std::vector<std::string> urls() const;

  /// Stable, byte-identical for equal catalogs.
  std::string manifest_json() const;

 private:
  std::vector<SourceObject> objects_;
  std::map<std::string, std::size_t, std::less<>> by_url_;
  std::string subset_section_;
  std::uint64_t seed_ = 0;
};

/// Deterministic pseudo-random bytes for one (seed, url, section).
Bytes generate_section_bytes(std::uint64_t seed, std::string_view url, std::string_view section,
                             std::int64_t size);

/// Where subset fetches go: the in-process catalog or a loopback HTTP server.
/// Implementations must be safe to call from several threads at once.
class SourceFetcher {
 public:
  virtual ~SourceFetcher() = default;
  /// Throws kUnknownSource, kUnknownSection, or kTransferFault (retryable).
  virtual Bytes fetch(std::string_view url, std::string_view section) = 0;
};

class CatalogFetcher final : public SourceFetcher {
 public:
  explicit CatalogFetcher(const SourceCatalog& catalog) : catalog_(catalog) {}
  Bytes fetch(std::string_view url, std::string_view section) override;

 private:
  const SourceCatalog& catalog_;
};

/// Plain HTTP GET /files/<name>?section=<s> against a catalog server.
class HttpFetcher final : public SourceFetcher {
 public:
  HttpFetcher(std::string host, int port) : host_(std::move(host)), port_(port) {}
  Bytes fetch(std::string_view url, std::string_view section) override;

 private:
  std::string host_;
  int port_;
};

/// Loopback catalog server. 404 for unknown files or sections.
class CatalogServer {
 public:
  explicit CatalogServer(const SourceCatalog& catalog);
  ~CatalogServer();
  CatalogServer(const CatalogServer&) = delete;
  CatalogServer& operator=(const CatalogServer&) = delete;

  /// Binds `host:port` (0 picks a free port) and serves on a background
  /// thread. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread.
  void listen_blocking(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Fetching

/// Returns true when attempt number `attempt` (1-based) of `url` should fail
/// with a transfer fault. Must be deterministic and thread-safe.
using FaultInjector = std::function<bool(std::string_view url, int attempt)>;

/// Fails each attempt independently with probability `rate`, decided by a
/// hash of (seed, url, attempt) so results do not depend on thread timing.
FaultInjector hashed_fault_rate(std::uint64_t seed, double rate);

struct FetchOptions {
  std::string section = "IVT";
  int parallelism = 20;
  /// Maximum attempts per url, including the first.
  int retry_limit = 3;
};

struct FetchResult {
  std::string url;
  Bytes bytes;
  int attempts = 0;
};

struct FetchStats {
  int max_in_flight = 0;
  std::int64_t attempts = 0;
  std::int64_t faults = 0;
  std::int64_t bytes = 0;
};

class TransferClient {
 public:
  explicit TransferClient(SourceFetcher& source, FaultInjector faults = {})
      : source_(source), faults_(std::move(faults)) {}

  void set_fault_injector(FaultInjector faults) { faults_ = std::move(faults); }

  /// One attempt. Charges the network meter with the bytes received.
  Bytes subset_fetch(std::string_view url, std::string_view section, int attempt = 1);

  /// Fetches every url with at most `parallelism` requests in flight,
  /// retrying transfer faults. Results follow input order. Throws
  /// kBatchFailed naming the first url that exhausted its retries.
  std::vector<FetchResult> fetch_batch(std::span<const std::string> urls, const FetchOptions& options,
                                       FetchStats* stats = nullptr);

  std::int64_t bytes_received() const { return bytes_received_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }

 private:
  FetchResult fetch_with_retry(const std::string& url, const FetchOptions& options, std::atomic<std::int64_t>& faults);

  SourceFetcher& source_;
  FaultInjector faults_;
  std::atomic<std::int64_t> bytes_received_{0};
  std::atomic<int> max_in_flight_{0};
};

// ---------------------------------------------------------------------------
// Merged containers
//
// Wire format, little-endian:
//   "MRGC" | u16 version | u32 member count |
//   per member: u16 url length | url bytes | u64 offset | u64 length |
//   payload

inline constexpr std::uint16_t kContainerVersion = 1;

struct ContainerMember {
  std::string url;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;

  friend bool operator==(const ContainerMember&, const ContainerMember&) = default;
};

struct MergedContainer {
  std::vector<ContainerMember> members;  // sorted by url, contiguous offsets
  Bytes payload;

  Bytes serialize() const;
  static MergedContainer parse(std::span<const std::uint8_t> wire);
  std::span<const std::uint8_t> member_bytes(std::size_t index) const;

  friend bool operator==(const MergedContainer&, const MergedContainer&) = default;
};

/// Concatenates results sorted by url. Throws kEmptyBatch / kDuplicateMember.
MergedContainer merge(std::vector<FetchResult> results);

// ---------------------------------------------------------------------------
// Download worker loop

struct DownloadConfig {
  std::string namespace_name;
  std::string queue = "downloads";
  std::string completion_set = "downloaded";
  std::string list_bucket = "urllists";
  std::string output_bucket = "archive";
  std::string output_prefix = "merged/";
  Tick lease_ticks = kDefaultLeaseTicks;
  FetchOptions fetch;
};

std::string merged_key(std::string_view prefix, std::uint64_t message_id);

/// Splits the catalog urls into url-list objects in `list_bucket` and pushes
/// one message per list (payload = list key). Returns the message count.
std::size_t seed_download_queue(const SourceCatalog& catalog, std::int64_t urls_per_message,
                                const DownloadConfig& config, WorkQueues& queues, ObjectStore& store,
                                Tick now = 0);

enum class WorkerOutcomeKind { kProcessed, kIdle, kStale };

struct WorkerOutcome {
  WorkerOutcomeKind kind = WorkerOutcomeKind::kIdle;
  std::uint64_t message_id = 0;
  std::int64_t urls = 0;
  std::int64_t fetched = 0;         // urls actually transferred
  std::int64_t bytes_fetched = 0;   // subset bytes transferred
  bool stored = false;              // merged container written
  std::int64_t completions_new = 0;       // record_completion returned true
  std::int64_t completions_repeated = 0;  // already complete at claim or record
  int max_in_flight = 0;
};

/// Work whose data effects are done but whose lease is not yet acked.
struct ClaimedWork {
  QueueMessage message;
  WorkerOutcome outcome;
};

/// One download worker: claim -> fetch urls not yet complete -> merge -> put
/// under merged/<message id> -> record completions -> ack.
///
/// Completions are recorded only after the container is stored, so a crash or
/// a failed batch never marks a url complete without its bytes in the store.
/// Replays find every url complete and leave the stored object untouched.
class DownloadWorker {
 public:
  DownloadWorker(std::string worker_id, WorkQueues& queues, ObjectStore& store, TransferClient& client,
                 DownloadConfig config)
      : id_(std::move(worker_id)), queues_(queues), store_(store), client_(client), config_(std::move(config)) {}

  /// Claims one message and applies its data effects. Empty when nothing is
  /// Ready. Propagates kBatchFailed; the lease then expires and the message is
  /// redelivered.
  std::optional<ClaimedWork> begin(Tick now);
  /// Acks; Stale when the lease moved to another worker or was acked by one.
  WorkerOutcome finish(const ClaimedWork& work);
  /// begin + finish in one cycle.
  WorkerOutcome step(Tick now);

  const std::string& id() const { return id_; }

 private:
  std::string id_;
  WorkQueues& queues_;
  ObjectStore& store_;
  TransferClient& client_;
  DownloadConfig config_;
};

}  // namespace miniorch

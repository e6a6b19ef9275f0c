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

#include "miniorch/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <future>
#include <set>

#include <nlohmann/json.hpp>

#include "json_util.hpp"

namespace miniorch {

namespace {

std::uint64_t stream_seed(std::uint64_t seed, std::string_view url, std::string_view section, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(fnv1a64(url) ^ splitmix64(fnv1a64(section) ^ salt)));
}

double unit_double(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

std::string file_url(std::int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "file_%06lld", static_cast<long long>(index));
  return buf;
}

}  // namespace

std::int64_t SourceObject::total_size() const {
  std::int64_t total = 0;
  for (const auto& [name, size] : sections) total += size;
  return total;
}

Bytes generate_section_bytes(std::uint64_t seed, std::string_view url, std::string_view section, std::int64_t size) {
  Bytes out(static_cast<std::size_t>(size));
  std::uint64_t state = stream_seed(seed, url, section, 0xc0ffee);
  std::size_t i = 0;
  while (i < out.size()) {
    std::uint64_t word = splitmix64(state++);
    for (int b = 0; b < 8 && i < out.size(); ++b, ++i) out[i] = static_cast<std::uint8_t>(word >> (8 * b));
  }
  return out;
}

SourceCatalog SourceCatalog::generate(const CatalogConfig& config) {
  if (config.files < 0) throw Error(ErrorCode::kInvalidArgument, "catalog file count must be >= 0");
  if (config.size_jitter < 0 || config.size_jitter >= 1) {
    throw Error(ErrorCode::kInvalidArgument, "size_jitter must be in [0, 1)");
  }
  bool has_subset = false;
  for (const auto& [name, mean] : config.sections) {
    if (mean < 0) throw Error(ErrorCode::kInvalidArgument, "section " + name + " has negative size");
    has_subset = has_subset || name == config.subset_section;
  }
  if (!has_subset) throw Error(ErrorCode::kUnknownSection, "subset section " + config.subset_section);

  SourceCatalog catalog;
  catalog.seed_ = config.seed;
  catalog.subset_section_ = config.subset_section;
  catalog.objects_.reserve(static_cast<std::size_t>(config.files));
  for (std::int64_t i = 0; i < config.files; ++i) {
    SourceObject obj;
    obj.url = file_url(i);
    for (const auto& [name, mean] : config.sections) {
      double u = unit_double(splitmix64(stream_seed(config.seed, obj.url, name, 0x512e)));
      double scale = 1.0 + config.size_jitter * (2.0 * u - 1.0);
      obj.sections[name] = static_cast<std::int64_t>(std::llround(static_cast<double>(mean) * scale));
    }
    catalog.by_url_[obj.url] = catalog.objects_.size();
    catalog.objects_.push_back(std::move(obj));
  }
  return catalog;
}

SourceCatalog SourceCatalog::from_manifest(std::string_view json_text) {
  detail::Reader r(json_text);
  auto doc = detail::parse_json(json_text);
  r.check_keys(doc, {"seed", "subset_section", "files"}, "manifest");
  SourceCatalog catalog;
  const auto& seed = r.require(doc, "seed", "manifest");
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) throw ParseError(r.line_of("seed"), "seed must be an integer");
  catalog.seed_ = seed.get<std::uint64_t>();
  catalog.subset_section_ = r.require_string(doc, "subset_section", "manifest");
  for (const auto& f : r.require(doc, "files", "manifest")) {
    r.check_keys(f, {"url", "sections"}, "manifest file");
    SourceObject obj;
    obj.url = r.require_string(f, "url", "manifest file");
    const auto& sections = r.require(f, "sections", "manifest file");
    r.expect_object(sections, "sections");
    for (const auto& [name, size] : sections.items()) obj.sections[name] = r.as_int(size, name);
    if (!obj.sections.contains(catalog.subset_section_)) {
      throw Error(ErrorCode::kValidationError, obj.url + " lacks subset section " + catalog.subset_section_);
    }
    catalog.by_url_[obj.url] = catalog.objects_.size();
    catalog.objects_.push_back(std::move(obj));
  }
  return catalog;
}

const SourceObject& SourceCatalog::find(std::string_view url) const {
  auto it = by_url_.find(url);
  if (it == by_url_.end()) throw Error(ErrorCode::kUnknownSource, std::string(url));
  return objects_[it->second];
}

bool SourceCatalog::contains(std::string_view url) const { return by_url_.find(url) != by_url_.end(); }

Bytes SourceCatalog::section_content(std::string_view url, std::string_view section) const {
  const SourceObject& obj = find(url);
  auto it = obj.sections.find(std::string(section));
  if (it == obj.sections.end()) throw Error(ErrorCode::kUnknownSection, std::string(url) + "?section=" + std::string(section));
  return generate_section_bytes(seed_, url, section, it->second);
}

std::int64_t SourceCatalog::total_bytes() const {
  std::int64_t total = 0;
  for (const auto& obj : objects_) total += obj.total_size();
  return total;
}

std::int64_t SourceCatalog::subset_bytes() const {
  std::int64_t total = 0;
  for (const auto& obj : objects_) total += obj.sections.at(subset_section_);
  return total;
}

std::vector<std::string> SourceCatalog::urls() const {
  std::vector<std::string> out;
  out.reserve(objects_.size());
  for (const auto& obj : objects_) out.push_back(obj.url);
  return out;
}

std::string SourceCatalog::manifest_json() const {
  nlohmann::ordered_json doc;
  doc["seed"] = seed_;
  doc["subset_section"] = subset_section_;
  auto files = nlohmann::ordered_json::array();
  for (const auto& obj : objects_) {
    nlohmann::ordered_json sections = nlohmann::ordered_json::object();
    for (const auto& [name, size] : obj.sections) sections[name] = size;
    files.push_back({{"url", obj.url}, {"sections", std::move(sections)}});
  }
  doc["files"] = std::move(files);
  return doc.dump(1) + "\n";
}

Bytes CatalogFetcher::fetch(std::string_view url, std::string_view section) {
  return catalog_.section_content(url, section);
}

FaultInjector hashed_fault_rate(std::uint64_t seed, double rate) {
  if (rate <= 0) return {};
  return [seed, rate](std::string_view url, int attempt) {
    return unit_double(splitmix64(stream_seed(seed, url, "fault", static_cast<std::uint64_t>(attempt)))) < rate;
  };
}

Bytes TransferClient::subset_fetch(std::string_view url, std::string_view section, int attempt) {
  if (faults_ && faults_(url, attempt)) {
    throw Error(ErrorCode::kTransferFault, std::string(url) + " attempt " + std::to_string(attempt));
  }
  Bytes bytes = source_.fetch(url, section);
  bytes_received_ += static_cast<std::int64_t>(bytes.size());
  return bytes;
}

FetchResult TransferClient::fetch_with_retry(const std::string& url, const FetchOptions& options,
                                             std::atomic<std::int64_t>& faults) {
  for (int attempt = 1;; ++attempt) {
    try {
      return FetchResult{url, subset_fetch(url, options.section, attempt), attempt};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTransferFault) throw;
      ++faults;
      if (attempt >= options.retry_limit) {
        throw Error(ErrorCode::kBatchFailed, url + " after " + std::to_string(attempt) + " attempts");
      }
    }
  }
}

std::vector<FetchResult> TransferClient::fetch_batch(std::span<const std::string> urls, const FetchOptions& options,
                                                     FetchStats* stats) {
  if (options.parallelism < 1) throw Error(ErrorCode::kInvalidArgument, "parallelism must be >= 1");
  if (options.retry_limit < 1) throw Error(ErrorCode::kInvalidArgument, "retry_limit must be >= 1");
  std::atomic<std::int64_t> faults{0};
  std::vector<FetchResult> results;
  results.reserve(urls.size());
  // A request is in flight from dispatch until its result is collected; at
  // most `parallelism` futures are outstanding at any moment.
  std::deque<std::future<FetchResult>> in_flight;
  int batch_max = 0;
  std::size_t next = 0;
  std::optional<Error> failure;
  while (next < urls.size() || !in_flight.empty()) {
    while (!failure && next < urls.size() && static_cast<int>(in_flight.size()) < options.parallelism) {
      const std::string& url = urls[next++];
      in_flight.push_back(std::async(std::launch::async, [this, &url, &options, &faults] {
        return fetch_with_retry(url, options, faults);
      }));
      batch_max = std::max(batch_max, static_cast<int>(in_flight.size()));
    }
    if (in_flight.empty()) break;
    try {
      results.push_back(in_flight.front().get());
    } catch (const Error& e) {
      if (!failure) failure = e;
    }
    in_flight.pop_front();
  }
  int prev = max_in_flight_.load();
  while (batch_max > prev && !max_in_flight_.compare_exchange_weak(prev, batch_max)) {
  }
  if (stats) {
    stats->max_in_flight = std::max(stats->max_in_flight, batch_max);
    stats->faults += faults.load();
    for (const auto& r : results) {
      stats->attempts += r.attempts;
      stats->bytes += static_cast<std::int64_t>(r.bytes.size());
    }
  }
  if (failure) throw *failure;
  return results;
}

// ---------------------------------------------------------------------------

namespace {

void put_u16(Bytes& out, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class WireReader {
 public:
  explicit WireReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> rest() const { return data_.subspan(pos_); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw Error(ErrorCode::kMalformedContainer, "truncated container");
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace

Bytes MergedContainer::serialize() const {
  Bytes out = {'M', 'R', 'G', 'C'};
  put_u16(out, kContainerVersion);
  put_u32(out, static_cast<std::uint32_t>(members.size()));
  for (const auto& m : members) {
    if (m.url.size() > 0xffff) throw Error(ErrorCode::kInvalidArgument, "url too long for container index");
    put_u16(out, static_cast<std::uint16_t>(m.url.size()));
    out.insert(out.end(), m.url.begin(), m.url.end());
    put_u64(out, m.offset);
    put_u64(out, m.length);
  }
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

MergedContainer MergedContainer::parse(std::span<const std::uint8_t> wire) {
  WireReader in(wire);
  auto magic = in.take(4);
  if (!std::equal(magic.begin(), magic.end(), "MRGC")) throw Error(ErrorCode::kMalformedContainer, "bad magic");
  if (in.uint(2) != kContainerVersion) throw Error(ErrorCode::kMalformedContainer, "unsupported version");
  auto count = in.uint(4);
  MergedContainer c;
  std::uint64_t expected_offset = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    auto len = in.uint(2);
    auto url = in.take(len);
    ContainerMember m{std::string(url.begin(), url.end()), in.uint(8), in.uint(8)};
    if (m.offset != expected_offset) throw Error(ErrorCode::kMalformedContainer, "non-contiguous member " + m.url);
    expected_offset += m.length;
    c.members.push_back(std::move(m));
  }
  auto payload = in.rest();
  if (payload.size() != expected_offset) throw Error(ErrorCode::kMalformedContainer, "payload length mismatch");
  c.payload.assign(payload.begin(), payload.end());
  return c;
}

std::span<const std::uint8_t> MergedContainer::member_bytes(std::size_t index) const {
  const auto& m = members.at(index);
  return std::span<const std::uint8_t>(payload).subspan(m.offset, m.length);
}

MergedContainer merge(std::vector<FetchResult> results) {
  if (results.empty()) throw Error(ErrorCode::kEmptyBatch, "nothing to merge");
  std::sort(results.begin(), results.end(), [](const FetchResult& a, const FetchResult& b) { return a.url < b.url; });
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].url == results[i - 1].url) throw Error(ErrorCode::kDuplicateMember, results[i].url);
  }
  MergedContainer c;
  std::size_t total = 0;
  for (const auto& r : results) total += r.bytes.size();
  c.payload.reserve(total);
  for (auto& r : results) {
    c.members.push_back({r.url, c.payload.size(), r.bytes.size()});
    c.payload.insert(c.payload.end(), r.bytes.begin(), r.bytes.end());
  }
  return c;
}

// ---------------------------------------------------------------------------

std::string merged_key(std::string_view prefix, std::uint64_t message_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06llu", static_cast<unsigned long long>(message_id));
  return std::string(prefix) + buf;
}

std::size_t seed_download_queue(const SourceCatalog& catalog, std::int64_t urls_per_message,
                                const DownloadConfig& config, WorkQueues& queues, ObjectStore& store, Tick now) {
  if (urls_per_message < 1) throw Error(ErrorCode::kInvalidArgument, "urls_per_message must be >= 1");
  store.create_bucket(config.namespace_name, config.list_bucket);
  auto urls = catalog.urls();
  std::size_t messages = 0;
  for (std::size_t start = 0; start < urls.size(); start += static_cast<std::size_t>(urls_per_message)) {
    std::size_t end = std::min(urls.size(), start + static_cast<std::size_t>(urls_per_message));
    std::string list;
    for (std::size_t i = start; i < end; ++i) list += urls[i] + "\n";
    std::string key = merged_key("list_", messages + 1);
    store.put(config.namespace_name, config.list_bucket, key, to_bytes(list), now);
    queues.push(config.namespace_name, config.queue, to_bytes(key));
    ++messages;
  }
  return messages;
}

std::optional<ClaimedWork> DownloadWorker::begin(Tick now) {
  auto msg = queues_.claim(config_.namespace_name, config_.queue, id_, config_.lease_ticks, now);
  if (!msg) return std::nullopt;
  ClaimedWork work{*msg, {}};
  WorkerOutcome& out = work.outcome;
  out.kind = WorkerOutcomeKind::kProcessed;
  out.message_id = msg->id;

  std::string list = to_string(store_.get(config_.namespace_name, config_.list_bucket, to_string(msg->payload)));
  std::vector<std::string> fresh;
  std::size_t pos = 0;
  while (pos < list.size()) {
    auto eol = list.find('\n', pos);
    if (eol == std::string::npos) eol = list.size();
    std::string url = list.substr(pos, eol - pos);
    pos = eol + 1;
    if (url.empty()) continue;
    ++out.urls;
    if (queues_.is_complete(config_.namespace_name, config_.completion_set, url)) {
      ++out.completions_repeated;
    } else {
      fresh.push_back(std::move(url));
    }
  }
  if (fresh.empty()) return work;

  FetchStats stats;
  auto results = client_.fetch_batch(fresh, config_.fetch, &stats);
  out.fetched = static_cast<std::int64_t>(results.size());
  out.bytes_fetched = stats.bytes;
  out.max_in_flight = stats.max_in_flight;
  MergedContainer container = merge(std::move(results));
  store_.put(config_.namespace_name, config_.output_bucket, merged_key(config_.output_prefix, msg->id),
             container.serialize(), now);
  out.stored = true;
  for (const auto& m : container.members) {
    if (queues_.record_completion(config_.namespace_name, config_.completion_set, m.url)) {
      ++out.completions_new;
    } else {
      ++out.completions_repeated;
    }
  }
  return work;
}

WorkerOutcome DownloadWorker::finish(const ClaimedWork& work) {
  WorkerOutcome out = work.outcome;
  try {
    queues_.ack(config_.namespace_name, config_.queue, work.message.id, id_);
  } catch (const Error& e) {
    // A replay may already have acked the message we claimed.
    if (e.code() != ErrorCode::kStaleLease && e.code() != ErrorCode::kUnknownMessage) throw;
    out.kind = WorkerOutcomeKind::kStale;
  }
  return out;
}

WorkerOutcome DownloadWorker::step(Tick now) {
  auto work = begin(now);
  if (!work) return {};
  return finish(*work);
}

}  // namespace miniorch

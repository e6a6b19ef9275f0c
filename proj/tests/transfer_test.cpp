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

#include <atomic>
#include <chrono>
#include <random>
#include <set>
#include <thread>

#include <gtest/gtest.h>

#include "miniorch/digest.hpp"
#include "miniorch/transfer.hpp"

namespace miniorch {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

CatalogConfig exact_catalog(std::int64_t files, std::int64_t ivt, std::int64_t other) {
  CatalogConfig c;
  c.files = files;
  c.sections = {{"IVT", ivt}, {"OTHER", other}};
  c.size_jitter = 0;
  c.seed = 11;
  return c;
}

// Counts concurrent calls into the source independently of the client's own
// instrumentation.
class CountingFetcher final : public SourceFetcher {
 public:
  explicit CountingFetcher(const SourceCatalog& catalog) : inner_(catalog) {}
  Bytes fetch(std::string_view url, std::string_view section) override {
    int now = ++active_;
    int prev = peak_.load();
    while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    Bytes out = inner_.fetch(url, section);
    --active_;
    return out;
  }
  int peak() const { return peak_.load(); }

 private:
  CatalogFetcher inner_;
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
};

TEST(Catalog, SubsetFetchReturnsOnlyTheSection) {
  auto catalog = SourceCatalog::generate(exact_catalog(1, 100, 85));
  CatalogFetcher source(catalog);
  TransferClient client(source);
  EXPECT_EQ(client.subset_fetch("file_000000", "IVT").size(), 100u);
  EXPECT_EQ(client.bytes_received(), 100);
  EXPECT_EQ(code_of([&] { client.subset_fetch("file_000000", "PRECIP"); }), ErrorCode::kUnknownSection);
  EXPECT_EQ(code_of([&] { client.subset_fetch("file_999999", "IVT"); }), ErrorCode::kUnknownSource);
}

TEST(Catalog, DefaultSubsetRatioMatchesArchiveReduction) {
  CatalogConfig config;
  config.seed = 5;
  auto catalog = SourceCatalog::generate(config);
  double ratio = static_cast<double>(catalog.subset_bytes()) / static_cast<double>(catalog.total_bytes());
  EXPECT_NEAR(ratio, 246.0 / 455.0, 0.01 * 246.0 / 455.0);
}

TEST(Catalog, ContentIsDeterministicPerSeed) {
  auto a = SourceCatalog::generate(exact_catalog(3, 64, 64));
  auto b = SourceCatalog::generate(exact_catalog(3, 64, 64));
  EXPECT_EQ(a.manifest_json(), b.manifest_json());
  EXPECT_EQ(a.section_content("file_000001", "IVT"), b.section_content("file_000001", "IVT"));
  EXPECT_NE(a.section_content("file_000001", "IVT"), a.section_content("file_000002", "IVT"));
  auto c = SourceCatalog::from_manifest(a.manifest_json());
  EXPECT_EQ(c.manifest_json(), a.manifest_json());
  EXPECT_EQ(c.section_content("file_000002", "OTHER"), a.section_content("file_000002", "OTHER"));
}

TEST(FetchBatch, InFlightNeverExceedsParallelism) {
  auto catalog = SourceCatalog::generate(exact_catalog(100, 10, 5));
  CountingFetcher source(catalog);
  TransferClient client(source);
  FetchStats stats;
  auto urls = catalog.urls();
  auto results = client.fetch_batch(urls, {"IVT", 20, 3}, &stats);
  ASSERT_EQ(results.size(), 100u);
  for (std::size_t i = 0; i < urls.size(); ++i) EXPECT_EQ(results[i].url, urls[i]);
  EXPECT_EQ(stats.max_in_flight, 20);
  EXPECT_EQ(client.max_in_flight(), 20);
  EXPECT_LE(source.peak(), 20);
  EXPECT_EQ(stats.bytes, 1000);
}

TEST(FetchBatch, SingleUrlHasOneInFlight) {
  auto catalog = SourceCatalog::generate(exact_catalog(1, 10, 5));
  CatalogFetcher source(catalog);
  TransferClient client(source);
  FetchStats stats;
  std::vector<std::string> urls = {"file_000000"};
  client.fetch_batch(urls, {"IVT", 20, 3}, &stats);
  EXPECT_EQ(stats.max_in_flight, 1);
}

TEST(FetchBatch, RetriesTransferFaultsUpToLimit) {
  auto catalog = SourceCatalog::generate(exact_catalog(1, 10, 5));
  CatalogFetcher source(catalog);
  std::vector<std::string> urls = {"file_000000"};
  TransferClient twice(source, [](std::string_view, int attempt) { return attempt <= 2; });
  FetchStats stats;
  auto results = twice.fetch_batch(urls, {"IVT", 20, 3}, &stats);
  EXPECT_EQ(results[0].attempts, 3);
  EXPECT_EQ(stats.faults, 2);
  EXPECT_EQ(twice.bytes_received(), 10);

  TransferClient always(source, [](std::string_view, int) { return true; });
  try {
    always.fetch_batch(urls, {"IVT", 20, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBatchFailed);
    EXPECT_NE(std::string(e.what()).find("file_000000"), std::string::npos);
  }
  EXPECT_EQ(always.bytes_received(), 0);
}

TEST(FetchBatch, HashedFaultRateIsDeterministic) {
  auto f = hashed_fault_rate(9, 0.3);
  auto g = hashed_fault_rate(9, 0.3);
  int hits = 0;
  for (int i = 0; i < 1000; ++i) {
    std::string url = "file_" + std::to_string(i);
    EXPECT_EQ(f(url, 1), g(url, 1));
    hits += f(url, 1) ? 1 : 0;
  }
  EXPECT_GT(hits, 230);
  EXPECT_LT(hits, 370);
  EXPECT_FALSE(hashed_fault_rate(9, 0.0));
}

TEST(Merge, OffsetsFollowSortedUrls) {
  std::vector<FetchResult> results = {{"c", Bytes(30, 3), 1}, {"a", Bytes(10, 1), 1}, {"b", Bytes(20, 2), 1}};
  auto c = merge(results);
  ASSERT_EQ(c.members.size(), 3u);
  EXPECT_EQ(c.members[0], (ContainerMember{"a", 0, 10}));
  EXPECT_EQ(c.members[1], (ContainerMember{"b", 10, 20}));
  EXPECT_EQ(c.members[2], (ContainerMember{"c", 30, 30}));
  EXPECT_EQ(c.payload.size(), 60u);
  EXPECT_EQ(c.member_bytes(1)[0], 2);
}

TEST(Merge, SingleDuplicateAndEmpty) {
  auto one = merge({{"only", Bytes(5, 9), 1}});
  EXPECT_EQ(one.members[0].offset, 0u);
  EXPECT_EQ(code_of([] { merge({{"a", {}, 1}, {"a", {}, 1}}); }), ErrorCode::kDuplicateMember);
  EXPECT_EQ(code_of([] { merge({}); }), ErrorCode::kEmptyBatch);
}

TEST(Container, WireRoundTripProperty) {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 100; ++round) {
    std::vector<FetchResult> results;
    int n = static_cast<int>(rng() % 20) + 1;
    for (int i = 0; i < n; ++i) {
      Bytes b(rng() % 64);
      for (auto& x : b) x = static_cast<std::uint8_t>(rng());
      results.push_back({"u" + std::to_string(i), std::move(b), 1});
    }
    auto c = merge(results);
    auto wire = c.serialize();
    EXPECT_EQ(MergedContainer::parse(wire), c);
    for (std::size_t i = 0; i < c.members.size(); ++i) {
      auto idx = static_cast<std::size_t>(std::stoi(c.members[i].url.substr(1)));
      auto bytes = c.member_bytes(i);
      EXPECT_TRUE(std::equal(bytes.begin(), bytes.end(), results[idx].bytes.begin(), results[idx].bytes.end()));
    }
  }
}

TEST(Container, MalformedWireIsRejected) {
  auto wire = merge({{"a", Bytes(4, 1), 1}}).serialize();
  Bytes truncated(wire.begin(), wire.end() - 1);
  EXPECT_EQ(code_of([&] { MergedContainer::parse(truncated); }), ErrorCode::kMalformedContainer);
  Bytes bad_magic = wire;
  bad_magic[0] = 'X';
  EXPECT_EQ(code_of([&] { MergedContainer::parse(bad_magic); }), ErrorCode::kMalformedContainer);
  EXPECT_EQ(code_of([&] { MergedContainer::parse(Bytes{}); }), ErrorCode::kMalformedContainer);
}

class DownloadWorkerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    catalog = std::make_unique<SourceCatalog>(SourceCatalog::generate(exact_catalog(100, 50, 40)));
    source = std::make_unique<CatalogFetcher>(*catalog);
    client = std::make_unique<TransferClient>(*source);
    store = ObjectStore::in_memory();
    config.namespace_name = "connect";
    config.lease_ticks = 10;
    queues.create_queue("connect", config.queue);
    queues.create_completion_set("connect", config.completion_set);
    store->create_bucket("connect", config.output_bucket);
  }

  std::unique_ptr<SourceCatalog> catalog;
  std::unique_ptr<CatalogFetcher> source;
  std::unique_ptr<TransferClient> client;
  std::unique_ptr<ObjectStore> store;
  WorkQueues queues;
  DownloadConfig config;
};

TEST_F(DownloadWorkerTest, EmptyQueueIsIdle) {
  DownloadWorker w("w", queues, *store, *client, config);
  EXPECT_EQ(w.step(0).kind, WorkerOutcomeKind::kIdle);
}

TEST_F(DownloadWorkerTest, FreshMessageStoresOneContainer) {
  EXPECT_EQ(seed_download_queue(*catalog, 100, config, queues, *store), 1u);
  DownloadWorker w("w", queues, *store, *client, config);
  auto out = w.step(0);
  EXPECT_EQ(out.kind, WorkerOutcomeKind::kProcessed);
  EXPECT_EQ(out.urls, 100);
  EXPECT_EQ(out.fetched, 100);
  EXPECT_EQ(out.completions_new, 100);
  EXPECT_EQ(out.bytes_fetched, catalog->subset_bytes());
  EXPECT_EQ(store->list("connect", "archive", "merged/"), (std::vector<std::string>{"merged/000001"}));
  EXPECT_EQ(queues.completion_keys("connect", "downloaded").size(), 100u);
  auto container = MergedContainer::parse(store->get("connect", "archive", "merged/000001"));
  EXPECT_EQ(container.payload.size(), static_cast<std::size_t>(catalog->subset_bytes()));
  EXPECT_TRUE(queues.counts("connect", "downloads").drained());
}

TEST_F(DownloadWorkerTest, CrashReplayFetchesNothing) {
  seed_download_queue(*catalog, 100, config, queues, *store);
  DownloadWorker crashed("crashed", queues, *store, *client, config);
  auto work = crashed.begin(0);  // data effects done, never acked
  ASSERT_TRUE(work);
  auto etag = store->stat("connect", "archive", "merged/000001")->etag;
  auto bytes_before = client->bytes_received();
  queues.expire_leases(10);
  DownloadWorker replay("replay", queues, *store, *client, config);
  auto out = replay.step(10);
  EXPECT_EQ(out.kind, WorkerOutcomeKind::kProcessed);
  EXPECT_EQ(out.fetched, 0);
  EXPECT_FALSE(out.stored);
  EXPECT_EQ(out.completions_repeated, 100);
  EXPECT_EQ(client->bytes_received(), bytes_before);
  EXPECT_EQ(store->stat("connect", "archive", "merged/000001")->etag, etag);
  EXPECT_EQ(crashed.finish(*work).kind, WorkerOutcomeKind::kStale);
}

TEST_F(DownloadWorkerTest, FailedBatchLeavesNoCompletions) {
  seed_download_queue(*catalog, 100, config, queues, *store);
  TransferClient flaky(*source, [](std::string_view url, int) { return url == "file_000050"; });
  DownloadWorker w("w", queues, *store, flaky, config);
  EXPECT_EQ(code_of([&] { w.begin(0); }), ErrorCode::kBatchFailed);
  EXPECT_TRUE(queues.completion_keys("connect", "downloaded").empty());
  EXPECT_TRUE(store->list("connect", "archive").empty());
  queues.expire_leases(10);
  DownloadWorker healthy("h", queues, *store, *client, config);
  EXPECT_EQ(healthy.step(10).fetched, 100);
}

TEST(LoopbackHttp, ServesCatalogBytes) {
  auto catalog = SourceCatalog::generate(exact_catalog(5, 300, 200));
  CatalogServer server(catalog);
  int port = server.start("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  HttpFetcher http("127.0.0.1", port);
  EXPECT_EQ(http.fetch("file_000003", "IVT"), catalog.section_content("file_000003", "IVT"));
  EXPECT_EQ(code_of([&] { http.fetch("file_000099", "IVT"); }), ErrorCode::kUnknownSource);
  EXPECT_EQ(code_of([&] { http.fetch("file_000001", "NOPE"); }), ErrorCode::kUnknownSection);
  TransferClient client(http);
  FetchStats stats;
  auto urls = catalog.urls();
  auto results = client.fetch_batch(urls, {"IVT", 20, 3}, &stats);
  EXPECT_EQ(stats.bytes, catalog.subset_bytes());
  server.stop();
}

}  // namespace
}  // namespace miniorch

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

#include <fstream>

#include "json_util.hpp"
#include "miniorch/digest.hpp"
#include "miniorch/pipeline.hpp"

namespace miniorch {

namespace {

using ojson = nlohmann::ordered_json;

void write_file(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
}

ojson summary_json(const StepSummary& s) {
  return {{"step", s.step},
          {"pods", s.pods},
          {"cpus", s.cpus},
          {"gpus", s.gpus},
          {"data_processed_bytes", s.data_processed_bytes},
          {"memory_peak_bytes", s.memory_peak_bytes},
          {"total_ticks", s.total_ticks}};
}

}  // namespace

std::string compute_data_digest(const std::vector<ObjectRecord>& objects) {
  Sha256 h;
  h.field("objects").field(std::to_string(objects.size()));
  for (const auto& o : objects) h.field(o.bucket).field(o.key).field(std::to_string(o.size_bytes)).field(o.etag);
  return h.hex_digest();
}

std::string compute_digest(const std::string& data_digest, const std::vector<StepSummary>& steps) {
  Sha256 h;
  h.field(data_digest).field(std::to_string(steps.size()));
  for (const auto& s : steps) h.field(summary_json(s).dump());
  return h.hex_digest();
}

std::string RunReport::to_json() const {
  ojson j;
  j["schema_version"] = kRunReportSchemaVersion;
  j["pipeline"] = pipeline;
  j["namespace"] = namespace_name;
  j["seed"] = seed;
  j["hash_algorithm"] = hash_algorithm;
  j["seconds_per_tick"] = seconds_per_tick;
  j["status"] = ok ? "ok" : "failed";
  j["failure"] = ok ? ojson(nullptr) : ojson{{"step", failed_step}, {"reason", failure_reason}};
  j["total_ticks"] = total_ticks;
  j["steps"] = ojson::array();
  for (const auto& s : steps) j["steps"].push_back(summary_json(s));
  j["timeline"] = ojson::array();
  for (const auto& t : timeline) {
    j["timeline"].push_back({{"step", t.step}, {"first_tick", t.first_tick}, {"last_tick", t.last_tick}});
  }
  j["faults_applied"] = ojson::array();
  for (const auto& f : faults_applied) j["faults_applied"].push_back({{"tick", f.tick}, {"event", f.event}});
  j["transfer"] = {{"messages", transfer.messages},
                   {"completion_true", transfer.completion_true},
                   {"completion_false", transfer.completion_false},
                   {"urls_fetched", transfer.urls_fetched},
                   {"bytes_downloaded", transfer.bytes_downloaded},
                   {"catalog_total_bytes", transfer.catalog_total_bytes},
                   {"catalog_subset_bytes", transfer.catalog_subset_bytes},
                   {"max_in_flight", transfer.max_in_flight},
                   {"stale_acks", transfer.stale_acks},
                   {"max_delivery_count", transfer.max_delivery_count}};
  j["objects"] = ojson::array();
  for (const auto& o : objects) {
    j["objects"].push_back({{"bucket", o.bucket}, {"key", o.key}, {"size_bytes", o.size_bytes}, {"etag", o.etag}});
  }
  j["data_digest"] = data_digest;
  j["digest"] = digest;
  j["table"] = table;
  return j.dump(2) + "\n";
}

RunReport RunReport::from_json(std::string_view text) {
  auto j = detail::parse_json(text);
  RunReport r;
  try {
    if (j.at("schema_version").get<int>() != kRunReportSchemaVersion) {
      throw ParseError(detail::line_of_key(text, "schema_version"), "unsupported schema_version");
    }
    r.pipeline = j.at("pipeline").get<std::string>();
    r.namespace_name = j.at("namespace").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.hash_algorithm = j.at("hash_algorithm").get<std::string>();
    r.seconds_per_tick = j.at("seconds_per_tick").get<double>();
    r.ok = j.at("status").get<std::string>() == "ok";
    if (!r.ok) {
      r.failed_step = j.at("failure").at("step").get<std::string>();
      r.failure_reason = j.at("failure").at("reason").get<std::string>();
    }
    r.total_ticks = j.at("total_ticks").get<Tick>();
    for (const auto& s : j.at("steps")) {
      r.steps.push_back({s.at("step").get<std::string>(), s.at("pods").get<std::int64_t>(),
                         s.at("cpus").get<std::int64_t>(), s.at("gpus").get<std::int64_t>(),
                         s.at("data_processed_bytes").get<std::int64_t>(), s.at("memory_peak_bytes").get<std::int64_t>(),
                         s.at("total_ticks").get<std::int64_t>()});
    }
    for (const auto& t : j.at("timeline")) {
      r.timeline.push_back({t.at("step").get<std::string>(), t.at("first_tick").get<Tick>(), t.at("last_tick").get<Tick>()});
    }
    for (const auto& f : j.at("faults_applied")) {
      r.faults_applied.push_back({f.at("tick").get<Tick>(), f.at("event").get<std::string>()});
    }
    const auto& t = j.at("transfer");
    r.transfer.messages = t.at("messages").get<std::int64_t>();
    r.transfer.completion_true = t.at("completion_true").get<std::int64_t>();
    r.transfer.completion_false = t.at("completion_false").get<std::int64_t>();
    r.transfer.urls_fetched = t.at("urls_fetched").get<std::int64_t>();
    r.transfer.bytes_downloaded = t.at("bytes_downloaded").get<std::int64_t>();
    r.transfer.catalog_total_bytes = t.at("catalog_total_bytes").get<std::int64_t>();
    r.transfer.catalog_subset_bytes = t.at("catalog_subset_bytes").get<std::int64_t>();
    r.transfer.max_in_flight = t.at("max_in_flight").get<int>();
    r.transfer.stale_acks = t.at("stale_acks").get<std::int64_t>();
    r.transfer.max_delivery_count = t.at("max_delivery_count").get<std::int64_t>();
    for (const auto& o : j.at("objects")) {
      r.objects.push_back({o.at("bucket").get<std::string>(), o.at("key").get<std::string>(),
                           o.at("size_bytes").get<std::int64_t>(), o.at("etag").get<std::string>()});
    }
    r.data_digest = j.at("data_digest").get<std::string>();
    r.digest = j.at("digest").get<std::string>();
    r.table = j.at("table").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("malformed run report: ") + e.what());
  }
  return r;
}

void export_artifacts(const RunArtifacts& artifacts, const std::filesystem::path& dir) {
  for (const auto& [name, jsonl] : artifacts.queue_dumps) write_file(dir / "queues" / (name + ".jsonl"), jsonl);
  for (const auto& [name, keys] : artifacts.completion_sets) write_file(dir / "completions" / (name + ".txt"), keys);
}

void export_state(const ObjectStore& store, const RunArtifacts& artifacts, const std::filesystem::path& dir) {
  auto disk = ObjectStore::on_disk(dir / "objects");
  store.copy_to(*disk);
  export_artifacts(artifacts, dir);
}

}  // namespace miniorch

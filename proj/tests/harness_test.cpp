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

#include <cstdlib>
#include <sstream>

#include <gtest/gtest.h>

#include "miniorch/harness.hpp"
#include "support.hpp"

namespace miniorch {
namespace {

using testing::source_path;
using testing::TempDir;

TEST(SeedSource, DefaultManifestMatchesArchiveRatio) {
  TempDir dir("seed");
  CatalogConfig config;
  config.seed = 21;
  seed_source(config, dir.path());
  auto catalog = SourceCatalog::from_manifest(read_text_file(dir.path() / "manifest.json"));
  EXPECT_EQ(catalog.objects().size(), 1000u);
  double ratio = static_cast<double>(catalog.subset_bytes()) / static_cast<double>(catalog.total_bytes());
  EXPECT_NEAR(ratio, 246.0 / 455.0, 0.01 * 246.0 / 455.0);
}

TEST(SeedSource, SameSeedIsByteIdentical) {
  TempDir a("seed-a");
  TempDir b("seed-b");
  CatalogConfig config;
  config.files = 50;
  config.seed = 4;
  seed_source(config, a.path());
  seed_source(config, b.path());
  EXPECT_EQ(read_text_file(a.path() / "manifest.json"), read_text_file(b.path() / "manifest.json"));
  config.seed = 5;
  EXPECT_NE(seed_source(config, b.path()), read_text_file(a.path() / "manifest.json"));
}

TEST(SeedSource, WritesSectionFiles) {
  TempDir dir("sections");
  CatalogConfig config;
  config.files = 1;
  config.size_jitter = 0;
  config.sections = {{"IVT", 100}, {"OTHER", 85}};
  seed_source(config, dir.path(), true);
  EXPECT_EQ(read_text_file(dir.path() / "files" / "file_000000" / "IVT").size(), 100u);
  EXPECT_EQ(read_text_file(dir.path() / "files" / "file_000000" / "OTHER").size(), 85u);
}

TEST(Scenario, DemoSucceedsAndWritesArtifacts) {
  TempDir out("scenario");
  std::ostringstream err;
  ScenarioPaths paths{source_path("demo/pipeline.json"), source_path("demo/cluster.json"), std::nullopt, out.path()};
  ASSERT_EQ(run_scenario(paths, 7, TransferMode::kSimulated, err), kExitOk) << err.str();
  for (const char* f : {"report.json", "metrics.jsonl", "table.txt"}) EXPECT_TRUE(std::filesystem::exists(out.path() / f));
  EXPECT_TRUE(std::filesystem::exists(out.path() / "state" / "objects" / "connect" / "stats" / "summary.json"));
  EXPECT_TRUE(std::filesystem::exists(out.path() / "state" / "completions" / "download-done.txt"));
  EXPECT_EQ(read_text_file(out.path() / "table.txt"), read_text_file(source_path("tests/golden/demo_table.txt")));
}

TEST(Scenario, StarvationExitsTwoWithPartialReport) {
  TempDir out("starve");
  write_text_file(out.path() / "cluster.json", R"({
    "nodes": [
      {"name": "gpu-1", "cpu_millicores": 24000, "gpu_count": 8, "memory_bytes": 96000000000},
      {"name": "cpu-1", "cpu_millicores": 64000, "gpu_count": 0, "memory_bytes": 256000000000}
    ],
    "namespaces": [{"name": "connect", "admin": "pi"}]
  })");
  write_text_file(out.path() / "faults.json", R"({"events":[{"tick":40,"kind":"node_offline","target":"gpu-1"}]})");
  auto spec = read_text_file(source_path("demo/pipeline.json"));
  spec.replace(spec.find("\"workers\": 50"), 13, "\"workers\": 8");
  write_text_file(out.path() / "pipeline.json", spec);
  std::ostringstream err;
  ScenarioPaths paths{out.path() / "pipeline.json", out.path() / "cluster.json", out.path() / "faults.json",
                      out.path() / "out"};
  EXPECT_EQ(run_scenario(paths, 7, TransferMode::kSimulated, err), kExitRunFailed);
  EXPECT_NE(err.str().find("no feasible node"), std::string::npos) << err.str();
  auto report = RunReport::from_json(read_text_file(out.path() / "out" / "report.json"));
  EXPECT_FALSE(report.ok);
  EXPECT_NE(report.failure_reason.find("no feasible node"), std::string::npos);
}

TEST(Scenario, MalformedInputsExitOne) {
  TempDir out("bad");
  write_text_file(out.path() / "faults.json", R"({"events":[{"tick":1,"kind":"meteor"}]})");
  std::ostringstream err;
  ScenarioPaths paths{source_path("demo/pipeline.json"), source_path("demo/cluster.json"), out.path() / "faults.json",
                      out.path() / "out"};
  EXPECT_EQ(run_scenario(paths, 7, TransferMode::kSimulated, err), kExitUsage);
  write_text_file(out.path() / "faults.json", R"({"events":[{"tick":1,"kind":"node_offline","target":"ghost"}]})");
  EXPECT_EQ(run_scenario(paths, 7, TransferMode::kSimulated, err), kExitUsage);
  write_text_file(out.path() / "pipeline.json", "{");
  paths.spec = out.path() / "pipeline.json";
  paths.faults.reset();
  EXPECT_EQ(run_scenario(paths, 7, TransferMode::kSimulated, err), kExitUsage);
}

TEST(Scenario, InvalidSpecExitsOneWithoutRunning) {
  TempDir out("invalid");
  auto spec = read_text_file(source_path("demo/pipeline.json"));
  spec.replace(spec.find("\"gpu_count\": 1"), 14, "\"gpu_count\": 9");
  write_text_file(out.path() / "pipeline.json", spec);
  std::ostringstream err;
  ScenarioPaths paths{out.path() / "pipeline.json", source_path("demo/cluster.json"), std::nullopt, out.path() / "out"};
  EXPECT_EQ(run_scenario(paths, 7, TransferMode::kSimulated, err), kExitUsage);
  EXPECT_NE(err.str().find("infeasible"), std::string::npos) << err.str();
}

TEST(Scenario, IntegrationModeMatchesSimulatedData) {
  TempDir sim("sim");
  TempDir http("http");
  auto spec = read_text_file(source_path("demo/pipeline.json"));
  spec.replace(spec.find("\"files\": 1000"), 13, "\"files\": 100");
  write_text_file(sim.path() / "pipeline.json", spec);
  std::ostringstream err;
  ScenarioPaths a{sim.path() / "pipeline.json", source_path("demo/cluster.json"), std::nullopt, sim.path() / "out"};
  ScenarioPaths b{sim.path() / "pipeline.json", source_path("demo/cluster.json"), std::nullopt, http.path() / "out"};
  ASSERT_EQ(run_scenario(a, 3, TransferMode::kSimulated, err), kExitOk) << err.str();
  ASSERT_EQ(run_scenario(b, 3, TransferMode::kLoopbackHttp, err), kExitOk) << err.str();
  auto ra = RunReport::from_json(read_text_file(a.out / "report.json"));
  auto rb = RunReport::from_json(read_text_file(b.out / "report.json"));
  EXPECT_EQ(ra.data_digest, rb.data_digest);
}

TEST(Cli, RepeatedRunsWriteIdenticalReports) {
  TempDir dir("cli");
  std::string bin = MINIORCH_CLI_PATH;
  std::string common = " --spec " + source_path("demo/pipeline.json").string() + " --cluster " +
                       source_path("demo/cluster.json").string() + " --seed 7";
  for (const char* name : {"a", "b"}) {
    std::string cmd = bin + " run" + common + " --out " + (dir.path() / name).string() + " > /dev/null";
    ASSERT_EQ(std::system(cmd.c_str()), 0) << cmd;
  }
  EXPECT_EQ(read_text_file(dir.path() / "a" / "report.json"), read_text_file(dir.path() / "b" / "report.json"));
  EXPECT_EQ(read_text_file(dir.path() / "a" / "metrics.jsonl"), read_text_file(dir.path() / "b" / "metrics.jsonl"));
  std::string bad = bin + " run --spec /nonexistent --cluster /nonexistent > /dev/null 2>&1";
  int status = std::system(bad.c_str());
  EXPECT_EQ(WEXITSTATUS(status), kExitUsage);
}

}  // namespace
}  // namespace miniorch

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

#include "miniorch/harness.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

namespace miniorch {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
}

std::string seed_source(const CatalogConfig& config, const std::filesystem::path& dir, bool write_sections) {
  SourceCatalog catalog = SourceCatalog::generate(config);
  std::string manifest = catalog.manifest_json();
  write_text_file(dir / "manifest.json", manifest);
  if (write_sections) {
    for (const auto& obj : catalog.objects()) {
      for (const auto& [section, size] : obj.sections) {
        write_text_file(dir / "files" / obj.url / section, to_string(catalog.section_content(obj.url, section)));
      }
    }
  }
  return manifest;
}

int run_scenario(const ScenarioPaths& paths, std::uint64_t seed, TransferMode mode, std::ostream& err) {
  PipelineSpec spec;
  ClusterFixture cluster;
  RunOptions options;
  options.seed = seed;
  options.mode = mode;
  try {
    spec = parse_spec(read_text_file(paths.spec));
    cluster = ClusterFixture::parse(read_text_file(paths.cluster));
    if (paths.faults) options.faults = FaultSchedule::parse(read_text_file(*paths.faults));
    options.faults.validate(cluster);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  bool invalid = false;
  for (const auto& issue : validate(spec, cluster)) {
    invalid = invalid || issue.severity == Severity::kError;
    err << (issue.severity == Severity::kError ? "error" : "warning") << ": "
        << (issue.step.empty() ? std::string() : issue.step + ": ") << issue.message << "\n";
  }
  if (invalid) return kExitUsage;

  auto store = ObjectStore::in_memory();
  RunArtifacts artifacts;
  RunReport report;
  int code = kExitOk;
  try {
    report = run(spec, cluster, options, store.get(), &artifacts);
  } catch (const RunFailed& e) {
    err << "run failed: " << e.step() << ": " << e.reason() << "\n";
    report = e.report();
    code = kExitRunFailed;
  }
  write_text_file(paths.out / "report.json", report.to_json());
  write_text_file(paths.out / "metrics.jsonl", artifacts.metrics_jsonl);
  write_text_file(paths.out / "table.txt", report.table);
  export_state(*store, artifacts, paths.out / "state");
  return code;
}

}  // namespace miniorch

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

// Command-line front door: seed catalogs, validate and run pipelines or single
// steps, re-render reports, and serve a catalog over loopback HTTP.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "miniorch/harness.hpp"
#include "miniorch/pipeline.hpp"

namespace {

using namespace miniorch;

struct Options {
  std::string spec;
  std::string cluster;
  std::string faults;
  std::string out = "out";
  std::string step;
  std::string report;
  std::string manifest;
  std::string host = "127.0.0.1";
  std::uint64_t seed = 0;
  std::string mode = "sim";
  std::int64_t files = -1;
  int port = 8080;
};

TransferMode parse_mode(const std::string& mode) {
  return mode == "integration" ? TransferMode::kLoopbackHttp : TransferMode::kSimulated;
}

CatalogConfig catalog_for(const Options& o) {
  CatalogConfig config;
  if (!o.spec.empty()) {
    config = effective_catalog(parse_spec(read_text_file(o.spec)), o.seed);
  } else {
    config.seed = SeedStreams(o.seed).seed_for("catalog");
  }
  if (o.files >= 0) config.files = o.files;
  return config;
}

int cmd_seed(const Options& o) {
  CatalogConfig config = catalog_for(o);
  seed_source(config, o.out, o.mode == "integration");
  SourceCatalog catalog = SourceCatalog::generate(config);
  std::cout << "files " << catalog.objects().size() << "\n"
            << "total_bytes " << catalog.total_bytes() << "\n"
            << "subset_bytes " << catalog.subset_bytes() << "\n"
            << "manifest " << (std::filesystem::path(o.out) / "manifest.json").string() << "\n";
  return kExitOk;
}

int cmd_validate(const Options& o) {
  PipelineSpec spec = parse_spec(read_text_file(o.spec));
  ClusterFixture cluster = ClusterFixture::parse(read_text_file(o.cluster));
  if (!o.faults.empty()) FaultSchedule::parse(read_text_file(o.faults)).validate(cluster);
  bool errors = false;
  for (const auto& issue : validate(spec, cluster)) {
    errors = errors || issue.severity == Severity::kError;
    std::cout << (issue.severity == Severity::kError ? "error" : "warning") << "\t"
              << (issue.step.empty() ? "-" : issue.step) << "\t" << issue.message << "\n";
  }
  if (!errors) std::cout << "valid\n";
  return errors ? kExitUsage : kExitOk;
}

int cmd_run(const Options& o) {
  ScenarioPaths paths{o.spec, o.cluster, std::nullopt, o.out};
  if (!o.faults.empty()) paths.faults = o.faults;
  int code = run_scenario(paths, o.seed, parse_mode(o.mode), std::cerr);
  if (code != kExitUsage) std::cout << read_text_file(std::filesystem::path(o.out) / "table.txt");
  return code;
}

int cmd_run_step(const Options& o) {
  PipelineSpec spec = parse_spec(read_text_file(o.spec));
  ClusterFixture cluster = ClusterFixture::parse(read_text_file(o.cluster));
  RunOptions options;
  options.seed = o.seed;
  options.mode = parse_mode(o.mode);
  if (!o.faults.empty()) options.faults = FaultSchedule::parse(read_text_file(o.faults));
  try {
    StepSummary summary = run_step(spec, cluster, o.step, o.out, options);
    std::cout << render_table({summary}, spec.seconds_per_tick);
  } catch (const RunFailed& e) {
    std::cerr << "run failed: " << e.step() << ": " << e.reason() << "\n";
    return kExitRunFailed;
  }
  return kExitOk;
}

int cmd_report(const Options& o) {
  RunReport report = RunReport::from_json(read_text_file(o.report));
  if (!report.steps.empty()) std::cout << render_table(report.steps, report.seconds_per_tick);
  std::cout << "status " << (report.ok ? "ok" : "failed") << "\n"
            << "data_digest " << report.data_digest << "\n"
            << "digest " << report.digest << "\n";
  if (!report.ok) std::cout << "failure " << report.failed_step << ": " << report.failure_reason << "\n";
  return kExitOk;
}

int cmd_serve(const Options& o) {
  SourceCatalog catalog = !o.manifest.empty() ? SourceCatalog::from_manifest(read_text_file(o.manifest))
                                              : SourceCatalog::generate(catalog_for(o));
  CatalogServer server(catalog);
  std::cerr << "serving " << catalog.objects().size() << " files on " << o.host << ":" << o.port << "\n";
  server.listen_blocking(o.host, o.port);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"miniorch: deterministic mini-orchestrator and cluster simulator"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* cmd) {
    cmd->add_option("--seed", o.seed, "Run seed");
    cmd->add_option("--mode", o.mode, "Transfer mode")->check(CLI::IsMember({"sim", "integration"}));
  };

  auto* seed = app.add_subcommand("seed", "Write a synthetic source catalog manifest");
  seed->add_option("--spec", o.spec, "Take catalog settings from this pipeline spec")->check(CLI::ExistingFile);
  seed->add_option("--files", o.files, "Override the file count");
  seed->add_option("--out", o.out, "Output directory");
  add_common(seed);

  auto* validate_cmd = app.add_subcommand("validate", "Check a pipeline spec against a cluster");
  validate_cmd->add_option("--spec", o.spec)->required()->check(CLI::ExistingFile);
  validate_cmd->add_option("--cluster", o.cluster)->required()->check(CLI::ExistingFile);
  validate_cmd->add_option("--faults", o.faults)->check(CLI::ExistingFile);

  auto* run_cmd = app.add_subcommand("run", "Run every step and write report, metrics and state");
  run_cmd->add_option("--spec", o.spec)->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--cluster", o.cluster)->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--faults", o.faults)->check(CLI::ExistingFile);
  run_cmd->add_option("--out", o.out, "Output directory");
  add_common(run_cmd);

  auto* step_cmd = app.add_subcommand("run-step", "Run one step against a state directory");
  step_cmd->add_option("--spec", o.spec)->required()->check(CLI::ExistingFile);
  step_cmd->add_option("--cluster", o.cluster)->required()->check(CLI::ExistingFile);
  step_cmd->add_option("--faults", o.faults)->check(CLI::ExistingFile);
  step_cmd->add_option("--step", o.step)->required();
  step_cmd->add_option("--out", o.out, "State directory (read and written)");
  add_common(step_cmd);

  auto* report_cmd = app.add_subcommand("report", "Re-render the table from a run report");
  report_cmd->add_option("report", o.report, "report.json")->required()->check(CLI::ExistingFile);

  auto* serve_cmd = app.add_subcommand("serve-catalog", "Serve a catalog over HTTP");
  serve_cmd->add_option("--manifest", o.manifest)->check(CLI::ExistingFile);
  serve_cmd->add_option("--spec", o.spec)->check(CLI::ExistingFile);
  serve_cmd->add_option("--host", o.host);
  serve_cmd->add_option("--port", o.port);
  add_common(serve_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*seed) return cmd_seed(o);
    if (*validate_cmd) return cmd_validate(o);
    if (*run_cmd) return cmd_run(o);
    if (*step_cmd) return cmd_run_step(o);
    if (*report_cmd) return cmd_report(o);
    if (*serve_cmd) return cmd_serve(o);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

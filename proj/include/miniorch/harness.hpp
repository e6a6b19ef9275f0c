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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "miniorch/pipeline.hpp"
#include "miniorch/transfer.hpp"

namespace miniorch {

/// Writes <dir>/manifest.json and, with `write_sections`, one file per
/// (url, section) under <dir>/files/<url>/<section>. Returns the manifest.
std::string seed_source(const CatalogConfig& config, const std::filesystem::path& dir, bool write_sections = false);

struct ScenarioPaths {
  std::filesystem::path spec;
  std::filesystem::path cluster;
  std::optional<std::filesystem::path> faults;
  std::filesystem::path out;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRunFailed = 2;

/// Loads, validates and runs one scenario. Writes <out>/report.json,
/// <out>/metrics.jsonl, <out>/table.txt and <out>/state/. Returns 0 on
/// success, 2 on RunFailed (partial report still written), 1 on usage,
/// parse or validation errors. Diagnostics go to `err`.
int run_scenario(const ScenarioPaths& paths, std::uint64_t seed, TransferMode mode, std::ostream& err);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace miniorch

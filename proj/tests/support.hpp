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
#include <map>
#include <random>
#include <string>

#include "miniorch/cluster_state.hpp"
#include "miniorch/harness.hpp"

namespace miniorch::testing {

inline std::filesystem::path source_path(const std::string& relative) {
  return std::filesystem::path(MINIORCH_SOURCE_DIR) / relative;
}

inline Node make_node(std::string name, std::int64_t cpu, std::int64_t gpu, std::int64_t mem,
                      std::map<std::string, std::string> labels = {}) {
  Node n;
  n.name = std::move(name);
  n.capacity = {cpu, gpu, mem};
  n.labels = std::move(labels);
  return n;
}

inline PodSpec make_pod(std::string name, std::string ns, ResourceVector requests, TaskRef task = "noop") {
  PodSpec p;
  p.name = std::move(name);
  p.namespace_name = std::move(ns);
  p.requests = requests;
  p.task = std::move(task);
  return p;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("miniorch-" + tag + "-" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace miniorch::testing

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
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "miniorch/common.hpp"

namespace miniorch {

struct StoredObject {
  std::string namespace_name;
  std::string bucket;
  std::string key;
  std::int64_t size_bytes = 0;
  std::string etag;  // sha256 hex of the content
  Tick created_tick = 0;
};

/// Shared blob store visible to every pod. Buckets are namespace-scoped; keys
/// may contain '/'. Writes replace whole objects atomically (last writer
/// wins), so readers never observe a torn object.
///
/// Two backends sit behind the same interface: in-memory, and on-disk with
/// layout <root>/<namespace>/<bucket>/<key>.
class ObjectStore {
 public:
  static std::unique_ptr<ObjectStore> in_memory();
  /// Opens (creating if needed) a directory-backed store and indexes any
  /// objects already present.
  static std::unique_ptr<ObjectStore> on_disk(const std::filesystem::path& root);

  ~ObjectStore();
  ObjectStore(const ObjectStore&) = delete;
  ObjectStore& operator=(const ObjectStore&) = delete;

  /// Idempotent.
  void create_bucket(std::string_view namespace_name, std::string_view bucket);
  bool has_bucket(std::string_view caller_namespace, std::string_view bucket) const;
  std::vector<std::string> buckets(std::string_view namespace_name) const;

  std::string put(std::string_view caller_namespace, std::string_view bucket, std::string_view key, Bytes content,
                  Tick now = 0);
  Bytes get(std::string_view caller_namespace, std::string_view bucket, std::string_view key) const;
  std::optional<StoredObject> stat(std::string_view caller_namespace, std::string_view bucket,
                                   std::string_view key) const;
  /// Keys starting with `prefix`, lexicographic.
  std::vector<std::string> list(std::string_view caller_namespace, std::string_view bucket,
                                std::string_view prefix = {}) const;

  /// Every object, ordered by (namespace, bucket, key).
  std::vector<StoredObject> inventory() const;

  /// Copies every object (with its bucket) into `dest`.
  void copy_to(ObjectStore& dest) const;

  class Backend;

 private:
  explicit ObjectStore(std::unique_ptr<Backend> backend);
  using Index = std::map<std::tuple<std::string, std::string, std::string>, StoredObject, std::less<>>;

  mutable std::mutex mu_;
  std::unique_ptr<Backend> backend_;
  std::map<QualifiedName, bool> buckets_;
  Index index_;
};

}  // namespace miniorch

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

#include "miniorch/object_store.hpp"

#include <fstream>
#include <iterator>
#include <memory>

#include "miniorch/digest.hpp"

namespace fs = std::filesystem;

namespace miniorch {

class ObjectStore::Backend {
 public:
  virtual ~Backend() = default;
  virtual void make_bucket(const QualifiedName& bucket) = 0;
  virtual void write(const QualifiedName& bucket, const std::string& key, Bytes content) = 0;
  virtual Bytes read(const QualifiedName& bucket, const std::string& key) const = 0;
};

namespace {

class MemoryBackend final : public ObjectStore::Backend {
 public:
  void make_bucket(const QualifiedName&) override {}
  void write(const QualifiedName& bucket, const std::string& key, Bytes content) override {
    blobs_[{bucket, key}] = std::make_shared<const Bytes>(std::move(content));
  }
  Bytes read(const QualifiedName& bucket, const std::string& key) const override {
    return *blobs_.at({bucket, key});
  }

 private:
  std::map<std::pair<QualifiedName, std::string>, std::shared_ptr<const Bytes>> blobs_;
};

class DiskBackend final : public ObjectStore::Backend {
 public:
  explicit DiskBackend(fs::path root) : root_(std::move(root)) {}

  fs::path bucket_dir(const QualifiedName& bucket) const { return root_ / bucket.namespace_name / bucket.local; }

  void make_bucket(const QualifiedName& bucket) override {
    std::error_code ec;
    fs::create_directories(bucket_dir(bucket), ec);
    if (ec) throw Error(ErrorCode::kIoError, bucket_dir(bucket).string() + ": " + ec.message());
  }

  void write(const QualifiedName& bucket, const std::string& key, Bytes content) override {
    fs::path target = bucket_dir(bucket) / key;
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) throw Error(ErrorCode::kIoError, target.parent_path().string() + ": " + ec.message());
    // Write-then-rename keeps replacement atomic for concurrent readers.
    fs::path tmp = target;
    tmp += ".tmp-" + std::to_string(++tmp_counter_);
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(content.data()), static_cast<std::streamsize>(content.size()));
      if (!out) throw Error(ErrorCode::kIoError, "write " + tmp.string());
    }
    fs::rename(tmp, target, ec);
    if (ec) throw Error(ErrorCode::kIoError, "rename " + target.string() + ": " + ec.message());
  }

  Bytes read(const QualifiedName& bucket, const std::string& key) const override {
    fs::path path = bucket_dir(bucket) / key;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIoError, "read " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::uint64_t tmp_counter_ = 0;
};

void check_key(std::string_view key) {
  if (key.empty() || key.front() == '/' || key.find("..") != std::string_view::npos || key.find('\\') != std::string_view::npos) {
    throw Error(ErrorCode::kInvalidArgument, "invalid object key '" + std::string(key) + "'");
  }
}

void check_name(std::string_view name, std::string_view what) {
  if (name.empty() || name.find('/') != std::string_view::npos || name == "." || name == "..") {
    throw Error(ErrorCode::kInvalidArgument, "invalid " + std::string(what) + " '" + std::string(name) + "'");
  }
}

}  // namespace

ObjectStore::ObjectStore(std::unique_ptr<Backend> backend) : backend_(std::move(backend)) {}
ObjectStore::~ObjectStore() = default;

std::unique_ptr<ObjectStore> ObjectStore::in_memory() {
  return std::unique_ptr<ObjectStore>(new ObjectStore(std::make_unique<MemoryBackend>()));
}

std::unique_ptr<ObjectStore> ObjectStore::on_disk(const fs::path& root) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(ErrorCode::kIoError, root.string() + ": " + ec.message());
  auto backend = std::make_unique<DiskBackend>(root);
  auto* disk = backend.get();
  std::unique_ptr<ObjectStore> store(new ObjectStore(std::move(backend)));
  // Index what is already there: <root>/<ns>/<bucket>/<key...>
  for (const auto& ns_entry : fs::directory_iterator(root)) {
    if (!ns_entry.is_directory()) continue;
    for (const auto& bucket_entry : fs::directory_iterator(ns_entry.path())) {
      if (!bucket_entry.is_directory()) continue;
      QualifiedName bucket{ns_entry.path().filename().string(), bucket_entry.path().filename().string()};
      store->buckets_[bucket] = true;
      for (const auto& file : fs::recursive_directory_iterator(bucket_entry.path())) {
        if (!file.is_regular_file()) continue;
        std::string key = fs::relative(file.path(), bucket_entry.path()).generic_string();
        if (key.find(".tmp-") != std::string::npos) continue;
        Bytes content = disk->read(bucket, key);
        StoredObject obj{bucket.namespace_name, bucket.local, key, static_cast<std::int64_t>(content.size()),
                         sha256_hex(content), 0};
        store->index_[{bucket.namespace_name, bucket.local, key}] = std::move(obj);
      }
    }
  }
  return store;
}

void ObjectStore::create_bucket(std::string_view namespace_name, std::string_view bucket) {
  check_name(namespace_name, "namespace");
  check_name(bucket, "bucket");
  std::lock_guard lock(mu_);
  QualifiedName name{std::string(namespace_name), std::string(bucket)};
  if (buckets_.contains(name)) return;
  backend_->make_bucket(name);
  buckets_[name] = true;
}

bool ObjectStore::has_bucket(std::string_view caller_namespace, std::string_view bucket) const {
  std::lock_guard lock(mu_);
  return buckets_.contains(qualify(caller_namespace, bucket));
}

std::vector<std::string> ObjectStore::buckets(std::string_view namespace_name) const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [name, _] : buckets_) {
    if (name.namespace_name == namespace_name) out.push_back(name.local);
  }
  return out;
}

std::string ObjectStore::put(std::string_view caller_namespace, std::string_view bucket, std::string_view key,
                             Bytes content, Tick now) {
  check_key(key);
  auto name = qualify(caller_namespace, bucket);
  // Hash outside the lock; the content is private to this call until stored.
  std::string etag = sha256_hex(content);
  auto size = static_cast<std::int64_t>(content.size());
  std::lock_guard lock(mu_);
  if (!buckets_.contains(name)) throw Error(ErrorCode::kUnknownBucket, name.str());
  backend_->write(name, std::string(key), std::move(content));
  index_[{name.namespace_name, name.local, std::string(key)}] =
      StoredObject{name.namespace_name, name.local, std::string(key), size, etag, now};
  return etag;
}

Bytes ObjectStore::get(std::string_view caller_namespace, std::string_view bucket, std::string_view key) const {
  auto name = qualify(caller_namespace, bucket);
  std::lock_guard lock(mu_);
  if (!buckets_.contains(name)) throw Error(ErrorCode::kUnknownBucket, name.str());
  if (!index_.contains(std::make_tuple(name.namespace_name, name.local, std::string(key)))) {
    throw Error(ErrorCode::kNotFound, name.str() + "/" + std::string(key));
  }
  return backend_->read(name, std::string(key));
}

std::optional<StoredObject> ObjectStore::stat(std::string_view caller_namespace, std::string_view bucket,
                                              std::string_view key) const {
  auto name = qualify(caller_namespace, bucket);
  std::lock_guard lock(mu_);
  auto it = index_.find(std::make_tuple(name.namespace_name, name.local, std::string(key)));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> ObjectStore::list(std::string_view caller_namespace, std::string_view bucket,
                                           std::string_view prefix) const {
  auto name = qualify(caller_namespace, bucket);
  std::lock_guard lock(mu_);
  if (!buckets_.contains(name)) throw Error(ErrorCode::kUnknownBucket, name.str());
  std::vector<std::string> keys;
  auto lo = index_.lower_bound(std::make_tuple(name.namespace_name, name.local, std::string(prefix)));
  for (auto it = lo; it != index_.end(); ++it) {
    const auto& [ns, b, key] = it->first;
    if (ns != name.namespace_name || b != name.local || !key.starts_with(prefix)) break;
    keys.push_back(key);
  }
  return keys;
}

std::vector<StoredObject> ObjectStore::inventory() const {
  std::lock_guard lock(mu_);
  std::vector<StoredObject> out;
  out.reserve(index_.size());
  for (const auto& [k, obj] : index_) out.push_back(obj);
  return out;
}

void ObjectStore::copy_to(ObjectStore& dest) const {
  std::vector<QualifiedName> bucket_names;
  std::vector<StoredObject> objects;
  {
    std::lock_guard lock(mu_);
    for (const auto& [name, _] : buckets_) bucket_names.push_back(name);
    for (const auto& [k, obj] : index_) objects.push_back(obj);
  }
  for (const auto& b : bucket_names) dest.create_bucket(b.namespace_name, b.local);
  for (const auto& obj : objects) {
    dest.put(obj.namespace_name, obj.bucket, obj.key, get(obj.namespace_name, obj.bucket, obj.key), obj.created_tick);
  }
}

}  // namespace miniorch

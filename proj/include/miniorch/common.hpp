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

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace miniorch {

/// Discrete simulation time. One tick is one simulated second by default.
using Tick = std::int64_t;

using Bytes = std::vector<std::uint8_t>;

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }
inline std::string to_string(const Bytes& b) { return std::string(b.begin(), b.end()); }

enum class ErrorCode {
  kDuplicateName,
  kUnknownNode,
  kUnknownNamespace,
  kUnknownPod,
  kQuotaExceeded,
  kInvalidTransition,
  kInvariantViolation,
  kUnknownQueue,
  kUnknownMessage,
  kStaleLease,
  kUnknownSet,
  kUnknownBucket,
  kNotFound,
  kUnknownSource,
  kUnknownSection,
  kTransferFault,
  kBatchFailed,
  kDuplicateMember,
  kEmptyBatch,
  kMalformedContainer,
  kUnknownMetric,
  kEmptyWindow,
  kUnknownStep,
  kParseError,
  kValidationError,
  kMissingInput,
  kRunFailed,
  kIoError,
  kInvalidArgument,
};

std::string_view error_code_name(ErrorCode code);

/// Every failure surfaced by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed input text. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(int line, const std::string& reason)
      : Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": " + reason),
        line_(line),
        reason_(reason) {}

  int line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  int line_;
  std::string reason_;
};

// Stable (platform independent) hashing used for seeding and content
// generation. Not cryptographic; see digest.hpp for etags.
constexpr std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Named-stream splitter: every module derives its own seed from the run seed
/// and a stable stream name, so adding draws in one stream never shifts
/// another.
class SeedStreams {
 public:
  explicit SeedStreams(std::uint64_t root) : root_(root) {}

  std::uint64_t root() const noexcept { return root_; }
  std::uint64_t seed_for(std::string_view stream) const {
    return splitmix64(root_ ^ fnv1a64(stream));
  }
  SeedStreams child(std::string_view stream) const { return SeedStreams(seed_for(stream)); }

 private:
  std::uint64_t root_;
};

/// "namespace/local". Unqualified names resolve inside the caller's
/// namespace; reaching into another namespace needs the qualified form.
struct QualifiedName {
  std::string namespace_name;
  std::string local;

  std::string str() const { return namespace_name + "/" + local; }
  friend auto operator<=>(const QualifiedName&, const QualifiedName&) = default;
};

QualifiedName qualify(std::string_view caller_namespace, std::string_view name);

/// Ceil division for non-negative integers.
constexpr std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace miniorch

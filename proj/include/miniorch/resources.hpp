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
#include <optional>
#include <string>
#include <string_view>

namespace miniorch {

/// CPU / GPU / memory quantity. Integers throughout: millicores and bytes.
struct ResourceVector {
  std::int64_t cpu_millicores = 0;
  std::int64_t gpu_count = 0;
  std::int64_t memory_bytes = 0;

  constexpr ResourceVector& operator+=(const ResourceVector& o) {
    cpu_millicores += o.cpu_millicores;
    gpu_count += o.gpu_count;
    memory_bytes += o.memory_bytes;
    return *this;
  }
  constexpr ResourceVector& operator-=(const ResourceVector& o) {
    cpu_millicores -= o.cpu_millicores;
    gpu_count -= o.gpu_count;
    memory_bytes -= o.memory_bytes;
    return *this;
  }
  friend constexpr ResourceVector operator+(ResourceVector a, const ResourceVector& b) { return a += b; }
  friend constexpr ResourceVector operator-(ResourceVector a, const ResourceVector& b) { return a -= b; }
  friend constexpr bool operator==(const ResourceVector&, const ResourceVector&) = default;

  constexpr bool is_zero() const { return cpu_millicores == 0 && gpu_count == 0 && memory_bytes == 0; }
  constexpr bool non_negative() const { return cpu_millicores >= 0 && gpu_count >= 0 && memory_bytes >= 0; }

  /// Componentwise <=.
  constexpr bool fits_within(const ResourceVector& bound) const {
    return cpu_millicores <= bound.cpu_millicores && gpu_count <= bound.gpu_count &&
           memory_bytes <= bound.memory_bytes;
  }

  /// Name of the first component exceeding `bound` ("cpu", "gpu", "memory").
  std::optional<std::string_view> first_exceeding(const ResourceVector& bound) const {
    if (cpu_millicores > bound.cpu_millicores) return "cpu";
    if (gpu_count > bound.gpu_count) return "gpu";
    if (memory_bytes > bound.memory_bytes) return "memory";
    return std::nullopt;
  }

  std::string to_string() const {
    return "{cpu " + std::to_string(cpu_millicores) + "m, gpu " + std::to_string(gpu_count) +
           ", mem " + std::to_string(memory_bytes) + "B}";
  }
};

inline constexpr std::int64_t kGB = 1000LL * 1000 * 1000;
inline constexpr std::int64_t kMB = 1000LL * 1000;

}  // namespace miniorch

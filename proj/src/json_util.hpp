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

// Strict JSON helpers shared by the fixture and spec loaders. Unknown keys
// and wrong types are ParseErrors carrying a best-effort line number.

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "miniorch/common.hpp"
#include "miniorch/resources.hpp"

namespace miniorch::detail {

using nlohmann::json;

inline int line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + offset, '\n'));
}

/// Line of the first occurrence of `"key"` in the text, 0 if absent.
inline int line_of_key(std::string_view text, std::string_view key) {
  std::string needle = "\"" + std::string(key) + "\"";
  auto pos = text.find(needle);
  return pos == std::string_view::npos ? 0 : line_of_offset(text, pos);
}

inline json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
  }
}

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  void expect_object(const json& j, std::string_view context) const {
    if (!j.is_object()) throw ParseError(0, std::string(context) + " must be an object");
  }

  void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                  std::string_view context) const {
    expect_object(obj, context);
    for (const auto& [key, _] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw ParseError(line_of_key(text_, key),
                         "unknown field \"" + key + "\" in " + std::string(context));
      }
    }
  }

  const json& require(const json& obj, std::string_view key, std::string_view context) const {
    auto it = obj.find(key);
    if (it == obj.end()) {
      throw ParseError(0, "missing field \"" + std::string(key) + "\" in " + std::string(context));
    }
    return *it;
  }

  std::int64_t as_int(const json& v, std::string_view key) const {
    if (!v.is_number_integer()) throw ParseError(line_of_key(text_, key), "\"" + std::string(key) + "\" must be an integer");
    return v.get<std::int64_t>();
  }
  double as_number(const json& v, std::string_view key) const {
    if (!v.is_number()) throw ParseError(line_of_key(text_, key), "\"" + std::string(key) + "\" must be a number");
    return v.get<double>();
  }
  std::string as_string(const json& v, std::string_view key) const {
    if (!v.is_string()) throw ParseError(line_of_key(text_, key), "\"" + std::string(key) + "\" must be a string");
    return v.get<std::string>();
  }

  std::int64_t int_or(const json& obj, std::string_view key, std::int64_t fallback) const {
    auto it = obj.find(key);
    return it == obj.end() ? fallback : as_int(*it, key);
  }
  double number_or(const json& obj, std::string_view key, double fallback) const {
    auto it = obj.find(key);
    return it == obj.end() ? fallback : as_number(*it, key);
  }
  std::string string_or(const json& obj, std::string_view key, std::string fallback) const {
    auto it = obj.find(key);
    return it == obj.end() ? fallback : as_string(*it, key);
  }
  std::int64_t require_int(const json& obj, std::string_view key, std::string_view context) const {
    return as_int(require(obj, key, context), key);
  }
  std::string require_string(const json& obj, std::string_view key, std::string_view context) const {
    return as_string(require(obj, key, context), key);
  }

  int line_of(std::string_view key) const { return line_of_key(text_, key); }

 private:
  std::string_view text_;
};

inline ResourceVector parse_resources(const Reader& r, const json& obj, std::string_view context) {
  r.check_keys(obj, {"cpu_millicores", "gpu_count", "memory_bytes"}, context);
  return {r.int_or(obj, "cpu_millicores", 0), r.int_or(obj, "gpu_count", 0), r.int_or(obj, "memory_bytes", 0)};
}

}  // namespace miniorch::detail

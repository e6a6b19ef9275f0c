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

#include "miniorch/common.hpp"

namespace miniorch {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDuplicateName: return "DuplicateName";
    case ErrorCode::kUnknownNode: return "UnknownNode";
    case ErrorCode::kUnknownNamespace: return "UnknownNamespace";
    case ErrorCode::kUnknownPod: return "UnknownPod";
    case ErrorCode::kQuotaExceeded: return "QuotaExceeded";
    case ErrorCode::kInvalidTransition: return "InvalidTransition";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
    case ErrorCode::kUnknownQueue: return "UnknownQueue";
    case ErrorCode::kUnknownMessage: return "UnknownMessage";
    case ErrorCode::kStaleLease: return "StaleLease";
    case ErrorCode::kUnknownSet: return "UnknownSet";
    case ErrorCode::kUnknownBucket: return "UnknownBucket";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kUnknownSource: return "UnknownSource";
    case ErrorCode::kUnknownSection: return "UnknownSection";
    case ErrorCode::kTransferFault: return "TransferFault";
    case ErrorCode::kBatchFailed: return "BatchFailed";
    case ErrorCode::kDuplicateMember: return "DuplicateMember";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kMalformedContainer: return "MalformedContainer";
    case ErrorCode::kUnknownMetric: return "UnknownMetric";
    case ErrorCode::kEmptyWindow: return "EmptyWindow";
    case ErrorCode::kUnknownStep: return "UnknownStep";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kValidationError: return "ValidationError";
    case ErrorCode::kMissingInput: return "MissingInput";
    case ErrorCode::kRunFailed: return "RunFailed";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

QualifiedName qualify(std::string_view caller_namespace, std::string_view name) {
  auto slash = name.find('/');
  if (slash == std::string_view::npos) return {std::string(caller_namespace), std::string(name)};
  return {std::string(name.substr(0, slash)), std::string(name.substr(slash + 1))};
}

}  // namespace miniorch

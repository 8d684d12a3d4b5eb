// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace lesa {

enum class ErrorCode {
  kValidation,
  kIo,
  kFormat,
  kUnsupportedVersion,
  kLength,
  kIntegration,
  kNumeric,
  kState,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kUnsupportedVersion: return "unsupported_version";
    case ErrorCode::kLength: return "length";
    case ErrorCode::kIntegration: return "integration";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kState: return "state";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

template <typename... Args>
[[noreturn]] void fail(ErrorCode code, Args&&... args) {
  std::ostringstream os;
  (os << ... << std::forward<Args>(args));
  throw Error(code, os.str());
}

template <typename... Args>
void require(bool condition, Args&&... args) {
  if (!condition) fail(ErrorCode::kValidation, std::forward<Args>(args)...);
}

}  // namespace detail
}  // namespace lesa

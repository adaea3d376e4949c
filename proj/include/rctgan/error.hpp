/*
 * Copyright 2026 The rctgan Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace rctgan {

enum class ErrorCode {
  kInvalidArgument = 1,
  kUnknownReference,
  kCyclicSchema,
  kDuplicateName,
  kUnknownTable,
  kMissingFile,
  kHeaderMismatch,
  kParseError,
  kIoError,
  kDanglingForeignKey,
  kIntegrityViolation,
  kWidthMismatch,
  kMissingAncestorRow,
  kDegenerateColumn,
  kDimensionMismatch,
  kGraphNotRecorded,
  kUnsupportedLayer,
  kEmptyTable,
  kNonFiniteLoss,
  kSingleClass,
  kCorruptFile,
  kVersionMismatch,
};

const char* error_code_name(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// C API and the CLI can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace rctgan

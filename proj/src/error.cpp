/* Copyright 2026 The mbrkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "mbrkit/error.hpp"

namespace mbrkit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kAlignment: return "alignment error";
    case ErrorCode::kEncoding: return "encoding error";
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kIncompleteCorpus: return "incomplete corpus";
    case ErrorCode::kParameter: return "parameter error";
    case ErrorCode::kValidation: return "validation error";
    case ErrorCode::kConfiguration: return "configuration error";
    case ErrorCode::kContract: return "contract error";
    case ErrorCode::kProtocol: return "protocol error";
    case ErrorCode::kStartup: return "startup error";
    case ErrorCode::kTimeout: return "timeout error";
    case ErrorCode::kTransport: return "transport error";
    case ErrorCode::kHook: return "hook error";
    case ErrorCode::kIo: return "i/o error";
  }
  return "error";
}

int Error::exit_code() const noexcept {
  switch (code_) {
    case ErrorCode::kTimeout:
    case ErrorCode::kTransport:
    case ErrorCode::kHook:
    case ErrorCode::kIo:
    case ErrorCode::kStartup:
    case ErrorCode::kProtocol:
    case ErrorCode::kContract:
      return 2;
    default:
      return 1;
  }
}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, std::string(to_string(code)) + ": " + message);
}

}  // namespace mbrkit

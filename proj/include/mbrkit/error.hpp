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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mbrkit {

enum class ErrorCode {
  kAlignment,
  kEncoding,
  kFormat,
  kIncompleteCorpus,
  kParameter,
  kValidation,
  kConfiguration,
  kContract,
  kProtocol,
  kStartup,
  kTimeout,
  kTransport,
  kHook,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// All failures raised by the toolkit carry a code so that callers (the CLI in
/// particular) can map them onto exit statuses without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// 1 for validation/configuration problems, 2 for I/O, endpoint and hook
  /// failures.
  int exit_code() const noexcept;

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace mbrkit

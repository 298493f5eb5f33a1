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

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <sys/types.h>

namespace mbrkit {

/// Quotes an argument for /bin/sh.
std::string shell_quote(std::string_view arg);

struct CommandResult {
  int exit_code = 0;    // -signal when killed by a signal
  std::string output;   // interleaved stdout and stderr
};

/// Runs `command` through /bin/sh, waits for it, and captures its output.
CommandResult run_command(const std::string& command,
                          const std::optional<std::filesystem::path>& cwd = std::nullopt);

/// A child process whose stdin and stdout are pipes. stderr is inherited.
class ChildProcess {
 public:
  explicit ChildProcess(const std::string& command);
  ~ChildProcess();

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  /// Writes all bytes; throws a transport error if the pipe is broken.
  void write_all(std::string_view data);

  /// Returns the next line without its terminator, nullopt at end of stream.
  /// Throws a timeout error if nothing arrives before the deadline.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout);

  void close_stdin();
  void kill_now();

  /// Blocks until the child exits; returns its exit code (or -signal).
  int wait();

  pid_t pid() const { return pid_; }

 private:
  pid_t pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  std::string buffer_;
  bool eof_ = false;
  std::optional<int> status_;
};

}  // namespace mbrkit

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

#include "mbrkit/subprocess.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <mutex>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "mbrkit/error.hpp"

namespace mbrkit {

namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

std::string errno_text() { return std::strerror(errno); }

int decode_status(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return -WTERMSIG(status);
  return -1;
}

[[noreturn]] void exec_shell(const std::string& command) {
  execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
  _exit(127);
}

}  // namespace

std::string shell_quote(std::string_view arg) {
  std::string out = "'";
  for (char c : arg) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('\'');
  return out;
}

CommandResult run_command(const std::string& command,
                          const std::optional<std::filesystem::path>& cwd) {
  int out_pipe[2];
  if (pipe2(out_pipe, O_CLOEXEC) != 0) fail(ErrorCode::kIo, "pipe: " + errno_text());
  const pid_t pid = fork();
  if (pid < 0) fail(ErrorCode::kIo, "fork: " + errno_text());
  if (pid == 0) {
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(out_pipe[1], STDERR_FILENO);
    int devnull = open("/dev/null", O_RDONLY);
    if (devnull >= 0) dup2(devnull, STDIN_FILENO);
    if (cwd && chdir(cwd->c_str()) != 0) _exit(126);
    exec_shell(command);
  }
  close(out_pipe[1]);
  CommandResult result;
  char chunk[4096];
  while (true) {
    const ssize_t got = read(out_pipe[0], chunk, sizeof chunk);
    if (got > 0) {
      result.output.append(chunk, static_cast<std::size_t>(got));
    } else if (got == 0 || errno != EINTR) {
      break;
    }
  }
  close(out_pipe[0]);
  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  result.exit_code = decode_status(status);
  return result;
}

ChildProcess::ChildProcess(const std::string& command) {
  ignore_sigpipe();
  int in_pipe[2];
  int out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0 || pipe2(out_pipe, O_CLOEXEC) != 0) {
    fail(ErrorCode::kStartup, "pipe: " + errno_text());
  }
  pid_ = fork();
  if (pid_ < 0) fail(ErrorCode::kStartup, "fork: " + errno_text());
  if (pid_ == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    exec_shell(command);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  stdin_fd_ = in_pipe[1];
  stdout_fd_ = out_pipe[0];
}

ChildProcess::~ChildProcess() {
  close_stdin();
  if (!status_ && pid_ > 0) {
    // Give a well-behaved endpoint a moment to exit on EOF before killing it.
    for (int i = 0; i < 50 && !status_; ++i) {
      int status = 0;
      const pid_t done = waitpid(pid_, &status, WNOHANG);
      if (done == pid_) {
        status_ = decode_status(status);
        break;
      }
      usleep(10000);
    }
    if (!status_) {
      ::kill(pid_, SIGKILL);
      wait();
    }
  }
  if (stdout_fd_ >= 0) close(stdout_fd_);
}

void ChildProcess::write_all(std::string_view data) {
  if (stdin_fd_ < 0) fail(ErrorCode::kTransport, "endpoint input already closed");
  while (!data.empty()) {
    const ssize_t put = ::write(stdin_fd_, data.data(), data.size());
    if (put < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::kTransport, "write to endpoint failed: " + errno_text());
    }
    data.remove_prefix(static_cast<std::size_t>(put));
  }
}

std::optional<std::string> ChildProcess::read_line(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (eof_) {
      if (buffer_.empty()) return std::nullopt;
      std::string line = std::move(buffer_);
      buffer_.clear();
      return line;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) fail(ErrorCode::kTimeout, "no output from endpoint");
    pollfd pfd{stdout_fd_, POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::kTransport, "poll: " + errno_text());
    }
    if (ready == 0) continue;
    char chunk[8192];
    const ssize_t got = ::read(stdout_fd_, chunk, sizeof chunk);
    if (got < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::kTransport, "read from endpoint failed: " + errno_text());
    }
    if (got == 0) {
      eof_ = true;
    } else {
      buffer_.append(chunk, static_cast<std::size_t>(got));
    }
  }
}

void ChildProcess::close_stdin() {
  if (stdin_fd_ >= 0) {
    close(stdin_fd_);
    stdin_fd_ = -1;
  }
}

void ChildProcess::kill_now() {
  if (pid_ > 0 && !status_) ::kill(pid_, SIGKILL);
}

int ChildProcess::wait() {
  if (status_) return *status_;
  int status = 0;
  while (waitpid(pid_, &status, 0) < 0) {
    if (errno != EINTR) {
      status_ = -1;
      return -1;
    }
  }
  status_ = decode_status(status);
  return *status_;
}

}  // namespace mbrkit

/* Copyright 2026 The removal-eval Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace removal_eval {

enum class ErrorKind {
  kValidation,
  kDegenerateInput,
  kNotPsd,
  kNumerical,
  kFormat,
  kParse,
  kIo,
  kBackend,
  kProtocol,
  kGeneration,
  kUsage,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const { return kind_; }

  // Byte offset for container format errors, when known.
  std::optional<std::uint64_t> offset() const { return offset_; }

  static Error format_at(std::uint64_t offset, const std::string& message);

 private:
  ErrorKind kind_;
  std::optional<std::uint64_t> offset_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace removal_eval

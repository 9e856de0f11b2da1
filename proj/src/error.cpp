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

#include "removal_eval/error.hpp"

namespace removal_eval {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kDegenerateInput: return "degenerate input";
    case ErrorKind::kNotPsd: return "matrix not PSD";
    case ErrorKind::kNumerical: return "numerical failure";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kBackend: return "backend error";
    case ErrorKind::kProtocol: return "protocol error";
    case ErrorKind::kGeneration: return "generation error";
    case ErrorKind::kUsage: return "usage error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

Error Error::format_at(std::uint64_t offset, const std::string& message) {
  Error e(ErrorKind::kFormat, message + " (at byte offset " + std::to_string(offset) + ")");
  e.offset_ = offset;
  return e;
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace removal_eval

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

#include <ostream>
#include <string>
#include <vector>

#include "removal_eval/error.hpp"

namespace removal_eval::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitDataError = 1,      // some input items failed
  kExitEnvironment = 2,    // I/O, parse, validation and numerical failures
  kExitProtocol = 3,       // evaluation protocol violated
  kExitUsage = 64,         // bad flags
};

int exit_code_for(ErrorKind kind);

// Runs the command line (without the program name). Results go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace removal_eval::cli

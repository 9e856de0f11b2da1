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

#include <string>
#include <vector>

namespace removal_eval {

// Minimal comma-separated reader: no quoting, CR/LF tolerant, blank lines skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

// Raises a parse error if the header differs from `expected_header` or a row has the wrong
// number of fields.
CsvTable parse_csv(const std::string& text, const std::vector<std::string>& expected_header);

// Full-string numeric parse; raises a parse error naming `what` otherwise.
double parse_double(const std::string& field, const std::string& what);
long long parse_integer(const std::string& field, const std::string& what);

std::string read_text_file(const std::string& path);

}  // namespace removal_eval

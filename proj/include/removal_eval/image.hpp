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
#include <filesystem>
#include <string>
#include <vector>

namespace removal_eval {

// 8-bit image, row-major with interleaved channels (1 = gray, 3 = RGB).
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  ImageBuffer() = default;
  ImageBuffer(int width, int height, int channels, std::uint8_t fill = 0);

  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  // Throws kValidation if dimensions or data length are inconsistent.
  void validate() const;

  // Copy with one channel replicated into three; 3-channel images are returned unchanged.
  ImageBuffer to_rgb() const;

  bool operator==(const ImageBuffer&) const = default;
};

// PNG, 8-bit gray or RGB. Palette and 16-bit inputs are converted to 8-bit; alpha is dropped.
ImageBuffer read_png(const std::filesystem::path& path);

void write_png(const ImageBuffer& image, const std::filesystem::path& path);

}  // namespace removal_eval

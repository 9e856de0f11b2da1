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

#include "removal_eval/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "removal_eval/error.hpp"

namespace removal_eval {

ImageBuffer::ImageBuffer(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {
  validate();
}

void ImageBuffer::validate() const {
  if (width <= 0 || height <= 0) {
    fail(ErrorKind::kValidation, "image dimensions must be positive, got " +
                                     std::to_string(width) + "x" + std::to_string(height));
  }
  if (channels != 1 && channels != 3) {
    fail(ErrorKind::kValidation, "image must have 1 or 3 channels, got " + std::to_string(channels));
  }
  if (data.size() != pixel_count() * channels) {
    fail(ErrorKind::kValidation, "image data length " + std::to_string(data.size()) +
                                     " does not match " + std::to_string(width) + "x" +
                                     std::to_string(height) + "x" + std::to_string(channels));
  }
}

ImageBuffer ImageBuffer::to_rgb() const {
  validate();
  if (channels == 3) return *this;
  ImageBuffer out(width, height, 3);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    out.data[3 * i] = out.data[3 * i + 1] = out.data[3 * i + 2] = data[i];
  }
  return out;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_handler(png_structp, png_const_charp message) {
  throw Error(ErrorKind::kFormat, std::string("PNG: ") + message);
}

void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace

// The libpng error callback throws; the png structs are released by the guards.
ImageBuffer read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) fail(ErrorKind::kIo, "cannot open " + path.string());

  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    fail(ErrorKind::kFormat, path.string() + " is not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                           png_warning_handler);
  if (!png) fail(ErrorKind::kIo, "libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};

  try {
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (depth == 16) png_set_strip_16(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    ImageBuffer image;
    image.width = static_cast<int>(png_get_image_width(png, info));
    image.height = static_cast<int>(png_get_image_height(png, info));
    image.channels = png_get_channels(png, info);
    if (image.channels != 1 && image.channels != 3) {
      fail(ErrorKind::kFormat, path.string() + ": unsupported channel count " +
                                   std::to_string(image.channels));
    }
    image.data.resize(image.pixel_count() * image.channels);
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
    for (int y = 0; y < image.height; ++y) rows[y] = image.data.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    return image;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kFormat) fail(ErrorKind::kFormat, path.string() + ": " + e.what());
    throw;
  }
}

void write_png(const ImageBuffer& image, const std::filesystem::path& path) {
  image.validate();
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) fail(ErrorKind::kIo, "cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                            png_warning_handler);
  if (!png) fail(ErrorKind::kIo, "libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_write_struct(png, info); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height),
               8, image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.data.data() + y * stride));
  }
  png_write_end(png, nullptr);
  if (std::fflush(file.get()) != 0) fail(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace removal_eval

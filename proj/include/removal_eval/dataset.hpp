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
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "removal_eval/image.hpp"

namespace removal_eval {

// One bit per pixel (stored as 0/1 bytes), row-major.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, int kernel_size = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  // Dilation provenance; 0 for an undilated mask.
  int kernel_size() const { return kernel_size_; }
  void set_kernel_size(int k) { kernel_size_ = k; }

  bool get(int row, int col) const { return bits_[static_cast<std::size_t>(row) * width_ + col] != 0; }
  void set(int row, int col, bool on = true) {
    bits_[static_cast<std::size_t>(row) * width_ + col] = on ? 1 : 0;
  }

  std::size_t count() const;
  double coverage() const;
  bool empty() const { return count() == 0; }

  // Pixel-wise OR; dimensions must match.
  BinaryMask& operator|=(const BinaryMask& other);

  // True if every on-pixel of this mask is on in `other`.
  bool subset_of(const BinaryMask& other) const;

  const std::vector<std::uint8_t>& bits() const { return bits_; }

  // Single-channel image, on = 255, off = 0.
  ImageBuffer to_image() const;
  // Any nonzero sample is on.
  static BinaryMask from_image(const ImageBuffer& image, int kernel_size = 0);

  bool same_pixels(const BinaryMask& other) const {
    return width_ == other.width_ && height_ == other.height_ && bits_ == other.bits_;
  }
  bool operator==(const BinaryMask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int kernel_size_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct RleSegmentation {
  std::vector<std::int64_t> counts;
  int height = 0;
  int width = 0;
};

// Flat [x0, y0, x1, y1, ...] rings.
using PolygonSegmentation = std::vector<std::vector<double>>;

struct Instance {
  std::int64_t category_id = 0;
  std::variant<PolygonSegmentation, RleSegmentation> segmentation;
  bool iscrowd = false;
};

struct ImageRecord {
  std::int64_t id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;
};

class AnnotationIndex {
 public:
  // Images in document order.
  const std::vector<ImageRecord>& images() const { return images_; }
  const ImageRecord& image(std::int64_t id) const;
  bool has_image(std::int64_t id) const { return by_id_.count(id) != 0; }

  // Instances of one image, in document order (empty if none).
  const std::vector<Instance>& instances(std::int64_t image_id) const;

  // Category name -> id as declared in the document.
  const std::map<std::string, std::int64_t>& categories() const { return categories_; }

  // Builders used by the parser and by tests.
  void add_image(ImageRecord record);
  void add_instance(std::int64_t image_id, Instance instance);
  void add_category(std::int64_t id, const std::string& name);

 private:
  std::vector<ImageRecord> images_;
  std::map<std::int64_t, std::size_t> by_id_;
  std::map<std::int64_t, std::vector<Instance>> instances_;
  std::map<std::string, std::int64_t> categories_;
};

// COCO layout: "images", "annotations" and "categories" arrays. Integer-count RLE and polygon
// segmentations are supported. Errors carry a JSON pointer to the offending element.
AnnotationIndex parse_annotations(const std::string& json_text);
AnnotationIndex load_annotations(const std::filesystem::path& path);

// COCO run-length decoding: column-major order, runs alternate starting with zeros.
BinaryMask decode_rle(const std::vector<std::int64_t>& counts, int height, int width);
std::vector<std::int64_t> encode_rle(const BinaryMask& mask);

// Even-odd fill sampled at pixel centers (x + 0.5, y + 0.5); union over rings.
BinaryMask rasterize_polygon(const PolygonSegmentation& rings, int height, int width);

BinaryMask decode_instance(const Instance& instance, int height, int width);

struct MaskOptions {
  bool include_crowd = true;
};

// Union of all instances of `category_id` on the image.
BinaryMask build_class_mask(const AnnotationIndex& index, std::int64_t image_id,
                            std::int64_t category_id, const MaskOptions& options = {});

// Binary dilation with a k x k all-ones element anchored at (k/2, k/2): output (r, c) is on iff
// an input on-pixel lies in rows [r - a, r + k - 1 - a] x cols [c - a, c + k - 1 - a].
// k = 0 or 1 is the identity.
BinaryMask dilate(const BinaryMask& mask, int kernel_size);

struct SetSelection {
  std::int64_t category_id = 0;
  double min_cov = 0.0;
  double max_cov = 1.0;
  std::vector<std::pair<std::int64_t, double>> query;  // image id, undilated coverage
  std::vector<std::int64_t> comparison;
};

// Query: images with target instances whose undilated class-mask coverage lies in
// [min_cov, max_cov]. Comparison: images with no target instance at all.
SetSelection select_sets(const AnnotationIndex& index, std::int64_t category_id, double min_cov,
                         double max_cov, const MaskOptions& options = {});

struct ManifestEntry {
  std::string id;
  std::string image_path;
  std::string mask_path;
  std::string role;  // "query" or "comparison"
  double coverage = 0.0;
  int kernel_size = 0;

  bool operator==(const ManifestEntry&) const = default;
};

std::string manifest_to_json(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> manifest_from_json(const std::string& text);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

}  // namespace removal_eval

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

#include "removal_eval/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "removal_eval/error.hpp"

namespace removal_eval {

using nlohmann::json;

BinaryMask::BinaryMask(int width, int height, int kernel_size)
    : width_(width), height_(height), kernel_size_(kernel_size) {
  if (width <= 0 || height <= 0) {
    fail(ErrorKind::kValidation, "mask dimensions must be positive, got " + std::to_string(width) +
                                     "x" + std::to_string(height));
  }
  bits_.assign(static_cast<std::size_t>(width) * height, 0);
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

double BinaryMask::coverage() const {
  return bits_.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(bits_.size());
}

BinaryMask& BinaryMask::operator|=(const BinaryMask& other) {
  if (other.width_ != width_ || other.height_ != height_) {
    fail(ErrorKind::kValidation, "mask size mismatch in union");
  }
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= other.bits_[i];
  return *this;
}

bool BinaryMask::subset_of(const BinaryMask& other) const {
  if (other.width_ != width_ || other.height_ != height_) return false;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !other.bits_[i]) return false;
  }
  return true;
}

ImageBuffer BinaryMask::to_image() const {
  ImageBuffer img(width_, height_, 1);
  for (std::size_t i = 0; i < bits_.size(); ++i) img.data[i] = bits_[i] ? 255 : 0;
  return img;
}

BinaryMask BinaryMask::from_image(const ImageBuffer& image, int kernel_size) {
  image.validate();
  BinaryMask m(image.width, image.height, kernel_size);
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    bool on = false;
    for (int c = 0; c < image.channels; ++c) on = on || image.data[p * image.channels + c] != 0;
    m.bits_[p] = on ? 1 : 0;
  }
  return m;
}

// ---------------------------------------------------------------------------------------------

const ImageRecord& AnnotationIndex::image(std::int64_t id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) fail(ErrorKind::kValidation, "unknown image id " + std::to_string(id));
  return images_[it->second];
}

const std::vector<Instance>& AnnotationIndex::instances(std::int64_t image_id) const {
  static const std::vector<Instance> kNone;
  auto it = instances_.find(image_id);
  return it == instances_.end() ? kNone : it->second;
}

void AnnotationIndex::add_image(ImageRecord record) {
  if (by_id_.count(record.id)) fail(ErrorKind::kValidation, "duplicate image id " + std::to_string(record.id));
  if (record.width <= 0 || record.height <= 0) {
    fail(ErrorKind::kValidation, "image " + std::to_string(record.id) + " has non-positive size");
  }
  by_id_[record.id] = images_.size();
  images_.push_back(std::move(record));
}

void AnnotationIndex::add_instance(std::int64_t image_id, Instance instance) {
  if (!has_image(image_id)) {
    fail(ErrorKind::kValidation, "annotation references unknown image_id " + std::to_string(image_id));
  }
  if (instance.category_id <= 0) {
    fail(ErrorKind::kValidation, "category id must be positive, got " + std::to_string(instance.category_id));
  }
  instances_[image_id].push_back(std::move(instance));
}

void AnnotationIndex::add_category(std::int64_t id, const std::string& name) {
  if (id <= 0) fail(ErrorKind::kValidation, "category id must be positive, got " + std::to_string(id));
  categories_[name] = id;
}

namespace {

[[noreturn]] void parse_fail(const std::string& pointer, const std::string& what) {
  fail(ErrorKind::kParse, pointer + ": " + what);
}

const json& field(const json& obj, const std::string& key, const std::string& pointer) {
  if (!obj.is_object()) parse_fail(pointer, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) parse_fail(pointer + "/" + key, "missing field");
  return *it;
}

std::int64_t int_field(const json& obj, const std::string& key, const std::string& pointer) {
  const json& v = field(obj, key, pointer);
  if (!v.is_number_integer()) parse_fail(pointer + "/" + key, "expected an integer");
  return v.get<std::int64_t>();
}

const json& array_field(const json& obj, const std::string& key, const std::string& pointer) {
  const json& v = field(obj, key, pointer);
  if (!v.is_array()) parse_fail(pointer + "/" + key, "expected an array");
  return v;
}

std::variant<PolygonSegmentation, RleSegmentation> parse_segmentation(const json& seg,
                                                                       const std::string& pointer) {
  if (seg.is_array()) {
    PolygonSegmentation rings;
    for (std::size_t r = 0; r < seg.size(); ++r) {
      const std::string rp = pointer + "/" + std::to_string(r);
      if (!seg[r].is_array()) parse_fail(rp, "expected a coordinate list");
      std::vector<double> ring;
      for (std::size_t k = 0; k < seg[r].size(); ++k) {
        if (!seg[r][k].is_number()) parse_fail(rp + "/" + std::to_string(k), "expected a number");
        ring.push_back(seg[r][k].get<double>());
      }
      rings.push_back(std::move(ring));
    }
    return rings;
  }
  if (seg.is_object()) {
    const json& counts = field(seg, "counts", pointer);
    if (counts.is_string()) parse_fail(pointer + "/counts", "compressed RLE strings are not supported");
    if (!counts.is_array()) parse_fail(pointer + "/counts", "expected an integer array");
    RleSegmentation rle;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (!counts[k].is_number_integer()) parse_fail(pointer + "/counts/" + std::to_string(k), "expected an integer");
      rle.counts.push_back(counts[k].get<std::int64_t>());
    }
    const json& size = array_field(seg, "size", pointer);
    if (size.size() != 2 || !size[0].is_number_integer() || !size[1].is_number_integer()) {
      parse_fail(pointer + "/size", "expected [height, width]");
    }
    rle.height = size[0].get<int>();
    rle.width = size[1].get<int>();
    return rle;
  }
  parse_fail(pointer, "expected a polygon list or an RLE object");
}

}  // namespace

AnnotationIndex parse_annotations(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) parse_fail("", "expected a top-level object");

  AnnotationIndex index;
  const json& images = array_field(doc, "images", "");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string p = "/images/" + std::to_string(i);
    ImageRecord rec;
    rec.id = int_field(images[i], "id", p);
    rec.width = static_cast<int>(int_field(images[i], "width", p));
    rec.height = static_cast<int>(int_field(images[i], "height", p));
    if (auto it = images[i].find("file_name"); it != images[i].end() && it->is_string()) {
      rec.file_name = it->get<std::string>();
    }
    index.add_image(std::move(rec));
  }

  const json& categories = array_field(doc, "categories", "");
  for (std::size_t i = 0; i < categories.size(); ++i) {
    const std::string p = "/categories/" + std::to_string(i);
    const std::int64_t id = int_field(categories[i], "id", p);
    const json& name = field(categories[i], "name", p);
    if (!name.is_string()) parse_fail(p + "/name", "expected a string");
    index.add_category(id, name.get<std::string>());
  }

  const json& annotations = array_field(doc, "annotations", "");
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const std::string p = "/annotations/" + std::to_string(i);
    const json& a = annotations[i];
    const std::int64_t image_id = int_field(a, "image_id", p);
    Instance inst;
    inst.category_id = int_field(a, "category_id", p);
    inst.segmentation = parse_segmentation(field(a, "segmentation", p), p + "/segmentation");
    if (auto it = a.find("iscrowd"); it != a.end() && it->is_number_integer()) inst.iscrowd = it->get<int>() != 0;
    if (!index.has_image(image_id)) {
      fail(ErrorKind::kValidation, p + ": annotation references unknown image_id " + std::to_string(image_id));
    }
    index.add_instance(image_id, std::move(inst));
  }
  return index;
}

AnnotationIndex load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_annotations(buffer.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

BinaryMask decode_rle(const std::vector<std::int64_t>& counts, int height, int width) {
  BinaryMask mask(width, height);
  const std::int64_t total = static_cast<std::int64_t>(width) * height;
  std::int64_t pos = 0;
  bool on = false;
  for (std::int64_t run : counts) {
    if (run < 0) fail(ErrorKind::kFormat, "negative RLE count");
    if (run > total - pos) {
      fail(ErrorKind::kFormat, "RLE counts exceed " + std::to_string(total) + " pixels");
    }
    if (on) {
      for (std::int64_t k = pos; k < pos + run; ++k) {
        mask.set(static_cast<int>(k % height), static_cast<int>(k / height));
      }
    }
    pos += run;
    on = !on;
  }
  if (pos != total) {
    fail(ErrorKind::kFormat, "RLE counts sum to " + std::to_string(pos) + ", expected " + std::to_string(total));
  }
  return mask;
}

std::vector<std::int64_t> encode_rle(const BinaryMask& mask) {
  std::vector<std::int64_t> counts;
  bool current = false;
  std::int64_t run = 0;
  for (int c = 0; c < mask.width(); ++c) {
    for (int r = 0; r < mask.height(); ++r) {
      if (mask.get(r, c) != current) {
        counts.push_back(run);
        run = 0;
        current = !current;
      }
      ++run;
    }
  }
  counts.push_back(run);
  return counts;
}

BinaryMask rasterize_polygon(const PolygonSegmentation& rings, int height, int width) {
  BinaryMask mask(width, height);
  std::vector<double> xs;
  for (const auto& ring : rings) {
    if (ring.size() % 2 != 0) {
      fail(ErrorKind::kFormat, "polygon has an odd coordinate count (" + std::to_string(ring.size()) + ")");
    }
    const std::size_t points = ring.size() / 2;
    if (points < 3) continue;  // no interior
    for (int y = 0; y < height; ++y) {
      const double yc = y + 0.5;
      xs.clear();
      for (std::size_t i = 0, j = points - 1; i < points; j = i++) {
        const double xi = ring[2 * i], yi = ring[2 * i + 1];
        const double xj = ring[2 * j], yj = ring[2 * j + 1];
        if ((yi > yc) != (yj > yc)) xs.push_back(xi + (yc - yi) * (xj - xi) / (yj - yi));
      }
      std::sort(xs.begin(), xs.end());
      // Centers with an odd number of crossings to their right: xc in [xs[2k], xs[2k+1]).
      for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
        const int start = std::max(0, static_cast<int>(std::floor(xs[k] - 0.5)));
        for (int x = start; x < width; ++x) {
          const double xc = x + 0.5;
          if (xc >= xs[k + 1]) break;
          if (xc >= xs[k]) mask.set(y, x);
        }
      }
    }
  }
  return mask;
}

BinaryMask decode_instance(const Instance& instance, int height, int width) {
  if (const auto* rle = std::get_if<RleSegmentation>(&instance.segmentation)) {
    if (rle->height != height || rle->width != width) {
      fail(ErrorKind::kFormat, "RLE size " + std::to_string(rle->height) + "x" + std::to_string(rle->width) +
                                   " does not match image " + std::to_string(height) + "x" + std::to_string(width));
    }
    return decode_rle(rle->counts, height, width);
  }
  return rasterize_polygon(std::get<PolygonSegmentation>(instance.segmentation), height, width);
}

BinaryMask build_class_mask(const AnnotationIndex& index, std::int64_t image_id,
                            std::int64_t category_id, const MaskOptions& options) {
  const ImageRecord& rec = index.image(image_id);
  BinaryMask mask(rec.width, rec.height);
  for (const Instance& inst : index.instances(image_id)) {
    if (inst.category_id != category_id) continue;
    if (inst.iscrowd && !options.include_crowd) continue;
    mask |= decode_instance(inst, rec.height, rec.width);
  }
  return mask;
}

BinaryMask dilate(const BinaryMask& mask, int kernel_size) {
  if (kernel_size < 0) fail(ErrorKind::kValidation, "kernel size must be non-negative");
  BinaryMask out = mask;
  out.set_kernel_size(kernel_size);
  if (kernel_size <= 1) return out;

  const int w = mask.width(), h = mask.height();
  const int anchor = kernel_size / 2;
  // Output p is on iff some input in [p - anchor, p - anchor + k - 1] is on.
  auto window_any = [&](const std::vector<int>& prefix, int p, int n) {
    const int lo = std::max(0, p - anchor);
    const int hi = std::min(n - 1, p - anchor + kernel_size - 1);
    return lo <= hi && prefix[hi + 1] - prefix[lo] > 0;
  };

  BinaryMask horizontal(w, h);
  std::vector<int> prefix(static_cast<std::size_t>(std::max(w, h)) + 1);
  for (int r = 0; r < h; ++r) {
    prefix[0] = 0;
    for (int c = 0; c < w; ++c) prefix[c + 1] = prefix[c] + (mask.get(r, c) ? 1 : 0);
    for (int c = 0; c < w; ++c) horizontal.set(r, c, window_any(prefix, c, w));
  }
  for (int c = 0; c < w; ++c) {
    prefix[0] = 0;
    for (int r = 0; r < h; ++r) prefix[r + 1] = prefix[r] + (horizontal.get(r, c) ? 1 : 0);
    for (int r = 0; r < h; ++r) out.set(r, c, window_any(prefix, r, h));
  }
  return out;
}

SetSelection select_sets(const AnnotationIndex& index, std::int64_t category_id, double min_cov,
                         double max_cov, const MaskOptions& options) {
  if (!(min_cov >= 0.0 && min_cov < max_cov && max_cov <= 1.0)) {
    fail(ErrorKind::kUsage, "coverage band must satisfy 0 <= min < max <= 1");
  }
  SetSelection sel;
  sel.category_id = category_id;
  sel.min_cov = min_cov;
  sel.max_cov = max_cov;
  for (const ImageRecord& rec : index.images()) {
    const auto& inst = index.instances(rec.id);
    const bool has_target = std::any_of(inst.begin(), inst.end(),
                                        [&](const Instance& i) { return i.category_id == category_id; });
    if (!has_target) {
      sel.comparison.push_back(rec.id);
      continue;
    }
    const double cov = build_class_mask(index, rec.id, category_id, options).coverage();
    if (cov >= min_cov && cov <= max_cov) sel.query.emplace_back(rec.id, cov);
  }
  return sel;
}

// ---------------------------------------------------------------------------------------------

std::string manifest_to_json(const std::vector<ManifestEntry>& entries) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["image_path"] = e.image_path;
    j["mask_path"] = e.mask_path;
    j["role"] = e.role;
    j["coverage"] = e.coverage;
    j["kernel_size"] = e.kernel_size;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::vector<ManifestEntry> manifest_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, std::string("invalid manifest JSON: ") + e.what());
  }
  if (!doc.is_array()) parse_fail("", "manifest must be a JSON array");
  std::vector<ManifestEntry> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string p = "/" + std::to_string(i);
    const json& j = doc[i];
    ManifestEntry e;
    auto str = [&](const char* key) {
      const json& v = field(j, key, p);
      if (!v.is_string()) parse_fail(p + "/" + key, "expected a string");
      return v.get<std::string>();
    };
    e.id = str("id");
    e.image_path = str("image_path");
    e.mask_path = str("mask_path");
    e.role = str("role");
    if (e.role != "query" && e.role != "comparison") parse_fail(p + "/role", "expected \"query\" or \"comparison\"");
    const json& cov = field(j, "coverage", p);
    if (!cov.is_number()) parse_fail(p + "/coverage", "expected a number");
    e.coverage = cov.get<double>();
    e.kernel_size = static_cast<int>(int_field(j, "kernel_size", p));
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << manifest_to_json(entries);
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return manifest_from_json(buffer.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace removal_eval

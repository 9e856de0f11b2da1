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

#include "removal_eval/features.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "removal_eval/error.hpp"
#include "removal_eval/onnx.hpp"
#include "removal_eval/parallel.hpp"

namespace removal_eval {

const char* to_string(Backend backend) {
  switch (backend) {
    case Backend::kToy: return "toy";
    case Backend::kNeural: return "neural";
    case Backend::kPrecomputed: return "precomputed";
  }
  return "?";
}

Backend parse_backend(const std::string& name) {
  if (name == "toy") return Backend::kToy;
  if (name == "neural") return Backend::kNeural;
  if (name == "precomputed") return Backend::kPrecomputed;
  fail(ErrorKind::kUsage, "unknown backend '" + name + "' (expected toy, neural or precomputed)");
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorKind::kIo, "SHA-256 failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

namespace {

std::vector<std::uint8_t> read_all(const std::filesystem::path& path, ErrorKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(kind, "cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

std::string sha256_file_hex(const std::filesystem::path& path) {
  return sha256_hex(read_all(path, ErrorKind::kIo));
}

ExtractorSpec ExtractorSpec::toy() {
  ExtractorSpec s;
  s.backend = Backend::kToy;
  s.output_dim = kToyDim;
  return s;
}

ExtractorSpec ExtractorSpec::neural(std::filesystem::path model, std::size_t output_dim, int input_edge) {
  ExtractorSpec s;
  s.backend = Backend::kNeural;
  s.model_path = std::move(model);
  s.output_dim = output_dim;
  s.input_edge = input_edge;
  return s;
}

ExtractorSpec ExtractorSpec::precomputed(std::filesystem::path features) {
  ExtractorSpec s;
  s.backend = Backend::kPrecomputed;
  s.model_path = std::move(features);
  s.output_dim = 0;
  return s;
}

ExtractorSpec& ExtractorSpec::resolve() {
  std::ostringstream canon;
  canon << "removal-eval-extractor/1\n"
        << "backend=" << to_string(backend) << "\n"
        << "input_edge=" << input_edge << "\n"
        << "output_dim=" << output_dim << "\n";
  switch (backend) {
    case Backend::kToy:
      canon << "descriptor=rgb-hist-3x16+luma-grad-orient-16\n";
      break;
    case Backend::kNeural:
      canon << "resize=bilinear-half-pixel\nscale=x/127.5-1\nlayout=NCHW\n"
            << "model_sha256=" << sha256_hex(read_all(model_path, ErrorKind::kBackend)) << "\n";
      break;
    case Backend::kPrecomputed:
      canon << "source_sha256=" << sha256_hex(read_all(model_path, ErrorKind::kBackend)) << "\n";
      break;
  }
  const std::string text = canon.str();
  fingerprint = sha256_hex(std::vector<std::uint8_t>(text.begin(), text.end()));
  return *this;
}

std::array<double, kToyDim> toy_descriptor(const ImageBuffer& input) {
  const ImageBuffer img = input.to_rgb();
  std::array<double, kToyDim> out{};
  const double npix = static_cast<double>(img.pixel_count());

  std::array<std::size_t, kToyDim> counts{};
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) ++counts[16 * c + (img.data[3 * i + c] >> 4)];
  }

  const int w = img.width, h = img.height;
  std::vector<double> luma(img.pixel_count());
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    luma[i] = 0.299 * img.data[3 * i] + 0.587 * img.data[3 * i + 1] + 0.114 * img.data[3 * i + 2];
  }
  // Central differences with edge replication; y grows downwards.
  constexpr double kTwoPi = 6.283185307179586;
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      const double gx = 0.5 * (luma[static_cast<std::size_t>(y) * w + xp] - luma[static_cast<std::size_t>(y) * w + xm]);
      const double gy = 0.5 * (luma[static_cast<std::size_t>(yp) * w + x] - luma[static_cast<std::size_t>(ym) * w + x]);
      int bin = 0;
      if (gx != 0.0 || gy != 0.0) {
        double angle = std::atan2(gy, gx);
        if (angle < 0.0) angle += kTwoPi;
        bin = std::min(15, static_cast<int>(angle / (kTwoPi / 16.0)));
      }
      ++counts[48 + bin];
    }
  }
  for (std::size_t k = 0; k < kToyDim; ++k) out[k] = static_cast<double>(counts[k]) / npix;
  return out;
}

std::vector<float> neural_preprocess(const ImageBuffer& image, int edge) {
  image.validate();
  if (image.channels != 3) fail(ErrorKind::kValidation, "neural preprocessing needs 3 channels");
  if (edge <= 0) fail(ErrorKind::kValidation, "input edge must be positive");
  const auto e = static_cast<std::size_t>(edge);
  std::vector<float> out(3 * e * e);
  const double sx = static_cast<double>(image.width) / edge;
  const double sy = static_cast<double>(image.height) / edge;
  for (int oy = 0; oy < edge; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int ox = 0; ox < edge; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - wx) * image.at(x0, y0, c) + wx * image.at(x1, y0, c);
        const double bottom = (1.0 - wx) * image.at(x0, y1, c) + wx * image.at(x1, y1, c);
        const double v = (1.0 - wy) * top + wy * bottom;
        out[(c * e + oy) * e + ox] = static_cast<float>(v / 127.5 - 1.0);
      }
    }
  }
  return out;
}

namespace {

class ToyExtractor final : public Extractor {
 public:
  explicit ToyExtractor(ExtractorSpec spec) : Extractor(std::move(spec)) {
    if (spec_.output_dim != kToyDim) {
      fail(ErrorKind::kValidation, "toy backend output dim is fixed at 64");
    }
  }

  std::vector<double> describe(const NamedImage& item) const override {
    const auto d = toy_descriptor(item.image);
    return {d.begin(), d.end()};
  }
};

class NeuralExtractor final : public Extractor {
 public:
  explicit NeuralExtractor(ExtractorSpec spec)
      : Extractor(std::move(spec)), session_(onnx::Session::load(spec_.model_path)) {}

  std::vector<double> describe(const NamedImage& item) const override {
    if (item.image.channels != 3) {
      fail(ErrorKind::kValidation, "image '" + item.id + "' has " + std::to_string(item.image.channels) +
                                       " channel(s); the neural backend requires 3");
    }
    const std::int64_t e = spec_.input_edge;
    const onnx::Tensor input =
        onnx::Tensor::floats({1, 3, e, e}, neural_preprocess(item.image, spec_.input_edge));
    const onnx::Tensor out = session_.run(input);
    if (out.is_int || out.values.size() != spec_.output_dim) {
      fail(ErrorKind::kBackend, "model " + spec_.model_path.string() + " produced " +
                                    std::to_string(out.is_int ? out.ints.size() : out.values.size()) +
                                    " values, expected " + std::to_string(spec_.output_dim));
    }
    return {out.values.begin(), out.values.end()};
  }

 private:
  onnx::Session session_;
};

class PrecomputedExtractor final : public Extractor {
 public:
  explicit PrecomputedExtractor(ExtractorSpec spec) : Extractor(std::move(spec)) {
    try {
      source_ = read_features(spec_.model_path);
    } catch (const Error& e) {
      fail(ErrorKind::kBackend, "cannot load precomputed features " + spec_.model_path.string() + ": " + e.what());
    }
    if (spec_.output_dim != 0 && spec_.output_dim != source_.dim()) {
      fail(ErrorKind::kValidation, "precomputed features have dim " + std::to_string(source_.dim()) +
                                       ", expected " + std::to_string(spec_.output_dim));
    }
    spec_.output_dim = source_.dim();
    if (spec_.fingerprint.empty()) spec_.resolve();
    for (std::size_t i = 0; i < source_.rows(); ++i) index_[source_.ids()[i]] = i;
  }

  std::vector<double> describe(const NamedImage& item) const override {
    auto it = index_.find(item.id);
    if (it == index_.end()) {
      fail(ErrorKind::kValidation, "id '" + item.id + "' not found in " + spec_.model_path.string());
    }
    const auto row = source_.data().row(static_cast<Eigen::Index>(it->second));
    return {row.data(), row.data() + row.size()};
  }

  bool needs_pixels() const override { return false; }

 private:
  FeatureMatrix source_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace

std::unique_ptr<Extractor> make_extractor(ExtractorSpec spec) {
  // The precomputed backend takes output_dim from its source file and resolves afterwards.
  if (spec.backend == Backend::kPrecomputed) return std::make_unique<PrecomputedExtractor>(std::move(spec));
  if (spec.fingerprint.empty()) spec.resolve();
  if (spec.backend == Backend::kToy) return std::make_unique<ToyExtractor>(std::move(spec));
  return std::make_unique<NeuralExtractor>(std::move(spec));
}

ExtractionResult extract_features_checked(const std::vector<NamedImage>& images,
                                          const Extractor& extractor, int threads) {
  std::vector<std::vector<double>> rows(images.size());
  std::vector<std::string> errors(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) {
    try {
      if (extractor.needs_pixels()) images[i].image.validate();
      rows[i] = extractor.describe(images[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  ExtractionResult result;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!errors[i].empty()) result.failures.push_back({images[i].id, errors[i]});
  }
  if (!result.failures.empty()) return result;
  if (images.empty()) fail(ErrorKind::kValidation, "no images to extract");

  const std::size_t d = rows.front().size();
  RowMatrix data(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(d));
  std::vector<std::string> ids;
  ids.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (rows[i].size() != d) fail(ErrorKind::kBackend, "inconsistent feature dims for '" + images[i].id + "'");
    for (std::size_t j = 0; j < d; ++j) data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    ids.push_back(images[i].id);
  }
  result.features = FeatureMatrix(std::move(ids), std::move(data));
  return result;
}

FeatureMatrix extract_features(const std::vector<NamedImage>& images, const ExtractorSpec& spec,
                               int threads) {
  const auto extractor = make_extractor(spec);
  ExtractionResult r = extract_features_checked(images, *extractor, threads);
  if (!r.failures.empty()) {
    const ExtractionFailure& f = r.failures.front();
    fail(ErrorKind::kValidation, "extraction failed for '" + f.id + "': " + f.message);
  }
  return std::move(*r.features);
}

// ---------------------------------------------------------------------------------------------
// Container

namespace {

constexpr std::uint32_t kFormatVersion = 1;

class ByteWriter {
 public:
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void bytes(const std::string& s) { out.insert(out.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> out;

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& b) : b_(b) {}
  std::uint64_t offset() const { return pos_; }
  std::uint64_t remaining() const { return b_.size() - pos_; }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(get(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(get(4, what)); }
  std::uint64_t u64(const char* what) { return get(8, what); }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_), b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }

  void need(std::uint64_t n, const char* what) const {
    if (n > remaining()) {
      throw Error::format_at(b_.size(), std::string("truncated ") + what + ": need " + std::to_string(n) +
                                            " bytes at offset " + std::to_string(pos_) + ", have " +
                                            std::to_string(remaining()));
    }
  }

 private:
  std::uint64_t get(int n, const char* what) {
    need(static_cast<std::uint64_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }

  const std::vector<std::uint8_t>& b_;
  std::uint64_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_features(const FeatureMatrix& m) {
  if (m.rows() == 0) fail(ErrorKind::kValidation, "cannot write an empty feature matrix");
  if (m.dim() > std::numeric_limits<std::uint32_t>::max()) fail(ErrorKind::kValidation, "dimension too large");
  ByteWriter w;
  w.bytes("FEAT");
  w.u32(kFormatVersion);
  w.u64(m.rows());
  w.u32(static_cast<std::uint32_t>(m.dim()));
  for (const std::string& id : m.ids()) {
    if (id.size() > std::numeric_limits<std::uint16_t>::max()) {
      fail(ErrorKind::kValidation, "id longer than 65535 bytes");
    }
    w.u16(static_cast<std::uint16_t>(id.size()));
    w.bytes(id);
  }
  const RowMatrix& data = m.data();
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      const float f = static_cast<float>(data(i, j));
      if (!std::isfinite(f)) {
        fail(ErrorKind::kValidation, "value in row '" + m.ids()[static_cast<std::size_t>(i)] +
                                         "' does not fit a 32-bit float");
      }
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      w.u32(bits);
    }
  }
  return std::move(w.out);
}

FeatureMatrix decode_features(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4) throw Error::format_at(0, "missing magic");
  if (r.str(4, "magic") != "FEAT") throw Error::format_at(0, "bad magic");
  const std::uint32_t version = r.u32("version");
  if (version != kFormatVersion) {
    throw Error::format_at(4, "unsupported version " + std::to_string(version));
  }
  const std::uint64_t n = r.u64("row count");
  const std::uint32_t d = r.u32("dimension");
  if (n == 0) throw Error::format_at(8, "row count is zero");
  if (d == 0) throw Error::format_at(16, "dimension is zero");

  std::vector<std::string> ids;
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint16_t len = r.u16("id length");
    ids.push_back(r.str(len, "id"));
  }
  const std::uint64_t values = n * d;
  if (d != 0 && values / d != n) throw Error::format_at(8, "row count overflows");
  r.need(values * 4, "payload");
  RowMatrix data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::uint64_t k = 0; k < values; ++k) {
    const std::uint32_t bits = r.u32("payload");
    float f;
    std::memcpy(&f, &bits, 4);
    data(static_cast<Eigen::Index>(k / d), static_cast<Eigen::Index>(k % d)) = f;
  }
  if (r.remaining() != 0) {
    throw Error::format_at(r.offset(), std::to_string(r.remaining()) + " trailing bytes");
  }
  return FeatureMatrix(std::move(ids), std::move(data));
}

void write_features(const FeatureMatrix& m, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_features(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_all(path, ErrorKind::kIo);
  try {
    return decode_features(bytes);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kFormat && e.offset()) {
      throw Error::format_at(*e.offset(), path.string() + ": " + e.what());
    }
    throw;
  }
}

std::filesystem::path meta_path_for(const std::filesystem::path& features_path) {
  return std::filesystem::path(features_path.string() + ".meta.json");
}

void write_feature_meta(const FeatureMeta& meta, const std::filesystem::path& features_path) {
  nlohmann::ordered_json j;
  j["fingerprint"] = meta.fingerprint;
  j["backend"] = meta.backend;
  j["contains_target_class"] = meta.contains_target_class ? nlohmann::ordered_json(*meta.contains_target_class)
                                                          : nlohmann::ordered_json(nullptr);
  j["source"] = meta.source;
  const auto path = meta_path_for(features_path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

std::optional<FeatureMeta> read_feature_meta(const std::filesystem::path& features_path) {
  const auto path = meta_path_for(features_path);
  if (!std::filesystem::exists(path)) return std::nullopt;
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    FeatureMeta meta;
    meta.fingerprint = j.at("fingerprint").get<std::string>();
    meta.backend = j.value("backend", "");
    if (j.contains("contains_target_class") && !j["contains_target_class"].is_null()) {
      meta.contains_target_class = j["contains_target_class"].get<bool>();
    }
    meta.source = j.value("source", "");
    return meta;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

}  // namespace removal_eval

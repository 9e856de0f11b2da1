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

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "removal_eval/image.hpp"
#include "removal_eval/stats.hpp"

namespace removal_eval {

enum class Backend { kToy, kNeural, kPrecomputed };

const char* to_string(Backend backend);
Backend parse_backend(const std::string& name);

struct ExtractorSpec {
  Backend backend = Backend::kToy;
  // ONNX model for kNeural; feature container for kPrecomputed.
  std::filesystem::path model_path;
  int input_edge = 299;
  std::size_t output_dim = 64;
  // Hex SHA-256 over backend, model bytes and preprocessing constants; set by resolve().
  std::string fingerprint;

  static ExtractorSpec toy();
  static ExtractorSpec neural(std::filesystem::path model, std::size_t output_dim = 2048,
                              int input_edge = 299);
  static ExtractorSpec precomputed(std::filesystem::path features);

  // Computes the fingerprint (reading model bytes where applicable).
  ExtractorSpec& resolve();
};

inline constexpr std::size_t kToyDim = 64;

// Three L1-normalized 16-bin channel histograms followed by a 16-bin gradient orientation
// histogram of the luma plane. Gray images are replicated to RGB.
std::array<double, kToyDim> toy_descriptor(const ImageBuffer& image);

// Full-image bilinear resize (half-pixel centers) to edge x edge, scaled to [-1, 1], laid out as
// a 1 x 3 x edge x edge float tensor.
std::vector<float> neural_preprocess(const ImageBuffer& image, int edge);

struct NamedImage {
  std::string id;
  ImageBuffer image;  // unused (may be empty) for the precomputed backend
};

class Extractor {
 public:
  virtual ~Extractor() = default;
  virtual std::vector<double> describe(const NamedImage& image) const = 0;
  virtual bool needs_pixels() const { return true; }
  const ExtractorSpec& spec() const { return spec_; }

 protected:
  explicit Extractor(ExtractorSpec spec) : spec_(std::move(spec)) {}
  ExtractorSpec spec_;
};

// Builds the backend named by spec; resolves the fingerprint if unset. Model load failures raise
// kBackend with the path.
std::unique_ptr<Extractor> make_extractor(ExtractorSpec spec);

struct ExtractionFailure {
  std::string id;
  std::string message;
};

struct ExtractionResult {
  std::optional<FeatureMatrix> features;  // empty when any image failed
  std::vector<ExtractionFailure> failures;  // input order
};

// Row i corresponds to images[i]. Output is independent of the thread count.
ExtractionResult extract_features_checked(const std::vector<NamedImage>& images,
                                          const Extractor& extractor, int threads = 1);

// Throws on the first failure (in input order).
FeatureMatrix extract_features(const std::vector<NamedImage>& images, const ExtractorSpec& spec,
                               int threads = 1);

// Feature container, little-endian:
//   "FEAT" | u32 version=1 | u64 N | u32 D | N x (u16 len, UTF-8 id) | N*D float32 row-major
void write_features(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix read_features(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_features(const FeatureMatrix& m);
FeatureMatrix decode_features(const std::vector<std::uint8_t>& bytes);

// Provenance stored next to a container as <path>.meta.json.
struct FeatureMeta {
  std::string fingerprint;
  std::string backend;
  std::optional<bool> contains_target_class;  // unknown when absent
  std::string source;
};

std::filesystem::path meta_path_for(const std::filesystem::path& features_path);
void write_feature_meta(const FeatureMeta& meta, const std::filesystem::path& features_path);
std::optional<FeatureMeta> read_feature_meta(const std::filesystem::path& features_path);

std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_file_hex(const std::filesystem::path& path);

}  // namespace removal_eval

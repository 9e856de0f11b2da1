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

#include "doctest.h"

#include <fstream>
#include <numeric>

#include "onnx_builder.hpp"
#include "removal_eval/error.hpp"
#include "removal_eval/features.hpp"
#include "test_util.hpp"

using namespace removal_eval;

namespace {

ImageBuffer random_image(Rng& rng, int w, int h, int c) {
  ImageBuffer img(w, h, c);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

double block_sum(const std::array<double, kToyDim>& d, int block) {
  return std::accumulate(d.begin() + 16 * block, d.begin() + 16 * (block + 1), 0.0);
}

std::vector<std::uint8_t> bytes_of(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void put_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

// A matrix whose values survive the float32 payload unchanged.
FeatureMatrix float_matrix(Rng& rng, std::size_t n, std::size_t d) {
  RowMatrix m(n, d);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<float>(rng.normal() * 100.0);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("img/" + std::to_string(i) + "_é");
  return FeatureMatrix(ids, m);
}

}  // namespace

TEST_CASE("toy descriptor of a black image") {
  const auto d = toy_descriptor(ImageBuffer(9, 7, 3, 0));
  for (int block = 0; block < 4; ++block) {
    CHECK(d[16 * block] == 1.0);
    for (int k = 1; k < 16; ++k) CHECK(d[16 * block + k] == 0.0);
  }
}

TEST_CASE("toy descriptor of a constant 255 image") {
  const auto d = toy_descriptor(ImageBuffer(5, 5, 3, 255));
  CHECK(d[15] == 1.0);
  CHECK(d[31] == 1.0);
  CHECK(d[47] == 1.0);
  CHECK(d[48] == 1.0);
}

TEST_CASE("toy descriptor blocks are normalized") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int c = trial % 2 ? 3 : 1;
    const auto d = toy_descriptor(random_image(rng, 3 + trial, 4 + 2 * trial, c));
    for (int block = 0; block < 4; ++block) CHECK(std::abs(block_sum(d, block) - 1.0) <= 1e-9);
  }
}

TEST_CASE("gray images are replicated to three channels") {
  Rng rng(2);
  const ImageBuffer gray = random_image(rng, 12, 10, 1);
  CHECK(toy_descriptor(gray) == toy_descriptor(gray.to_rgb()));
}

TEST_CASE("mirroring keeps color histograms") {
  Rng rng(3);
  const ImageBuffer img = random_image(rng, 17, 11, 3);
  ImageBuffer mirrored = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) mirrored.at(x, y, c) = img.at(img.width - 1 - x, y, c);
  const auto a = toy_descriptor(img), b = toy_descriptor(mirrored);
  CHECK(std::equal(a.begin(), a.begin() + 48, b.begin()));
}

TEST_CASE("vertical step edge puts gradient mass in the horizontal bins") {
  ImageBuffer img(16, 16, 3, 0);
  for (int y = 0; y < 16; ++y)
    for (int x = 8; x < 16; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = 255;
  // Brute force: gx at columns 7 and 8 is positive, gy is zero everywhere, every other pixel has
  // zero gradient -> bin 0 (angle 0) carries everything, bin 8 (angle pi) is the other
  // horizontal bin.
  const auto d = toy_descriptor(img);
  CHECK(d[48] + d[56] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d[48] == 1.0);

  ImageBuffer flipped(16, 16, 3, 255);
  for (int y = 0; y < 16; ++y)
    for (int x = 8; x < 16; ++x)
      for (int c = 0; c < 3; ++c) flipped.at(x, y, c) = 0;
  const auto f = toy_descriptor(flipped);
  // Falling edge: 32 of 256 pixels point at angle pi.
  CHECK(f[56] == doctest::Approx(32.0 / 256.0));
  CHECK(f[48] + f[56] == doctest::Approx(1.0));
}

TEST_CASE("fingerprints") {
  test_util::TempDir dir("fp");
  const auto model = dir / "m.onnx";
  onnx_builder::save(onnx_builder::tiny_backbone(), model);

  ExtractorSpec toy = ExtractorSpec::toy();
  toy.resolve();
  ExtractorSpec toy2 = ExtractorSpec::toy();
  toy2.resolve();
  CHECK(toy.fingerprint == toy2.fingerprint);
  CHECK(toy.fingerprint.size() == 64);

  ExtractorSpec n1 = ExtractorSpec::neural(model, 2, 8);
  n1.resolve();
  ExtractorSpec n2 = ExtractorSpec::neural(model, 2, 9);
  n2.resolve();
  CHECK(n1.fingerprint != n2.fingerprint);
  CHECK(n1.fingerprint != toy.fingerprint);

  auto bytes = onnx_builder::tiny_backbone();
  bytes.back() ^= 1;
  onnx_builder::save(bytes, model);
  ExtractorSpec n3 = ExtractorSpec::neural(model, 2, 8);
  n3.resolve();
  CHECK(n3.fingerprint != n1.fingerprint);
}

TEST_CASE("toy extraction is deterministic across thread counts") {
  Rng rng(4);
  std::vector<NamedImage> images;
  for (int i = 0; i < 23; ++i) images.push_back({"img" + std::to_string(i), random_image(rng, 20, 15, 3)});
  const FeatureMatrix one = extract_features(images, ExtractorSpec::toy(), 1);
  const FeatureMatrix four = extract_features(images, ExtractorSpec::toy(), 4);
  CHECK(one == four);
  CHECK(one.dim() == 64);
  CHECK(one.ids().front() == "img0");
  CHECK(one.ids().back() == "img22");
}

TEST_CASE("neural backend on a 299x299 zero image") {
  test_util::TempDir dir("nn");
  const auto model = dir / "m.onnx";
  onnx_builder::save(onnx_builder::tiny_backbone(), model);
  const std::vector<NamedImage> images = {{"a", ImageBuffer(299, 299, 3, 0)}, {"b", ImageBuffer(299, 299, 3, 0)}};
  const FeatureMatrix f = extract_features(images, ExtractorSpec::neural(model, 2, 299));
  REQUIRE(f.dim() == 2);
  // Zero pixels scale to -1: 3.0 - 27 * 0.1 = 0.3, channel 1 is clipped by the Relu.
  CHECK(f.data()(0, 0) == doctest::Approx(0.3).epsilon(1e-5));
  CHECK(f.data()(0, 1) == 0.0);
  CHECK(f.data().row(0) == f.data().row(1));
  const FeatureMatrix again = extract_features(images, ExtractorSpec::neural(model, 2, 299));
  CHECK(again == f);
}

TEST_CASE("neural backend errors") {
  test_util::TempDir dir("nne");
  try {
    make_extractor(ExtractorSpec::neural(dir / "missing.onnx", 2, 8));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kBackend);
    CHECK(std::string(e.what()).find("missing.onnx") != std::string::npos);
  }

  const auto model = dir / "m.onnx";
  onnx_builder::save(onnx_builder::tiny_backbone(), model);
  const auto ex = make_extractor(ExtractorSpec::neural(model, 2, 8));
  try {
    ex->describe({"gray-one", ImageBuffer(8, 8, 1, 0)});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kValidation);
    CHECK(std::string(e.what()).find("gray-one") != std::string::npos);
  }

  const auto wrong_dim = make_extractor(ExtractorSpec::neural(model, 2048, 8));
  CHECK_THROWS_AS(wrong_dim->describe({"x", ImageBuffer(8, 8, 3, 0)}), Error);
}

TEST_CASE("neural preprocessing") {
  ImageBuffer img(2, 1, 3, 0);
  for (int c = 0; c < 3; ++c) img.at(1, 0, c) = 255;
  const auto t = neural_preprocess(img, 4);
  // Row of 4 samples over [0, 255]: half-pixel centers at -0.25, 0.25, 0.75, 1.25 -> clamped.
  CHECK(t[0] == -1.0f);
  CHECK(t[1] == doctest::Approx(-0.5));
  CHECK(t[2] == doctest::Approx(0.5));
  CHECK(t[3] == 1.0f);
  CHECK(t.size() == 3 * 16);
}

TEST_CASE("feature container round trip") {
  test_util::TempDir dir("fc");
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const FeatureMatrix m = float_matrix(rng, 1 + rng.below(30), 1 + rng.below(70));
    const auto path = dir / ("m" + std::to_string(trial) + ".feat");
    write_features(m, path);
    const FeatureMatrix back = read_features(path);
    CHECK(back == m);
    write_features(back, dir / "again.feat");
    CHECK(bytes_of(path) == bytes_of(dir / "again.feat"));
  }
}

TEST_CASE("feature container byte layout") {
  RowMatrix d(1, 2);
  d << 1.0, -2.0;
  const auto bytes = encode_features(FeatureMatrix({"ab"}, d));
  const std::vector<std::uint8_t> expect = {
      'F', 'E', 'A', 'T', 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 2, 0, 0, 0, 2, 0, 'a', 'b',
      0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
  CHECK(bytes == expect);
}

TEST_CASE("feature container errors") {
  test_util::TempDir dir("fce");
  auto error_of = [&](const std::vector<std::uint8_t>& b) {
    put_bytes(dir / "x.feat", b);
    try {
      read_features(dir / "x.feat");
    } catch (const Error& e) {
      return e;
    }
    FAIL("expected throw");
    return Error(ErrorKind::kUsage, "");
  };

  const Error empty = error_of({});
  CHECK(empty.kind() == ErrorKind::kFormat);
  CHECK(empty.offset() == 0u);

  CHECK(error_of({'F', 'E', 'A', 'X', 1, 0, 0, 0}).offset() == 0u);
  CHECK(error_of({'F', 'E', 'A', 'T', 2, 0, 0, 0}).offset() == 4u);

  // N = 2, D = 3, ids "a" and "b", then only 5 of 6 payload floats.
  std::vector<std::uint8_t> trunc = {'F', 'E', 'A', 'T', 1, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0,
                                     3, 0, 0, 0, 1, 0, 'a', 1, 0, 'b'};
  const std::size_t header = trunc.size();
  trunc.resize(header + 5 * 4, 0);
  const Error t = error_of(trunc);
  CHECK(t.kind() == ErrorKind::kFormat);
  CHECK(std::string(t.what()).find("truncated") != std::string::npos);
  CHECK(t.offset() == trunc.size());

  // Same layout with 6 values but a repeated id.
  std::vector<std::uint8_t> dup = {'F', 'E', 'A', 'T', 1, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0,
                                   3, 0, 0, 0, 1, 0, 'a', 1, 0, 'a'};
  dup.resize(dup.size() + 6 * 4, 0);
  CHECK(error_of(dup).kind() == ErrorKind::kValidation);

  std::vector<std::uint8_t> trailing = dup;
  trailing[25] = 'b';
  trailing.push_back(0);
  CHECK(error_of(trailing).kind() == ErrorKind::kFormat);
}

TEST_CASE("precomputed backend selects rows by id") {
  test_util::TempDir dir("pc");
  Rng rng(6);
  const FeatureMatrix src = float_matrix(rng, 5, 3);
  write_features(src, dir / "src.feat");
  std::vector<NamedImage> want = {{src.ids()[3], {}}, {src.ids()[0], {}}};
  const FeatureMatrix got = extract_features(want, ExtractorSpec::precomputed(dir / "src.feat"));
  CHECK(got.ids() == std::vector<std::string>{src.ids()[3], src.ids()[0]});
  CHECK(got.data().row(0) == src.data().row(3));

  const auto ex = make_extractor(ExtractorSpec::precomputed(dir / "src.feat"));
  CHECK(ex->spec().output_dim == 3);
  CHECK(!ex->spec().fingerprint.empty());
  const ExtractionResult r = extract_features_checked({{"nope", {}}}, *ex);
  REQUIRE(r.failures.size() == 1);
  CHECK(r.failures[0].id == "nope");
}

TEST_CASE("feature meta sidecar") {
  test_util::TempDir dir("meta");
  const auto p = dir / "q.feat";
  CHECK(!read_feature_meta(p).has_value());
  write_feature_meta({"abc", "toy", false, "manifest.json"}, p);
  const auto m = read_feature_meta(p);
  REQUIRE(m.has_value());
  CHECK(m->fingerprint == "abc");
  CHECK(m->contains_target_class == false);
  write_feature_meta({"abc", "toy", std::nullopt, ""}, p);
  CHECK(!read_feature_meta(p)->contains_target_class.has_value());
}

TEST_CASE("png round trip and corrupt input") {
  test_util::TempDir dir("png");
  Rng rng(7);
  for (int c : {1, 3}) {
    const ImageBuffer img = random_image(rng, 13, 9, c);
    write_png(img, dir / "a.png");
    CHECK(read_png(dir / "a.png") == img);
  }
  put_bytes(dir / "bad.png", {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n', 0, 0, 0, 13, 'I', 'H'});
  try {
    read_png(dir / "bad.png");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kFormat);
  }
  put_bytes(dir / "text.png", {'h', 'i'});
  CHECK_THROWS_AS(read_png(dir / "text.png"), Error);
  CHECK_THROWS_AS(read_png(dir / "absent.png"), Error);
}

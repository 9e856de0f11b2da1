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

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>

#include "doctest.h"
#include "removal_eval/error.hpp"
#include "removal_eval/features.hpp"
#include "removal_eval/synthgen.hpp"
#include "test_util.hpp"

using namespace removal_eval;
using test_util::TempDir;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const std::function<void()>& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::kValidation;
}

bool same_off_mask(const ImageBuffer& a, const ImageBuffer& b, const BinaryMask& m) {
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    if (m.bits()[p]) continue;
    for (int c = 0; c < a.channels; ++c) {
      if (a.data[p * a.channels + c] != b.data[p * b.channels + c]) return false;
    }
  }
  return true;
}

double mse(const ImageBuffer& a, const ImageBuffer& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

std::map<std::string, std::string> hash_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = sha256_file_hex(e.path());
  }
  return out;
}

std::size_t count_png(const fs::path& root) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(root)) n += e.path().extension() == ".png";
  return n;
}

}  // namespace

TEST_CASE("scene with no target objects") {
  SceneSpec spec;
  spec.target_fraction = 0.0;
  const ScenePair p = generate_scene_pair(spec, 3);
  CHECK(p.with == p.without);
  CHECK(p.mask.empty());
  CHECK(p.coverage == 0.0);
}

TEST_CASE("scene fixture for seed 42, index 0") {
  const ScenePair p = generate_scene_pair(SceneSpec{}, 0);
  CHECK(p.with.width == 128);
  CHECK(p.with.channels == 3);
  CHECK(p.coverage > 0.0);
  CHECK(p.coverage <= 0.4);
  CHECK(p.mask.count() == 610);
  CHECK(p.coverage == 610.0 / (128 * 128));
}

TEST_CASE("scenes agree off-mask and differ only on the mask") {
  SceneSpec spec;
  for (std::uint64_t i = 0; i < 40; ++i) {
    const ScenePair p = generate_scene_pair(spec, i);
    CHECK(same_off_mask(p.with, p.without, p.mask));
    CHECK(!p.mask.empty());
    CHECK(p.coverage <= spec.max_coverage);
    CHECK(p.coverage == p.mask.coverage());
  }
}

TEST_CASE("scenes are deterministic in seed and index") {
  SceneSpec spec;
  const ScenePair a = generate_scene_pair(spec, 11), b = generate_scene_pair(spec, 11);
  CHECK(a.with == b.with);
  CHECK(a.without == b.without);
  CHECK(a.mask == b.mask);
  CHECK(!(generate_scene_pair(spec, 12).without == a.without));
  spec.seed = 43;
  CHECK(!(generate_scene_pair(spec, 11).without == a.without));
}

TEST_CASE("target count follows the fraction rule") {
  SceneSpec spec;
  spec.min_objects = spec.max_objects = 3;
  spec.target_fraction = 0.01;  // rounds to zero, lifted to one target
  for (std::uint64_t i = 0; i < 5; ++i) CHECK(!generate_scene_pair(spec, i).mask.empty());
}

TEST_CASE("infeasible placement names the scene") {
  SceneSpec spec;
  spec.min_object_edge = 100;
  spec.max_object_edge = 120;
  spec.max_attempts = 5;
  std::string msg;
  CHECK(kind_of([&] { generate_scene_pair(spec, 7); }, &msg) == ErrorKind::kGeneration);
  CHECK(msg.find("scene 7") != std::string::npos);

  SceneSpec bad;
  bad.target_fraction = 2.0;
  CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::kValidation);
}

TEST_CASE("remover definitions") {
  const ScenePair p = generate_scene_pair(SceneSpec{}, 5);
  CHECK(apply_remover(p.with, p.without, p.mask, RemovalMethod::kGtPaste) == p.without);
  CHECK(apply_remover(p.with, p.without, p.mask, RemovalMethod::kNoRemoval) == p.with);
  const ImageBuffer n1 = apply_remover(p.with, p.without, p.mask, RemovalMethod::kNoiseFill, 1);
  CHECK(n1 == apply_remover(p.with, p.without, p.mask, RemovalMethod::kNoiseFill, 1));
  CHECK(!(n1 == apply_remover(p.with, p.without, p.mask, RemovalMethod::kNoiseFill, 2)));
  CHECK(parse_method("mean_fill") == RemovalMethod::kMeanFill);
  CHECK(kind_of([] { parse_method("lama"); }) == ErrorKind::kUsage);
  CHECK(kind_of([&] { apply_remover(p.with, ImageBuffer(4, 4, 3), p.mask, RemovalMethod::kGtPaste); }) ==
        ErrorKind::kValidation);
}

TEST_CASE("mean_fill on a constant background") {
  ImageBuffer without(20, 20, 3, 0);
  for (std::size_t p = 0; p < without.pixel_count(); ++p) {
    without.data[p * 3] = 90;
    without.data[p * 3 + 1] = 120;
    without.data[p * 3 + 2] = 33;
  }
  ImageBuffer with = without;
  BinaryMask mask(20, 20);
  for (int r = 5; r < 12; ++r) {
    for (int c = 4; c < 9; ++c) {
      mask.set(r, c);
      for (int k = 0; k < 3; ++k) with.data[(r * 20 + c) * 3 + k] = 250;
    }
  }
  const ImageBuffer out = apply_remover(with, without, mask, RemovalMethod::kMeanFill);
  CHECK(out == without);
}

TEST_CASE("removers never touch off-mask pixels") {
  SceneSpec spec;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const ScenePair p = generate_scene_pair(spec, i);
    for (int k : {0, 3, 10}) {
      const BinaryMask m = dilate(p.mask, k);
      for (RemovalMethod method : all_methods()) {
        CHECK(same_off_mask(apply_remover(p.with, p.without, m, method, i), p.with, m));
      }
    }
  }
}

TEST_CASE("pixel error ordering over 100 scenes") {
  SceneSpec spec;
  double gt = 0, mean = 0, none = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const ScenePair p = generate_scene_pair(spec, i);
    gt += mse(apply_remover(p.with, p.without, p.mask, RemovalMethod::kGtPaste), p.without);
    mean += mse(apply_remover(p.with, p.without, p.mask, RemovalMethod::kMeanFill), p.without);
    none += mse(apply_remover(p.with, p.without, p.mask, RemovalMethod::kNoRemoval), p.without);
  }
  CHECK(gt == 0.0);
  CHECK(gt < mean);
  CHECK(mean < none);
}

TEST_CASE("emit_benchmark with no scenes") {
  TempDir dir("bench0");
  const fs::path index = emit_benchmark(SceneSpec{}, 0, dir.path());
  CHECK(fs::exists(index));
  CHECK(count_png(dir.path()) == 0);
  CHECK(read_manifest(dir / "manifest_with.json").empty());
  CHECK(read_manifest(dir / "manifest_gt_paste_k0.json").empty());
}

TEST_CASE("emit_benchmark counting contract and determinism") {
  TempDir a("benchA"), b("benchB");
  BenchmarkOptions opts;
  const fs::path index = emit_benchmark(SceneSpec{}, 10, a.path(), opts);
  const std::size_t methods = opts.methods.size(), kernels = opts.kernels.size();
  CHECK(count_png(a / "with") + count_png(a / "without") + count_png(a / "outputs") ==
        10 * (2 + methods * kernels));
  CHECK(count_png(a / "masks") == 10 * kernels);

  const auto manifest = read_manifest(a / "manifest_mean_fill_k4.json");
  REQUIRE(manifest.size() == 10);
  for (const auto& e : manifest) {
    CHECK(fs::exists(a / e.image_path));
    CHECK(fs::exists(a / e.mask_path));
    CHECK(e.kernel_size == 4);
    CHECK(e.role == "query");
  }
  const ScenePair p0 = generate_scene_pair(SceneSpec{}, 0);
  CHECK(manifest[0].coverage == p0.coverage);
  CHECK(BinaryMask::from_image(read_png(a / "masks/k0/scene_00000.png")).same_pixels(p0.mask));
  CHECK(BinaryMask::from_image(read_png(a / "masks/k4/scene_00000.png")).same_pixels(dilate(p0.mask, 4)));
  CHECK(read_png(a / "outputs/gt_paste_k0/scene_00000.png") == p0.without);
  CHECK(read_manifest(a / "manifest_without.json")[3].role == "comparison");

  opts.threads = 3;
  emit_benchmark(SceneSpec{}, 10, b.path(), opts);
  CHECK(hash_tree(a.path()) == hash_tree(b.path()));
  emit_benchmark(SceneSpec{}, 10, a.path(), BenchmarkOptions{});
  CHECK(hash_tree(a.path()) == hash_tree(b.path()));
  CHECK(index.filename() == "benchmark.json");
}

TEST_CASE("emit_benchmark offset indices and bad destinations") {
  TempDir dir("benchC");
  BenchmarkOptions opts;
  opts.first_index = 500;
  opts.methods = {RemovalMethod::kNoRemoval};
  opts.kernels = {0};
  emit_benchmark(SceneSpec{}, 2, dir.path(), opts);
  CHECK(read_png(dir / "with/scene_00501.png") == generate_scene_pair(SceneSpec{}, 501).with);

  { std::ofstream(dir / "file") << "x"; }
  CHECK(kind_of([&] { emit_benchmark(SceneSpec{}, 1, dir / "file" / "sub"); }) == ErrorKind::kIo);
  opts.kernels = {2, 2};
  CHECK(kind_of([&] { emit_benchmark(SceneSpec{}, 1, dir / "x", opts); }) == ErrorKind::kUsage);
}

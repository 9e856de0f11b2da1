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

#include "removal_eval/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "json.hpp"
#include "removal_eval/error.hpp"
#include "removal_eval/parallel.hpp"
#include "removal_eval/random.hpp"

namespace removal_eval {

namespace {

// Smoothly interpolated lattice noise in [-1, 1].
std::vector<double> value_noise(Rng& rng, int w, int h, int cell, int octaves, double persistence) {
  std::vector<double> field(static_cast<std::size_t>(w) * h, 0.0);
  double amp = 1.0, total = 0.0;
  for (int o = 0; o < octaves; ++o) {
    const int c = std::max(1, cell >> o);
    const int lw = w / c + 2, lh = h / c + 2;
    std::vector<double> lattice(static_cast<std::size_t>(lw) * lh);
    for (double& v : lattice) v = rng.uniform(-1.0, 1.0);
    for (int y = 0; y < h; ++y) {
      const double fy = (y + 0.5) / c;
      const int iy = static_cast<int>(fy);
      double ty = fy - iy;
      ty = ty * ty * (3.0 - 2.0 * ty);
      for (int x = 0; x < w; ++x) {
        const double fx = (x + 0.5) / c;
        const int ix = static_cast<int>(fx);
        double tx = fx - ix;
        tx = tx * tx * (3.0 - 2.0 * tx);
        const double a = lattice[iy * lw + ix], b = lattice[iy * lw + ix + 1];
        const double d = lattice[(iy + 1) * lw + ix], e = lattice[(iy + 1) * lw + ix + 1];
        const double top = a + (b - a) * tx, bottom = d + (e - d) * tx;
        field[static_cast<std::size_t>(y) * w + x] += amp * (top + (bottom - top) * ty);
      }
    }
    total += amp;
    amp *= persistence;
  }
  for (double& v : field) v /= total;
  return field;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

struct ObjectSpec {
  int x0 = 0, y0 = 0, w = 0, h = 0;
  bool ellipse = false;
  double color[3] = {0, 0, 0};
  std::vector<double> texture;  // w * h
};

ObjectSpec random_object(Rng& rng, const SceneSpec& spec, bool target) {
  ObjectSpec o;
  const int max_w = std::min(spec.max_object_edge, spec.width);
  const int max_h = std::min(spec.max_object_edge, spec.height);
  o.w = static_cast<int>(rng.between(spec.min_object_edge, max_w));
  o.h = static_cast<int>(rng.between(spec.min_object_edge, max_h));
  o.x0 = static_cast<int>(rng.between(0, spec.width - o.w));
  o.y0 = static_cast<int>(rng.between(0, spec.height - o.h));
  o.ellipse = rng.below(2) == 1;
  if (target) {
    o.color[0] = rng.uniform(225, 255);
    o.color[1] = rng.uniform(0, 31);
    o.color[2] = rng.uniform(0, 31);
  } else {
    o.color[0] = rng.uniform(10, 50);
    o.color[1] = rng.uniform(60, 120);
    o.color[2] = rng.uniform(180, 240);
  }
  o.texture = value_noise(rng, o.w, o.h, 8, 2, 0.5);
  return o;
}

bool covers(const ObjectSpec& o, int x, int y) {
  if (x < o.x0 || y < o.y0 || x >= o.x0 + o.w || y >= o.y0 + o.h) return false;
  if (!o.ellipse) return true;
  const double rx = o.w / 2.0, ry = o.h / 2.0;
  const double dx = (x + 0.5 - (o.x0 + rx)) / rx, dy = (y + 0.5 - (o.y0 + ry)) / ry;
  return dx * dx + dy * dy <= 1.0;
}

void draw(ImageBuffer& img, const ObjectSpec& o, double texture_amp, BinaryMask* footprint) {
  for (int y = o.y0; y < o.y0 + o.h; ++y) {
    for (int x = o.x0; x < o.x0 + o.w; ++x) {
      if (!covers(o, x, y)) continue;
      const double t = texture_amp * o.texture[static_cast<std::size_t>(y - o.y0) * o.w + (x - o.x0)];
      for (int c = 0; c < 3; ++c) img.data[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] = to_byte(o.color[c] + t);
      if (footprint) footprint->set(y, x);
    }
  }
}

void require_same_frame(const ImageBuffer& a, const ImageBuffer& b, const BinaryMask& m) {
  a.validate();
  b.validate();
  if (a.width != b.width || a.height != b.height || a.channels != b.channels || m.width() != a.width ||
      m.height() != a.height) {
    fail(ErrorKind::kValidation, "remover inputs differ in size");
  }
}

}  // namespace

void SceneSpec::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::kValidation, "scene spec: " + what); };
  if (width < 16 || height < 16) bad("width and height must be at least 16");
  if (noise_octaves < 1 || noise_cell < 1) bad("noise octaves and cell must be positive");
  if (!(noise_persistence > 0.0) || !(noise_amplitude >= 0.0) || !(object_texture >= 0.0) || !(target_texture >= 0.0)) {
    bad("noise persistence must be positive and amplitudes non-negative");
  }
  if (min_objects < 0 || max_objects < min_objects) bad("object count range must satisfy 0 <= min <= max");
  if (min_object_edge < 2 || max_object_edge < min_object_edge) bad("object edge range must satisfy 2 <= min <= max");
  if (min_object_edge > std::min(width, height)) bad("min object edge exceeds the frame");
  if (!(target_fraction >= 0.0 && target_fraction <= 1.0)) bad("target fraction must lie in [0, 1]");
  if (!(max_coverage > 0.0 && max_coverage <= 1.0)) bad("max coverage must lie in (0, 1]");
  if (max_attempts < 1) bad("max attempts must be positive");
}

ScenePair generate_scene_pair(const SceneSpec& spec, std::uint64_t index) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, index));
  const int w = spec.width, h = spec.height;

  ImageBuffer without(w, h, 3);
  const double base[3] = {rng.uniform(100, 140), rng.uniform(110, 150), rng.uniform(90, 130)};
  const auto shared = value_noise(rng, w, h, spec.noise_cell, spec.noise_octaves, spec.noise_persistence);
  for (int c = 0; c < 3; ++c) {
    const auto own = value_noise(rng, w, h, spec.noise_cell, spec.noise_octaves, spec.noise_persistence);
    for (std::size_t p = 0; p < shared.size(); ++p) {
      without.data[p * 3 + c] = to_byte(base[c] + spec.noise_amplitude * (shared[p] + 0.3 * own[p]));
    }
  }

  const int n = static_cast<int>(rng.between(spec.min_objects, spec.max_objects));
  int targets = 0;
  if (spec.target_fraction > 0.0 && n > 0) {
    targets = std::max(1, static_cast<int>(std::lround(spec.target_fraction * n)));
  }
  for (int i = 0; i < n - targets; ++i) draw(without, random_object(rng, spec, false), spec.object_texture, nullptr);

  ScenePair out;
  out.without = without;
  out.with = without;
  out.mask = BinaryMask(w, h);
  if (targets == 0) return out;

  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    std::vector<ObjectSpec> objs;
    BinaryMask footprint(w, h);
    for (int i = 0; i < targets; ++i) {
      objs.push_back(random_object(rng, spec, true));
      for (int y = objs.back().y0; y < objs.back().y0 + objs.back().h; ++y) {
        for (int x = objs.back().x0; x < objs.back().x0 + objs.back().w; ++x) {
          if (covers(objs.back(), x, y)) footprint.set(y, x);
        }
      }
    }
    const double cov = footprint.coverage();
    if (cov <= 0.0 || cov > spec.max_coverage) continue;
    for (const auto& o : objs) draw(out.with, o, spec.target_texture, &out.mask);
    out.coverage = out.mask.coverage();
    return out;
  }
  fail(ErrorKind::kGeneration, "scene " + std::to_string(index) + ": no target placement with coverage in (0, " +
                                   std::to_string(spec.max_coverage) + "] after " +
                                   std::to_string(spec.max_attempts) + " attempts");
}

std::string to_string(RemovalMethod m) {
  switch (m) {
    case RemovalMethod::kGtPaste: return "gt_paste";
    case RemovalMethod::kMeanFill: return "mean_fill";
    case RemovalMethod::kNoiseFill: return "noise_fill";
    case RemovalMethod::kNoRemoval: return "no_removal";
  }
  return "unknown";
}

RemovalMethod parse_method(const std::string& name) {
  for (RemovalMethod m : all_methods()) {
    if (to_string(m) == name) return m;
  }
  fail(ErrorKind::kUsage, "unknown removal method \"" + name + "\" (gt_paste, mean_fill, noise_fill, no_removal)");
}

std::vector<RemovalMethod> all_methods() {
  return {RemovalMethod::kGtPaste, RemovalMethod::kMeanFill, RemovalMethod::kNoiseFill, RemovalMethod::kNoRemoval};
}

ImageBuffer apply_remover(const ImageBuffer& with, const ImageBuffer& without, const BinaryMask& mask,
                          RemovalMethod method, std::uint64_t noise_seed, int noise_amplitude) {
  require_same_frame(with, without, mask);
  ImageBuffer out = with;
  const int ch = with.channels;
  const std::size_t pixels = with.pixel_count();
  if (method == RemovalMethod::kNoRemoval) return out;
  if (method == RemovalMethod::kGtPaste) {
    for (std::size_t p = 0; p < pixels; ++p) {
      if (!mask.bits()[p]) continue;
      for (int c = 0; c < ch; ++c) out.data[p * ch + c] = without.data[p * ch + c];
    }
    return out;
  }

  std::vector<double> mean(ch, 128.0);
  std::vector<std::uint64_t> sum(ch, 0);
  std::size_t off = 0;
  for (std::size_t p = 0; p < pixels; ++p) {
    if (mask.bits()[p]) continue;
    ++off;
    for (int c = 0; c < ch; ++c) sum[c] += with.data[p * ch + c];
  }
  if (off > 0) {
    for (int c = 0; c < ch; ++c) mean[c] = static_cast<double>(sum[c]) / static_cast<double>(off);
  }
  Rng rng(noise_seed);
  for (std::size_t p = 0; p < pixels; ++p) {
    if (!mask.bits()[p]) continue;
    for (int c = 0; c < ch; ++c) {
      double v = mean[c];
      if (method == RemovalMethod::kNoiseFill) v += static_cast<double>(rng.between(-noise_amplitude, noise_amplitude));
      out.data[p * ch + c] = to_byte(v);
    }
  }
  return out;
}

std::string scene_id(std::uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%05llu", static_cast<unsigned long long>(index));
  return buf;
}

std::filesystem::path emit_benchmark(const SceneSpec& spec, std::size_t n_scenes,
                                     const std::filesystem::path& out_dir, const BenchmarkOptions& options) {
  namespace fs = std::filesystem;
  spec.validate();
  if (options.methods.empty() || options.kernels.empty()) fail(ErrorKind::kUsage, "need at least one method and kernel");
  if (std::set<RemovalMethod>(options.methods.begin(), options.methods.end()).size() != options.methods.size()) {
    fail(ErrorKind::kUsage, "duplicate removal method");
  }
  if (std::set<int>(options.kernels.begin(), options.kernels.end()).size() != options.kernels.size()) {
    fail(ErrorKind::kUsage, "duplicate kernel size");
  }
  for (int k : options.kernels) {
    if (k < 0) fail(ErrorKind::kUsage, "kernel sizes must be non-negative");
  }

  auto kdir = [](int k) { return "k" + std::to_string(k); };
  auto variant = [&](RemovalMethod m, int k) { return to_string(m) + "_" + kdir(k); };
  std::vector<std::string> dirs{"with", "without"};
  for (int k : options.kernels) dirs.push_back("masks/" + kdir(k));
  for (RemovalMethod m : options.methods) {
    for (int k : options.kernels) dirs.push_back("outputs/" + variant(m, k));
  }
  for (const auto& d : dirs) {
    std::error_code ec;
    fs::create_directories(out_dir / d, ec);
    if (ec) fail(ErrorKind::kIo, "cannot create " + (out_dir / d).string() + ": " + ec.message());
  }

  std::vector<double> coverage(n_scenes);
  parallel_for(n_scenes, options.threads, [&](std::size_t i) {
    const std::uint64_t index = options.first_index + i;
    const std::string id = scene_id(index);
    const ScenePair pair = generate_scene_pair(spec, index);
    coverage[i] = pair.coverage;
    write_png(pair.with, out_dir / "with" / (id + ".png"));
    write_png(pair.without, out_dir / "without" / (id + ".png"));
    const std::uint64_t noise_seed = derive_seed(derive_seed(spec.seed, index), 1);
    for (int k : options.kernels) {
      const BinaryMask m = dilate(pair.mask, k);
      write_png(m.to_image(), out_dir / "masks" / kdir(k) / (id + ".png"));
      for (RemovalMethod method : options.methods) {
        write_png(apply_remover(pair.with, pair.without, m, method, noise_seed),
                  out_dir / "outputs" / variant(method, k) / (id + ".png"));
      }
    }
  });

  auto entries = [&](const std::string& image_dir, const std::string& mask_dir, const std::string& role, int k,
                     bool with_coverage) {
    std::vector<ManifestEntry> out;
    for (std::size_t i = 0; i < n_scenes; ++i) {
      const std::string id = scene_id(options.first_index + i);
      out.push_back({id, image_dir + "/" + id + ".png", mask_dir.empty() ? "" : mask_dir + "/" + id + ".png", role,
                     with_coverage ? coverage[i] : 0.0, k});
    }
    return out;
  };

  nlohmann::ordered_json index;
  index["spec"] = {{"width", spec.width},
                   {"height", spec.height},
                   {"noise_octaves", spec.noise_octaves},
                   {"noise_cell", spec.noise_cell},
                   {"noise_persistence", spec.noise_persistence},
                   {"noise_amplitude", spec.noise_amplitude},
                   {"min_objects", spec.min_objects},
                   {"max_objects", spec.max_objects},
                   {"min_object_edge", spec.min_object_edge},
                   {"max_object_edge", spec.max_object_edge},
                   {"object_texture", spec.object_texture},
                   {"target_texture", spec.target_texture},
                   {"target_fraction", spec.target_fraction},
                   {"max_coverage", spec.max_coverage},
                   {"max_attempts", spec.max_attempts},
                   {"seed", spec.seed}};
  index["n_scenes"] = n_scenes;
  index["first_index"] = options.first_index;
  nlohmann::ordered_json methods = nlohmann::ordered_json::array();
  for (RemovalMethod m : options.methods) methods.push_back(to_string(m));
  index["methods"] = methods;
  index["kernels"] = options.kernels;

  const bool has_base = std::find(options.kernels.begin(), options.kernels.end(), 0) != options.kernels.end();
  write_manifest(entries("with", has_base ? "masks/k0" : "", "query", 0, true),
                 out_dir / "manifest_with.json");
  write_manifest(entries("without", "", "comparison", 0, false), out_dir / "manifest_without.json");
  nlohmann::ordered_json manifests;
  manifests["with"] = "manifest_with.json";
  manifests["without"] = "manifest_without.json";
  nlohmann::ordered_json variants = nlohmann::ordered_json::array();
  for (RemovalMethod m : options.methods) {
    for (int k : options.kernels) {
      const std::string name = "manifest_" + variant(m, k) + ".json";
      write_manifest(entries("outputs/" + variant(m, k), "masks/" + kdir(k), "query", k, true), out_dir / name);
      variants.push_back({{"method", to_string(m)}, {"kernel_size", k}, {"manifest", name}});
    }
  }
  manifests["variants"] = variants;
  index["manifests"] = manifests;

  const fs::path index_path = out_dir / "benchmark.json";
  std::FILE* f = std::fopen(index_path.c_str(), "wb");
  if (!f) fail(ErrorKind::kIo, "cannot write " + index_path.string());
  const std::string text = index.dump(2) + "\n";
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  if (std::fclose(f) != 0 || !ok) fail(ErrorKind::kIo, "write failed for " + index_path.string());
  return index_path;
}

}  // namespace removal_eval

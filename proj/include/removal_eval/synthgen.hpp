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

#include "removal_eval/dataset.hpp"
#include "removal_eval/image.hpp"

namespace removal_eval {

// Procedural paired scenes: a value-noise background with textured rectangles and ellipses.
// Target objects use a red palette and non-target objects a blue one.
struct SceneSpec {
  int width = 128;
  int height = 128;
  // Background value noise: octaves halve the lattice cell and scale amplitude by persistence.
  int noise_octaves = 4;
  int noise_cell = 32;
  double noise_persistence = 0.5;
  double noise_amplitude = 60.0;
  // Objects per scene, inclusive.
  int min_objects = 2;
  int max_objects = 5;
  int min_object_edge = 12;
  int max_object_edge = 48;
  // Per-object texture amplitude (value noise, 8-pixel cells) for non-target and target objects.
  double object_texture = 30.0;
  double target_texture = 4.0;
  // Share of objects drawn from the target class; at least one target when > 0.
  double target_fraction = 0.4;
  // Upper bound on target-mask coverage.
  double max_coverage = 0.4;
  int max_attempts = 100;
  std::uint64_t seed = 42;

  void validate() const;
};

struct ScenePair {
  ImageBuffer with;
  ImageBuffer without;
  BinaryMask mask;  // target-object footprint
  double coverage = 0.0;
};

// Pure function of (spec, index).
ScenePair generate_scene_pair(const SceneSpec& spec, std::uint64_t index);

enum class RemovalMethod { kGtPaste, kMeanFill, kNoiseFill, kNoRemoval };

std::string to_string(RemovalMethod m);
RemovalMethod parse_method(const std::string& name);
std::vector<RemovalMethod> all_methods();

// Rewrites only the on-pixels of `mask`:
//   gt_paste   copies `without`,
//   mean_fill  writes the mean color of the off-mask pixels of `with`,
//   noise_fill writes that mean color plus seeded uniform noise in [-noise_amplitude, +noise_amplitude],
//   no_removal leaves `with` unchanged.
ImageBuffer apply_remover(const ImageBuffer& with, const ImageBuffer& without, const BinaryMask& mask,
                          RemovalMethod method, std::uint64_t noise_seed = 0, int noise_amplitude = 48);

struct BenchmarkOptions {
  std::vector<RemovalMethod> methods = all_methods();
  std::vector<int> kernels = {0, 2, 4, 6, 8, 10};
  std::uint64_t first_index = 0;
  int threads = 1;
};

// Writes under out_dir:
//   with/<id>.png, without/<id>.png, masks/k<k>/<id>.png,
//   outputs/<method>_k<k>/<id>.png,
//   manifest_with.json, manifest_without.json, manifest_<method>_k<k>.json,
//   benchmark.json (spec echo and manifest list; returned).
// Manifest paths are relative to out_dir. Output bytes depend only on the arguments.
std::filesystem::path emit_benchmark(const SceneSpec& spec, std::size_t n_scenes,
                                     const std::filesystem::path& out_dir,
                                     const BenchmarkOptions& options = {});

std::string scene_id(std::uint64_t index);

}  // namespace removal_eval

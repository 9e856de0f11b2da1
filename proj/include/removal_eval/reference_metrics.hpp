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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "removal_eval/image.hpp"

namespace removal_eval {

struct ImagePair {
  std::string id;
  ImageBuffer reference;
  ImageBuffer candidate;
};

// 10 log10(255^2 / MSE) over all samples; +infinity when the images are identical.
double psnr(const ImageBuffer& reference, const ImageBuffer& candidate);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

// Mean SSIM over valid (unpadded) 11x11 Gaussian windows, averaged over channels.
double ssim(const ImageBuffer& reference, const ImageBuffer& candidate);

struct PairedScores {
  std::vector<std::string> ids;
  std::vector<double> psnr;
  std::vector<double> ssim;
  // Means over pairs. A single identical pair makes mean_psnr infinite.
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

// Order of the outputs follows `pairs` regardless of `threads`.
PairedScores compute_paired_metrics(const std::vector<ImagePair>& pairs, int threads = 1);

// CSV with header "id,distance". The ids must equal `expected_ids` as a set.
std::map<std::string, double> parse_pair_distances(const std::string& csv_text,
                                                   const std::vector<std::string>& expected_ids);
std::map<std::string, double> import_pair_distances(const std::filesystem::path& path,
                                                    const std::vector<std::string>& expected_ids);
double mean_distance(const std::map<std::string, double>& distances);

}  // namespace removal_eval

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
#include <vector>

#include "removal_eval/discriminative.hpp"
#include "removal_eval/stats.hpp"

namespace removal_eval {

namespace metric {
inline constexpr const char* kFid = "fid";
inline constexpr const char* kFidStar = "fid_star";
inline constexpr const char* kUIds = "u_ids";
inline constexpr const char* kUIdsStar = "u_ids_star";
inline constexpr const char* kPIds = "p_ids";
inline constexpr const char* kPsnr = "psnr";
inline constexpr const char* kSsim = "ssim";
inline constexpr const char* kLpipsMean = "lpips(mean)";
}  // namespace metric

// Feature rows plus the provenance needed by the protocol checks.
struct FeatureSet {
  FeatureMatrix features;
  std::string fingerprint;
  // Whether any image of the set shows the target class; nullopt when undeclared.
  std::optional<bool> contains_target_class;
  std::string source;
};

// Reads a feature container and its metadata sidecar, if present.
FeatureSet load_feature_set(const std::filesystem::path& path);

struct QueryDescriptor {
  std::size_t count = 0;
  int kernel_size = 0;
  std::optional<double> min_cov;
  std::optional<double> max_cov;
  std::string source;
  bool operator==(const QueryDescriptor&) const = default;
};

struct ComparisonDescriptor {
  std::size_t count = 0;
  std::optional<bool> contains_target_class;
  std::string source;
  bool operator==(const ComparisonDescriptor&) const = default;
};

struct MetricReport {
  std::string label;
  QueryDescriptor query;
  ComparisonDescriptor comparison;
  std::string fingerprint;
  std::map<std::string, double> metrics;
  SvmConfig svm;
  // Diagonal loading applied by the Frechet retry path, 0 when unused.
  double jitter_query = 0.0;
  double jitter_comparison = 0.0;
  // Free-form settings echoed for comparability (e.g. SSIM window).
  std::map<std::string, std::string> settings;
};

// Non-finite metric values serialize as the strings "inf", "-inf" and "nan".
std::string report_to_json(const MetricReport& report);
MetricReport report_from_json(const std::string& text);
void write_report(const MetricReport& report, const std::filesystem::path& path);
MetricReport read_report(const std::filesystem::path& path);

// Frechet distance and SVM unseparability of `query` against `comparison`. With `starred` the
// results are stored as fid_star / u_ids_star and the comparison set must be declared free of
// the target class.
MetricReport evaluate_unpaired(const FeatureSet& query, const FeatureSet& comparison,
                               const SvmConfig& cfg, bool starred, const std::string& label = "");

bool lower_is_better(const std::string& metric_name);

struct MetricRanking {
  std::string metric;
  bool lower_is_better = false;
  std::vector<std::string> order;                // best first
  std::vector<std::vector<std::string>> ties;    // groups of labels with equal values
};

// One ranking per metric present in any report. Equal values are ordered by label.
std::vector<MetricRanking> rank_removers(const std::vector<MetricReport>& reports);
std::string rankings_to_json(const std::vector<MetricRanking>& rankings);

// 100 * sample standard deviation / mean; 0 when every value is equal.
double relative_std_percent(const std::vector<double>& values);

struct StabilityRow {
  std::string metric;
  std::size_t size = 0;
  double rsd_percent = 0.0;
  int iterations = 0;
  double mean = 0.0;
  bool operator==(const StabilityRow&) const = default;
};

struct StabilityTable {
  std::vector<StabilityRow> rows;
  bool operator==(const StabilityTable&) const = default;
};

struct StabilityOptions {
  std::vector<std::size_t> sizes;
  int iterations = 20;
  std::uint64_t seed = 0;
  SvmConfig svm;
  bool include_u_ids = true;
  int threads = 1;
};

// For each size, `iterations` subsamples of the query rows drawn without replacement with
// Rng(seed + iteration); the comparison set stays fixed.
StabilityTable subsample_stability(const FeatureMatrix& query, const FeatureMatrix& comparison,
                                   const StabilityOptions& options);

// Header "metric,size,rsd_percent,iterations".
std::string stability_to_csv(const StabilityTable& table);

}  // namespace removal_eval

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

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include <Eigen/Dense>

#include "removal_eval/random.hpp"
#include "removal_eval/stats.hpp"

namespace test_util {

inline std::vector<std::string> make_ids(std::size_t n, const std::string& prefix = "r") {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
  return ids;
}

inline removal_eval::RowMatrix gaussian_rows(removal_eval::Rng& rng, std::size_t n, std::size_t d,
                                             double scale = 1.0) {
  removal_eval::RowMatrix m(n, d);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * rng.normal();
  return m;
}

inline removal_eval::FeatureMatrix gaussian_features(removal_eval::Rng& rng, std::size_t n,
                                                     std::size_t d,
                                                     const std::string& prefix = "r") {
  return removal_eval::FeatureMatrix(make_ids(n, prefix), gaussian_rows(rng, n, d));
}

// B B^T / d + 0.1 I, symmetrized explicitly.
inline Eigen::MatrixXd random_spd(removal_eval::Rng& rng, int d) {
  Eigen::MatrixXd b(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) b(i, j) = rng.normal();
  Eigen::MatrixXd a = b * b.transpose() / d + 0.1 * Eigen::MatrixXd::Identity(d, d);
  return 0.5 * (a + a.transpose());
}

inline removal_eval::GaussianStats random_stats(removal_eval::Rng& rng, int d) {
  removal_eval::GaussianStats s;
  s.mean = Eigen::VectorXd(d);
  for (int i = 0; i < d; ++i) s.mean(i) = rng.normal();
  s.cov = random_spd(rng, d);
  s.n_samples = 100;
  return s;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("removal_eval_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace test_util

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

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace removal_eval {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// N x D activation vectors, one row per image, rows addressed by unique ids.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;

  // Validates shape, id uniqueness and finiteness; throws Error on violation.
  FeatureMatrix(std::vector<std::string> ids, RowMatrix data);

  std::size_t rows() const { return ids_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(data_.cols()); }

  const std::vector<std::string>& ids() const { return ids_; }
  const RowMatrix& data() const { return data_; }

  // Row index for an id, or -1.
  std::ptrdiff_t find(const std::string& id) const;

  // Rows at the given indices, in that order.
  FeatureMatrix subset(const std::vector<std::size_t>& rows) const;

  bool operator==(const FeatureMatrix& other) const;

 private:
  std::vector<std::string> ids_;
  RowMatrix data_;
};

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t n_samples = 0;

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
};

// Per-column mean and unbiased (N - 1) covariance.
GaussianStats compute_gaussian_stats(const FeatureMatrix& features);

struct SqrtmOptions {
  // Max |a - a^T| relative to max |a|.
  double symmetry_tol = 1e-12;
  // Eigenvalues below -clamp_rel * (largest eigenvalue) are rejected; the rest are clamped at 0.
  double clamp_rel = 1e-8;
};

// Symmetric square root of a symmetric PSD matrix via eigendecomposition.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& a, const SqrtmOptions& options = {});

struct FrechetResult {
  double distance = 0.0;
  // Diagonal loading added to each covariance on the retry path, 0 when unused.
  double jitter_p = 0.0;
  double jitter_q = 0.0;

  bool jittered() const { return jitter_p != 0.0 || jitter_q != 0.0; }
};

// ||mu_p - mu_q||^2 + tr(S_p + S_q - 2 (S_p S_q)^{1/2}).
//
// The cross term is evaluated as tr sqrtm(S_p^{1/2} S_q S_p^{1/2}). If that product is indefinite
// beyond tolerance, both covariances get 1e-6 * mean(diag) added to their diagonal and the
// computation is retried once; a second failure raises kNumerical.
FrechetResult frechet_distance_detailed(const GaussianStats& p, const GaussianStats& q);

double frechet_distance(const GaussianStats& p, const GaussianStats& q);

}  // namespace removal_eval

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

#include "removal_eval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "removal_eval/error.hpp"

namespace removal_eval {

FeatureMatrix::FeatureMatrix(std::vector<std::string> ids, RowMatrix data)
    : ids_(std::move(ids)), data_(std::move(data)) {
  if (ids_.empty() || data_.rows() == 0) {
    fail(ErrorKind::kValidation, "feature matrix needs at least one row");
  }
  if (data_.cols() == 0) fail(ErrorKind::kValidation, "feature matrix needs at least one column");
  if (static_cast<Eigen::Index>(ids_.size()) != data_.rows()) {
    fail(ErrorKind::kValidation, "id count " + std::to_string(ids_.size()) +
                                     " does not match row count " + std::to_string(data_.rows()));
  }
  std::unordered_set<std::string> seen;
  seen.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!seen.insert(ids_[i]).second) fail(ErrorKind::kValidation, "duplicate id '" + ids_[i] + "'");
    if (!data_.row(static_cast<Eigen::Index>(i)).allFinite()) {
      fail(ErrorKind::kValidation, "non-finite value in row '" + ids_[i] + "'");
    }
  }
}

std::ptrdiff_t FeatureMatrix::find(const std::string& id) const {
  auto it = std::find(ids_.begin(), ids_.end(), id);
  return it == ids_.end() ? -1 : std::distance(ids_.begin(), it);
}

FeatureMatrix FeatureMatrix::subset(const std::vector<std::size_t>& rows) const {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  RowMatrix data(static_cast<Eigen::Index>(rows.size()), data_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ids.push_back(ids_.at(rows[i]));
    data.row(static_cast<Eigen::Index>(i)) = data_.row(static_cast<Eigen::Index>(rows[i]));
  }
  return FeatureMatrix(std::move(ids), std::move(data));
}

bool FeatureMatrix::operator==(const FeatureMatrix& other) const {
  return ids_ == other.ids_ && data_.rows() == other.data_.rows() &&
         data_.cols() == other.data_.cols() && data_ == other.data_;
}

GaussianStats compute_gaussian_stats(const FeatureMatrix& features) {
  const auto n = static_cast<Eigen::Index>(features.rows());
  if (n < 2) {
    fail(ErrorKind::kDegenerateInput,
         "covariance needs at least 2 samples, got " + std::to_string(n));
  }
  const RowMatrix& x = features.data();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!x.row(i).allFinite()) {
      fail(ErrorKind::kValidation,
           "non-finite value in row '" + features.ids()[static_cast<std::size_t>(i)] + "'");
    }
  }

  GaussianStats stats;
  stats.n_samples = static_cast<std::size_t>(n);
  stats.mean = x.colwise().mean().transpose();
  const RowMatrix centered = x.rowwise() - stats.mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  stats.cov = 0.5 * (cov + cov.transpose());
  return stats;
}

namespace {

void check_symmetric(const Eigen::MatrixXd& a, double tol) {
  if (a.rows() != a.cols()) {
    fail(ErrorKind::kValidation, "matrix is not square (" + std::to_string(a.rows()) + "x" +
                                     std::to_string(a.cols()) + ")");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > tol * scale) {
    std::ostringstream msg;
    msg << "matrix is not symmetric (max asymmetry " << asym << ")";
    fail(ErrorKind::kValidation, msg.str());
  }
}

// Eigenvalues of a symmetric matrix checked against the relative PSD threshold.
Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> psd_eigen(const Eigen::MatrixXd& a, double clamp_rel) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success) {
    fail(ErrorKind::kNumerical, "symmetric eigendecomposition did not converge");
  }
  const Eigen::VectorXd& ev = solver.eigenvalues();
  if (ev.size() > 0) {
    const double largest = std::max(0.0, ev.maxCoeff());
    const double smallest = ev.minCoeff();
    if (smallest < -clamp_rel * largest || (largest == 0.0 && smallest < 0.0)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "eigenvalue " << smallest << " below threshold " << -clamp_rel * largest;
      fail(ErrorKind::kNotPsd, msg.str());
    }
  }
  return solver;
}

Eigen::MatrixXd sqrt_from_eigen(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& solver) {
  const Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd& v = solver.eigenvectors();
  Eigen::MatrixXd s = v * roots.asDiagonal() * v.transpose();
  return 0.5 * (s + s.transpose());
}

double mean_diag(const Eigen::MatrixXd& m) {
  return m.rows() == 0 ? 0.0 : m.diagonal().mean();
}

double frechet_once(const GaussianStats& p, const Eigen::MatrixXd& cov_p,
                    const GaussianStats& q, const Eigen::MatrixXd& cov_q) {
  SqrtmOptions opts;
  const Eigen::MatrixXd root_p = sqrtm_psd(cov_p, opts);
  Eigen::MatrixXd product = root_p * cov_q * root_p;
  product = 0.5 * (product + product.transpose());
  const Eigen::MatrixXd cross = sqrtm_psd(product, opts);

  const double mean_term = (p.mean - q.mean).squaredNorm();
  const double value = mean_term + cov_p.trace() + cov_q.trace() - 2.0 * cross.trace();
  if (value < -1e-6) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "Frechet distance evaluated to " << value;
    fail(ErrorKind::kNumerical, msg.str());
  }
  return std::max(0.0, value);
}

}  // namespace

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& a, const SqrtmOptions& options) {
  check_symmetric(a, options.symmetry_tol);
  if (!a.allFinite()) fail(ErrorKind::kValidation, "matrix has non-finite entries");
  return sqrt_from_eigen(psd_eigen(a, options.clamp_rel));
}

FrechetResult frechet_distance_detailed(const GaussianStats& p, const GaussianStats& q) {
  if (p.dim() != q.dim()) {
    fail(ErrorKind::kValidation, "dimension mismatch: " + std::to_string(p.dim()) + " vs " +
                                     std::to_string(q.dim()));
  }
  FrechetResult result;
  try {
    result.distance = frechet_once(p, p.cov, q, q.cov);
    return result;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNotPsd) throw;
  }

  const auto d = static_cast<Eigen::Index>(p.dim());
  result.jitter_p = 1e-6 * mean_diag(p.cov);
  result.jitter_q = 1e-6 * mean_diag(q.cov);
  const Eigen::MatrixXd cov_p = p.cov + result.jitter_p * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd cov_q = q.cov + result.jitter_q * Eigen::MatrixXd::Identity(d, d);
  try {
    result.distance = frechet_once(p, cov_p, q, cov_q);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNotPsd) throw;
    fail(ErrorKind::kNumerical, std::string("indefinite covariance product after jitter: ") + e.what());
  }
  return result;
}

double frechet_distance(const GaussianStats& p, const GaussianStats& q) {
  return frechet_distance_detailed(p, q).distance;
}

}  // namespace removal_eval

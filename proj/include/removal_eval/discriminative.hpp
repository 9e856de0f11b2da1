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
#include <map>
#include <string>

#include <Eigen/Dense>

#include "removal_eval/stats.hpp"

namespace removal_eval {

struct SvmConfig {
  double c = 1.0;
  int max_epochs = 200;
  // Stop when the relative change of the full objective between epochs falls below this.
  double tol = 1e-6;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // > 0; zero-variance dimensions get 1
};

// f(x) = w . ((x - mean) / scale) + b, positive means "real".
class LinearDecisionFunction {
 public:
  LinearDecisionFunction(Eigen::VectorXd weights, double bias, Standardizer standardizer);

  double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;

  // Decision values for every row, in row order.
  Eigen::VectorXd decide(const RowMatrix& rows) const;

  const Eigen::VectorXd& weights() const { return weights_; }
  double bias() const { return bias_; }
  const Standardizer& standardizer() const { return standardizer_; }

  // Same function expressed on raw features: f(x) = w' . x + b'.
  Eigen::VectorXd original_weights() const;
  double original_bias() const;

  int epochs_run = 0;

 private:
  Eigen::VectorXd weights_;
  double bias_;
  Standardizer standardizer_;
};

// Real rows labelled +1, fake rows -1. Minimizes
//   lambda/2 ||w||^2 + 1/n sum hinge(y (w.z + b)),  lambda = 1 / (c n)
// over standardized features z with Pegasos-style stochastic subgradient steps of size
// 1 / (lambda t). The bias is carried as an extra constant feature. Sample order per epoch is a
// seeded Fisher-Yates shuffle, so results are bitwise reproducible.
LinearDecisionFunction train_linear_svm(const FeatureMatrix& real, const FeatureMatrix& fake,
                                        const SvmConfig& cfg);

// 1/2 P_real{f < 0} + 1/2 P_fake{f > 0} for a given decision function.
double unseparability(const LinearDecisionFunction& f, const FeatureMatrix& real,
                      const FeatureMatrix& fake);

// Trains on (real, fake) and scores the fit set. Higher means harder to separate.
double u_ids(const FeatureMatrix& real, const FeatureMatrix& fake, const SvmConfig& cfg);

// Fraction of (real, fake) pairs whose fake scores strictly more real than its partner.
// `pairing` maps every fake id to one real id, bijectively.
double p_ids(const FeatureMatrix& real, const FeatureMatrix& fake,
             const std::map<std::string, std::string>& pairing, const SvmConfig& cfg);

}  // namespace removal_eval

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

#include "removal_eval/discriminative.hpp"

#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "removal_eval/error.hpp"
#include "removal_eval/random.hpp"

namespace removal_eval {

void SvmConfig::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) fail(ErrorKind::kValidation, "SVM c must be positive");
  if (max_epochs < 1) fail(ErrorKind::kValidation, "SVM max_epochs must be >= 1");
  if (!(tol > 0.0)) fail(ErrorKind::kValidation, "SVM tol must be positive");
}

LinearDecisionFunction::LinearDecisionFunction(Eigen::VectorXd weights, double bias,
                                               Standardizer standardizer)
    : weights_(std::move(weights)), bias_(bias), standardizer_(std::move(standardizer)) {
  if (!weights_.allFinite() || !std::isfinite(bias_)) {
    fail(ErrorKind::kNumerical, "SVM produced non-finite weights");
  }
  if (standardizer_.mean.size() != weights_.size() || standardizer_.scale.size() != weights_.size()) {
    fail(ErrorKind::kValidation, "standardizer dimension does not match weights");
  }
  if ((standardizer_.scale.array() <= 0.0).any()) {
    fail(ErrorKind::kValidation, "standardizer scale entries must be positive");
  }
}

double LinearDecisionFunction::operator()(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  double acc = bias_;
  for (Eigen::Index j = 0; j < weights_.size(); ++j) {
    acc += weights_(j) * ((x(j) - standardizer_.mean(j)) / standardizer_.scale(j));
  }
  return acc;
}

Eigen::VectorXd LinearDecisionFunction::decide(const RowMatrix& rows) const {
  if (rows.cols() != weights_.size()) {
    fail(ErrorKind::kValidation, "decision function dimension " + std::to_string(weights_.size()) +
                                     " does not match features " + std::to_string(rows.cols()));
  }
  Eigen::VectorXd out(rows.rows());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out(i) = (*this)(rows.row(i));
  return out;
}

Eigen::VectorXd LinearDecisionFunction::original_weights() const {
  return weights_.cwiseQuotient(standardizer_.scale);
}

double LinearDecisionFunction::original_bias() const {
  return bias_ - original_weights().dot(standardizer_.mean);
}

namespace {

Standardizer fit_standardizer(const RowMatrix& a, const RowMatrix& b) {
  const Eigen::Index d = a.cols();
  const double n = static_cast<double>(a.rows() + b.rows());
  Standardizer s;
  s.mean = (a.colwise().sum() + b.colwise().sum()).transpose() / n;
  s.scale.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double ss = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) ss += (a(i, j) - s.mean(j)) * (a(i, j) - s.mean(j));
    for (Eigen::Index i = 0; i < b.rows(); ++i) ss += (b(i, j) - s.mean(j)) * (b(i, j) - s.mean(j));
    const double sd = std::sqrt(ss / n);
    s.scale(j) = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

}  // namespace

LinearDecisionFunction train_linear_svm(const FeatureMatrix& real, const FeatureMatrix& fake,
                                        const SvmConfig& cfg) {
  cfg.validate();
  if (real.dim() != fake.dim()) {
    fail(ErrorKind::kValidation, "dimension mismatch: real " + std::to_string(real.dim()) +
                                     " vs fake " + std::to_string(fake.dim()));
  }
  if (real.rows() < 2 || fake.rows() < 2) {
    fail(ErrorKind::kDegenerateInput, "SVM training needs at least 2 rows per class");
  }
  for (const FeatureMatrix* m : {&real, &fake}) {
    for (Eigen::Index i = 0; i < m->data().rows(); ++i) {
      if (!m->data().row(i).allFinite()) {
        fail(ErrorKind::kValidation,
             "non-finite value in row '" + m->ids()[static_cast<std::size_t>(i)] + "'");
      }
    }
  }

  Standardizer standardizer = fit_standardizer(real.data(), fake.data());
  const Eigen::Index d = static_cast<Eigen::Index>(real.dim());
  const Eigen::Index n_real = static_cast<Eigen::Index>(real.rows());
  const Eigen::Index n = n_real + static_cast<Eigen::Index>(fake.rows());

  // Standardized samples with a trailing constant 1 for the bias.
  Eigen::MatrixXd z(d + 1, n);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool is_real = i < n_real;
    const auto row = is_real ? real.data().row(i) : fake.data().row(i - n_real);
    for (Eigen::Index j = 0; j < d; ++j) {
      z(j, i) = (row(j) - standardizer.mean(j)) / standardizer.scale(j);
    }
    z(d, i) = 1.0;
    y(i) = is_real ? 1.0 : -1.0;
  }

  const double lambda = 1.0 / (cfg.c * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);
  auto objective = [&](const Eigen::VectorXd& w) {
    double hinge = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) hinge += std::max(0.0, 1.0 - y(i) * w.dot(z.col(i)));
    return 0.5 * lambda * w.squaredNorm() + hinge / static_cast<double>(n);
  };

  Rng rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
  double previous = objective(w);
  std::uint64_t t = 0;
  int epochs = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (Eigen::Index i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double margin = y(i) * w.dot(z.col(i));
      w *= 1.0 - 1.0 / static_cast<double>(t);
      if (margin < 1.0) w.noalias() += (eta * y(i)) * z.col(i);
      const double norm = w.norm();
      if (norm > radius) w *= radius / norm;
    }
    epochs = epoch + 1;
    const double current = objective(w);
    const double change = std::abs(previous - current) / std::max(std::abs(previous), 1e-300);
    previous = current;
    if (change < cfg.tol) break;
  }

  LinearDecisionFunction f(w.head(d), w(d), std::move(standardizer));
  f.epochs_run = epochs;
  return f;
}

double unseparability(const LinearDecisionFunction& f, const FeatureMatrix& real,
                      const FeatureMatrix& fake) {
  const Eigen::VectorXd fr = f.decide(real.data());
  const Eigen::VectorXd ff = f.decide(fake.data());
  const double real_wrong = static_cast<double>((fr.array() < 0.0).count());
  const double fake_wrong = static_cast<double>((ff.array() > 0.0).count());
  return 0.5 * real_wrong / static_cast<double>(fr.size()) +
         0.5 * fake_wrong / static_cast<double>(ff.size());
}

double u_ids(const FeatureMatrix& real, const FeatureMatrix& fake, const SvmConfig& cfg) {
  return unseparability(train_linear_svm(real, fake, cfg), real, fake);
}

double p_ids(const FeatureMatrix& real, const FeatureMatrix& fake,
             const std::map<std::string, std::string>& pairing, const SvmConfig& cfg) {
  std::set<std::string> used_real;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(fake.rows());
  for (std::size_t i = 0; i < fake.rows(); ++i) {
    const std::string& fid = fake.ids()[i];
    auto it = pairing.find(fid);
    if (it == pairing.end()) fail(ErrorKind::kValidation, "fake id '" + fid + "' has no pair");
    const std::ptrdiff_t r = real.find(it->second);
    if (r < 0) fail(ErrorKind::kValidation, "paired real id '" + it->second + "' not in real set");
    if (!used_real.insert(it->second).second) {
      fail(ErrorKind::kValidation, "real id '" + it->second + "' paired more than once");
    }
    pairs.emplace_back(static_cast<std::size_t>(r), i);
  }
  for (const auto& [fid, rid] : pairing) {
    if (fake.find(fid) < 0) fail(ErrorKind::kValidation, "paired fake id '" + fid + "' not in fake set");
  }
  if (pairs.empty()) fail(ErrorKind::kValidation, "no pairs");

  const LinearDecisionFunction f = train_linear_svm(real, fake, cfg);
  std::size_t better = 0;
  for (const auto& [r, k] : pairs) {
    if (f(fake.data().row(static_cast<Eigen::Index>(k))) > f(real.data().row(static_cast<Eigen::Index>(r)))) {
      ++better;
    }
  }
  return static_cast<double>(better) / static_cast<double>(pairs.size());
}

}  // namespace removal_eval

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

#include "removal_eval/reference_metrics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <set>

#include "removal_eval/csv.hpp"
#include "removal_eval/error.hpp"
#include "removal_eval/parallel.hpp"

namespace removal_eval {

namespace {

void require_same_shape(const ImageBuffer& a, const ImageBuffer& b) {
  a.validate();
  b.validate();
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    fail(ErrorKind::kValidation, "image shapes differ: " + std::to_string(a.width) + "x" +
                                     std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                                     std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                                     std::to_string(b.channels));
  }
}

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    w[i] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Valid-mode separable filtering of a w x h plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h,
                                 const std::array<double, kSsimWindow>& g) {
  const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
  std::vector<double> horiz(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    const double* row = plane.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[k] * row[x + k];
      horiz[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[k] * horiz[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double psnr(const ImageBuffer& reference, const ImageBuffer& candidate) {
  require_same_shape(reference, candidate);
  // Integer accumulation keeps the result exactly symmetric.
  std::uint64_t sse = 0;
  for (std::size_t i = 0; i < reference.data.size(); ++i) {
    const int d = static_cast<int>(reference.data[i]) - static_cast<int>(candidate.data[i]);
    sse += static_cast<std::uint64_t>(d * d);
  }
  if (sse == 0) return std::numeric_limits<double>::infinity();
  const double mse = static_cast<double>(sse) / static_cast<double>(reference.data.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const ImageBuffer& reference, const ImageBuffer& candidate) {
  require_same_shape(reference, candidate);
  const int w = reference.width, h = reference.height, ch = reference.channels;
  if (std::min(w, h) < kSsimWindow) {
    fail(ErrorKind::kValidation, "SSIM needs images of at least " + std::to_string(kSsimWindow) + "x" +
                                     std::to_string(kSsimWindow) + ", got " + std::to_string(w) + "x" +
                                     std::to_string(h));
  }
  constexpr double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  const auto g = gaussian_window();
  const std::size_t n = static_cast<std::size_t>(w) * h;

  double total = 0.0;
  std::size_t windows = 0;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (int c = 0; c < ch; ++c) {
    for (std::size_t p = 0; p < n; ++p) {
      x[p] = reference.data[p * ch + c];
      y[p] = candidate.data[p * ch + c];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const auto mx = filter_valid(x, w, h, g);
    const auto my = filter_valid(y, w, h, g);
    const auto sxx = filter_valid(xx, w, h, g);
    const auto syy = filter_valid(yy, w, h, g);
    const auto sxy = filter_valid(xy, w, h, g);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    windows += mx.size();
  }
  return total / static_cast<double>(windows);
}

PairedScores compute_paired_metrics(const std::vector<ImagePair>& pairs, int threads) {
  PairedScores out;
  out.ids.resize(pairs.size());
  out.psnr.resize(pairs.size());
  out.ssim.resize(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    try {
      out.ids[i] = pairs[i].id;
      out.psnr[i] = psnr(pairs[i].reference, pairs[i].candidate);
      out.ssim[i] = ssim(pairs[i].reference, pairs[i].candidate);
    } catch (const Error& e) {
      throw Error(e.kind(), "pair " + pairs[i].id + ": " + e.what());
    }
  });
  if (!pairs.empty()) {
    double sp = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      sp += out.psnr[i];
      ss += out.ssim[i];
    }
    out.mean_psnr = sp / static_cast<double>(pairs.size());
    out.mean_ssim = ss / static_cast<double>(pairs.size());
  }
  return out;
}

std::map<std::string, double> parse_pair_distances(const std::string& csv_text,
                                                   const std::vector<std::string>& expected_ids) {
  const CsvTable table = parse_csv(csv_text, {"id", "distance"});
  std::map<std::string, double> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string where = "line " + std::to_string(table.line_numbers[r]);
    const std::string& id = table.rows[r][0];
    const double d = parse_double(table.rows[r][1], where);
    if (!std::isfinite(d) || d < 0.0) {
      fail(ErrorKind::kFormat, where + ": distance for " + id + " must be finite and non-negative");
    }
    if (!out.emplace(id, d).second) fail(ErrorKind::kValidation, where + ": duplicate id " + id);
  }
  const std::set<std::string> expected(expected_ids.begin(), expected_ids.end());
  std::string missing, extra;
  for (const auto& id : expected) {
    if (!out.count(id)) missing += (missing.empty() ? "" : ", ") + id;
  }
  for (const auto& [id, d] : out) {
    if (!expected.count(id)) extra += (extra.empty() ? "" : ", ") + id;
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "pair distances do not match the expected ids;";
    if (!missing.empty()) msg += " missing: " + missing + ";";
    if (!extra.empty()) msg += " unexpected: " + extra + ";";
    msg.pop_back();
    fail(ErrorKind::kValidation, msg);
  }
  return out;
}

std::map<std::string, double> import_pair_distances(const std::filesystem::path& path,
                                                    const std::vector<std::string>& expected_ids) {
  const std::string text = read_text_file(path.string());
  try {
    return parse_pair_distances(text, expected_ids);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

double mean_distance(const std::map<std::string, double>& distances) {
  if (distances.empty()) fail(ErrorKind::kValidation, "no pair distances");
  double s = 0.0;
  for (const auto& [id, d] : distances) s += d;
  return s / static_cast<double>(distances.size());
}

}  // namespace removal_eval

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

#include "removal_eval/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "removal_eval/csv.hpp"
#include "removal_eval/error.hpp"
#include "removal_eval/features.hpp"
#include "removal_eval/parallel.hpp"
#include "removal_eval/random.hpp"

namespace removal_eval {

using ojson = nlohmann::ordered_json;

namespace {

ojson number_or_string(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double read_number(const ojson& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  fail(ErrorKind::kParse, where + ": expected a number");
}

ojson optional_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }
ojson optional_json(const std::optional<bool>& v) { return v ? ojson(*v) : ojson(nullptr); }

const ojson& member(const ojson& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) fail(ErrorKind::kParse, where + "/" + key + ": missing field");
  return obj.at(key);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

FeatureSet load_feature_set(const std::filesystem::path& path) {
  FeatureSet set{read_features(path), "", std::nullopt, path.string()};
  if (const auto meta = read_feature_meta(path)) {
    set.fingerprint = meta->fingerprint;
    set.contains_target_class = meta->contains_target_class;
  }
  return set;
}

std::string report_to_json(const MetricReport& r) {
  ojson j;
  j["label"] = r.label;
  j["query"] = {{"count", r.query.count},
                {"kernel_size", r.query.kernel_size},
                {"min_cov", optional_json(r.query.min_cov)},
                {"max_cov", optional_json(r.query.max_cov)},
                {"source", r.query.source}};
  j["comparison"] = {{"count", r.comparison.count},
                     {"contains_target_class", optional_json(r.comparison.contains_target_class)},
                     {"source", r.comparison.source}};
  j["fingerprint"] = r.fingerprint;
  ojson metrics = ojson::object();
  for (const auto& [name, value] : r.metrics) metrics[name] = number_or_string(value);
  j["metrics"] = metrics;
  ojson settings = ojson::object();
  for (const auto& [k, v] : r.settings) settings[k] = v;
  j["config"] = {{"svm", {{"c", r.svm.c}, {"max_epochs", r.svm.max_epochs}, {"tol", r.svm.tol}, {"seed", r.svm.seed}}},
                 {"jitter", {{"query", r.jitter_query}, {"comparison", r.jitter_comparison}}},
                 {"settings", settings}};
  return j.dump(2) + "\n";
}

MetricReport report_from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    fail(ErrorKind::kParse, std::string("invalid report JSON: ") + e.what());
  }
  try {
    MetricReport r;
    r.label = member(j, "label", "").get<std::string>();
    const ojson& q = member(j, "query", "");
    r.query.count = member(q, "count", "/query").get<std::size_t>();
    r.query.kernel_size = member(q, "kernel_size", "/query").get<int>();
    if (q.contains("min_cov") && !q["min_cov"].is_null()) r.query.min_cov = q["min_cov"].get<double>();
    if (q.contains("max_cov") && !q["max_cov"].is_null()) r.query.max_cov = q["max_cov"].get<double>();
    if (q.contains("source")) r.query.source = q["source"].get<std::string>();
    const ojson& c = member(j, "comparison", "");
    r.comparison.count = member(c, "count", "/comparison").get<std::size_t>();
    if (c.contains("contains_target_class") && !c["contains_target_class"].is_null()) {
      r.comparison.contains_target_class = c["contains_target_class"].get<bool>();
    }
    if (c.contains("source")) r.comparison.source = c["source"].get<std::string>();
    r.fingerprint = member(j, "fingerprint", "").get<std::string>();
    const ojson& m = member(j, "metrics", "");
    if (!m.is_object()) fail(ErrorKind::kParse, "/metrics: expected an object");
    for (auto it = m.begin(); it != m.end(); ++it) r.metrics[it.key()] = read_number(it.value(), "/metrics/" + it.key());
    if (j.contains("config")) {
      const ojson& cfg = j["config"];
      if (cfg.contains("svm")) {
        const ojson& s = cfg["svm"];
        r.svm.c = member(s, "c", "/config/svm").get<double>();
        r.svm.max_epochs = member(s, "max_epochs", "/config/svm").get<int>();
        r.svm.tol = member(s, "tol", "/config/svm").get<double>();
        r.svm.seed = member(s, "seed", "/config/svm").get<std::uint64_t>();
      }
      if (cfg.contains("jitter")) {
        r.jitter_query = member(cfg["jitter"], "query", "/config/jitter").get<double>();
        r.jitter_comparison = member(cfg["jitter"], "comparison", "/config/jitter").get<double>();
      }
      if (cfg.contains("settings")) {
        for (auto it = cfg["settings"].begin(); it != cfg["settings"].end(); ++it) {
          r.settings[it.key()] = it.value().get<std::string>();
        }
      }
    }
    return r;
  } catch (const ojson::type_error& e) {
    fail(ErrorKind::kParse, std::string("malformed report: ") + e.what());
  }
}

void write_report(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << report_to_json(report);
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

MetricReport read_report(const std::filesystem::path& path) {
  const std::string text = read_text_file(path.string());
  try {
    return report_from_json(text);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

MetricReport evaluate_unpaired(const FeatureSet& query, const FeatureSet& comparison,
                               const SvmConfig& cfg, bool starred, const std::string& label) {
  cfg.validate();
  if (query.fingerprint.empty() || comparison.fingerprint.empty()) {
    fail(ErrorKind::kValidation, "extractor fingerprint unknown for " +
                                     (query.fingerprint.empty() ? query.source : comparison.source) +
                                     "; features must carry their metadata sidecar");
  }
  if (query.fingerprint != comparison.fingerprint) {
    fail(ErrorKind::kValidation, "extractor fingerprints differ: " + query.fingerprint + " (" + query.source +
                                     ") vs " + comparison.fingerprint + " (" + comparison.source + ")");
  }
  if (starred && comparison.contains_target_class != false) {
    fail(ErrorKind::kProtocol,
         comparison.contains_target_class
             ? "comparison set " + comparison.source +
                   " contains target-class objects; starred metrics require a clean comparison set"
             : "comparison set " + comparison.source +
                   " does not declare whether it contains target-class objects; starred metrics require "
                   "contains_target_class = false");
  }
  if (query.features.dim() != comparison.features.dim()) {
    fail(ErrorKind::kValidation, "feature dimensions differ: " + std::to_string(query.features.dim()) + " vs " +
                                     std::to_string(comparison.features.dim()));
  }

  MetricReport r;
  r.label = label;
  r.query.count = query.features.rows();
  r.query.source = query.source;
  r.comparison.count = comparison.features.rows();
  r.comparison.contains_target_class = comparison.contains_target_class;
  r.comparison.source = comparison.source;
  r.fingerprint = query.fingerprint;
  r.svm = cfg;

  const FrechetResult fd = frechet_distance_detailed(compute_gaussian_stats(comparison.features),
                                                     compute_gaussian_stats(query.features));
  r.jitter_comparison = fd.jitter_p;
  r.jitter_query = fd.jitter_q;
  r.metrics[starred ? metric::kFidStar : metric::kFid] = fd.distance;
  r.metrics[starred ? metric::kUIdsStar : metric::kUIds] = u_ids(comparison.features, query.features, cfg);
  return r;
}

bool lower_is_better(const std::string& name) {
  return name == metric::kFid || name == metric::kFidStar || name == metric::kLpipsMean;
}

std::vector<MetricRanking> rank_removers(const std::vector<MetricReport>& reports) {
  if (reports.empty()) fail(ErrorKind::kValidation, "no reports to rank");
  std::set<std::string> labels;
  for (const auto& r : reports) {
    if (!labels.insert(r.label).second) fail(ErrorKind::kValidation, "duplicate report label \"" + r.label + "\"");
    if (r.fingerprint != reports.front().fingerprint) {
      fail(ErrorKind::kValidation, "reports use different extractor fingerprints: \"" + reports.front().label +
                                       "\" has " + reports.front().fingerprint + ", \"" + r.label + "\" has " +
                                       r.fingerprint);
    }
    const QueryDescriptor& a = reports.front().query;
    if (r.query.count != a.count || r.query.min_cov != a.min_cov || r.query.max_cov != a.max_cov) {
      fail(ErrorKind::kValidation, "reports \"" + reports.front().label + "\" and \"" + r.label +
                                       "\" describe different query sets");
    }
  }

  std::set<std::string> names;
  for (const auto& r : reports) {
    for (const auto& [name, v] : r.metrics) names.insert(name);
  }
  std::vector<MetricRanking> out;
  for (const auto& name : names) {
    MetricRanking mr;
    mr.metric = name;
    mr.lower_is_better = lower_is_better(name);
    std::vector<std::pair<double, std::string>> entries;
    for (const auto& r : reports) {
      auto it = r.metrics.find(name);
      if (it == r.metrics.end()) continue;
      if (std::isnan(it->second)) fail(ErrorKind::kValidation, "report \"" + r.label + "\" has NaN " + name);
      entries.emplace_back(it->second, r.label);
    }
    std::sort(entries.begin(), entries.end(), [&](const auto& x, const auto& y) {
      if (x.first != y.first) return mr.lower_is_better ? x.first < y.first : x.first > y.first;
      return x.second < y.second;
    });
    for (std::size_t i = 0; i < entries.size();) {
      std::size_t j = i;
      while (j < entries.size() && entries[j].first == entries[i].first) ++j;
      if (j - i > 1) {
        std::vector<std::string> group;
        for (std::size_t k = i; k < j; ++k) group.push_back(entries[k].second);
        mr.ties.push_back(std::move(group));
      }
      i = j;
    }
    for (auto& e : entries) mr.order.push_back(std::move(e.second));
    out.push_back(std::move(mr));
  }
  return out;
}

std::string rankings_to_json(const std::vector<MetricRanking>& rankings) {
  ojson arr = ojson::array();
  for (const auto& r : rankings) {
    arr.push_back({{"metric", r.metric},
                   {"direction", r.lower_is_better ? "lower_is_better" : "higher_is_better"},
                   {"order", r.order},
                   {"ties", r.ties}});
  }
  return arr.dump(2) + "\n";
}

double relative_std_percent(const std::vector<double>& values) {
  if (values.size() < 2) fail(ErrorKind::kValidation, "RSD needs at least two values");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  if (ss == 0.0) return 0.0;
  if (mean == 0.0) fail(ErrorKind::kNumerical, "RSD undefined for zero mean with nonzero spread");
  return 100.0 * std::sqrt(ss / (n - 1.0)) / std::abs(mean);
}

StabilityTable subsample_stability(const FeatureMatrix& query, const FeatureMatrix& comparison,
                                   const StabilityOptions& options) {
  options.svm.validate();
  if (options.iterations < 2) {
    fail(ErrorKind::kUsage, "RSD needs at least 2 iterations, got " + std::to_string(options.iterations));
  }
  if (options.sizes.empty()) fail(ErrorKind::kUsage, "no subsample sizes given");
  for (std::size_t s : options.sizes) {
    if (s < 2 || s > query.rows()) {
      fail(ErrorKind::kValidation, "subsample size " + std::to_string(s) + " outside [2, " +
                                       std::to_string(query.rows()) + "]");
    }
  }
  if (query.dim() != comparison.dim()) fail(ErrorKind::kValidation, "feature dimensions differ");

  const GaussianStats comparison_stats = compute_gaussian_stats(comparison);
  const auto iters = static_cast<std::size_t>(options.iterations);
  StabilityTable fid_part, uids_part;
  for (std::size_t size : options.sizes) {
    std::vector<double> fid(iters), uids(iters);
    parallel_for(iters, options.threads, [&](std::size_t it) {
      Rng rng(options.seed + it);
      std::vector<std::size_t> idx = rng.sample_without_replacement(query.rows(), size);
      std::sort(idx.begin(), idx.end());
      const FeatureMatrix sub = query.subset(idx);
      fid[it] = frechet_distance(comparison_stats, compute_gaussian_stats(sub));
      if (options.include_u_ids) uids[it] = u_ids(comparison, sub, options.svm);
    });
    auto mean_of = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    fid_part.rows.push_back({metric::kFidStar, size, relative_std_percent(fid), options.iterations, mean_of(fid)});
    if (options.include_u_ids) {
      uids_part.rows.push_back(
          {metric::kUIdsStar, size, relative_std_percent(uids), options.iterations, mean_of(uids)});
    }
  }
  StabilityTable out = std::move(fid_part);
  out.rows.insert(out.rows.end(), uids_part.rows.begin(), uids_part.rows.end());
  return out;
}

std::string stability_to_csv(const StabilityTable& table) {
  std::string s = "metric,size,rsd_percent,iterations\n";
  for (const auto& r : table.rows) {
    s += r.metric + "," + std::to_string(r.size) + "," + format_double(r.rsd_percent) + "," +
         std::to_string(r.iterations) + "\n";
  }
  return s;
}

}  // namespace removal_eval

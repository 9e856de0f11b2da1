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

#include "removal_eval/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "removal_eval/csv.hpp"
#include "removal_eval/dataset.hpp"
#include "removal_eval/evaluation.hpp"
#include "removal_eval/features.hpp"
#include "removal_eval/parallel.hpp"
#include "removal_eval/reference_metrics.hpp"
#include "removal_eval/synthgen.hpp"

namespace removal_eval::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kProtocol: return kExitProtocol;
    case ErrorKind::kUsage: return kExitUsage;
    default: return kExitEnvironment;
  }
}

namespace {

[[noreturn]] void usage(const std::string& msg) { fail(ErrorKind::kUsage, msg); }

int threads_or_default(int threads) { return threads > 0 ? threads : default_thread_count(); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

// Config echo stored next to a primary output.
void write_run_echo(const fs::path& primary, const std::string& subcommand, const ojson& config) {
  ojson j;
  j["subcommand"] = subcommand;
  j["config"] = config;
  write_text(fs::path(primary.string() + ".run.json"), j.dump(2) + "\n");
}

fs::path resolve_relative(const fs::path& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

std::optional<bool> parse_tristate(const std::string& v) {
  if (v == "true" || v == "contaminated") return true;
  if (v == "false" || v == "clean") return false;
  if (v == "unknown") return std::nullopt;
  usage("expected true/false/unknown, got \"" + v + "\"");
}

ojson tristate_json(const std::optional<bool>& v) { return v ? ojson(*v) : ojson(nullptr); }

struct SvmFlags {
  double c = 1.0;
  int epochs = 200;
  double tol = 1e-6;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--svm-c", c, "SVM regularization constant C")->capture_default_str();
    app->add_option("--svm-epochs", epochs, "Maximum SVM epochs")->capture_default_str();
    app->add_option("--svm-tol", tol, "Relative objective change that stops training")->capture_default_str();
    app->add_option("--seed", seed, "Seed for SVM shuffling and subsampling")->capture_default_str();
  }
  SvmConfig config() const {
    SvmConfig cfg{c, epochs, tol, seed};
    try {
      cfg.validate();
    } catch (const Error& e) {
      usage(e.what());
    }
    return cfg;
  }
  ojson echo() const { return {{"c", c}, {"max_epochs", epochs}, {"tol", tol}, {"seed", seed}}; }
};

// ---------------------------------------------------------------------------------------------
// extract

struct ExtractArgs {
  std::string images_dir, manifest, out, backend = "toy", model, source, contains = "unknown";
  int input_edge = 299;
  std::size_t output_dim = 2048;
  int threads = 0;
};

int cmd_extract(const ExtractArgs& a, std::ostream& out, std::ostream& err) {
  if (a.images_dir.empty() == a.manifest.empty()) usage("extract needs exactly one of --images or --manifest");
  const std::optional<bool> contains = parse_tristate(a.contains);
  const int threads = threads_or_default(a.threads);

  ExtractorSpec spec;
  switch (parse_backend(a.backend)) {
    case Backend::kToy: spec = ExtractorSpec::toy(); break;
    case Backend::kNeural:
      if (a.model.empty()) usage("--backend neural needs --model");
      spec = ExtractorSpec::neural(a.model, a.output_dim, a.input_edge);
      break;
    case Backend::kPrecomputed:
      if (a.source.empty()) usage("--backend precomputed needs --source");
      spec = ExtractorSpec::precomputed(a.source);
      break;
  }

  std::vector<std::pair<std::string, fs::path>> items;
  if (!a.images_dir.empty()) {
    const fs::path dir(a.images_dir);
    if (!fs::is_directory(dir)) fail(ErrorKind::kIo, "images directory not found: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir)) {
      std::string ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (e.is_regular_file() && ext == ".png") items.emplace_back(e.path().stem().string(), e.path());
    }
    std::sort(items.begin(), items.end());
  } else {
    const fs::path base = fs::path(a.manifest).parent_path();
    for (const auto& entry : read_manifest(a.manifest)) {
      items.emplace_back(entry.id, resolve_relative(base, entry.image_path));
    }
  }
  if (items.empty()) {
    fail(ErrorKind::kValidation, "no images found in " + (a.images_dir.empty() ? a.manifest : a.images_dir));
  }

  const auto extractor = make_extractor(spec);
  std::vector<NamedImage> images(items.size());
  std::vector<std::string> load_errors(items.size());
  parallel_for(items.size(), threads, [&](std::size_t i) {
    images[i].id = items[i].first;
    if (!extractor->needs_pixels()) return;
    try {
      images[i].image = read_png(items[i].second);
    } catch (const Error& e) {
      load_errors[i] = e.what();
    }
  });

  std::vector<NamedImage> loaded;
  std::vector<ExtractionFailure> failures;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (load_errors[i].empty()) {
      loaded.push_back(std::move(images[i]));
    } else {
      failures.push_back({items[i].first, load_errors[i]});
    }
  }
  ExtractionResult result;
  if (!loaded.empty()) result = extract_features_checked(loaded, *extractor, threads);
  failures.insert(failures.end(), result.failures.begin(), result.failures.end());
  if (!failures.empty()) {
    err << "error: " << failures.size() << " of " << items.size() << " images failed:\n";
    for (const auto& f : failures) err << "  " << f.id << ": " << f.message << "\n";
    return kExitDataError;
  }

  const FeatureMatrix& features = *result.features;
  write_features(features, a.out);
  const std::string source = a.images_dir.empty() ? a.manifest : a.images_dir;
  write_feature_meta({extractor->spec().fingerprint, to_string(spec.backend), contains, source}, a.out);
  write_run_echo(a.out, "extract",
                 {{"images", a.images_dir},
                  {"manifest", a.manifest},
                  {"backend", a.backend},
                  {"model", a.model},
                  {"source", a.source},
                  {"input_edge", extractor->spec().input_edge},
                  {"output_dim", features.dim()},
                  {"fingerprint", extractor->spec().fingerprint},
                  {"contains_target_class", tristate_json(contains)},
                  {"out", a.out}});
  out << "wrote " << features.rows() << " x " << features.dim() << " features to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------------------------
// select-sets

struct SelectArgs {
  std::string annotations, category, out_query, out_comparison, images_root, masks_dir;
  double min_cov = 0.05, max_cov = 0.40;
  bool exclude_crowd = false;
  int threads = 0;
};

int cmd_select_sets(const SelectArgs& a, std::ostream& out, std::ostream& err) {
  if (!(a.min_cov >= 0.0 && a.min_cov < a.max_cov && a.max_cov <= 1.0)) {
    usage("coverage band must satisfy 0 <= --min-cov < --max-cov <= 1");
  }
  const AnnotationIndex index = load_annotations(a.annotations);

  std::int64_t category = -1;
  if (auto it = index.categories().find(a.category); it != index.categories().end()) {
    category = it->second;
  } else {
    try {
      category = std::stoll(a.category);
    } catch (const std::exception&) {
      category = -1;
    }
    bool declared = false;
    for (const auto& [name, id] : index.categories()) declared = declared || id == category;
    if (!declared) err << "warning: category \"" << a.category << "\" not found in " << a.annotations << "\n";
  }

  MaskOptions mask_opts;
  mask_opts.include_crowd = !a.exclude_crowd;
  const SetSelection sel = select_sets(index, category, a.min_cov, a.max_cov, mask_opts);

  auto image_path = [&](std::int64_t id) {
    const std::string& name = index.image(id).file_name;
    return a.images_root.empty() ? name : (fs::path(a.images_root) / name).generic_string();
  };
  if (!a.masks_dir.empty()) {
    std::error_code ec;
    fs::create_directories(a.masks_dir, ec);
    if (ec) fail(ErrorKind::kIo, "cannot create " + a.masks_dir + ": " + ec.message());
  }
  std::vector<ManifestEntry> query(sel.query.size());
  parallel_for(sel.query.size(), threads_or_default(a.threads), [&](std::size_t i) {
    const auto [id, coverage] = sel.query[i];
    ManifestEntry e{std::to_string(id), image_path(id), "", "query", coverage, 0};
    if (!a.masks_dir.empty()) {
      const fs::path mask_file = fs::path(a.masks_dir) / (e.id + ".png");
      write_png(build_class_mask(index, id, category, mask_opts).to_image(), mask_file);
      e.mask_path = mask_file.generic_string();
    }
    query[i] = std::move(e);
  });
  std::vector<ManifestEntry> comparison;
  for (std::int64_t id : sel.comparison) {
    comparison.push_back({std::to_string(id), image_path(id), "", "comparison", 0.0, 0});
  }
  write_manifest(query, a.out_query);
  write_manifest(comparison, a.out_comparison);
  write_run_echo(a.out_query, "select-sets",
                 {{"annotations", a.annotations},
                  {"category", a.category},
                  {"category_id", category},
                  {"min_cov", a.min_cov},
                  {"max_cov", a.max_cov},
                  {"include_crowd", mask_opts.include_crowd},
                  {"images_root", a.images_root},
                  {"masks_dir", a.masks_dir},
                  {"out_query", a.out_query},
                  {"out_comparison", a.out_comparison}});
  out << "query: " << query.size() << " images, comparison: " << comparison.size() << " images\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------------------------
// dilate

struct DilateArgs {
  std::string manifest, out_dir, mask, out;
  std::vector<int> kernels;
  int threads = 0;
};

int cmd_dilate(const DilateArgs& a, std::ostream& out, std::ostream&) {
  if (a.kernels.empty()) usage("dilate needs --kernels");
  for (int k : a.kernels) {
    if (k < 0) usage("kernel sizes must be non-negative");
  }
  if (!a.mask.empty()) {
    if (a.out.empty() || a.kernels.size() != 1) usage("--mask needs --out and exactly one kernel");
    const BinaryMask m = BinaryMask::from_image(read_png(a.mask));
    write_png(dilate(m, a.kernels[0]).to_image(), a.out);
    write_run_echo(a.out, "dilate", {{"mask", a.mask}, {"kernel_size", a.kernels[0]}, {"out", a.out}});
    out << "wrote " << a.out << "\n";
    return kExitOk;
  }
  if (a.manifest.empty() || a.out_dir.empty()) usage("dilate needs --mask/--out or --manifest/--out-dir");

  const fs::path base = fs::path(a.manifest).parent_path();
  const auto entries = read_manifest(a.manifest);
  for (const auto& e : entries) {
    if (e.mask_path.empty()) fail(ErrorKind::kValidation, "manifest entry " + e.id + " has no mask_path");
  }
  const fs::path out_dir(a.out_dir);
  const fs::path out_abs = fs::absolute(out_dir).lexically_normal();
  for (int k : a.kernels) {
    const std::string sub = "k" + std::to_string(k);
    std::error_code ec;
    fs::create_directories(out_dir / sub, ec);
    if (ec) fail(ErrorKind::kIo, "cannot create " + (out_dir / sub).string() + ": " + ec.message());
    std::vector<ManifestEntry> dilated(entries.size());
    parallel_for(entries.size(), threads_or_default(a.threads), [&](std::size_t i) {
      const ManifestEntry& e = entries[i];
      const BinaryMask m = BinaryMask::from_image(read_png(resolve_relative(base, e.mask_path)));
      write_png(dilate(m, k).to_image(), out_dir / sub / (e.id + ".png"));
      const fs::path image_abs = fs::absolute(resolve_relative(base, e.image_path)).lexically_normal();
      dilated[i] = {e.id, image_abs.lexically_relative(out_abs).generic_string(), sub + "/" + e.id + ".png",
                    e.role, e.coverage, k};
    });
    write_manifest(dilated, out_dir / ("manifest_" + sub + ".json"));
  }
  write_run_echo(out_dir / "dilate", "dilate",
                 {{"manifest", a.manifest}, {"kernels", a.kernels}, {"out_dir", a.out_dir}});
  out << "dilated " << entries.size() << " masks with " << a.kernels.size() << " kernel sizes into " << a.out_dir
      << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string query, comparison, label, comparison_descriptor, pairs, paired_reference, paired_images,
      pair_distances, out;
  bool starred = false;
  int kernel_size = 0;
  std::optional<double> min_cov, max_cov;
  SvmFlags svm;
  int threads = 0;
};

std::map<std::string, std::string> read_pairs(const std::string& path) {
  const CsvTable t = parse_csv(read_text_file(path), {"fake_id", "real_id"});
  std::map<std::string, std::string> pairs;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (!pairs.emplace(t.rows[r][0], t.rows[r][1]).second) {
      fail(ErrorKind::kValidation, path + ": line " + std::to_string(t.line_numbers[r]) + ": duplicate fake id " +
                                       t.rows[r][0]);
    }
  }
  return pairs;
}

std::vector<ImagePair> read_image_pairs(const std::string& path) {
  const CsvTable t = parse_csv(read_text_file(path), {"id", "reference", "candidate"});
  const fs::path base = fs::path(path).parent_path();
  std::vector<ImagePair> pairs;
  for (const auto& row : t.rows) {
    pairs.push_back({row[0], read_png(resolve_relative(base, row[1])), read_png(resolve_relative(base, row[2]))});
  }
  if (pairs.empty()) fail(ErrorKind::kValidation, path + ": no image pairs");
  return pairs;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream&) {
  const SvmConfig cfg = a.svm.config();
  FeatureSet query = load_feature_set(a.query);
  FeatureSet comparison = load_feature_set(a.comparison);
  if (!a.comparison_descriptor.empty()) comparison.contains_target_class = parse_tristate(a.comparison_descriptor);

  MetricReport report = evaluate_unpaired(query, comparison, cfg, a.starred, a.label);
  report.query.kernel_size = a.kernel_size;
  report.query.min_cov = a.min_cov;
  report.query.max_cov = a.max_cov;

  if (!a.pairs.empty()) {
    const FeatureSet real = a.paired_reference.empty() ? comparison : load_feature_set(a.paired_reference);
    if (real.fingerprint != query.fingerprint) {
      fail(ErrorKind::kValidation, "paired reference features use a different extractor fingerprint");
    }
    report.metrics[metric::kPIds] = p_ids(real.features, query.features, read_pairs(a.pairs), cfg);
  }
  if (!a.paired_images.empty()) {
    const PairedScores scores = compute_paired_metrics(read_image_pairs(a.paired_images), threads_or_default(a.threads));
    report.metrics[metric::kPsnr] = scores.mean_psnr;
    report.metrics[metric::kSsim] = scores.mean_ssim;
    report.settings["ssim"] = "gaussian 11x11 sigma 1.5, valid windows, channel mean";
    report.settings["paired_region"] = "full image";
  }
  if (!a.pair_distances.empty()) {
    report.metrics[metric::kLpipsMean] = mean_distance(import_pair_distances(a.pair_distances, query.features.ids()));
  }

  report.settings["query_features"] = a.query;
  report.settings["comparison_features"] = a.comparison;
  report.settings["starred"] = a.starred ? "true" : "false";
  if (!a.comparison_descriptor.empty()) report.settings["comparison_descriptor"] = a.comparison_descriptor;
  if (!a.pairs.empty()) report.settings["pairs"] = a.pairs;
  if (!a.paired_reference.empty()) report.settings["paired_reference"] = a.paired_reference;
  if (!a.paired_images.empty()) report.settings["paired_images"] = a.paired_images;
  if (!a.pair_distances.empty()) report.settings["pair_distances"] = a.pair_distances;

  if (a.out.empty()) {
    out << report_to_json(report);
  } else {
    write_report(report, a.out);
    out << "wrote report to " << a.out << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------------------------
// rsd

struct RsdArgs {
  std::string query, comparison, comparison_descriptor, out;
  std::vector<std::size_t> sizes;
  int iterations = 20;
  bool fid_only = false;
  SvmFlags svm;
  int threads = 0;
};

int cmd_rsd(const RsdArgs& a, std::ostream& out, std::ostream&) {
  if (a.iterations < 2) usage("--iterations must be at least 2 for RSD");
  if (a.sizes.empty()) usage("--sizes is empty");
  const SvmConfig cfg = a.svm.config();
  FeatureSet query = load_feature_set(a.query);
  FeatureSet comparison = load_feature_set(a.comparison);
  if (!a.comparison_descriptor.empty()) comparison.contains_target_class = parse_tristate(a.comparison_descriptor);
  if (query.fingerprint.empty() || query.fingerprint != comparison.fingerprint) {
    fail(ErrorKind::kValidation, "query and comparison features need matching, known extractor fingerprints");
  }
  if (comparison.contains_target_class != false) {
    fail(ErrorKind::kProtocol, "RSD of starred metrics needs a comparison set declared free of the target class");
  }

  StabilityOptions opts;
  opts.sizes = a.sizes;
  opts.iterations = a.iterations;
  opts.seed = cfg.seed;
  opts.svm = cfg;
  opts.include_u_ids = !a.fid_only;
  opts.threads = threads_or_default(a.threads);
  const StabilityTable table = subsample_stability(query.features, comparison.features, opts);
  write_text(a.out, stability_to_csv(table));
  write_run_echo(a.out, "rsd",
                 {{"query", a.query},
                  {"comparison", a.comparison},
                  {"fingerprint", query.fingerprint},
                  {"sizes", a.sizes},
                  {"iterations", a.iterations},
                  {"sampling", "without replacement, query side only, seed + iteration"},
                  {"metrics", a.fid_only ? ojson::array({metric::kFidStar})
                                         : ojson::array({metric::kFidStar, metric::kUIdsStar})},
                  {"svm", a.svm.echo()},
                  {"out", a.out}});
  out << "wrote " << table.rows.size() << " rows to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string out_dir;
  std::size_t scenes = 0;
  std::uint64_t first_index = 0;
  SceneSpec spec;
  std::vector<int> kernels{0, 2, 4, 6, 8, 10};
  std::vector<std::string> methods{"gt_paste", "mean_fill", "noise_fill", "no_removal"};
  int threads = 0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream&) {
  try {
    a.spec.validate();
  } catch (const Error& e) {
    usage(e.what());
  }
  BenchmarkOptions opts;
  opts.methods.clear();
  for (const auto& m : a.methods) opts.methods.push_back(parse_method(m));
  opts.kernels = a.kernels;
  opts.first_index = a.first_index;
  opts.threads = threads_or_default(a.threads);
  const fs::path index = emit_benchmark(a.spec, a.scenes, a.out_dir, opts);
  out << "wrote " << a.scenes << " scenes; index " << index.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------------------------
// rank

struct RankArgs {
  std::vector<std::string> reports;
  std::string out;
};

int cmd_rank(const RankArgs& a, std::ostream& out, std::ostream&) {
  std::vector<MetricReport> reports;
  ojson inputs = ojson::array();
  for (const auto& path : a.reports) {
    reports.push_back(read_report(path));
    inputs.push_back({{"file", path}, {"label", reports.back().label}});
  }
  const auto rankings = rank_removers(reports);
  ojson doc;
  doc["inputs"] = inputs;
  doc["fingerprint"] = reports.front().fingerprint;
  doc["rankings"] = ojson::parse(rankings_to_json(rankings));
  const std::string text = doc.dump(2) + "\n";
  if (a.out.empty()) {
    out << text;
  } else {
    write_text(a.out, text);
    out << "wrote rankings to " << a.out << "\n";
  }
  return kExitOk;
}

void add_threads(CLI::App* app, int& threads) {
  app->add_option("--threads", threads, "Worker threads (default: $REMOVAL_EVAL_THREADS or 1)")
      ->check(CLI::NonNegativeNumber);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Class-wise object-removal evaluation toolkit", "removal-eval"};
  app.require_subcommand(1);

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Extract feature vectors from images");
  extract->add_option("--images", ex.images_dir, "Directory of PNG images (id = file stem)");
  extract->add_option("--manifest", ex.manifest, "Manifest JSON listing the images");
  extract->add_option("--backend", ex.backend, "toy | neural | precomputed")->capture_default_str();
  extract->add_option("--model", ex.model, "ONNX model for the neural backend");
  extract->add_option("--input-edge", ex.input_edge, "Neural input edge length")->capture_default_str();
  extract->add_option("--output-dim", ex.output_dim, "Neural output dimension")->capture_default_str();
  extract->add_option("--source", ex.source, "Feature container for the precomputed backend");
  extract->add_option("--contains-target-class", ex.contains, "true | false | unknown")->capture_default_str();
  extract->add_option("--out", ex.out, "Output feature container")->required();
  add_threads(extract, ex.threads);

  SelectArgs sa;
  auto* select = app.add_subcommand("select-sets", "Build query and comparison manifests from annotations");
  select->add_option("--annotations", sa.annotations, "COCO-format annotation JSON")->required();
  select->add_option("--category", sa.category, "Target category name or id")->required();
  select->add_option("--min-cov", sa.min_cov, "Minimum mask coverage")->capture_default_str();
  select->add_option("--max-cov", sa.max_cov, "Maximum mask coverage")->capture_default_str();
  select->add_option("--images-root", sa.images_root, "Prefix for image paths in the manifests");
  select->add_option("--masks-dir", sa.masks_dir, "Write query class masks here");
  select->add_flag("--exclude-crowd", sa.exclude_crowd, "Ignore iscrowd instances when building masks");
  select->add_option("--out-query", sa.out_query, "Query manifest path")->required();
  select->add_option("--out-comparison", sa.out_comparison, "Comparison manifest path")->required();
  add_threads(select, sa.threads);

  DilateArgs da;
  auto* dil = app.add_subcommand("dilate", "Dilate masks with k x k kernels");
  dil->add_option("--manifest", da.manifest, "Manifest whose mask_path entries are dilated");
  dil->add_option("--out-dir", da.out_dir, "Output directory for manifest mode");
  dil->add_option("--mask", da.mask, "Single mask PNG");
  dil->add_option("--out", da.out, "Output PNG for --mask");
  dil->add_option("--kernels", da.kernels, "Kernel sizes, comma separated")->delimiter(',')->required();
  add_threads(dil, da.threads);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Compute a metric report for one remover");
  eval->add_option("--query", ea.query, "Remover output features")->required();
  eval->add_option("--comparison", ea.comparison, "Comparison (real) features")->required();
  eval->add_option("--label", ea.label, "Remover label");
  eval->add_flag("--starred", ea.starred, "Report fid_star / u_ids_star (clean comparison set required)");
  eval->add_option("--comparison-descriptor", ea.comparison_descriptor,
                   "Override the comparison sidecar: clean | contaminated | unknown");
  eval->add_option("--pairs", ea.pairs, "CSV fake_id,real_id enabling P-IDS");
  eval->add_option("--paired-reference", ea.paired_reference, "Features of the paired real images");
  eval->add_option("--paired-images", ea.paired_images, "CSV id,reference,candidate enabling PSNR/SSIM");
  eval->add_option("--pair-distances", ea.pair_distances, "CSV id,distance of external perceptual distances");
  eval->add_option("--kernel-size", ea.kernel_size, "Dilation kernel of the remover variant")->capture_default_str();
  eval->add_option("--min-cov", ea.min_cov, "Query coverage band, for the report");
  eval->add_option("--max-cov", ea.max_cov, "Query coverage band, for the report");
  eval->add_option("--out", ea.out, "Report path (default: stdout)");
  ea.svm.add(eval);
  add_threads(eval, ea.threads);

  RsdArgs ra;
  auto* rsd = app.add_subcommand("rsd", "Sample-size stability (RSD) of starred metrics");
  rsd->add_option("--query", ra.query, "Query features")->required();
  rsd->add_option("--comparison", ra.comparison, "Comparison features")->required();
  rsd->add_option("--comparison-descriptor", ra.comparison_descriptor, "clean | contaminated | unknown");
  rsd->add_option("--sizes", ra.sizes, "Subsample sizes, comma separated")->delimiter(',')->required();
  rsd->add_option("--iterations", ra.iterations, "Draws per size")->capture_default_str();
  rsd->add_flag("--fid-only", ra.fid_only, "Skip u_ids_star");
  rsd->add_option("--out", ra.out, "Stability CSV")->required();
  ra.svm.add(rsd);
  add_threads(rsd, ra.threads);

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Emit a synthetic paired benchmark");
  synth->add_option("--out-dir", sy.out_dir, "Output directory")->required();
  synth->add_option("--scenes", sy.scenes, "Number of scenes")->required();
  synth->add_option("--first-index", sy.first_index, "Index of the first scene")->capture_default_str();
  synth->add_option("--seed", sy.spec.seed, "Scene seed")->capture_default_str();
  synth->add_option("--width", sy.spec.width)->capture_default_str();
  synth->add_option("--height", sy.spec.height)->capture_default_str();
  synth->add_option("--min-objects", sy.spec.min_objects)->capture_default_str();
  synth->add_option("--max-objects", sy.spec.max_objects)->capture_default_str();
  synth->add_option("--min-object-edge", sy.spec.min_object_edge)->capture_default_str();
  synth->add_option("--max-object-edge", sy.spec.max_object_edge)->capture_default_str();
  synth->add_option("--target-fraction", sy.spec.target_fraction)->capture_default_str();
  synth->add_option("--max-coverage", sy.spec.max_coverage)->capture_default_str();
  synth->add_option("--kernels", sy.kernels, "Dilation kernels, comma separated")->delimiter(',');
  synth->add_option("--methods", sy.methods, "Removal methods, comma separated")->delimiter(',');
  add_threads(synth, sy.threads);

  RankArgs rk;
  auto* rank = app.add_subcommand("rank", "Rank removers from metric reports");
  rank->add_option("reports", rk.reports, "Report JSON files")->required();
  rank->add_option("--out", rk.out, "Output path (default: stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (extract->parsed()) return cmd_extract(ex, out, err);
    if (select->parsed()) return cmd_select_sets(sa, out, err);
    if (dil->parsed()) return cmd_dilate(da, out, err);
    if (eval->parsed()) return cmd_eval(ea, out, err);
    if (rsd->parsed()) return cmd_rsd(ra, out, err);
    if (synth->parsed()) return cmd_synth(sy, out, err);
    if (rank->parsed()) return cmd_rank(rk, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitEnvironment;
  }
  return kExitUsage;
}

}  // namespace removal_eval::cli

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xaigan/checkpoint.hpp"
#include "xaigan/data.hpp"
#include "xaigan/image_io.hpp"
#include "xaigan/metrics.hpp"
#include "xaigan/training.hpp"

namespace xaigan {

namespace fs = std::filesystem;
using nlohmann::json;

struct DatasetSpec {
  std::string format = "idx";  // idx | cifar10
  std::string train_images, train_labels, test_images, test_labels;
  std::vector<std::string> cifar_files, cifar_test_files;
  std::size_t limit = 0;  // keep only the first N training images; 0 keeps all
  bool class_balanced = false;
};

struct ClassifierSpec {
  std::size_t epochs = 5;
  std::size_t train_size = 5000;
  std::uint64_t seed = 0;
  std::string cache_dir;  // default: <out>/../.classifier-cache
};

struct ExperimentSpec {
  TrainConfig train;
  DatasetSpec data;
  ClassifierSpec classifier;
  std::string out = "runs/run";
  std::size_t image_every = 1;  // sample-grid cadence in epochs
  std::string label;
  bool timing_in_metrics = false;
};

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::string> explainer;
  std::optional<double> alpha;
  std::optional<std::size_t> epochs;
  std::optional<double> data_fraction;
  std::optional<bool> diffaug;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

inline std::optional<ExplainerKind> parse_explainer(const std::string& s) {
  if (s == "none") return std::nullopt;
  if (s == "saliency") return ExplainerKind::saliency;
  if (s == "lime") return ExplainerKind::lime;
  if (s == "deepshap") return ExplainerKind::deepshap;
  throw ConfigError("explainer", "unknown explainer '" + s + "' (none|saliency|lime|deepshap)");
}

inline std::string explainer_name(const std::optional<ExplainerKind>& k) {
  return k ? std::string(to_string(*k)) : "none";
}

namespace detail {

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ConfigError(key, "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) throw ConfigError(key, "expected an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)
          throw ConfigError(key, "must be non-negative");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) throw ConfigError(key, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw ConfigError(key, "expected a string");
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
      if (!j.is_array()) throw ConfigError(key, "expected an array of strings");
      for (const auto& e : j)
        if (!e.is_string()) throw ConfigError(key, "expected an array of strings");
    }
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

inline void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& prefix) {
  if (!obj.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (const auto& [k, v] : obj.items())
    if (!known.count(k)) throw ConfigError(prefix + k, "unknown key");
}

}  // namespace detail

/// Resolves a config (JSON text, may be empty) plus overrides into a full
/// spec. Unknown keys, wrong types and out-of-range values raise ConfigError
/// naming the key. File existence is checked by `validate_paths`.
inline ExperimentSpec parse_config(const std::string& json_text, const Overrides& ov = {}) {
  ExperimentSpec spec;
  json root = json::object();
  if (!json_text.empty()) {
    try {
      root = json::parse(json_text);
    } catch (const json::parse_error& e) {
      throw ConfigError("<config>", std::string("invalid JSON: ") + e.what());
    }
  }
  detail::reject_unknown(root, {"architecture", "explainer", "alpha", "epochs", "batch_size", "lr", "data_fraction",
                                "seed", "diffaug", "aug_policy", "xai_start_epoch", "lime_samples", "n_references",
                                "fid_every", "fid_samples", "image_every", "out", "label", "timing_in_metrics",
                                "dataset", "classifier"},
                         "");
  TrainConfig& t = spec.train;
  using detail::get_as;
  for (const auto& [k, v] : root.items()) {
    if (k == "architecture") {
      const auto a = get_as<std::string>(v, k);
      if (a == "fc") t.architecture = Architecture::fc;
      else if (a == "dc") t.architecture = Architecture::dc;
      else throw ConfigError(k, "must be 'fc' or 'dc'");
    } else if (k == "explainer") t.explainer = parse_explainer(get_as<std::string>(v, k));
    else if (k == "alpha") t.alpha = get_as<double>(v, k);
    else if (k == "epochs") t.epochs = get_as<std::size_t>(v, k);
    else if (k == "batch_size") t.batch_size = get_as<std::size_t>(v, k);
    else if (k == "lr") t.lr = get_as<double>(v, k);
    else if (k == "data_fraction") t.data_fraction = get_as<double>(v, k);
    else if (k == "seed") t.seed = get_as<std::uint64_t>(v, k);
    else if (k == "diffaug") t.diffaug = get_as<bool>(v, k);
    else if (k == "aug_policy") t.aug_policy = parse_aug_policy(get_as<std::string>(v, k));
    else if (k == "xai_start_epoch") t.xai_start_epoch = get_as<std::size_t>(v, k);
    else if (k == "lime_samples") t.lime_samples = get_as<std::size_t>(v, k);
    else if (k == "n_references") t.n_references = get_as<std::size_t>(v, k);
    else if (k == "fid_every") t.fid_every = get_as<std::size_t>(v, k);
    else if (k == "fid_samples") t.fid_samples = get_as<std::size_t>(v, k);
    else if (k == "image_every") spec.image_every = get_as<std::size_t>(v, k);
    else if (k == "out") spec.out = get_as<std::string>(v, k);
    else if (k == "label") spec.label = get_as<std::string>(v, k);
    else if (k == "timing_in_metrics") spec.timing_in_metrics = get_as<bool>(v, k);
    else if (k == "dataset") {
      detail::reject_unknown(v, {"format", "train_images", "train_labels", "test_images", "test_labels", "cifar_files",
                                 "cifar_test_files", "limit", "class_balanced"},
                             "dataset.");
      DatasetSpec& d = spec.data;
      for (const auto& [dk, dv] : v.items()) {
        const std::string key = "dataset." + dk;
        if (dk == "format") {
          d.format = get_as<std::string>(dv, key);
          if (d.format != "idx" && d.format != "cifar10") throw ConfigError(key, "must be 'idx' or 'cifar10'");
        } else if (dk == "train_images") d.train_images = get_as<std::string>(dv, key);
        else if (dk == "train_labels") d.train_labels = get_as<std::string>(dv, key);
        else if (dk == "test_images") d.test_images = get_as<std::string>(dv, key);
        else if (dk == "test_labels") d.test_labels = get_as<std::string>(dv, key);
        else if (dk == "cifar_files") d.cifar_files = get_as<std::vector<std::string>>(dv, key);
        else if (dk == "cifar_test_files") d.cifar_test_files = get_as<std::vector<std::string>>(dv, key);
        else if (dk == "limit") d.limit = get_as<std::size_t>(dv, key);
        else if (dk == "class_balanced") d.class_balanced = get_as<bool>(dv, key);
      }
    } else if (k == "classifier") {
      detail::reject_unknown(v, {"epochs", "train_size", "seed", "cache_dir"}, "classifier.");
      for (const auto& [ck, cv] : v.items()) {
        const std::string key = "classifier." + ck;
        if (ck == "epochs") spec.classifier.epochs = get_as<std::size_t>(cv, key);
        else if (ck == "train_size") spec.classifier.train_size = get_as<std::size_t>(cv, key);
        else if (ck == "seed") spec.classifier.seed = get_as<std::uint64_t>(cv, key);
        else if (ck == "cache_dir") spec.classifier.cache_dir = get_as<std::string>(cv, key);
      }
    }
  }

  if (ov.explainer) t.explainer = parse_explainer(*ov.explainer);
  if (ov.alpha) t.alpha = *ov.alpha;
  if (ov.epochs) t.epochs = *ov.epochs;
  if (ov.data_fraction) t.data_fraction = *ov.data_fraction;
  if (ov.diffaug) t.diffaug = *ov.diffaug;
  if (ov.seed) t.seed = *ov.seed;
  if (ov.out) spec.out = *ov.out;

  t.validate();
  if (spec.data.format == "idx" && t.architecture == Architecture::fc) {
    // single-channel input; fc is the default pairing
  }
  if (spec.data.format == "cifar10" && t.architecture == Architecture::fc)
    throw ConfigError("architecture", "cifar10 requires the 'dc' architecture");
  if (spec.classifier.epochs == 0) throw ConfigError("classifier.epochs", "must be positive");
  if (spec.classifier.train_size < 2) throw ConfigError("classifier.train_size", "must be at least 2");
  return spec;
}

inline ExperimentSpec parse_config_file(const std::optional<fs::path>& path, const Overrides& ov = {}) {
  std::string text;
  if (path) {
    std::ifstream is(*path);
    if (!is) throw ConfigError("--config", "cannot read " + path->string());
    std::stringstream ss;
    ss << is.rdbuf();
    text = ss.str();
  }
  return parse_config(text, ov);
}

/// Dataset files must exist; the output directory must be creatable.
inline void validate_paths(const ExperimentSpec& spec) {
  auto need = [](const std::string& key, const std::string& p) {
    if (p.empty()) throw ConfigError(key, "required");
    if (!fs::exists(p)) throw ConfigError(key, "file not found: " + p);
  };
  if (spec.data.format == "idx") {
    need("dataset.train_images", spec.data.train_images);
    if (!spec.data.train_labels.empty()) need("dataset.train_labels", spec.data.train_labels);
    if (!spec.data.test_images.empty()) need("dataset.test_images", spec.data.test_images);
    if (!spec.data.test_labels.empty()) need("dataset.test_labels", spec.data.test_labels);
    if (spec.data.train_labels.empty()) throw ConfigError("dataset.train_labels", "required to train the feature classifier");
  } else {
    if (spec.data.cifar_files.empty()) throw ConfigError("dataset.cifar_files", "required");
    for (const auto& f : spec.data.cifar_files) need("dataset.cifar_files", f);
    for (const auto& f : spec.data.cifar_test_files) need("dataset.cifar_test_files", f);
  }
  std::error_code ec;
  fs::create_directories(spec.out, ec);
  if (ec || !fs::is_directory(spec.out)) throw ConfigError("out", "cannot create output directory " + spec.out);
}

inline json spec_to_json(const ExperimentSpec& s) {
  const TrainConfig& t = s.train;
  std::string policy;
  for (AugOp op : t.aug_policy.ops)
    policy += std::string(policy.empty() ? "" : ",") +
              (op == AugOp::color ? "color" : op == AugOp::translation ? "translation" : "cutout");
  return json{
      {"architecture", t.architecture == Architecture::fc ? "fc" : "dc"},
      {"explainer", explainer_name(t.explainer)},
      {"alpha", t.alpha},
      {"epochs", t.epochs},
      {"batch_size", t.batch_size},
      {"lr", t.lr},
      {"data_fraction", t.data_fraction},
      {"seed", t.seed},
      {"diffaug", t.diffaug},
      {"aug_policy", policy},
      {"xai_start_epoch", t.xai_start()},
      {"lime_samples", t.lime_samples},
      {"n_references", t.n_references},
      {"fid_every", t.fid_every},
      {"fid_samples", t.fid_samples},
      {"image_every", s.image_every},
      {"out", s.out},
      {"label", s.label},
      {"timing_in_metrics", s.timing_in_metrics},
      {"dataset",
       {{"format", s.data.format},
        {"train_images", s.data.train_images},
        {"train_labels", s.data.train_labels},
        {"test_images", s.data.test_images},
        {"test_labels", s.data.test_labels},
        {"cifar_files", s.data.cifar_files},
        {"cifar_test_files", s.data.cifar_test_files},
        {"limit", s.data.limit},
        {"class_balanced", s.data.class_balanced}}},
      {"classifier",
       {{"epochs", s.classifier.epochs},
        {"train_size", s.classifier.train_size},
        {"seed", s.classifier.seed},
        {"cache_dir", s.classifier.cache_dir}}},
  };
}

namespace detail {

inline void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("io", "cannot write " + tmp.string());
    os << text;
    if (!os) throw FormatError("io", "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

inline json read_json(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw FormatError("missing_file", "cannot read " + p.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw FormatError("bad_json", p.string() + ": " + e.what());
  }
}

}  // namespace detail

struct LoadedData {
  Dataset train;             // GAN training images (limited, subsampled)
  Dataset classifier_train;  // labelled images for the feature classifier
  Dataset classifier_test;
};

inline LoadedData load_experiment_data(const ExperimentSpec& spec) {
  const DatasetSpec& d = spec.data;
  Dataset full, test;
  if (d.format == "idx") {
    full = load_idx(d.train_images, d.train_labels.empty() ? std::nullopt : std::optional<fs::path>(d.train_labels));
    if (!d.test_images.empty())
      test = load_idx(d.test_images, d.test_labels.empty() ? std::nullopt : std::optional<fs::path>(d.test_labels));
  } else {
    std::vector<fs::path> files(d.cifar_files.begin(), d.cifar_files.end());
    full = load_cifar10(files);
    if (!d.cifar_test_files.empty()) {
      std::vector<fs::path> tf(d.cifar_test_files.begin(), d.cifar_test_files.end());
      test = load_cifar10(tf);
    }
  }

  LoadedData out;
  const std::size_t ctrain = std::min(spec.classifier.train_size, full.size());
  out.classifier_train = full.head(ctrain);
  if (test.size() > 0 && test.labels) {
    out.classifier_test = test;
  } else {
    // held-out tail of the training file
    std::vector<std::size_t> idx;
    for (std::size_t i = ctrain; i < full.size(); ++i) idx.push_back(i);
    if (idx.empty()) throw ConfigError("classifier.train_size", "leaves no held-out images and no test set is given");
    out.classifier_test = full.subset(idx);
  }

  Dataset train = d.limit ? full.head(d.limit) : full;
  out.train = subsample(train, spec.train.data_fraction, derive_seed(spec.train.seed, 9), d.class_balanced);
  return out;
}

/// Trains (or loads from cache) the LeNet feature classifier.
inline TrainedClassifier obtain_classifier(const ExperimentSpec& spec, const LoadedData& data, std::ostream& log) {
  fs::path cache = spec.classifier.cache_dir.empty() ? fs::path(spec.out).parent_path() / ".classifier-cache"
                                                     : fs::path(spec.classifier.cache_dir);
  const std::string key_src = data.classifier_train.name + "|" + std::to_string(data.classifier_train.size()) + "|" +
                              std::to_string(spec.classifier.seed) + "|" + std::to_string(spec.classifier.epochs);
  std::ostringstream key;
  key << std::hex << std::setw(16) << std::setfill('0') << detail::fnv1a(key_src);
  const fs::path ckpt = cache / ("lenet-" + key.str() + ".xgan");
  const fs::path meta = cache / ("lenet-" + key.str() + ".json");

  const auto classes = static_cast<std::size_t>(
      std::max(*std::max_element(data.classifier_train.labels->begin(), data.classifier_train.labels->end()) + 1, 2));
  if (fs::exists(ckpt) && fs::exists(meta)) {
    TrainedClassifier c{build_lenet_classifier(classes, data.classifier_train.item_shape().at(0), spec.classifier.seed)};
    load_checkpoint(ckpt, {{"C", &c.net}});
    const json m = detail::read_json(meta);
    c.accuracy = m.at("accuracy").get<double>();
    c.low_accuracy = m.at("low_accuracy").get<bool>();
    log << "feature classifier: cached " << ckpt.string() << " (accuracy " << c.accuracy << ")\n";
    return c;
  }

  ClassifierOptions opt;
  opt.epochs = spec.classifier.epochs;
  opt.seed = spec.classifier.seed;
  log << "feature classifier: training on " << data.classifier_train.size() << " images\n";
  TrainedClassifier c = train_feature_classifier(data.classifier_train, data.classifier_test, opt);
  log << "feature classifier: held-out accuracy " << c.accuracy << (c.low_accuracy ? " (WARNING: below 0.9)" : "")
      << "\n";
  fs::create_directories(cache);
  save_checkpoint(ckpt, {{"C", &c.net}});
  detail::write_text_atomic(meta, json{{"accuracy", c.accuracy}, {"low_accuracy", c.low_accuracy},
                                       {"key", key_src}}.dump(2) + "\n");
  return c;
}

inline constexpr char kMetricsHeader[] = "epoch,d_loss,g_loss,fid,seconds,xai_active";

/// Runs one experiment end to end, writing into spec.out:
/// spec.json, metrics.csv, timing.csv, timing.json, fid.json, summary.json,
/// checkpoint.xgan (latest), checkpoint_final.xgan and samples/epoch_NNN.p?m.
/// Throws on failure.
inline TrainTrace run_experiment(const ExperimentSpec& spec, std::ostream& log = std::clog) {
  validate_paths(spec);
  const fs::path out(spec.out);
  detail::write_text_atomic(out / "spec.json", spec_to_json(spec).dump(2) + "\n");

  LoadedData data = load_experiment_data(spec);
  log << "training images: " << data.train.size() << "\n";
  TrainedClassifier clf = obtain_classifier(spec, data, log);
  FidEvaluator fid(clf.net, data.train.images, spec.train.fid_samples);

  std::ofstream metrics(out / "metrics.csv", std::ios::trunc);
  std::ofstream timing(out / "timing.csv", std::ios::trunc);
  if (!metrics || !timing) throw FormatError("io", "cannot write metrics in " + out.string());
  metrics << kMetricsHeader << "\n" << std::flush;
  timing << "epoch,seconds\n";
  json fid_reports = json::array();
  fs::create_directories(out / "samples");
  const Tensor grid_z = evaluation_noise(64, derive_seed(spec.train.seed, 8));
  const std::string ext = data.train.item_shape().at(0) == 1 ? ".pgm" : ".ppm";

  auto sink = [&](const EpochRecord& r, GanPair& pair) {
    metrics << r.epoch << ',' << detail::fmt_double(r.d_loss) << ',' << detail::fmt_double(r.g_loss) << ','
            << (r.fid ? detail::fmt_double(*r.fid) : "") << ','
            << (spec.timing_in_metrics ? detail::fmt_double(r.seconds) : "na") << ',' << (r.xai_active ? 1 : 0)
            << "\n"
            << std::flush;
    timing << r.epoch << ',' << detail::fmt_double(r.seconds) << "\n" << std::flush;
    if (r.fid) {
      fid_reports.push_back({{"epoch", r.epoch}, {"n_real", fid.n_real()},
                             {"n_gen", std::min(spec.train.fid_samples, data.train.size())},
                             {"fid", *r.fid}, {"feature_dim", fid.feature_dim()}});
      detail::write_text_atomic(out / "fid.json", fid_reports.dump(2) + "\n");
    }
    const bool last = r.epoch + 1 == spec.train.epochs;
    if (last || (spec.image_every && (r.epoch + 1) % spec.image_every == 0)) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03zu", r.epoch);
      write_pnm(out / "samples" / (name + ext), make_grid(generate(pair.generator, grid_z)));
    }
    save_checkpoint(out / "checkpoint.xgan", {{"G", &pair.generator}, {"D", &pair.discriminator}});
    log << "epoch " << r.epoch << " d_loss " << r.d_loss << " g_loss " << r.g_loss;
    if (r.fid) log << " fid " << *r.fid;
    log << " xai " << r.xai_active << " (" << r.seconds << "s)\n";
  };

  TrainResult res = train(spec.train, data.train, &fid, sink);
  if (fid_reports.empty()) detail::write_text_atomic(out / "fid.json", "[]\n");
  save_checkpoint(out / "checkpoint_final.xgan", {{"G", &res.pair.generator}, {"D", &res.pair.discriminator}});

  double total = 0.0;
  for (const EpochRecord& r : res.trace.epochs) total += r.seconds;
  json sections = json::object();
  for (const auto& [k, v] : res.stopwatch.totals()) sections[k] = v;
  detail::write_text_atomic(out / "timing.json", json{{"total_seconds", total}, {"sections", sections}}.dump(2) + "\n");
  json summary{{"explainer", explainer_name(spec.train.explainer)},
               {"epochs_completed", res.trace.epochs.size()},
               {"aborted", res.trace.aborted},
               {"diagnostic", res.trace.diagnostic},
               {"classifier_accuracy", clf.accuracy},
               {"classifier_low_accuracy", clf.low_accuracy}};
  if (!res.trace.epochs.empty() && res.trace.epochs.back().fid) summary["final_fid"] = *res.trace.epochs.back().fid;
  detail::write_text_atomic(out / "summary.json", summary.dump(2) + "\n");
  if (res.trace.aborted) throw NumericError("train", res.trace.diagnostic);
  return res.trace;
}

inline std::string error_json(const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  return json{{"error", err ? err->code() : "internal"}, {"message", e.what()}}.dump();
}

/// CLI wrapper: 0 on success; otherwise prints a JSON error to `err`.
inline int run(const ExperimentSpec& spec, std::ostream& log = std::clog, std::ostream& err = std::cerr) {
  try {
    run_experiment(spec, log);
    return 0;
  } catch (const std::exception& e) {
    err << error_json(e) << "\n";
    return 1;
  }
}

// --------------------------------------------------------------------------
// compare

struct RunSummary {
  std::string dir;
  std::string explainer;
  double data_fraction = 1.0;
  std::optional<double> final_fid;
  double total_seconds = 0.0;
  std::map<std::string, double> sections;
};

inline RunSummary read_run(const fs::path& dir) {
  for (const char* f : {"spec.json", "metrics.csv", "fid.json", "timing.json"})
    if (!fs::exists(dir / f)) throw FormatError("missing_file", "run " + dir.string() + " is missing " + f);
  RunSummary r;
  r.dir = dir.string();
  const json spec = detail::read_json(dir / "spec.json");
  r.explainer = spec.value("explainer", "none");
  r.data_fraction = spec.value("data_fraction", 1.0);
  const json fids = detail::read_json(dir / "fid.json");
  if (fids.is_array() && !fids.empty()) r.final_fid = fids.back().at("fid").get<double>();
  const json timing = detail::read_json(dir / "timing.json");
  r.total_seconds = timing.at("total_seconds").get<double>();
  for (const auto& [k, v] : timing.at("sections").items()) r.sections[k] = v.get<double>();
  return r;
}

/// Summary table (CSV) of several runs. The overhead ratio is each run's
/// total training seconds over the first standard (explainer "none") run,
/// or over the first run when no standard run is present. Read-only.
inline std::string compare(const std::vector<fs::path>& dirs) {
  if (dirs.size() < 2) throw ConfigError("compare", "needs at least two run directories");
  std::vector<RunSummary> runs;
  for (const auto& d : dirs) runs.push_back(read_run(d));
  const RunSummary* base = &runs.front();
  for (const auto& r : runs)
    if (r.explainer == "none") {
      base = &r;
      break;
    }
  std::ostringstream os;
  os << "run,explainer,data_fraction,final_fid,total_seconds,overhead_ratio,d_step_seconds,g_step_seconds,"
        "explain_seconds,fid_seconds\n";
  auto sec = [](const RunSummary& r, const char* k) {
    auto it = r.sections.find(k);
    return it == r.sections.end() ? 0.0 : it->second;
  };
  for (const auto& r : runs) {
    os << r.dir << ',' << r.explainer << ',' << detail::fmt_double(r.data_fraction) << ','
       << (r.final_fid ? detail::fmt_double(*r.final_fid) : "") << ',' << detail::fmt_double(r.total_seconds) << ','
       << detail::fmt_double(base->total_seconds > 0 ? r.total_seconds / base->total_seconds : 0.0) << ','
       << detail::fmt_double(sec(r, "d_step")) << ',' << detail::fmt_double(sec(r, "g_step")) << ','
       << detail::fmt_double(sec(r, "explain")) << ',' << detail::fmt_double(sec(r, "fid")) << "\n";
  }
  return os.str();
}

}  // namespace xaigan

#include "cxr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cxr/embedding_file.hpp"
#include "cxr/png_io.hpp"

namespace fs = std::filesystem;

namespace cxr {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config

void RunConfig::validate() const {
  if (std::abs(split.train_fraction + split.val_fraction - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1");
  if (split.train_fraction <= 0.0 || split.val_fraction <= 0.0)
    throw ConfigError("split fractions must be positive");
  if (vae.architectures.empty())
    throw ConfigError("at least one VAE architecture is required");
  if (vae.latent_dims.empty())
    throw ConfigError("at least one latent dimension is required");
  if (vae.seeds.empty()) throw ConfigError("at least one VAE seed is required");
  if (classifiers.kinds.empty())
    throw ConfigError("at least one classifier kind is required");
  if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0))
    throw ConfigError("binarize threshold must lie in (0,1)");
  if (dataset.synthetic) {
    if (dataset.n_pool < 2 || dataset.n_test < 1)
      throw ConfigError("synthetic dataset sizes too small");
  } else {
    if (dataset.image_dir.empty() || dataset.label_csv.empty())
      throw ConfigError("real dataset needs image_dir and label_csv");
  }
}

namespace {

json config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.master_seed;
  j["dataset"] = {{"type", c.dataset.synthetic ? "synthetic" : "real"},
                  {"n_pool", c.dataset.n_pool},
                  {"n_test", c.dataset.n_test},
                  {"image_size", c.dataset.synthetic_spec.image_size},
                  {"noise_level", c.dataset.synthetic_spec.noise_level},
                  {"uncertain_fraction",
                   c.dataset.synthetic_spec.uncertain_fraction},
                  {"background", c.dataset.synthetic_spec.background},
                  {"marginals", c.dataset.synthetic_spec.class_marginals},
                  {"image_dir", c.dataset.image_dir},
                  {"label_csv", c.dataset.label_csv},
                  {"test_image_dir", c.dataset.test_image_dir},
                  {"test_label_csv", c.dataset.test_label_csv}};
  j["preprocess"] = {{"resize_to", c.preprocess.resize_to},
                     {"template_path", c.preprocess.template_path},
                     {"crop_size", c.preprocess.crop_size},
                     {"channels", c.preprocess.channels}};
  j["split"] = {{"train_fraction", c.split.train_fraction},
                {"val_fraction", c.split.val_fraction},
                {"by_patient", c.split.by_patient}};
  std::string policy_name;
  switch (c.policy.kind) {
    case UncertaintyPolicyKind::UOnes: policy_name = "u-ones"; break;
    case UncertaintyPolicyKind::UZeros: policy_name = "u-zeros"; break;
    case UncertaintyPolicyKind::Lsr: policy_name = "lsr"; break;
  }
  j["labels"] = {{"policy", policy_name},
                 {"lsr_alpha", c.policy.lsr_alpha},
                 {"lsr_beta", c.policy.lsr_beta},
                 {"unmentioned_value", c.policy.unmentioned_value},
                 {"binarize_threshold", c.binarize_threshold}};
  json archs = json::array();
  for (const auto& a : c.vae.architectures) {
    archs.push_back({{"name", a.name},
                     {"encoder_widths", a.encoder_widths},
                     {"decoder_widths", a.decoder_widths},
                     {"activation", a.activation}});
  }
  j["vae"] = {{"architectures", archs},
              {"latent_dims", c.vae.latent_dims},
              {"seeds", c.vae.seeds},
              {"epochs", c.vae.train.epochs},
              {"initial_lr", c.vae.train.initial_lr},
              {"plateau_patience", c.vae.train.plateau_patience},
              {"batch_size", c.vae.train.batch_size},
              {"adam_beta1", c.vae.train.adam_beta1},
              {"adam_beta2", c.vae.train.adam_beta2},
              {"adam_epsilon", c.vae.train.adam_epsilon},
              {"frozen_encoder_layers", c.vae.train.frozen_encoder_layers},
              {"beta_warmup_epochs", c.vae.beta.warmup_epochs},
              {"beta_base", c.vae.beta.base},
              {"beta_growth", c.vae.beta.growth},
              {"beta_absolute_exponent", c.vae.beta.absolute_exponent},
              {"sampled_embeddings", c.vae.sampled_embeddings}};
  json kinds = json::array();
  for (ClassifierKind k : c.classifiers.kinds)
    kinds.push_back(classifier_kind_name(k));
  auto forest_json = [](const ForestHyperparams& h) {
    return json{{"n_estimators", h.n_estimators},
                {"max_depth", h.max_depth},
                {"min_samples_split", h.min_samples_split},
                {"min_samples_leaf", h.min_samples_leaf},
                {"features_per_split", h.features_per_split}};
  };
  j["classifiers"] = {
      {"kinds", kinds},
      {"rf", forest_json(c.classifiers.rf)},
      {"xrt", forest_json(c.classifiers.xrt)},
      {"gb",
       {{"n_estimators", c.classifiers.gb.n_estimators},
        {"max_depth", c.classifiers.gb.max_depth},
        {"learning_rate", c.classifiers.gb.learning_rate},
        {"min_samples_split", c.classifiers.gb.min_samples_split},
        {"min_samples_leaf", c.classifiers.gb.min_samples_leaf}}},
      {"knn_k", c.classifiers.knn_k},
      {"grid_enabled", c.classifiers.grid_enabled},
      {"grid",
       {{"n_estimators", c.classifiers.grid.n_estimators},
        {"max_depth", c.classifiers.grid.max_depth},
        {"min_samples_split", c.classifiers.grid.min_samples_split},
        {"min_samples_leaf", c.classifiers.grid.min_samples_leaf}}},
      {"grid_holdout_fraction", c.classifiers.grid_holdout_fraction}};
  j["ensemble"] = {{"simple", c.ensemble.simple},
                   {"entropy", c.ensemble.entropy},
                   {"entropy_normalized", c.ensemble.entropy_normalized}};
  return j;
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (j.contains(key)) return j.at(key).get<T>();
  return fallback;
}

ForestHyperparams forest_from_json(const json& j, ForestHyperparams base) {
  base.n_estimators = get_or(j, "n_estimators", base.n_estimators);
  base.max_depth = get_or(j, "max_depth", base.max_depth);
  base.min_samples_split = get_or(j, "min_samples_split", base.min_samples_split);
  base.min_samples_leaf = get_or(j, "min_samples_leaf", base.min_samples_leaf);
  base.features_per_split =
      get_or(j, "features_per_split", base.features_per_split);
  return base;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  RunConfig c;
  c.master_seed = get_or<std::uint64_t>(j, "seed", c.master_seed);

  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    c.dataset.synthetic = get_or<std::string>(d, "type", "synthetic") ==
                          "synthetic";
    c.dataset.n_pool = get_or<Index>(d, "n_pool", c.dataset.n_pool);
    c.dataset.n_test = get_or<Index>(d, "n_test", c.dataset.n_test);
    c.dataset.synthetic_spec.image_size =
        get_or<Index>(d, "image_size", c.dataset.synthetic_spec.image_size);
    c.dataset.synthetic_spec.noise_level =
        get_or<Scalar>(d, "noise_level", c.dataset.synthetic_spec.noise_level);
    c.dataset.synthetic_spec.uncertain_fraction = get_or<Scalar>(
        d, "uncertain_fraction", c.dataset.synthetic_spec.uncertain_fraction);
    c.dataset.synthetic_spec.background =
        get_or<Scalar>(d, "background", c.dataset.synthetic_spec.background);
    if (d.contains("marginals")) {
      const auto m = d["marginals"].get<std::vector<Scalar>>();
      if (m.size() != kNumFindings)
        throw ConfigError("marginals must list exactly 14 values");
      std::copy(m.begin(), m.end(),
                c.dataset.synthetic_spec.class_marginals.begin());
    }
    c.dataset.image_dir = get_or<std::string>(d, "image_dir", "");
    c.dataset.label_csv = get_or<std::string>(d, "label_csv", "");
    c.dataset.test_image_dir = get_or<std::string>(d, "test_image_dir", "");
    c.dataset.test_label_csv = get_or<std::string>(d, "test_label_csv", "");
  }

  if (j.contains("preprocess")) {
    const json& p = j["preprocess"];
    c.preprocess.resize_to = get_or<Index>(p, "resize_to", 0);
    c.preprocess.template_path = get_or<std::string>(p, "template_path", "");
    c.preprocess.crop_size = get_or<Index>(p, "crop_size", 0);
    c.preprocess.channels = get_or<int>(p, "channels", 1);
  }

  if (j.contains("split")) {
    const json& s = j["split"];
    c.split.train_fraction =
        get_or<Scalar>(s, "train_fraction", c.split.train_fraction);
    c.split.val_fraction =
        get_or<Scalar>(s, "val_fraction", c.split.val_fraction);
    c.split.by_patient = get_or<bool>(s, "by_patient", false);
  }

  if (j.contains("labels")) {
    const json& l = j["labels"];
    const std::string policy = get_or<std::string>(l, "policy", "u-ones");
    if (policy == "u-ones") {
      c.policy.kind = UncertaintyPolicyKind::UOnes;
    } else if (policy == "u-zeros") {
      c.policy.kind = UncertaintyPolicyKind::UZeros;
    } else if (policy == "lsr") {
      c.policy.kind = UncertaintyPolicyKind::Lsr;
    } else {
      throw ConfigError("unknown uncertainty policy: " + policy);
    }
    c.policy.lsr_alpha = get_or<Scalar>(l, "lsr_alpha", c.policy.lsr_alpha);
    c.policy.lsr_beta = get_or<Scalar>(l, "lsr_beta", c.policy.lsr_beta);
    c.policy.unmentioned_value =
        get_or<Scalar>(l, "unmentioned_value", c.policy.unmentioned_value);
    c.binarize_threshold =
        get_or<Scalar>(l, "binarize_threshold", c.binarize_threshold);
  }

  if (j.contains("vae")) {
    const json& v = j["vae"];
    if (v.contains("architectures")) {
      for (const json& a : v["architectures"]) {
        VaeStageConfig::NamedArch arch;
        arch.name = a.at("name").get<std::string>();
        arch.encoder_widths = a.at("encoder_widths").get<std::vector<Index>>();
        arch.decoder_widths = a.at("decoder_widths").get<std::vector<Index>>();
        arch.activation = get_or<std::string>(a, "activation", "tanh");
        c.vae.architectures.push_back(std::move(arch));
      }
    }
    c.vae.latent_dims =
        get_or<std::vector<Index>>(v, "latent_dims", c.vae.latent_dims);
    c.vae.seeds = get_or<std::vector<std::uint64_t>>(v, "seeds", c.vae.seeds);
    c.vae.train.epochs = get_or<int>(v, "epochs", c.vae.train.epochs);
    c.vae.train.initial_lr =
        get_or<Scalar>(v, "initial_lr", c.vae.train.initial_lr);
    c.vae.train.plateau_patience =
        get_or<int>(v, "plateau_patience", c.vae.train.plateau_patience);
    c.vae.train.batch_size =
        get_or<Index>(v, "batch_size", c.vae.train.batch_size);
    c.vae.train.adam_beta1 =
        get_or<Scalar>(v, "adam_beta1", c.vae.train.adam_beta1);
    c.vae.train.adam_beta2 =
        get_or<Scalar>(v, "adam_beta2", c.vae.train.adam_beta2);
    c.vae.train.adam_epsilon =
        get_or<Scalar>(v, "adam_epsilon", c.vae.train.adam_epsilon);
    c.vae.train.frozen_encoder_layers = get_or<std::size_t>(
        v, "frozen_encoder_layers", c.vae.train.frozen_encoder_layers);
    c.vae.beta.warmup_epochs =
        get_or<int>(v, "beta_warmup_epochs", c.vae.beta.warmup_epochs);
    c.vae.beta.base = get_or<Scalar>(v, "beta_base", c.vae.beta.base);
    c.vae.beta.growth = get_or<Scalar>(v, "beta_growth", c.vae.beta.growth);
    c.vae.beta.absolute_exponent = get_or<bool>(v, "beta_absolute_exponent",
                                                c.vae.beta.absolute_exponent);
    c.vae.sampled_embeddings =
        get_or<bool>(v, "sampled_embeddings", c.vae.sampled_embeddings);
  }
  if (c.vae.architectures.empty()) {
    VaeStageConfig::NamedArch arch;
    arch.name = "mlp64";
    arch.encoder_widths = {64};
    arch.decoder_widths = {512};
    c.vae.architectures.push_back(std::move(arch));
  }

  if (j.contains("classifiers")) {
    const json& cl = j["classifiers"];
    if (cl.contains("kinds")) {
      c.classifiers.kinds.clear();
      for (const json& k : cl["kinds"])
        c.classifiers.kinds.push_back(
            classifier_kind_from_name(k.get<std::string>()));
    }
    ForestHyperparams rf_default;
    rf_default.min_samples_leaf = 2;
    rf_default.min_samples_split = 2;
    ForestHyperparams xrt_default;
    xrt_default.min_samples_leaf = 1;
    xrt_default.min_samples_split = 5;
    c.classifiers.rf = cl.contains("rf")
                           ? forest_from_json(cl["rf"], rf_default)
                           : rf_default;
    c.classifiers.xrt = cl.contains("xrt")
                            ? forest_from_json(cl["xrt"], xrt_default)
                            : xrt_default;
    if (cl.contains("gb")) {
      const json& g = cl["gb"];
      c.classifiers.gb.n_estimators =
          get_or(g, "n_estimators", c.classifiers.gb.n_estimators);
      c.classifiers.gb.max_depth =
          get_or(g, "max_depth", c.classifiers.gb.max_depth);
      c.classifiers.gb.learning_rate =
          get_or(g, "learning_rate", c.classifiers.gb.learning_rate);
      c.classifiers.gb.min_samples_split =
          get_or(g, "min_samples_split", c.classifiers.gb.min_samples_split);
      c.classifiers.gb.min_samples_leaf =
          get_or(g, "min_samples_leaf", c.classifiers.gb.min_samples_leaf);
    }
    c.classifiers.knn_k = get_or(cl, "knn_k", c.classifiers.knn_k);
    c.classifiers.grid_enabled = get_or(cl, "grid_enabled", false);
    if (cl.contains("grid")) {
      const json& g = cl["grid"];
      c.classifiers.grid.n_estimators =
          get_or<std::vector<int>>(g, "n_estimators", {});
      c.classifiers.grid.max_depth = get_or<std::vector<int>>(g, "max_depth", {});
      c.classifiers.grid.min_samples_split =
          get_or<std::vector<int>>(g, "min_samples_split", {});
      c.classifiers.grid.min_samples_leaf =
          get_or<std::vector<int>>(g, "min_samples_leaf", {});
    }
    c.classifiers.grid_holdout_fraction =
        get_or(cl, "grid_holdout_fraction", c.classifiers.grid_holdout_fraction);
  } else {
    c.classifiers.rf.min_samples_leaf = 2;
    c.classifiers.rf.min_samples_split = 2;
    c.classifiers.xrt.min_samples_leaf = 1;
    c.classifiers.xrt.min_samples_split = 5;
  }

  if (j.contains("ensemble")) {
    const json& e = j["ensemble"];
    c.ensemble.simple = get_or(e, "simple", true);
    c.ensemble.entropy = get_or(e, "entropy", true);
    c.ensemble.entropy_normalized = get_or(e, "entropy_normalized", false);
  }

  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

std::string run_config_digest(const RunConfig& config) {
  const std::string canonical = config_to_json(config).dump();
  std::ostringstream out;
  out << std::hex << fnv1a64(canonical);
  return out.str();
}

// ---------------------------------------------------------------------------
// Manifest and lock

void write_manifest(const std::string& path, const Manifest& manifest) {
  json j;
  j["version"] = 1;
  j["seed"] = manifest.seed;
  j["config_digest"] = manifest.config_digest;
  j["label_csv"] = manifest.label_csv;
  j["test_label_csv"] = manifest.test_label_csv;
  json items = json::array();
  for (const auto& item : manifest.items)
    items.push_back(
        {{"path", item.path}, {"split", item.split}, {"digest", item.digest}});
  j["items"] = std::move(items);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << j.dump(2) << '\n';
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  Manifest manifest;
  manifest.seed = j.at("seed").get<std::uint64_t>();
  manifest.config_digest = j.at("config_digest").get<std::string>();
  manifest.label_csv = j.at("label_csv").get<std::string>();
  manifest.test_label_csv = get_or<std::string>(j, "test_label_csv", "");
  for (const json& item : j.at("items")) {
    manifest.items.push_back({item.at("path").get<std::string>(),
                              item.at("split").get<std::string>(),
                              item.at("digest").get<std::string>()});
  }
  return manifest;
}

RunLock::RunLock(const std::string& run_dir) {
  fs::create_directories(run_dir);
  path_ = (fs::path(run_dir) / "lock").string();
  std::ifstream probe(path_);
  if (probe)
    throw DataError("run directory is locked by another process: " + run_dir);
  std::ofstream lock(path_);
  lock << "locked\n";
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace {

constexpr const char* kManifestName = "manifest.json";
constexpr const char* kArtifactsName = "artifacts.json";

void record_artifact(const std::string& run_dir, const std::string& name,
                     const std::string& rel_path) {
  const fs::path artifacts_path = fs::path(run_dir) / kArtifactsName;
  json j = json::object();
  if (fs::exists(artifacts_path)) {
    std::ifstream in(artifacts_path);
    in >> j;
  }
  j[name] = {{"path", rel_path},
             {"digest", file_digest((fs::path(run_dir) / rel_path).string())}};
  std::ofstream out(artifacts_path);
  out << j.dump(2) << '\n';
}

GrayImage preprocess_image(const PreprocessConfig& cfg, GrayImage img,
                           const GrayImage* tpl, bool* warned) {
  if (cfg.resize_to > 0)
    img = resize_bilinear(img, cfg.resize_to, cfg.resize_to);
  if (cfg.crop_size > 0) {
    if (!tpl) throw ConfigError("crop requested but no template configured");
    const TemplateMatchResult result = template_match_crop(img, *tpl,
                                                           cfg.crop_size);
    if (result.degenerate_fallback && warned) *warned = true;
    img = result.crop;
  }
  return img;
}

std::map<std::string, LabelRecord> records_by_path(
    const std::vector<LabelRecord>& records) {
  std::map<std::string, LabelRecord> map;
  for (const auto& r : records) map[r.image_path] = r;
  return map;
}

std::string patient_key(const std::string& path) {
  const auto pos = path.find("patient");
  if (pos == std::string::npos) return path;
  const auto end = path.find('/', pos);
  return path.substr(pos, end == std::string::npos ? std::string::npos
                                                   : end - pos);
}

std::vector<std::string> assign_splits(const std::vector<std::string>& paths,
                                       const SplitConfig& split,
                                       RngStream& rng) {
  const auto n = static_cast<Index>(paths.size());
  std::vector<std::string> out(paths.size(), "val");
  if (!split.by_patient) {
    const std::vector<Index> order = rng.shuffled_indices(n);
    const Index n_train = static_cast<Index>(
        std::llround(split.train_fraction * static_cast<Scalar>(n)));
    for (Index i = 0; i < n; ++i)
      out[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
          i < n_train ? "train" : "val";
    return out;
  }
  std::vector<std::string> keys;
  std::set<std::string> seen;
  for (const auto& p : paths) {
    const std::string key = patient_key(p);
    if (seen.insert(key).second) keys.push_back(key);
  }
  const auto n_keys = static_cast<Index>(keys.size());
  const std::vector<Index> order = rng.shuffled_indices(n_keys);
  const Index n_train_keys = static_cast<Index>(
      std::llround(split.train_fraction * static_cast<Scalar>(n_keys)));
  std::set<std::string> train_keys;
  for (Index i = 0; i < n_train_keys; ++i)
    train_keys.insert(keys[static_cast<std::size_t>(
        order[static_cast<std::size_t>(i)])]);
  for (std::size_t i = 0; i < paths.size(); ++i)
    out[i] = train_keys.count(patient_key(paths[i])) ? "train" : "val";
  return out;
}

}  // namespace

std::string vae_tag(const std::string& arch_name, Index latent_dim,
                    std::uint64_t seed) {
  return arch_name + "-d" + std::to_string(latent_dim) + "-s" +
         std::to_string(seed);
}

// ---------------------------------------------------------------------------
// prepare

void cmd_prepare(const PipelineContext& ctx) {
  const RunConfig& config = ctx.config;
  config.validate();
  const fs::path run_dir(ctx.run_dir);
  fs::create_directories(run_dir / "data");

  Manifest manifest;
  manifest.seed = config.master_seed;
  manifest.config_digest = run_config_digest(config);
  manifest.label_csv = "data/labels.csv";
  manifest.test_label_csv = "data/labels_test.csv";

  const RngStream master(config.master_seed);
  const GrayImage* tpl_ptr = nullptr;
  GrayImage tpl;
  if (config.preprocess.crop_size > 0) {
    if (config.preprocess.template_path.empty())
      throw ConfigError("crop_size set but template_path missing");
    tpl = read_gray_image(config.preprocess.template_path);
    tpl_ptr = &tpl;
  }

  std::vector<LabelRecord> pool_records, test_records;
  std::vector<std::string> pool_paths, test_paths;

  auto store_image = [&](const GrayImage& img, const std::string& rel_path) {
    write_png_gray((run_dir / rel_path).string(), img, 16);
  };

  if (config.dataset.synthetic) {
    auto [pool_images, pool_labels] = generate_synthetic_dataset(
        config.dataset.synthetic_spec, config.dataset.n_pool,
        master.split("synthetic-train"));
    auto [test_images, test_labels] = generate_synthetic_dataset(
        config.dataset.synthetic_spec, config.dataset.n_test,
        master.split("synthetic-test"));
    for (Index i = 0; i < config.dataset.n_pool; ++i) {
      const std::string rel = "data/pool_" + std::to_string(i) + ".png";
      bool warned = false;
      store_image(preprocess_image(config.preprocess,
                                   pool_images[static_cast<std::size_t>(i)],
                                   tpl_ptr, &warned),
                  rel);
      pool_labels[static_cast<std::size_t>(i)].image_path = rel;
      pool_paths.push_back(rel);
    }
    for (Index i = 0; i < config.dataset.n_test; ++i) {
      const std::string rel = "data/test_" + std::to_string(i) + ".png";
      bool warned = false;
      store_image(preprocess_image(config.preprocess,
                                   test_images[static_cast<std::size_t>(i)],
                                   tpl_ptr, &warned),
                  rel);
      test_labels[static_cast<std::size_t>(i)].image_path = rel;
      test_paths.push_back(rel);
    }
    pool_records = std::move(pool_labels);
    test_records = std::move(test_labels);
  } else {
    const std::vector<LabelRecord> raw_pool =
        read_label_csv(config.dataset.label_csv);
    std::vector<std::string> failures;
    Index index = 0;
    for (const auto& record : raw_pool) {
      const std::string src =
          (fs::path(config.dataset.image_dir) / record.image_path).string();
      try {
        bool warned = false;
        GrayImage img = preprocess_image(config.preprocess,
                                         read_gray_image(src), tpl_ptr,
                                         &warned);
        if (warned)
          std::cerr << "warning: degenerate template match, center crop used: "
                    << src << '\n';
        const std::string rel = "data/pool_" + std::to_string(index) + ".png";
        store_image(img, rel);
        LabelRecord stored = record;
        stored.image_path = rel;
        pool_records.push_back(std::move(stored));
        pool_paths.push_back(rel);
        ++index;
      } catch (const DataError& e) {
        failures.push_back(src + ": " + e.what());
      }
    }
    if (!raw_pool.empty() &&
        static_cast<double>(failures.size()) >
            0.01 * static_cast<double>(raw_pool.size())) {
      std::string detail;
      for (const auto& f : failures) detail += "\n  " + f;
      throw DataError("more than 1% of items failed to load:" + detail);
    }
    for (const auto& f : failures)
      std::cerr << "warning: skipped item: " << f << '\n';

    if (!config.dataset.test_label_csv.empty()) {
      const std::vector<LabelRecord> raw_test =
          read_label_csv(config.dataset.test_label_csv);
      Index test_index = 0;
      for (const auto& record : raw_test) {
        const std::string src =
            (fs::path(config.dataset.test_image_dir) / record.image_path)
                .string();
        bool warned = false;
        GrayImage img = preprocess_image(config.preprocess,
                                         read_gray_image(src), tpl_ptr,
                                         &warned);
        const std::string rel =
            "data/test_" + std::to_string(test_index) + ".png";
        store_image(img, rel);
        LabelRecord stored = record;
        stored.image_path = rel;
        test_records.push_back(std::move(stored));
        test_paths.push_back(rel);
        ++test_index;
      }
    }
  }

  // Seeded shuffle and fraction split of the pool; the test set is separate.
  RngStream split_rng = master.split("split");
  const std::vector<std::string> splits =
      assign_splits(pool_paths, config.split, split_rng);
  for (std::size_t i = 0; i < pool_paths.size(); ++i) {
    manifest.items.push_back(
        {pool_paths[i], splits[i],
         file_digest((run_dir / pool_paths[i]).string())});
  }
  for (const auto& path : test_paths) {
    manifest.items.push_back(
        {path, "test", file_digest((run_dir / path).string())});
  }

  write_label_csv((run_dir / manifest.label_csv).string(), pool_records);
  write_label_csv((run_dir / manifest.test_label_csv).string(), test_records);
  write_manifest((run_dir / kManifestName).string(), manifest);
  record_artifact(ctx.run_dir, "manifest", kManifestName);
  record_artifact(ctx.run_dir, "labels", manifest.label_csv);
  record_artifact(ctx.run_dir, "labels_test", manifest.test_label_csv);
}

// ---------------------------------------------------------------------------
// split loading

Matrix load_split_matrix(const PipelineContext& ctx, const Manifest& manifest,
                         const std::string& split,
                         const std::vector<std::string>& allowed) {
  if (std::find(allowed.begin(), allowed.end(), split) == allowed.end())
    throw DataError("access to split '" + split +
                    "' is not permitted by this stage");
  const fs::path run_dir(ctx.run_dir);
  std::vector<Vector> columns;
  for (const auto& item : manifest.items) {
    if (item.split != split) continue;
    const GrayImage img = read_gray_image((run_dir / item.path).string());
    const Index pixels = img.height() * img.width();
    Vector flat(pixels);
    for (Index r = 0; r < img.height(); ++r)
      for (Index c = 0; c < img.width(); ++c)
        flat[r * img.width() + c] = img.pixels(r, c);
    if (ctx.config.preprocess.channels > 1) {
      const MultiChannelImage channels =
          replicate_channels(img, ctx.config.preprocess.channels);
      Vector wide(pixels * static_cast<Index>(channels.size()));
      for (std::size_t ch = 0; ch < channels.size(); ++ch)
        wide.segment(static_cast<Index>(ch) * pixels, pixels) = flat;
      flat = std::move(wide);
    }
    columns.push_back(std::move(flat));
  }
  if (columns.empty())
    throw DataError("split '" + split + "' has no items in the manifest");
  Matrix out(columns.front().size(), static_cast<Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i)
    out.col(static_cast<Index>(i)) = columns[i];
  return out;
}

BoolMatrix split_eval_targets(const PipelineContext& ctx,
                              const Manifest& manifest,
                              const std::string& split) {
  const fs::path run_dir(ctx.run_dir);
  const auto pool_map = records_by_path(
      read_label_csv((run_dir / manifest.label_csv).string()));
  std::map<std::string, LabelRecord> test_map;
  if (!manifest.test_label_csv.empty() &&
      fs::exists(run_dir / manifest.test_label_csv)) {
    test_map = records_by_path(
        read_label_csv((run_dir / manifest.test_label_csv).string()));
  }

  const RngStream master(ctx.config.master_seed);
  const RngStream lsr_base = master.split("lsr");
  std::vector<std::array<bool, kNumFindings>> rows;
  for (std::size_t i = 0; i < manifest.items.size(); ++i) {
    const auto& item = manifest.items[i];
    if (item.split != split) continue;
    const auto& map = item.split == "test" ? test_map : pool_map;
    const auto it = map.find(item.path);
    if (it == map.end())
      throw DataError("no label record for manifest item: " + item.path);
    // LSR draws keyed by the global manifest index: identical targets no
    // matter which checkpoint or stage asks.
    RngStream row_rng = lsr_base.split(static_cast<std::uint64_t>(i));
    const ResolvedTargets resolved =
        apply_uncertainty_policy(it->second, ctx.config.policy, row_rng);
    rows.push_back(binarize_targets(resolved, ctx.config.binarize_threshold));
  }

  BoolMatrix out(static_cast<Index>(rows.size()), kNumEvalClasses);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < kNumEvalClasses; ++c)
      out(static_cast<Index>(r), c) = rows[r][static_cast<std::size_t>(
          eval_class_indices()[static_cast<std::size_t>(c)])];
  return out;
}

// ---------------------------------------------------------------------------
// train-vae

void cmd_train_vae(const PipelineContext& ctx) {
  const RunConfig& config = ctx.config;
  const fs::path run_dir(ctx.run_dir);
  const Manifest manifest = read_manifest((run_dir / kManifestName).string());
  const std::string config_digest = run_config_digest(config);

  const Matrix train_data =
      load_split_matrix(ctx, manifest, "train", {"train", "val"});
  const Matrix val_data =
      load_split_matrix(ctx, manifest, "val", {"train", "val"});

  const RngStream master(config.master_seed);
  for (const auto& named : config.vae.architectures) {
    for (Index latent_dim : config.vae.latent_dims) {
      for (std::uint64_t seed : config.vae.seeds) {
        const std::string tag = vae_tag(named.name, latent_dim, seed);
        const std::string ckpt_rel = "vae-" + tag + ".ckpt";
        const std::string resume_rel = "vae-" + tag + ".resume";
        const std::string log_rel = "vae-" + tag + ".log.csv";
        const fs::path ckpt_path = run_dir / ckpt_rel;
        const fs::path resume_path = run_dir / resume_rel;
        if (fs::exists(ckpt_path)) continue;  // already trained

        VaeArchitecture arch;
        arch.input_size = train_data.rows();
        arch.encoder_widths = named.encoder_widths;
        arch.latent_dim = latent_dim;
        arch.decoder_widths = named.decoder_widths;
        arch.activation = named.activation;

        const RngStream vae_rng = master.split("vae").split(seed);
        VaeParams params;
        AdamState adam;
        std::vector<EpochLog> log;
        int start_epoch = 0;
        if (fs::exists(resume_path)) {
          Checkpoint resume = load_checkpoint(resume_path.string());
          if (!resume.adam)
            throw DataError("resume checkpoint lacks optimizer state: " +
                            resume_rel);
          params = std::move(resume.params);
          adam = std::move(*resume.adam);
          start_epoch = resume.epoch;
          // log rows up to the resume epoch
          std::ifstream log_in((run_dir / log_rel).string());
          std::string line;
          std::getline(log_in, line);  // header
          while (std::getline(log_in, line) && !line.empty()) {
            EpochLog e{};
            std::istringstream row(line);
            char comma;
            row >> e.epoch >> comma >> e.rec_loss >> comma >> e.kl_loss >>
                comma >> e.beta >> comma >> e.lr >> comma >> e.val_loss;
            if (e.epoch < start_epoch) log.push_back(e);
          }
        } else {
          RngStream init_rng = vae_rng.split("vae-init");
          params = init_params(arch, init_rng);
          adam = AdamState::make(params.size(), config.vae.train.initial_lr,
                                 config.vae.train.adam_beta1,
                                 config.vae.train.adam_beta2,
                                 config.vae.train.adam_epsilon);
        }

        const auto save_resume = [&](const VaeParams& p, const AdamState& a,
                                     const std::vector<EpochLog>& l) {
          save_checkpoint(resume_path.string(), p, config.vae.beta,
                          config_digest, seed,
                          l.empty() ? 0 : l.back().epoch + 1, &a);
          write_training_log_csv((run_dir / log_rel).string(), l);
        };

        fit_inplace(params, adam, train_data, val_data, config.vae.train,
                    config.vae.beta, vae_rng, start_epoch, log, save_resume);

        save_checkpoint(ckpt_path.string(), params, config.vae.beta,
                        config_digest, seed, config.vae.train.epochs);
        write_training_log_csv((run_dir / log_rel).string(), log);
        std::error_code ec;
        fs::remove(resume_path, ec);
        record_artifact(ctx.run_dir, "checkpoint:" + tag, ckpt_rel);
        record_artifact(ctx.run_dir, "training_log:" + tag, log_rel);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// extract

namespace {

std::vector<std::string> split_row_ids(const Manifest& manifest,
                                       const std::string& split) {
  std::vector<std::string> ids;
  for (const auto& item : manifest.items)
    if (item.split == split) ids.push_back(item.path);
  return ids;
}

}  // namespace

void cmd_extract(const PipelineContext& ctx, const std::string& which_split) {
  if (which_split != "train" && which_split != "val" && which_split != "test")
    throw ConfigError("extract: unknown split '" + which_split + "'");
  const RunConfig& config = ctx.config;
  const fs::path run_dir(ctx.run_dir);
  const Manifest manifest = read_manifest((run_dir / kManifestName).string());

  const Matrix images = load_split_matrix(ctx, manifest, which_split,
                                          {"train", "val", "test"});
  const BoolMatrix targets = split_eval_targets(ctx, manifest, which_split);
  const std::vector<std::string> row_ids = split_row_ids(manifest, which_split);

  const RngStream master(config.master_seed);
  for (const auto& named : config.vae.architectures) {
    for (Index latent_dim : config.vae.latent_dims) {
      for (std::uint64_t seed : config.vae.seeds) {
        const std::string tag = vae_tag(named.name, latent_dim, seed);
        const Checkpoint ckpt =
            load_checkpoint((run_dir / ("vae-" + tag + ".ckpt")).string());
        if (ckpt.params.arch().input_size != images.rows())
          throw StructuralError("extract: checkpoint input size mismatch for " +
                                tag);
        RowMatrix features;
        if (config.vae.sampled_embeddings) {
          RngStream sample_rng =
              master.split("embed-sample").split(fnv1a64(tag));
          features = extract_sampled_embeddings(ckpt.params, images, sample_rng);
        } else {
          features = extract_embeddings(ckpt.params, images);
        }

        EmbeddingTable table;
        table.features = std::move(features);
        table.targets = targets;
        table.row_ids = row_ids;
        table.class_names.assign(eval_class_names().begin(),
                                 eval_class_names().end());
        table.source_tag = tag + "|" + which_split;
        const std::string rel = "emb-" + tag + "-" + which_split + ".lbe";
        write_embedding_file((run_dir / rel).string(), table);
        record_artifact(ctx.run_dir, "embeddings:" + tag + ":" + which_split,
                        rel);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// train-clf

namespace {

std::string split_of_table(const EmbeddingTable& table) {
  const auto pos = table.source_tag.rfind('|');
  return pos == std::string::npos ? "" : table.source_tag.substr(pos + 1);
}

EmbeddingTable take_rows(const EmbeddingTable& table,
                         const std::vector<Index>& rows) {
  EmbeddingTable out;
  out.features.resize(static_cast<Index>(rows.size()), table.n_features());
  out.targets.resize(static_cast<Index>(rows.size()), table.n_classes());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Index>(i)) = table.features.row(rows[i]);
    out.targets.row(static_cast<Index>(i)) = table.targets.row(rows[i]);
    if (!table.row_ids.empty())
      out.row_ids.push_back(table.row_ids[static_cast<std::size_t>(rows[i])]);
  }
  out.class_names = table.class_names;
  out.source_tag = table.source_tag;
  return out;
}

}  // namespace

void cmd_train_clf(const PipelineContext& ctx) {
  const RunConfig& config = ctx.config;
  const fs::path run_dir(ctx.run_dir);
  std::ofstream scores((run_dir / "clf_scores.csv").string());
  scores << "vae,classifier,n_estimators,max_depth,min_samples_split,"
            "min_samples_leaf,knn_k,holdout_mean_auroc\n";
  scores.precision(6);

  const RngStream master(config.master_seed);
  for (const auto& named : config.vae.architectures) {
    for (Index latent_dim : config.vae.latent_dims) {
      for (std::uint64_t seed : config.vae.seeds) {
        const std::string tag = vae_tag(named.name, latent_dim, seed);
        const EmbeddingTable table = read_embedding_file(
            (run_dir / ("emb-" + tag + "-val.lbe")).string());
        if (split_of_table(table) == "test")
          throw DataError("train-clf: refusing to train on test embeddings");

        for (ClassifierKind kind : config.classifiers.kinds) {
          const std::uint64_t clf_seed =
              config.master_seed ^ fnv1a64(tag + classifier_kind_name(kind));
          ForestHyperparams forest_hyper = kind == ClassifierKind::RF
                                               ? config.classifiers.rf
                                               : config.classifiers.xrt;
          GbmHyperparams gbm_hyper = config.classifiers.gb;
          Scalar holdout_score = std::nan("");

          if (config.classifiers.grid_enabled && kind != ClassifierKind::KNN) {
            RngStream grid_rng = master.split("grid").split(fnv1a64(tag));
            const std::vector<Index> order =
                grid_rng.shuffled_indices(table.n_rows());
            const Index n_holdout = std::max<Index>(
                1, static_cast<Index>(std::llround(
                       config.classifiers.grid_holdout_fraction *
                       static_cast<Scalar>(table.n_rows()))));
            std::vector<Index> holdout_rows(order.begin(),
                                            order.begin() + n_holdout);
            std::vector<Index> train_rows(order.begin() + n_holdout,
                                          order.end());
            const GridResult grid =
                grid_search(take_rows(table, train_rows),
                            take_rows(table, holdout_rows),
                            config.classifiers.grid, kind, clf_seed);
            holdout_score = grid.best.mean_auroc;
            if (kind == ClassifierKind::GB) {
              gbm_hyper.n_estimators = grid.best.n_estimators;
              gbm_hyper.max_depth = grid.best.max_depth;
              gbm_hyper.min_samples_split = grid.best.min_samples_split;
              gbm_hyper.min_samples_leaf = grid.best.min_samples_leaf;
            } else {
              forest_hyper.n_estimators = grid.best.n_estimators;
              forest_hyper.max_depth = grid.best.max_depth;
              forest_hyper.min_samples_split = grid.best.min_samples_split;
              forest_hyper.min_samples_leaf = grid.best.min_samples_leaf;
            }
          }

          const ClassifierModel model =
              fit_classifier(table, kind, forest_hyper, gbm_hyper,
                             config.classifiers.knn_k, clf_seed);
          const std::string rel =
              "clf-" + tag + "-" + classifier_kind_name(kind) + ".lcm";
          save_classifier((run_dir / rel).string(), model);
          record_artifact(ctx.run_dir,
                          "model:" + tag + ":" + classifier_kind_name(kind),
                          rel);

          scores << tag << ',' << classifier_kind_name(kind) << ',';
          if (kind == ClassifierKind::GB) {
            scores << gbm_hyper.n_estimators << ',' << gbm_hyper.max_depth
                   << ',' << gbm_hyper.min_samples_split << ','
                   << gbm_hyper.min_samples_leaf << ",,";
          } else if (kind == ClassifierKind::KNN) {
            scores << ",,,," << config.classifiers.knn_k << ',';
          } else {
            scores << forest_hyper.n_estimators << ',' << forest_hyper.max_depth
                   << ',' << forest_hyper.min_samples_split << ','
                   << forest_hyper.min_samples_leaf << ",,";
          }
          if (std::isnan(holdout_score)) {
            scores << '\n';
          } else {
            scores << holdout_score << '\n';
          }
        }
      }
    }
  }
  scores.close();
  record_artifact(ctx.run_dir, "clf_scores", "clf_scores.csv");
}

// ---------------------------------------------------------------------------
// evaluate

void cmd_evaluate(const PipelineContext& ctx) {
  const RunConfig& config = ctx.config;
  const fs::path run_dir(ctx.run_dir);
  const std::vector<std::string> class_names(eval_class_names().begin(),
                                             eval_class_names().end());

  std::ofstream out((run_dir / "evaluation.csv").string());
  out << report_csv_header(class_names) << '\n';

  // member predictions grouped per (kind, latent dim) for the ensembles
  std::map<std::pair<std::string, Index>, std::vector<PredictionMatrix>>
      groups;
  std::map<std::pair<std::string, Index>, BoolMatrix> group_targets;
  std::vector<std::string> reference_row_ids;

  for (const auto& named : config.vae.architectures) {
    for (Index latent_dim : config.vae.latent_dims) {
      for (std::uint64_t seed : config.vae.seeds) {
        const std::string tag = vae_tag(named.name, latent_dim, seed);
        const EmbeddingTable val_table = read_embedding_file(
            (run_dir / ("emb-" + tag + "-val.lbe")).string());
        const EmbeddingTable test_table = read_embedding_file(
            (run_dir / ("emb-" + tag + "-test.lbe")).string());
        if (reference_row_ids.empty()) {
          reference_row_ids = test_table.row_ids;
        } else if (test_table.row_ids != reference_row_ids) {
          throw StructuralError(
              "evaluate: test embedding row order differs for " + tag);
        }

        for (ClassifierKind kind : config.classifiers.kinds) {
          const std::string kind_name = classifier_kind_name(kind);
          const ClassifierModel model = load_classifier(
              (run_dir / ("clf-" + tag + "-" + kind_name + ".lcm")).string(),
              kind == ClassifierKind::KNN ? &val_table : nullptr);
          PredictionMatrix pred;
          pred.values = model.predict(test_table.features);
          pred.source_tag = tag + "-" + kind_name;
          const AurocReport report =
              auroc_report(pred.values, test_table.targets, class_names);
          out << report_csv_row(pred.source_tag, report) << '\n';

          const auto key = std::make_pair(kind_name, latent_dim);
          groups[key].push_back(std::move(pred));
          group_targets.emplace(key, test_table.targets);
        }
      }
    }
  }

  for (const auto& [key, members] : groups) {
    const auto& [kind_name, latent_dim] = key;
    const BoolMatrix& targets = group_targets.at(key);
    const std::string suffix = kind_name + "-d" + std::to_string(latent_dim);
    if (config.ensemble.simple) {
      const EnsembleOutput avg = simple_average(members);
      out << report_csv_row("Avg-" + suffix,
                            auroc_report(avg.values, targets, class_names))
          << '\n';
    }
    if (config.ensemble.entropy) {
      const EnsembleOutput avg = entropy_weighted_average(members, false);
      out << report_csv_row("EntropyAvg-" + suffix,
                            auroc_report(avg.values, targets, class_names))
          << '\n';
    }
    if (config.ensemble.entropy_normalized) {
      const EnsembleOutput avg = entropy_weighted_average(members, true);
      out << report_csv_row("EntropyAvgNorm-" + suffix,
                            auroc_report(avg.values, targets, class_names))
          << '\n';
    }
  }
  out.close();
  record_artifact(ctx.run_dir, "evaluation", "evaluation.csv");
}

// ---------------------------------------------------------------------------
// report

void cmd_report(const PipelineContext& ctx) {
  const RunConfig& config = ctx.config;
  const fs::path run_dir(ctx.run_dir);
  std::vector<std::string> problems;

  // digest-chain verification over everything recorded so far
  const fs::path artifacts_path = run_dir / kArtifactsName;
  if (fs::exists(artifacts_path)) {
    json artifacts;
    std::ifstream in(artifacts_path);
    in >> artifacts;
    for (const auto& [name, entry] : artifacts.items()) {
      const fs::path path = run_dir / entry["path"].get<std::string>();
      if (!fs::exists(path)) {
        problems.push_back("missing artifact: " + name);
        continue;
      }
      if (file_digest(path.string()) != entry["digest"].get<std::string>())
        problems.push_back("digest mismatch: " + name);
    }
  } else {
    problems.push_back("missing artifact: artifacts.json");
  }
  if (fs::exists(run_dir / kManifestName)) {
    const Manifest manifest =
        read_manifest((run_dir / kManifestName).string());
    for (const auto& item : manifest.items) {
      const fs::path path = run_dir / item.path;
      if (!fs::exists(path)) {
        problems.push_back("missing data item: " + item.path);
      } else if (file_digest(path.string()) != item.digest) {
        problems.push_back("digest mismatch: " + item.path);
      }
    }
  } else {
    problems.push_back("missing artifact: manifest.json");
  }

  const fs::path eval_path = run_dir / "evaluation.csv";
  if (!fs::exists(eval_path)) {
    std::string detail;
    for (const auto& p : problems) detail += "\n  " + p;
    throw DataError("report: run is incomplete:" + detail +
                    "\n  missing artifact: evaluation.csv");
  }

  // group evaluation rows per latent size
  std::map<Index, std::vector<std::string>> rows_by_dim;
  std::string header;
  {
    std::ifstream in(eval_path.string());
    std::getline(in, header);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      for (Index d : config.vae.latent_dims) {
        const std::string key = "-d" + std::to_string(d);
        const std::string tag = line.substr(0, line.find(','));
        if (tag.find(key + "-") != std::string::npos ||
            (tag.size() >= key.size() &&
             tag.compare(tag.size() - key.size(), key.size(), key) == 0)) {
          rows_by_dim[d].push_back(line);
          break;
        }
      }
    }
  }

  // reconstruction grid: originals in column 0, one column per checkpoint
  std::string recon_rel;
  try {
    const Manifest manifest =
        read_manifest((run_dir / kManifestName).string());
    const Matrix val = load_split_matrix(ctx, manifest, "val",
                                         {"train", "val", "test"});
    const Index n_show = std::min<Index>(8, val.cols());
    std::vector<Checkpoint> checkpoints;
    std::vector<std::string> tags;
    for (const auto& named : config.vae.architectures)
      for (Index latent_dim : config.vae.latent_dims)
        for (std::uint64_t seed : config.vae.seeds) {
          const std::string tag = vae_tag(named.name, latent_dim, seed);
          const fs::path p = run_dir / ("vae-" + tag + ".ckpt");
          if (!fs::exists(p)) {
            problems.push_back("missing checkpoint for grid: " + tag);
            continue;
          }
          checkpoints.push_back(load_checkpoint(p.string()));
          tags.push_back(tag);
        }
    if (!checkpoints.empty()) {
      const Index side = static_cast<Index>(
          std::lround(std::sqrt(static_cast<Scalar>(val.rows()))));
      const Index gap = 2;
      const Index cols = 1 + static_cast<Index>(checkpoints.size());
      GrayImage grid(n_show * (side + gap) - gap, cols * (side + gap) - gap);
      grid.pixels.setConstant(1.0);
      auto blit = [&](const Vector& flat, Index row, Index col) {
        for (Index r = 0; r < side; ++r)
          for (Index c = 0; c < side; ++c)
            grid.pixels(row * (side + gap) + r, col * (side + gap) + c) =
                flat[r * side + c];
      };
      for (Index i = 0; i < n_show; ++i) {
        blit(val.col(i).head(side * side), i, 0);
        for (std::size_t m = 0; m < checkpoints.size(); ++m) {
          const auto [mu, logv] = encode(checkpoints[m].params, val.col(i));
          (void)logv;
          blit(decode(checkpoints[m].params, mu), i,
               static_cast<Index>(m) + 1);
        }
      }
      recon_rel = "reconstructions.png";
      write_png_gray((run_dir / recon_rel).string(), grid, 8);
    }
  } catch (const std::exception& e) {
    problems.push_back(std::string("reconstruction grid failed: ") + e.what());
  }

  std::ofstream report((run_dir / "report.md").string());
  report << "# Run report\n\n";
  report << "Master seed: " << config.master_seed << "\n\n";
  if (!problems.empty()) {
    report << "## Problems\n\n";
    for (const auto& p : problems) report << "- " << p << '\n';
    report << '\n';
  }
  for (const auto& [dim, rows] : rows_by_dim) {
    report << "## Latent dimension " << dim << "\n\n";
    const auto n_cols = static_cast<std::size_t>(
        std::count(header.begin(), header.end(), ',') + 1);
    std::string header_row = header;
    std::replace(header_row.begin(), header_row.end(), ',', '|');
    report << "| " << header_row << " |\n|";
    for (std::size_t i = 0; i < n_cols; ++i) report << "---|";
    report << '\n';
    for (const auto& row : rows) {
      std::string cells = row;
      std::replace(cells.begin(), cells.end(), ',', '|');
      report << "| " << cells << " |\n";
    }
    report << '\n';
  }
  if (!recon_rel.empty())
    report << "![reconstructions](" << recon_rel << ")\n";
  report.close();

  // consolidated CSV summary = evaluation rows verbatim
  fs::copy_file(eval_path, run_dir / "summary.csv",
                fs::copy_options::overwrite_existing);
  record_artifact(ctx.run_dir, "report", "report.md");
  record_artifact(ctx.run_dir, "summary", "summary.csv");

  for (const auto& p : problems) std::cerr << "report: " << p << '\n';
}

}  // namespace cxr

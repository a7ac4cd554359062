#pragma once

#include <map>
#include <string>
#include <vector>

#include "cxr/classifiers.hpp"
#include "cxr/ensemble.hpp"
#include "cxr/imaging.hpp"
#include "cxr/labels.hpp"
#include "cxr/metrics.hpp"
#include "cxr/vae.hpp"

namespace cxr {

// ---------------------------------------------------------------------------
// Run configuration (single declarative JSON file)

struct DatasetConfig {
  bool synthetic = true;
  // synthetic source
  SyntheticSpec synthetic_spec;
  Index n_pool = 2500;  // split into train/validation
  Index n_test = 500;
  // real source
  std::string image_dir;
  std::string label_csv;
  std::string test_image_dir;
  std::string test_label_csv;
};

struct PreprocessConfig {
  Index resize_to = 0;    // 0: skip the resize step
  std::string template_path;
  Index crop_size = 0;    // 0: skip the template-matching crop
  int channels = 1;       // channel replication at tensor ingest
};

struct SplitConfig {
  Scalar train_fraction = 0.9;
  Scalar val_fraction = 0.1;
  bool by_patient = false;
};

struct VaeStageConfig {
  struct NamedArch {
    std::string name;
    std::vector<Index> encoder_widths;
    std::vector<Index> decoder_widths;
    std::string activation = "tanh";
  };
  std::vector<NamedArch> architectures;
  std::vector<Index> latent_dims = {100, 200};
  std::vector<std::uint64_t> seeds = {1};
  TrainConfig train;
  BetaSchedule beta;
  bool sampled_embeddings = false;  // export sampled z instead of the mean
};

struct ClassifierStageConfig {
  std::vector<ClassifierKind> kinds = {ClassifierKind::RF, ClassifierKind::XRT,
                                       ClassifierKind::GB, ClassifierKind::KNN};
  ForestHyperparams rf;
  ForestHyperparams xrt;
  GbmHyperparams gb;
  int knn_k = 10;
  bool grid_enabled = false;
  GridSpec grid;
  Scalar grid_holdout_fraction = 0.2;
};

struct EnsembleStageConfig {
  bool simple = true;
  bool entropy = true;
  bool entropy_normalized = false;
};

struct RunConfig {
  DatasetConfig dataset;
  PreprocessConfig preprocess;
  SplitConfig split;
  UncertaintyPolicy policy;
  Scalar binarize_threshold = 0.5;
  VaeStageConfig vae;
  ClassifierStageConfig classifiers;
  EnsembleStageConfig ensemble;
  std::uint64_t master_seed = 42;

  void validate() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text);
std::string run_config_digest(const RunConfig& config);

// ---------------------------------------------------------------------------
// Manifest

struct ManifestItem {
  std::string path;   // relative to the run directory
  std::string split;  // "train" | "val" | "test"
  std::string digest;
};

struct Manifest {
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string label_csv;       // train/val labels, relative path
  std::string test_label_csv;  // test labels, relative path
  std::vector<ManifestItem> items;
};

void write_manifest(const std::string& path, const Manifest& manifest);
Manifest read_manifest(const std::string& path);

/// RAII guard for the run directory's lock file.
class RunLock {
 public:
  explicit RunLock(const std::string& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::string path_;
};

// ---------------------------------------------------------------------------
// Commands

struct PipelineContext {
  RunConfig config;
  std::string run_dir;
};

std::string vae_tag(const std::string& arch_name, Index latent_dim,
                    std::uint64_t seed);

void cmd_prepare(const PipelineContext& ctx);
void cmd_train_vae(const PipelineContext& ctx);
/// which_split: "train", "val" or "test".
void cmd_extract(const PipelineContext& ctx, const std::string& which_split);
void cmd_train_clf(const PipelineContext& ctx);
void cmd_evaluate(const PipelineContext& ctx);
void cmd_report(const PipelineContext& ctx);

// Exposed for tests: load the images of one split (manifest order) as a
// column-per-image matrix, honoring the channel-replication setting.
// `allowed` guards test-split access before evaluation.
Matrix load_split_matrix(const PipelineContext& ctx, const Manifest& manifest,
                         const std::string& split,
                         const std::vector<std::string>& allowed);

/// Resolved + binarized targets, projected onto the 5 evaluation classes,
/// for the rows of one split in manifest order. Deterministic per row:
/// the LSR stream is keyed by the row's global index.
BoolMatrix split_eval_targets(const PipelineContext& ctx,
                              const Manifest& manifest,
                              const std::string& split);

}  // namespace cxr

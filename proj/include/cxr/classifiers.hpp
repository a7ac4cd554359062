#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cxr/errors.hpp"
#include "cxr/rng.hpp"
#include "cxr/types.hpp"

namespace cxr {

/// Latent features paired row-wise with hard one-vs-rest targets; the
/// interchange object between the VAE and the classifiers.
struct EmbeddingTable {
  RowMatrix features;  // N x D
  BoolMatrix targets;  // N x K
  std::vector<std::string> row_ids;
  std::vector<std::string> class_names;  // size K
  std::string source_tag;

  Index n_rows() const { return features.rows(); }
  Index n_features() const { return features.cols(); }
  Index n_classes() const { return targets.cols(); }
  void validate() const;
};

std::string embedding_table_digest(const EmbeddingTable& table);

// ---------------------------------------------------------------------------
// Trees and forests

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  Scalar threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  Scalar value = 0.0;  // leaf: positive fraction (classification) or
                       // Newton step (regression)
  std::int64_t sample_count = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // root at index 0

  Scalar predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

enum class ForestKind : std::uint8_t { RF, XRT };

struct ForestHyperparams {
  int n_estimators = 200;
  int max_depth = 10;
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  int features_per_split = 0;  // 0: ceil(sqrt(D))

  /// Grid-searched values reported for the full-scale experiment.
  static ForestHyperparams reference(ForestKind kind);
};

/// One bagged (RF) or extremely randomized (XRT) forest per class.
struct ForestModel {
  ForestKind kind = ForestKind::RF;
  ForestHyperparams hyper;
  std::uint64_t seed = 0;
  Index n_features = 0;
  std::vector<std::string> class_names;
  std::vector<std::vector<DecisionTree>> per_class;
  std::vector<bool> degenerate_class;  // single-valued training targets
};

/// RF: bootstrap per tree, exhaustive Gini threshold search over a random
/// feature subset. XRT: full sample, one uniform random threshold per
/// candidate feature, best by Gini gain.
ForestModel fit_forest(const EmbeddingTable& data, ForestKind kind,
                       const ForestHyperparams& hyper, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Gradient boosting (per-class binomial deviance)

struct GbmHyperparams {
  int n_estimators = 200;
  int max_depth = 3;
  Scalar learning_rate = 0.1;
  int min_samples_split = 2;
  int min_samples_leaf = 1;

  static GbmHyperparams reference();  // 1000 stages, depth 3
};

struct GbmClassModel {
  Scalar initial_log_odds = 0.0;
  std::vector<DecisionTree> trees;  // leaf values are Newton steps
  bool degenerate = false;
};

struct GbmModel {
  GbmHyperparams hyper;
  std::uint64_t seed = 0;
  Index n_features = 0;
  std::vector<std::string> class_names;
  std::vector<GbmClassModel> per_class;
};

GbmModel fit_gbm(const EmbeddingTable& data, const GbmHyperparams& hyper,
                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// K-nearest neighbours

struct KnnModel {
  RowMatrix features;
  BoolMatrix targets;
  int k = 10;
  std::vector<std::string> class_names;
  std::string table_digest;
};

/// Stores the table; no training computation. Requires 1 <= k <= N.
KnnModel fit_knn(const EmbeddingTable& data, int k = 10);

// ---------------------------------------------------------------------------
// Prediction

/// N x K per-class probabilities; forests average leaf fractions, GBM applies
/// the sigmoid to the boosted score, KNN takes the positive fraction of the k
/// nearest rows (Euclidean; distance ties break to the lower row index).
RowMatrix predict_proba(const ForestModel& model, const RowMatrix& features);
RowMatrix predict_proba(const GbmModel& model, const RowMatrix& features);
RowMatrix predict_proba(const KnnModel& model, const RowMatrix& features);

// ---------------------------------------------------------------------------
// Grid search

enum class ClassifierKind : std::uint8_t { RF, XRT, GB, KNN };
std::string classifier_kind_name(ClassifierKind kind);
ClassifierKind classifier_kind_from_name(const std::string& name);

struct GridSpec {
  std::vector<int> n_estimators;
  std::vector<int> max_depth;
  std::vector<int> min_samples_split;
  std::vector<int> min_samples_leaf;
};

struct GridPoint {
  int n_estimators;
  int max_depth;
  int min_samples_split;
  int min_samples_leaf;
  Scalar mean_auroc;
};

struct GridResult {
  GridPoint best;
  std::vector<GridPoint> table;
};

/// Exhaustive search; selection by highest mean held-out AUROC over the eval
/// classes, ties broken by fewer estimators then shallower depth.
GridResult grid_search(const EmbeddingTable& train,
                       const EmbeddingTable& heldout, const GridSpec& grid,
                       ClassifierKind kind, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Model files

/// Trained per-class classifier set behind one tag, whatever the kind.
struct ClassifierModel {
  ClassifierKind kind = ClassifierKind::RF;
  std::optional<ForestModel> forest;
  std::optional<GbmModel> gbm;
  std::optional<KnnModel> knn;

  RowMatrix predict(const RowMatrix& features) const;
  const std::vector<std::string>& class_names() const;
};

ClassifierModel fit_classifier(const EmbeddingTable& data, ClassifierKind kind,
                               const ForestHyperparams& forest_hyper,
                               const GbmHyperparams& gbm_hyper, int knn_k,
                               std::uint64_t seed);

/// Versioned container with kind, hyperparams, seed and packed trees. A KNN
/// model stores the training table by content digest, not by copy; supply the
/// table at load time and the digest is verified.
void save_classifier(const std::string& path, const ClassifierModel& model);
ClassifierModel load_classifier(const std::string& path,
                                const EmbeddingTable* knn_table = nullptr);

}  // namespace cxr

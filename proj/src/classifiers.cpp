#include "cxr/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cxr/metrics.hpp"
#include "cxr/numerics.hpp"

namespace cxr {

using json = nlohmann::json;

void EmbeddingTable::validate() const {
  if (features.rows() < 1) throw StructuralError("EmbeddingTable: empty table");
  if (targets.rows() != features.rows())
    throw StructuralError("EmbeddingTable: feature/target row mismatch");
  if (static_cast<Index>(class_names.size()) != targets.cols())
    throw StructuralError("EmbeddingTable: class name count mismatch");
  if (!features.allFinite())
    throw StructuralError("EmbeddingTable: non-finite feature values");
}

std::string embedding_table_digest(const EmbeddingTable& table) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix_bytes = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  const Index dims[2] = {table.features.rows(), table.features.cols()};
  mix_bytes(dims, sizeof(dims));
  mix_bytes(table.features.data(),
            sizeof(Scalar) * static_cast<std::size_t>(table.features.size()));
  mix_bytes(table.targets.data(),
            sizeof(bool) * static_cast<std::size_t>(table.targets.size()));
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

Scalar DecisionTree::predict(
    const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  int i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<std::size_t>(i)];
    i = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

ForestHyperparams ForestHyperparams::reference(ForestKind kind) {
  ForestHyperparams h;
  h.n_estimators = 2000;
  h.max_depth = 10;
  if (kind == ForestKind::RF) {
    h.min_samples_leaf = 2;
    h.min_samples_split = 2;
  } else {
    h.min_samples_leaf = 1;
    h.min_samples_split = 5;
  }
  return h;
}

GbmHyperparams GbmHyperparams::reference() {
  GbmHyperparams h;
  h.n_estimators = 1000;
  h.max_depth = 3;
  return h;
}

namespace {

struct SplitCandidate {
  int feature = -1;
  Scalar threshold = 0.0;
  Scalar score = 0.0;  // to be minimized
  bool valid = false;
};

std::vector<int> sample_feature_subset(Index n_features, int subset_size,
                                       RngStream& rng) {
  std::vector<int> all(static_cast<std::size_t>(n_features));
  std::iota(all.begin(), all.end(), 0);
  if (subset_size >= n_features) return all;
  // partial Fisher-Yates
  for (int i = 0; i < subset_size; ++i) {
    const auto j = i + static_cast<int>(rng.next_u64() %
                                        static_cast<std::uint64_t>(
                                            n_features - i));
    std::swap(all[static_cast<std::size_t>(i)],
              all[static_cast<std::size_t>(j)]);
  }
  all.resize(static_cast<std::size_t>(subset_size));
  return all;
}

// Weighted Gini of a binary split: pos_l*neg_l/n_l + pos_r*neg_r/n_r (the
// constant factor 2/n of the Gini gain is dropped).
class ClassificationBuilder {
 public:
  ClassificationBuilder(const RowMatrix& features,
                        const std::vector<char>& labels,
                        const ForestHyperparams& hyper, bool random_threshold,
                        RngStream& rng)
      : features_(features),
        labels_(labels),
        hyper_(hyper),
        random_threshold_(random_threshold),
        rng_(rng) {}

  DecisionTree build(std::vector<Index>& samples) {
    DecisionTree tree;
    build_node(tree, samples, 0, static_cast<Index>(samples.size()), 0);
    return tree;
  }

 private:
  int make_leaf(DecisionTree& tree, const std::vector<Index>& samples,
                Index begin, Index end) {
    long pos = 0;
    for (Index i = begin; i < end; ++i)
      pos += labels_[static_cast<std::size_t>(samples[static_cast<std::size_t>(i)])];
    TreeNode leaf;
    leaf.value = static_cast<Scalar>(pos) / static_cast<Scalar>(end - begin);
    leaf.sample_count = end - begin;
    tree.nodes.push_back(leaf);
    return static_cast<int>(tree.nodes.size()) - 1;
  }

  SplitCandidate best_split(const std::vector<Index>& samples, Index begin,
                            Index end) {
    const Index n = end - begin;
    long pos_total = 0;
    for (Index i = begin; i < end; ++i)
      pos_total +=
          labels_[static_cast<std::size_t>(samples[static_cast<std::size_t>(i)])];
    const Scalar parent_score =
        static_cast<Scalar>(pos_total) *
        static_cast<Scalar>(n - pos_total) / static_cast<Scalar>(n);

    const int subset_size = hyper_.features_per_split > 0
                                ? hyper_.features_per_split
                                : static_cast<int>(std::ceil(
                                      std::sqrt(static_cast<Scalar>(
                                          features_.cols()))));
    const std::vector<int> subset =
        sample_feature_subset(features_.cols(), subset_size, rng_);

    SplitCandidate best;
    best.score = parent_score;
    for (int f : subset) {
      if (random_threshold_) {
        consider_random_threshold(samples, begin, end, f, pos_total, best);
      } else {
        consider_exhaustive(samples, begin, end, f, pos_total, best);
      }
    }
    return best;
  }

  void consider_exhaustive(const std::vector<Index>& samples, Index begin,
                           Index end, int f, long pos_total,
                           SplitCandidate& best) {
    const Index n = end - begin;
    std::vector<std::pair<Scalar, char>> vals;
    vals.reserve(static_cast<std::size_t>(n));
    for (Index i = begin; i < end; ++i) {
      const Index row = samples[static_cast<std::size_t>(i)];
      vals.emplace_back(features_(row, f),
                        labels_[static_cast<std::size_t>(row)]);
    }
    std::sort(vals.begin(), vals.end());
    long pos_l = 0;
    for (Index i = 0; i < n - 1; ++i) {
      pos_l += vals[static_cast<std::size_t>(i)].second;
      if (vals[static_cast<std::size_t>(i)].first ==
          vals[static_cast<std::size_t>(i + 1)].first)
        continue;
      const Index n_l = i + 1;
      const Index n_r = n - n_l;
      if (n_l < hyper_.min_samples_leaf || n_r < hyper_.min_samples_leaf)
        continue;
      const long pos_r = pos_total - pos_l;
      const Scalar score =
          static_cast<Scalar>(pos_l) * static_cast<Scalar>(n_l - pos_l) /
              static_cast<Scalar>(n_l) +
          static_cast<Scalar>(pos_r) * static_cast<Scalar>(n_r - pos_r) /
              static_cast<Scalar>(n_r);
      if (score < best.score - 1e-12) {
        best.valid = true;
        best.feature = f;
        best.threshold = (vals[static_cast<std::size_t>(i)].first +
                          vals[static_cast<std::size_t>(i + 1)].first) /
                         2.0;
        best.score = score;
      }
    }
  }

  void consider_random_threshold(const std::vector<Index>& samples, Index begin,
                                 Index end, int f, long pos_total,
                                 SplitCandidate& best) {
    Scalar lo = std::numeric_limits<Scalar>::infinity();
    Scalar hi = -std::numeric_limits<Scalar>::infinity();
    for (Index i = begin; i < end; ++i) {
      const Scalar v = features_(samples[static_cast<std::size_t>(i)], f);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(lo < hi)) return;
    const Scalar threshold = rng_.uniform(lo, hi);
    long pos_l = 0;
    Index n_l = 0;
    for (Index i = begin; i < end; ++i) {
      const Index row = samples[static_cast<std::size_t>(i)];
      if (features_(row, f) <= threshold) {
        ++n_l;
        pos_l += labels_[static_cast<std::size_t>(row)];
      }
    }
    const Index n = end - begin;
    const Index n_r = n - n_l;
    if (n_l < hyper_.min_samples_leaf || n_r < hyper_.min_samples_leaf) return;
    const long pos_r = pos_total - pos_l;
    const Scalar score =
        static_cast<Scalar>(pos_l) * static_cast<Scalar>(n_l - pos_l) /
            static_cast<Scalar>(n_l) +
        static_cast<Scalar>(pos_r) * static_cast<Scalar>(n_r - pos_r) /
            static_cast<Scalar>(n_r);
    if (score < best.score - 1e-12) {
      best.valid = true;
      best.feature = f;
      best.threshold = threshold;
      best.score = score;
    }
  }

  int build_node(DecisionTree& tree, std::vector<Index>& samples, Index begin,
                 Index end, int depth) {
    const Index n = end - begin;
    long pos = 0;
    for (Index i = begin; i < end; ++i)
      pos += labels_[static_cast<std::size_t>(samples[static_cast<std::size_t>(i)])];
    const bool pure = pos == 0 || pos == n;
    if (pure || depth >= hyper_.max_depth || n < hyper_.min_samples_split)
      return make_leaf(tree, samples, begin, end);

    const SplitCandidate split = best_split(samples, begin, end);
    if (!split.valid) return make_leaf(tree, samples, begin, end);

    const auto mid_it = std::partition(
        samples.begin() + begin, samples.begin() + end, [&](Index row) {
          return features_(row, split.feature) <= split.threshold;
        });
    const Index mid = static_cast<Index>(mid_it - samples.begin());

    TreeNode node;
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.sample_count = n;
    tree.nodes.push_back(node);
    const int node_index = static_cast<int>(tree.nodes.size()) - 1;
    const int left = build_node(tree, samples, begin, mid, depth + 1);
    const int right = build_node(tree, samples, mid, end, depth + 1);
    tree.nodes[static_cast<std::size_t>(node_index)].left = left;
    tree.nodes[static_cast<std::size_t>(node_index)].right = right;
    return node_index;
  }

  const RowMatrix& features_;
  const std::vector<char>& labels_;
  const ForestHyperparams& hyper_;
  bool random_threshold_;
  RngStream& rng_;
};

// Regression tree on residuals, exhaustive SSE split search over all
// features; leaf value is the Newton step sum(residual)/sum(hessian).
class RegressionBuilder {
 public:
  RegressionBuilder(const RowMatrix& features, const Vector& residuals,
                    const Vector& hessians, const GbmHyperparams& hyper)
      : features_(features),
        residuals_(residuals),
        hessians_(hessians),
        hyper_(hyper) {}

  DecisionTree build(std::vector<Index>& samples) {
    DecisionTree tree;
    build_node(tree, samples, 0, static_cast<Index>(samples.size()), 0);
    return tree;
  }

 private:
  int make_leaf(DecisionTree& tree, const std::vector<Index>& samples,
                Index begin, Index end) {
    Scalar r_sum = 0.0, h_sum = 0.0;
    for (Index i = begin; i < end; ++i) {
      const Index row = samples[static_cast<std::size_t>(i)];
      r_sum += residuals_[row];
      h_sum += hessians_[row];
    }
    TreeNode leaf;
    leaf.value = r_sum / std::max(h_sum, 1e-12);
    leaf.sample_count = end - begin;
    tree.nodes.push_back(leaf);
    return static_cast<int>(tree.nodes.size()) - 1;
  }

  int build_node(DecisionTree& tree, std::vector<Index>& samples, Index begin,
                 Index end, int depth) {
    const Index n = end - begin;
    if (depth >= hyper_.max_depth || n < hyper_.min_samples_split)
      return make_leaf(tree, samples, begin, end);

    Scalar total_sum = 0.0, total_sq = 0.0;
    for (Index i = begin; i < end; ++i) {
      const Scalar r = residuals_[samples[static_cast<std::size_t>(i)]];
      total_sum += r;
      total_sq += r * r;
    }
    const Scalar parent_sse =
        total_sq - total_sum * total_sum / static_cast<Scalar>(n);

    SplitCandidate best;
    best.score = parent_sse;
    std::vector<std::pair<Scalar, Scalar>> vals;  // (feature value, residual)
    for (int f = 0; f < features_.cols(); ++f) {
      vals.clear();
      vals.reserve(static_cast<std::size_t>(n));
      for (Index i = begin; i < end; ++i) {
        const Index row = samples[static_cast<std::size_t>(i)];
        vals.emplace_back(features_(row, f), residuals_[row]);
      }
      std::sort(vals.begin(), vals.end());
      Scalar sum_l = 0.0, sq_l = 0.0;
      for (Index i = 0; i < n - 1; ++i) {
        const Scalar r = vals[static_cast<std::size_t>(i)].second;
        sum_l += r;
        sq_l += r * r;
        if (vals[static_cast<std::size_t>(i)].first ==
            vals[static_cast<std::size_t>(i + 1)].first)
          continue;
        const Index n_l = i + 1;
        const Index n_r = n - n_l;
        if (n_l < hyper_.min_samples_leaf || n_r < hyper_.min_samples_leaf)
          continue;
        const Scalar sum_r = total_sum - sum_l;
        const Scalar sq_r = total_sq - sq_l;
        const Scalar sse =
            (sq_l - sum_l * sum_l / static_cast<Scalar>(n_l)) +
            (sq_r - sum_r * sum_r / static_cast<Scalar>(n_r));
        if (sse < best.score - 1e-12) {
          best.valid = true;
          best.feature = f;
          best.threshold = (vals[static_cast<std::size_t>(i)].first +
                            vals[static_cast<std::size_t>(i + 1)].first) /
                           2.0;
          best.score = sse;
        }
      }
    }
    if (!best.valid) return make_leaf(tree, samples, begin, end);

    const auto mid_it = std::partition(
        samples.begin() + begin, samples.begin() + end, [&](Index row) {
          return features_(row, best.feature) <= best.threshold;
        });
    const Index mid = static_cast<Index>(mid_it - samples.begin());

    TreeNode node;
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.sample_count = n;
    tree.nodes.push_back(node);
    const int node_index = static_cast<int>(tree.nodes.size()) - 1;
    const int left = build_node(tree, samples, begin, mid, depth + 1);
    const int right = build_node(tree, samples, mid, end, depth + 1);
    tree.nodes[static_cast<std::size_t>(node_index)].left = left;
    tree.nodes[static_cast<std::size_t>(node_index)].right = right;
    return node_index;
  }

  const RowMatrix& features_;
  const Vector& residuals_;
  const Vector& hessians_;
  const GbmHyperparams& hyper_;
};

}  // namespace

ForestModel fit_forest(const EmbeddingTable& data, ForestKind kind,
                       const ForestHyperparams& hyper, std::uint64_t seed) {
  data.validate();
  const Index n = data.n_rows();
  if (n < hyper.min_samples_split && n > 1)
    throw StructuralError("fit_forest: fewer samples than min_samples_split");

  ForestModel model;
  model.kind = kind;
  model.hyper = hyper;
  model.seed = seed;
  model.n_features = data.n_features();
  model.class_names = data.class_names;
  model.per_class.resize(static_cast<std::size_t>(data.n_classes()));
  model.degenerate_class.resize(static_cast<std::size_t>(data.n_classes()));

  const RngStream base(seed);
  for (Index k = 0; k < data.n_classes(); ++k) {
    std::vector<char> labels(static_cast<std::size_t>(n));
    long pos = 0;
    for (Index i = 0; i < n; ++i) {
      labels[static_cast<std::size_t>(i)] = data.targets(i, k) ? 1 : 0;
      pos += labels[static_cast<std::size_t>(i)];
    }
    model.degenerate_class[static_cast<std::size_t>(k)] =
        (pos == 0 || pos == n);

    RngStream class_rng = base.split(static_cast<std::uint64_t>(k));
    auto& trees = model.per_class[static_cast<std::size_t>(k)];
    trees.reserve(static_cast<std::size_t>(hyper.n_estimators));
    for (int t = 0; t < hyper.n_estimators; ++t) {
      RngStream tree_rng = class_rng.split(static_cast<std::uint64_t>(t));
      std::vector<Index> samples;
      samples.reserve(static_cast<std::size_t>(n));
      if (kind == ForestKind::RF) {
        for (Index i = 0; i < n; ++i)
          samples.push_back(static_cast<Index>(
              tree_rng.next_u64() % static_cast<std::uint64_t>(n)));
      } else {
        samples.resize(static_cast<std::size_t>(n));
        std::iota(samples.begin(), samples.end(), Index{0});
      }
      ClassificationBuilder builder(data.features, labels, hyper,
                                    kind == ForestKind::XRT, tree_rng);
      trees.push_back(builder.build(samples));
    }
  }
  return model;
}

GbmModel fit_gbm(const EmbeddingTable& data, const GbmHyperparams& hyper,
                 std::uint64_t seed) {
  data.validate();
  const Index n = data.n_rows();

  GbmModel model;
  model.hyper = hyper;
  model.seed = seed;
  model.n_features = data.n_features();
  model.class_names = data.class_names;
  model.per_class.resize(static_cast<std::size_t>(data.n_classes()));

  for (Index k = 0; k < data.n_classes(); ++k) {
    auto& cm = model.per_class[static_cast<std::size_t>(k)];
    long pos = 0;
    for (Index i = 0; i < n; ++i) pos += data.targets(i, k) ? 1 : 0;
    if (pos == 0 || pos == n) {
      // single-class training targets: constant model at a clamped base rate
      const Scalar p = pos == 0 ? 1e-6 : 1.0 - 1e-6;
      cm.initial_log_odds = std::log(p / (1.0 - p));
      cm.degenerate = true;
      continue;
    }
    const Scalar base_rate = static_cast<Scalar>(pos) / static_cast<Scalar>(n);
    cm.initial_log_odds = std::log(base_rate / (1.0 - base_rate));

    Vector scores = Vector::Constant(n, cm.initial_log_odds);
    Vector residuals(n), hessians(n);
    cm.trees.reserve(static_cast<std::size_t>(hyper.n_estimators));
    for (int stage = 0; stage < hyper.n_estimators; ++stage) {
      for (Index i = 0; i < n; ++i) {
        const Scalar p = sigmoid(scores[i]);
        residuals[i] = (data.targets(i, k) ? 1.0 : 0.0) - p;
        hessians[i] = p * (1.0 - p);
      }
      std::vector<Index> samples(static_cast<std::size_t>(n));
      std::iota(samples.begin(), samples.end(), Index{0});
      RegressionBuilder builder(data.features, residuals, hessians, hyper);
      DecisionTree tree = builder.build(samples);
      for (Index i = 0; i < n; ++i)
        scores[i] += hyper.learning_rate * tree.predict(data.features.row(i));
      cm.trees.push_back(std::move(tree));
    }
  }
  return model;
}

KnnModel fit_knn(const EmbeddingTable& data, int k) {
  data.validate();
  if (k < 1 || static_cast<Index>(k) > data.n_rows())
    throw DomainError("fit_knn: k must satisfy 1 <= k <= N");
  KnnModel model;
  model.features = data.features;
  model.targets = data.targets;
  model.k = k;
  model.class_names = data.class_names;
  model.table_digest = embedding_table_digest(data);
  return model;
}

RowMatrix predict_proba(const ForestModel& model, const RowMatrix& features) {
  if (features.cols() != model.n_features)
    throw StructuralError("predict_proba: feature dimension mismatch");
  const Index n = features.rows();
  const Index k = static_cast<Index>(model.per_class.size());
  RowMatrix out(n, k);
  for (Index c = 0; c < k; ++c) {
    const auto& trees = model.per_class[static_cast<std::size_t>(c)];
    for (Index i = 0; i < n; ++i) {
      Scalar sum = 0.0;
      for (const auto& tree : trees) sum += tree.predict(features.row(i));
      out(i, c) = sum / static_cast<Scalar>(trees.size());
    }
  }
  return out;
}

RowMatrix predict_proba(const GbmModel& model, const RowMatrix& features) {
  if (features.cols() != model.n_features)
    throw StructuralError("predict_proba: feature dimension mismatch");
  const Index n = features.rows();
  const Index k = static_cast<Index>(model.per_class.size());
  RowMatrix out(n, k);
  for (Index c = 0; c < k; ++c) {
    const auto& cm = model.per_class[static_cast<std::size_t>(c)];
    for (Index i = 0; i < n; ++i) {
      Scalar score = cm.initial_log_odds;
      for (const auto& tree : cm.trees)
        score += model.hyper.learning_rate * tree.predict(features.row(i));
      out(i, c) = sigmoid(score);
    }
  }
  return out;
}

RowMatrix predict_proba(const KnnModel& model, const RowMatrix& features) {
  if (features.cols() != model.features.cols())
    throw StructuralError("predict_proba: feature dimension mismatch");
  const Index n = features.rows();
  const Index n_train = model.features.rows();
  const Index k_classes = model.targets.cols();
  RowMatrix out(n, k_classes);
  std::vector<std::pair<Scalar, Index>> dists(
      static_cast<std::size_t>(n_train));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n_train; ++j) {
      dists[static_cast<std::size_t>(j)] = {
          (model.features.row(j) - features.row(i)).squaredNorm(), j};
    }
    std::partial_sort(dists.begin(), dists.begin() + model.k, dists.end());
    for (Index c = 0; c < k_classes; ++c) {
      long pos = 0;
      for (int m = 0; m < model.k; ++m)
        pos += model.targets(dists[static_cast<std::size_t>(m)].second, c) ? 1 : 0;
      out(i, c) = static_cast<Scalar>(pos) / static_cast<Scalar>(model.k);
    }
  }
  return out;
}

std::string classifier_kind_name(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::RF: return "rf";
    case ClassifierKind::XRT: return "xrt";
    case ClassifierKind::GB: return "gb";
    case ClassifierKind::KNN: return "knn";
  }
  return "rf";
}

ClassifierKind classifier_kind_from_name(const std::string& name) {
  if (name == "rf") return ClassifierKind::RF;
  if (name == "xrt") return ClassifierKind::XRT;
  if (name == "gb") return ClassifierKind::GB;
  if (name == "knn") return ClassifierKind::KNN;
  throw ConfigError("unknown classifier kind: " + name);
}

namespace {

Scalar mean_heldout_auroc(const RowMatrix& predictions,
                          const EmbeddingTable& heldout) {
  const AurocReport report =
      auroc_report(predictions, heldout.targets, heldout.class_names);
  return report.mean;
}

}  // namespace

GridResult grid_search(const EmbeddingTable& train,
                       const EmbeddingTable& heldout, const GridSpec& grid,
                       ClassifierKind kind, std::uint64_t seed) {
  if (kind == ClassifierKind::KNN)
    throw ConfigError("grid_search: tune KNN's k directly");
  if (grid.n_estimators.empty() || grid.max_depth.empty() ||
      grid.min_samples_split.empty() || grid.min_samples_leaf.empty())
    throw ConfigError("grid_search: empty candidate list");

  GridResult result;
  bool have_best = false;
  for (int est : grid.n_estimators) {
    for (int depth : grid.max_depth) {
      for (int split : grid.min_samples_split) {
        for (int leaf : grid.min_samples_leaf) {
          RowMatrix predictions;
          if (kind == ClassifierKind::GB) {
            GbmHyperparams h;
            h.n_estimators = est;
            h.max_depth = depth;
            h.min_samples_split = split;
            h.min_samples_leaf = leaf;
            predictions = predict_proba(fit_gbm(train, h, seed),
                                        heldout.features);
          } else {
            ForestHyperparams h;
            h.n_estimators = est;
            h.max_depth = depth;
            h.min_samples_split = split;
            h.min_samples_leaf = leaf;
            const ForestKind fk = kind == ClassifierKind::RF ? ForestKind::RF
                                                             : ForestKind::XRT;
            predictions =
                predict_proba(fit_forest(train, fk, h, seed), heldout.features);
          }
          GridPoint point{est, depth, split, leaf,
                          mean_heldout_auroc(predictions, heldout)};
          result.table.push_back(point);
          const bool better =
              !have_best || point.mean_auroc > result.best.mean_auroc ||
              (point.mean_auroc == result.best.mean_auroc &&
               (point.n_estimators < result.best.n_estimators ||
                (point.n_estimators == result.best.n_estimators &&
                 point.max_depth < result.best.max_depth)));
          if (better) {
            result.best = point;
            have_best = true;
          }
        }
      }
    }
  }
  return result;
}

RowMatrix ClassifierModel::predict(const RowMatrix& features) const {
  switch (kind) {
    case ClassifierKind::RF:
    case ClassifierKind::XRT:
      return predict_proba(*forest, features);
    case ClassifierKind::GB:
      return predict_proba(*gbm, features);
    case ClassifierKind::KNN:
      return predict_proba(*knn, features);
  }
  throw StructuralError("ClassifierModel: empty model");
}

const std::vector<std::string>& ClassifierModel::class_names() const {
  switch (kind) {
    case ClassifierKind::RF:
    case ClassifierKind::XRT:
      return forest->class_names;
    case ClassifierKind::GB:
      return gbm->class_names;
    case ClassifierKind::KNN:
      return knn->class_names;
  }
  throw StructuralError("ClassifierModel: empty model");
}

ClassifierModel fit_classifier(const EmbeddingTable& data, ClassifierKind kind,
                               const ForestHyperparams& forest_hyper,
                               const GbmHyperparams& gbm_hyper, int knn_k,
                               std::uint64_t seed) {
  ClassifierModel model;
  model.kind = kind;
  switch (kind) {
    case ClassifierKind::RF:
      model.forest = fit_forest(data, ForestKind::RF, forest_hyper, seed);
      break;
    case ClassifierKind::XRT:
      model.forest = fit_forest(data, ForestKind::XRT, forest_hyper, seed);
      break;
    case ClassifierKind::GB:
      model.gbm = fit_gbm(data, gbm_hyper, seed);
      break;
    case ClassifierKind::KNN:
      model.knn = fit_knn(data, knn_k);
      break;
  }
  return model;
}

namespace {

constexpr char kModelMagic[4] = {'L', 'C', 'M', '1'};

void write_trees(std::ofstream& out, const std::vector<DecisionTree>& trees) {
  for (const auto& tree : trees) {
    const std::uint32_t count = static_cast<std::uint32_t>(tree.nodes.size());
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const auto& n : tree.nodes) {
      out.write(reinterpret_cast<const char*>(&n.feature), sizeof(n.feature));
      out.write(reinterpret_cast<const char*>(&n.threshold),
                sizeof(n.threshold));
      out.write(reinterpret_cast<const char*>(&n.left), sizeof(n.left));
      out.write(reinterpret_cast<const char*>(&n.right), sizeof(n.right));
      out.write(reinterpret_cast<const char*>(&n.value), sizeof(n.value));
      out.write(reinterpret_cast<const char*>(&n.sample_count),
                sizeof(n.sample_count));
    }
  }
}

std::vector<DecisionTree> read_trees(std::ifstream& in, std::size_t n_trees) {
  std::vector<DecisionTree> trees(n_trees);
  for (auto& tree : trees) {
    std::uint32_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    tree.nodes.resize(count);
    for (auto& n : tree.nodes) {
      in.read(reinterpret_cast<char*>(&n.feature), sizeof(n.feature));
      in.read(reinterpret_cast<char*>(&n.threshold), sizeof(n.threshold));
      in.read(reinterpret_cast<char*>(&n.left), sizeof(n.left));
      in.read(reinterpret_cast<char*>(&n.right), sizeof(n.right));
      in.read(reinterpret_cast<char*>(&n.value), sizeof(n.value));
      in.read(reinterpret_cast<char*>(&n.sample_count), sizeof(n.sample_count));
    }
  }
  if (!in) throw DataError("model file: truncated tree block");
  return trees;
}

}  // namespace

void save_classifier(const std::string& path, const ClassifierModel& model) {
  json header;
  header["version"] = 1;
  header["kind"] = classifier_kind_name(model.kind);
  switch (model.kind) {
    case ClassifierKind::RF:
    case ClassifierKind::XRT: {
      const auto& m = *model.forest;
      header["hyper"] = {{"n_estimators", m.hyper.n_estimators},
                         {"max_depth", m.hyper.max_depth},
                         {"min_samples_split", m.hyper.min_samples_split},
                         {"min_samples_leaf", m.hyper.min_samples_leaf},
                         {"features_per_split", m.hyper.features_per_split}};
      header["seed"] = m.seed;
      header["n_features"] = m.n_features;
      header["class_names"] = m.class_names;
      std::vector<std::size_t> tree_counts;
      for (const auto& trees : m.per_class) tree_counts.push_back(trees.size());
      header["tree_counts"] = tree_counts;
      std::vector<bool> degenerate(m.degenerate_class.begin(),
                                   m.degenerate_class.end());
      header["degenerate"] = degenerate;
      break;
    }
    case ClassifierKind::GB: {
      const auto& m = *model.gbm;
      header["hyper"] = {{"n_estimators", m.hyper.n_estimators},
                         {"max_depth", m.hyper.max_depth},
                         {"learning_rate", m.hyper.learning_rate},
                         {"min_samples_split", m.hyper.min_samples_split},
                         {"min_samples_leaf", m.hyper.min_samples_leaf}};
      header["seed"] = m.seed;
      header["n_features"] = m.n_features;
      header["class_names"] = m.class_names;
      std::vector<std::size_t> tree_counts;
      std::vector<Scalar> initial;
      std::vector<bool> degenerate;
      for (const auto& cm : m.per_class) {
        tree_counts.push_back(cm.trees.size());
        initial.push_back(cm.initial_log_odds);
        degenerate.push_back(cm.degenerate);
      }
      header["tree_counts"] = tree_counts;
      header["initial_log_odds"] = initial;
      header["degenerate"] = degenerate;
      break;
    }
    case ClassifierKind::KNN: {
      const auto& m = *model.knn;
      header["k"] = m.k;
      header["table_digest"] = m.table_digest;
      header["class_names"] = m.class_names;
      break;
    }
  }
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file: " + path);
  out.write(kModelMagic, 4);
  const std::uint64_t header_len = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_len));
  if (model.kind == ClassifierKind::RF || model.kind == ClassifierKind::XRT) {
    for (const auto& trees : model.forest->per_class) write_trees(out, trees);
  } else if (model.kind == ClassifierKind::GB) {
    for (const auto& cm : model.gbm->per_class) write_trees(out, cm.trees);
  }
  if (!out) throw DataError("model file write failed: " + path);
}

ClassifierModel load_classifier(const std::string& path,
                                const EmbeddingTable* knn_table) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kModelMagic, 4) != 0)
    throw DataError("not a model file: " + path);
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError("model file: truncated header");
  const json header = json::parse(header_text);

  ClassifierModel model;
  model.kind = classifier_kind_from_name(header["kind"].get<std::string>());
  switch (model.kind) {
    case ClassifierKind::RF:
    case ClassifierKind::XRT: {
      ForestModel m;
      m.kind = model.kind == ClassifierKind::RF ? ForestKind::RF
                                                : ForestKind::XRT;
      m.hyper.n_estimators = header["hyper"]["n_estimators"].get<int>();
      m.hyper.max_depth = header["hyper"]["max_depth"].get<int>();
      m.hyper.min_samples_split = header["hyper"]["min_samples_split"].get<int>();
      m.hyper.min_samples_leaf = header["hyper"]["min_samples_leaf"].get<int>();
      m.hyper.features_per_split = header["hyper"]["features_per_split"].get<int>();
      m.seed = header["seed"].get<std::uint64_t>();
      m.n_features = header["n_features"].get<Index>();
      m.class_names = header["class_names"].get<std::vector<std::string>>();
      const auto counts = header["tree_counts"].get<std::vector<std::size_t>>();
      const auto degenerate = header["degenerate"].get<std::vector<bool>>();
      m.degenerate_class.assign(degenerate.begin(), degenerate.end());
      for (std::size_t count : counts)
        m.per_class.push_back(read_trees(in, count));
      model.forest = std::move(m);
      break;
    }
    case ClassifierKind::GB: {
      GbmModel m;
      m.hyper.n_estimators = header["hyper"]["n_estimators"].get<int>();
      m.hyper.max_depth = header["hyper"]["max_depth"].get<int>();
      m.hyper.learning_rate = header["hyper"]["learning_rate"].get<Scalar>();
      m.hyper.min_samples_split = header["hyper"]["min_samples_split"].get<int>();
      m.hyper.min_samples_leaf = header["hyper"]["min_samples_leaf"].get<int>();
      m.seed = header["seed"].get<std::uint64_t>();
      m.n_features = header["n_features"].get<Index>();
      m.class_names = header["class_names"].get<std::vector<std::string>>();
      const auto counts = header["tree_counts"].get<std::vector<std::size_t>>();
      const auto initial = header["initial_log_odds"].get<std::vector<Scalar>>();
      const auto degenerate = header["degenerate"].get<std::vector<bool>>();
      for (std::size_t k = 0; k < counts.size(); ++k) {
        GbmClassModel cm;
        cm.initial_log_odds = initial[k];
        cm.degenerate = degenerate[k];
        cm.trees = read_trees(in, counts[k]);
        m.per_class.push_back(std::move(cm));
      }
      model.gbm = std::move(m);
      break;
    }
    case ClassifierKind::KNN: {
      if (!knn_table)
        throw DataError("load_classifier: KNN model needs its embedding table");
      const std::string digest = header["table_digest"].get<std::string>();
      if (embedding_table_digest(*knn_table) != digest)
        throw DataError(
            "load_classifier: embedding table digest mismatch for " + path);
      model.knn = fit_knn(*knn_table, header["k"].get<int>());
      break;
    }
  }
  return model;
}

}  // namespace cxr

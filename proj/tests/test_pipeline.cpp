#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "cxr/embedding_file.hpp"
#include "cxr/pipeline.hpp"

using namespace cxr;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"({
  "seed": 11,
  "dataset": {"type": "synthetic", "n_pool": 60, "n_test": 24, "image_size": 12},
  "vae": {
    "architectures": [{"name": "t", "encoder_widths": [16], "decoder_widths": [24]}],
    "latent_dims": [4],
    "seeds": [1],
    "epochs": 2,
    "batch_size": 16
  },
  "classifiers": {
    "kinds": ["rf", "knn"],
    "rf": {"n_estimators": 4, "max_depth": 3},
    "knn_k": 3
  }
})";

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void run_all(const PipelineContext& ctx) {
  cmd_prepare(ctx);
  cmd_train_vae(ctx);
  cmd_extract(ctx, "train");
  cmd_extract(ctx, "val");
  cmd_extract(ctx, "test");
  cmd_train_clf(ctx);
  cmd_evaluate(ctx);
  cmd_report(ctx);
}

}  // namespace

TEST_CASE("config defaults and overrides parse") {
  const RunConfig c = parse_run_config(kTinyConfig);
  CHECK(c.master_seed == 11);
  CHECK(c.dataset.synthetic);
  CHECK(c.dataset.n_pool == 60);
  CHECK(c.vae.latent_dims == std::vector<Index>{4});
  CHECK(c.vae.train.epochs == 2);
  CHECK(c.vae.train.initial_lr == 7.5e-4);
  CHECK(c.vae.beta.warmup_epochs == 3);
  CHECK(c.classifiers.kinds.size() == 2);
  CHECK(c.classifiers.knn_k == 3);
  CHECK(c.split.train_fraction == 0.9);
  CHECK(c.policy.kind == UncertaintyPolicyKind::UOnes);
}

TEST_CASE("bad configs raise ConfigError") {
  CHECK_THROWS_AS(parse_run_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"labels": {"policy": "maybe"}})"),
                  ConfigError);
  CHECK_THROWS_AS(
      parse_run_config(R"({"split": {"train_fraction": 0.5, "val_fraction": 0.2}})"),
      ConfigError);
  CHECK_THROWS_AS(
      parse_run_config(R"({"dataset": {"type": "real"}})"), ConfigError);
  CHECK_THROWS_AS(
      parse_run_config(R"({"labels": {"binarize_threshold": 1.5}})"),
      ConfigError);
  CHECK_THROWS_AS(load_run_config("no_such_config.json"), ConfigError);
}

TEST_CASE("config digest is stable and content-sensitive") {
  const RunConfig a = parse_run_config(kTinyConfig);
  const RunConfig b = parse_run_config(kTinyConfig);
  CHECK(run_config_digest(a) == run_config_digest(b));
  RunConfig c = a;
  c.master_seed = 12;
  CHECK(run_config_digest(a) != run_config_digest(c));
}

TEST_CASE("manifest roundtrip") {
  TempDir dir("cxr_manifest_test");
  Manifest m;
  m.seed = 3;
  m.config_digest = "abc";
  m.label_csv = "data/labels.csv";
  m.test_label_csv = "data/labels_test.csv";
  m.items = {{"data/a.png", "train", "d1"}, {"data/b.png", "test", "d2"}};
  const std::string path = (dir.path / "manifest.json").string();
  write_manifest(path, m);
  const Manifest back = read_manifest(path);
  CHECK(back.seed == 3);
  CHECK(back.config_digest == "abc");
  REQUIRE(back.items.size() == 2);
  CHECK(back.items[1].split == "test");
  CHECK(back.items[1].digest == "d2");
  CHECK_THROWS_AS(read_manifest((dir.path / "nope.json").string()), DataError);
}

TEST_CASE("run lock excludes a second holder and releases on destruction") {
  TempDir dir("cxr_lock_test");
  {
    RunLock lock(dir.path.string());
    CHECK_THROWS_AS(RunLock second(dir.path.string()), DataError);
  }
  CHECK_NOTHROW(RunLock third(dir.path.string()));
}

TEST_CASE("full tiny run produces every artifact") {
  TempDir dir("cxr_pipeline_tiny");
  PipelineContext ctx{parse_run_config(kTinyConfig), dir.path.string()};
  run_all(ctx);

  for (const char* name :
       {"manifest.json", "data/labels.csv", "data/labels_test.csv",
        "vae-t-d4-s1.ckpt", "vae-t-d4-s1.log.csv", "emb-t-d4-s1-train.lbe",
        "emb-t-d4-s1-val.lbe", "emb-t-d4-s1-test.lbe", "clf-t-d4-s1-rf.lcm",
        "clf-t-d4-s1-knn.lcm", "clf_scores.csv", "evaluation.csv",
        "report.md", "summary.csv", "reconstructions.png", "artifacts.json"})
    CHECK_MESSAGE(fs::exists(dir.path / name), name);

  // split sizes follow the configured fractions
  const Manifest manifest = read_manifest((dir.path / "manifest.json").string());
  int train = 0, val = 0, test = 0;
  for (const auto& item : manifest.items) {
    if (item.split == "train") ++train;
    if (item.split == "val") ++val;
    if (item.split == "test") ++test;
  }
  CHECK(train == 54);
  CHECK(val == 6);
  CHECK(test == 24);

  // evaluation has one row per model plus the ensemble rows
  std::ifstream eval((dir.path / "evaluation.csv").string());
  int rows = -1;  // header
  std::string line;
  while (std::getline(eval, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2 + 2 * 2);  // 2 models + (Avg, EntropyAvg) x 2 kinds
}

TEST_CASE("training stages refuse the test split") {
  TempDir dir("cxr_pipeline_guard");
  PipelineContext ctx{parse_run_config(kTinyConfig), dir.path.string()};
  cmd_prepare(ctx);
  const Manifest manifest = read_manifest((dir.path / "manifest.json").string());
  CHECK_THROWS_AS(load_split_matrix(ctx, manifest, "test", {"train", "val"}),
                  DataError);
  CHECK_NOTHROW(load_split_matrix(ctx, manifest, "val", {"train", "val"}));
}

TEST_CASE("embedding extraction is deterministic across full reruns") {
  TempDir dir_a("cxr_pipeline_det_a");
  TempDir dir_b("cxr_pipeline_det_b");
  PipelineContext ctx_a{parse_run_config(kTinyConfig), dir_a.path.string()};
  PipelineContext ctx_b{parse_run_config(kTinyConfig), dir_b.path.string()};
  run_all(ctx_a);
  run_all(ctx_b);
  for (const char* name : {"emb-t-d4-s1-train.lbe", "emb-t-d4-s1-val.lbe",
                           "emb-t-d4-s1-test.lbe"})
    CHECK(slurp(dir_a.path / name) == slurp(dir_b.path / name));
  CHECK(slurp(dir_a.path / "evaluation.csv") ==
        slurp(dir_b.path / "evaluation.csv"));
  CHECK(slurp(dir_a.path / "summary.csv") == slurp(dir_b.path / "summary.csv"));
}

TEST_CASE("lsr targets are stable per row across splits and stages") {
  TempDir dir("cxr_pipeline_lsr");
  RunConfig config = parse_run_config(kTinyConfig);
  config.policy = UncertaintyPolicy::lsr(0.55, 0.85);
  config.dataset.synthetic_spec.uncertain_fraction = 0.3;
  PipelineContext ctx{config, dir.path.string()};
  cmd_prepare(ctx);
  const Manifest manifest = read_manifest((dir.path / "manifest.json").string());
  const BoolMatrix once = split_eval_targets(ctx, manifest, "val");
  const BoolMatrix twice = split_eval_targets(ctx, manifest, "val");
  CHECK(once.rows() == twice.rows());
  for (Index r = 0; r < once.rows(); ++r)
    for (Index c = 0; c < once.cols(); ++c) CHECK(once(r, c) == twice(r, c));
}

TEST_CASE("evaluate rejects row-order mismatches between members") {
  TempDir dir("cxr_pipeline_roworder");
  RunConfig config = parse_run_config(kTinyConfig);
  config.vae.seeds = {1, 2};
  PipelineContext ctx{config, dir.path.string()};
  cmd_prepare(ctx);
  cmd_train_vae(ctx);
  cmd_extract(ctx, "val");
  cmd_extract(ctx, "test");
  cmd_train_clf(ctx);

  // scramble the row ids of the second member's test embeddings
  const fs::path emb_path = dir.path / "emb-t-d4-s2-test.lbe";
  EmbeddingTable table = read_embedding_file(emb_path.string());
  std::swap(table.row_ids[0], table.row_ids[1]);
  write_embedding_file(emb_path.string(), table);
  CHECK_THROWS_AS(cmd_evaluate(ctx), StructuralError);
}

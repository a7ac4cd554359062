#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cxr/errors.hpp"
#include "cxr/pipeline.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "run";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int stage_parallelism = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "run configuration JSON")
      ->required();
  cmd->add_option("--out", opts.out_dir, "run directory");
  cmd->add_option("--seed", opts.seed, "master seed override")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--stage-parallelism", opts.stage_parallelism,
                  "worker count for the stage (1 = serial)")
      ->check(CLI::PositiveNumber);
}

cxr::PipelineContext make_context(const CommonOpts& opts) {
  cxr::PipelineContext ctx;
  ctx.config = cxr::load_run_config(opts.config_path);
  if (opts.seed_set) ctx.config.master_seed = opts.seed;
  ctx.run_dir = opts.out_dir;
  if (opts.stage_parallelism != 1)
    std::cerr << "note: stages run serially for reproducibility; "
                 "--stage-parallelism "
              << opts.stage_parallelism << " ignored\n";
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent-embedding chest X-ray classification pipeline"};
  app.require_subcommand(1);

  CommonOpts opts;
  CLI::App* prepare = app.add_subcommand(
      "prepare", "generate or ingest the dataset, write the manifest");
  CLI::App* train_vae =
      app.add_subcommand("train-vae", "train every configured VAE");
  CLI::App* extract = app.add_subcommand(
      "extract", "export latent embeddings for each split and checkpoint");
  std::string extract_split = "all";
  extract->add_option("--split", extract_split,
                      "train | val | test | all (default all)");
  CLI::App* train_clf = app.add_subcommand(
      "train-clf", "fit the per-class classifiers on the embeddings");
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "score members and ensembles on the test split");
  CLI::App* report =
      app.add_subcommand("report", "verify artifacts and render the report");
  for (CLI::App* cmd :
       {prepare, train_vae, extract, train_clf, evaluate, report})
    add_common(cmd, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    const cxr::PipelineContext ctx = make_context(opts);
    const cxr::RunLock lock(ctx.run_dir);
    if (prepare->parsed()) {
      cxr::cmd_prepare(ctx);
    } else if (train_vae->parsed()) {
      cxr::cmd_train_vae(ctx);
    } else if (extract->parsed()) {
      if (extract_split == "all") {
        cxr::cmd_extract(ctx, "train");
        cxr::cmd_extract(ctx, "val");
        cxr::cmd_extract(ctx, "test");
      } else {
        cxr::cmd_extract(ctx, extract_split);
      }
    } else if (train_clf->parsed()) {
      cxr::cmd_train_clf(ctx);
    } else if (evaluate->parsed()) {
      cxr::cmd_evaluate(ctx);
    } else if (report->parsed()) {
      cxr::cmd_report(ctx);
    }
  } catch (const cxr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const cxr::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const cxr::NumericError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

// Command-line driver for the speech-quality experiment lifecycle.
#include <omp.h>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sqa/app/config.hpp"
#include "sqa/app/demo.hpp"
#include "sqa/app/pipeline.hpp"
#include "sqa/common/error.hpp"
#include "sqa/train/recipe.hpp"

namespace {

using sqa::app::ExperimentConfig;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sqa: non-intrusive speech quality experiments (MTL / SEMTL)"};
  app.require_subcommand(1);
  std::string config_path = "config.json";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> workdir;
  int jobs = 0;
  bool quiet = false;
  app.add_option("-c,--config", config_path, "experiment config (JSON)");
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--workdir", workdir, "override the work directory (SQA_WORKDIR wins)");
  app.add_option("-j,--jobs", jobs, "cap on worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_flag("-q,--quiet", quiet, "only print errors");

  auto* synth = app.add_subcommand("synth", "generate the degraded corpora and manifests");
  auto* features = app.add_subcommand("features", "extract (and cache) log-mel features");
  auto* pretrain = app.add_subcommand("pretrain", "train a large-corpus model");
  std::string stage;
  pretrain->add_option("stage", stage, "ae | dcec | classifier")->required();
  auto* finetune = app.add_subcommand("finetune", "fine-tune one variant over every fold");
  std::string variant;
  finetune->add_option("variant", variant, "one of: " + sqa::train::variant_names())->required();
  auto* evaluate = app.add_subcommand("evaluate", "fine-tune and score variants, write the report");
  std::vector<std::string> variants;
  evaluate->add_option("--variants", variants, "subset to run (default: all nine)")->delimiter(',');
  auto* report = app.add_subcommand("report", "rebuild the report from stored predictions");
  auto* config = app.add_subcommand("config", "inspect the configuration");
  config->require_subcommand(1);
  auto* describe = config->add_subcommand("describe", "print every effective value and its source");
  auto* demo = app.add_subcommand("make-demo", "write a small surrogate-speech experiment");
  std::string demo_dir;
  int demo_speakers = 8, demo_clips = 6;
  demo->add_option("dir", demo_dir, "output directory")->required();
  demo->add_option("--speakers", demo_speakers, "speakers in the large corpus");
  demo->add_option("--clips", demo_clips, "clips per speaker");

  CLI11_PARSE(app, argc, argv);

  try {
    if (jobs > 0) omp_set_num_threads(jobs);
    if (demo->parsed()) {
      sqa::app::write_demo(demo_dir, {demo_speakers, demo_clips, seed.value_or(0)});
      if (!quiet) std::cout << "demo written to " << demo_dir << "; run: sqa -c " << demo_dir << "/config.json evaluate\n";
      return 0;
    }
    auto cfg = std::filesystem::exists(config_path) || config_path != "config.json" ? ExperimentConfig::load(config_path)
                                                                                     : ExperimentConfig{};
    if (seed) cfg.seed = *seed;
    if (workdir) cfg.workdir = *workdir;
    else if (cfg.workdir.is_relative()) cfg.workdir = std::filesystem::path(config_path).parent_path() / cfg.workdir;
    cfg.validate();

    if (describe->parsed()) {
      std::cout << cfg.describe();
      return 0;
    }
    // Reject bad names before any work directory is touched.
    std::vector<sqa::train::Variant> vs;
    for (const auto& v : variants) vs.push_back(sqa::train::parse_variant(v));
    if (vs.empty()) vs.assign(sqa::train::kAllVariants.begin(), sqa::train::kAllVariants.end());
    const auto one = finetune->parsed() ? std::optional(sqa::train::parse_variant(variant)) : std::nullopt;
    const auto pre = pretrain->parsed() ? std::optional(sqa::app::parse_pretrain_stage(stage)) : std::nullopt;

    sqa::LogSink log;
    if (!quiet) log = [](const std::string& line) { std::cerr << line << '\n'; };
    sqa::app::Pipeline pipe(cfg, log);
    if (synth->parsed()) pipe.synth();
    if (features->parsed()) pipe.features();
    if (pre) pipe.pretrain(*pre);
    if (one) pipe.finetune(*one);
    if (evaluate->parsed() || report->parsed()) {
      sqa::eval::MetricsReport rep;
      if (evaluate->parsed()) {
        pipe.synth();
        pipe.features();
        for (auto v : vs) {
          const auto tag = sqa::train::stage_tag(sqa::train::TrainingRecipe::for_variant(v).init_from);
          if (tag == "ae_pretrain") pipe.pretrain(sqa::app::PretrainStage::kAutoencoder);
          if (tag == "degr_classifier") pipe.pretrain(sqa::app::PretrainStage::kClassifier);
          if (tag == "dcec") {
            pipe.pretrain(sqa::app::PretrainStage::kAutoencoder);
            pipe.pretrain(sqa::app::PretrainStage::kDcec);
          }
        }
        rep = pipe.evaluate(vs);
      } else {
        rep = pipe.report();
      }
      if (!quiet) std::cout << rep.table();
    }
    return 0;
  } catch (const sqa::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 3;
  }
}

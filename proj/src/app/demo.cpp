#include "sqa/app/demo.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sqa/app/config.hpp"
#include "sqa/common/rng.hpp"
#include "sqa/synth/surrogate.hpp"

namespace sqa::app {
namespace {

std::vector<std::string> speaker_list(const std::string& prefix, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) {
    std::ostringstream s;
    s << prefix << (i < 10 ? "0" : "") << i;
    out.push_back(s.str());
  }
  return out;
}

}  // namespace

void write_demo(const std::filesystem::path& dir, const DemoOptions& opts) {
  synth::make_clean_corpus(dir / "clean_large", speaker_list("L", opts.large_speakers), opts.clips_per_speaker, 0.8,
                           derive_seed(opts.seed, "demo-large"));
  synth::make_clean_corpus(dir / "clean_small", speaker_list("S", 4), opts.clips_per_speaker, 0.8,
                           derive_seed(opts.seed, "demo-small"));
  ExperimentConfig cfg;
  cfg.clean_manifest = "clean_large/manifest.csv";
  cfg.small_clean_manifest = "clean_small/manifest.csv";
  cfg.workdir = "work";
  cfg.large_per_class = 40;
  cfg.small_per_class = 24;
  cfg.frontend.fixed_frames = 64;
  cfg.autoencoder = {15, 1e-3, 32};
  cfg.classifier = {15, 1e-3, 32};
  cfg.dcec_training = {40, 1e-3, 32};
  cfg.dcec.refresh_batches = 10;
  cfg.finetune = {40, 3e-4, 16};
  cfg.folds = 2;
  cfg.seed = opts.seed;
  auto j = cfg.to_json();
  j["paths"]["workdir"] = "work";
  std::ofstream(dir / "config.json") << j.dump(2) << "\n";
}

}  // namespace sqa::app

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sys/wait.h>

#include "helpers.hpp"
#include "sqa/app/config.hpp"
#include "sqa/app/pipeline.hpp"
#include "sqa/common/error.hpp"
#include "sqa/synth/surrogate.hpp"
#include "sqa/train/recipe.hpp"

using namespace sqa;
using namespace sqa::app;

namespace {

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(SQA_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Five clean clips, five classes, a 16-frame frontend and a two-layer net.
ExperimentConfig tiny_config(const std::filesystem::path& dir) {
  synth::make_clean_corpus(dir / "clean", {"A", "B", "C", "D", "E"}, 1, 0.5, 1);
  ExperimentConfig c;
  c.clean_manifest = dir / "clean" / "manifest.csv";
  c.large_per_class = 5;
  c.frontend.fixed_frames = 16;
  c.convnet.input_frames = 16;
  c.convnet.layers = {{4, 3}, {8, 3}};
  c.autoencoder = {2, 1e-3, 8};
  c.workdir = dir / "work";
  return c;
}

}  // namespace

TEST_CASE("defaults carry the published hyperparameters") {
  const ExperimentConfig c;
  CHECK(c.frontend.mel_bands == 64);
  CHECK(c.frontend.window == 400);
  CHECK(c.frontend.hop == 160);
  CHECK(c.dcec.clusters == 5);
  CHECK(c.dcec.gamma == 0.1);
  CHECK(c.dcec.refresh_batches == 70);
  CHECK(c.dcec.tolerance == 0.001);
  CHECK(c.finetune.epochs == 40);
  CHECK(c.finetune.learning_rate == 1e-5);
  CHECK(c.classifier.learning_rate == 1e-3);
  CHECK(c.classifier.batch_size == 64);
  CHECK(c.folds == 4);
}

TEST_CASE("config survives a JSON round trip") {
  ExperimentConfig c;
  c.seed = 17;
  c.dcec.refresh_batches = 9;
  c.finetune = {3, 2e-4, 16};
  c.grid.conditions[corpus::Degradation::kNoise].push_back({synth::NoiseParams{synth::kNoiseDisabled, synth::NoiseKind::kPink}});
  const auto back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.hash() == c.hash());
  nlohmann::json bad = c.to_json();
  bad["dcec"]["gamma"] = "lots";
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), Error);
  bad = c.to_json();
  bad["cv"]["folds"] = 0;
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), Error);
}

TEST_CASE("the hash follows the seed but not the work directory") {
  ExperimentConfig a, b;
  b.workdir = "/elsewhere";
  CHECK(a.hash() == b.hash());
  b.seed = 1;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("moving an experiment keeps its hash, editing its data does not") {
  testing::TempDir a("hash"), b("hash");
  auto ca = tiny_config(a.path), cb = tiny_config(b.path);
  CHECK(ca.clean_manifest != cb.clean_manifest);
  CHECK(ca.hash() == cb.hash());
  std::ofstream(cb.clean_manifest, std::ios::app) << "\n";
  CHECK(ca.hash() != cb.hash());
}

TEST_CASE("describe tags every value with its source") {
  const auto text = ExperimentConfig{}.describe();
  std::istringstream in(text);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.rfind("config_hash", 0) == 0) continue;
    ++rows;
    CHECK_MESSAGE(line.find('[') != std::string::npos, line);
  }
  CHECK(rows > 20);
  const auto row = [&](const std::string& key) {
    const auto pos = text.find(key + " ");
    REQUIRE(pos != std::string::npos);
    return text.substr(pos, text.find('\n', pos) - pos);
  };
  CHECK(row("dcec.gamma").find("Ragano et al. 2021") != std::string::npos);
  CHECK(row("training.finetune.learning_rate").find("Ragano et al. 2021") != std::string::npos);
  CHECK(row("frontend.fft_size").find("toolkit convention") != std::string::npos);
  CHECK(row("paths.workdir").find("user input") != std::string::npos);
}

TEST_CASE("tiny corpus synthesis gives 25 rows and is repeatable") {
  testing::TempDir dir("app");
  auto cfg = tiny_config(dir.path);
  Pipeline a(cfg);
  a.synth();
  const auto m = corpus::load_manifest(a.workspace().large_manifest());
  CHECK(m.size() == 25);
  cfg.workdir = dir.path / "other";
  Pipeline b(cfg);
  b.synth();
  CHECK(slurp(a.workspace().large_manifest()) == slurp(b.workspace().large_manifest()));
  for (const auto& e : m.entries)
    CHECK(slurp(a.workspace().corpus() / "large" / e.clip_path) == slurp(b.workspace().corpus() / "large" / e.clip_path));
  CHECK(a.workspace().root.filename() == b.workspace().root.filename());
}

TEST_CASE("stages reuse their outputs and report cache hits") {
  testing::TempDir dir("app");
  const auto cfg = tiny_config(dir.path);
  std::vector<std::string> lines;
  Pipeline p(cfg, [&](const std::string& l) { lines.push_back(l); });
  p.synth();
  p.features();
  Pipeline again(cfg, [&](const std::string& l) { lines.push_back(l); });
  again.synth();
  again.features();
  const auto has = [&](const std::string& s) {
    return std::any_of(lines.begin(), lines.end(), [&](const std::string& l) { return l.find(s) != std::string::npos; });
  };
  CHECK(has("stage=synth event=up_to_date"));
  CHECK(has("corpus=large clips=25 hits=25 misses=0"));
  try {
    again.pretrain(PretrainStage::kDcec);
    FAIL("expected a dependency error");
  } catch (const Error& e) {
    CHECK(e.kind() == errc::kDependency);
  }
  const auto ae = again.pretrain(PretrainStage::kAutoencoder);
  CHECK(std::filesystem::exists(again.workspace().logs() / "ae_pretrain.log"));
  const auto before = std::filesystem::last_write_time(again.workspace().checkpoint("ae_pretrain"));
  again.pretrain(PretrainStage::kAutoencoder);
  CHECK(std::filesystem::last_write_time(again.workspace().checkpoint("ae_pretrain")) == before);
  CHECK(ae.stage == "ae_pretrain");
}

TEST_CASE("cli rejects unknown variants with the list of names") {
  testing::TempDir dir("cli");
  REQUIRE(run_cli("-q make-demo " + (dir.path / "demo").string()).exit_code == 0);
  const auto r = run_cli("-c " + (dir.path / "demo" / "config.json").string() + " finetune semtl2");
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("error: invalid_argument") != std::string::npos);
  for (auto v : train::kAllVariants) CHECK(r.output.find(std::string(train::to_string(v))) != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir.path / "demo" / "work"));
}

TEST_CASE("cli fails cleanly when the clean corpus is missing") {
  testing::TempDir dir("cli");
  std::ofstream(dir.path / "config.json") << R"({"paths": {"clean_manifest": "nowhere/manifest.csv"}})";
  const auto r = run_cli("-c " + (dir.path / "config.json").string() + " synth");
  CHECK(r.exit_code != 0);
  CHECK(r.output.rfind("error: ", 0) != std::string::npos);
  CHECK(std::count(r.output.begin(), r.output.end(), '\n') == 1);
  const auto d = run_cli("-c " + (dir.path / "config.json").string() + " config describe");
  CHECK(d.exit_code == 0);
  CHECK(d.output.find("config_hash") != std::string::npos);
}

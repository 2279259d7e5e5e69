#include "sqa/app/config.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "sqa/common/error.hpp"
#include "sqa/common/hash.hpp"

namespace sqa::app {
namespace {

using nlohmann::json;
using synth::Degradation;

constexpr const char* kSource = "Ragano et al. 2021";
constexpr const char* kConvention = "toolkit convention";

/// Source tag per dotted key. Keys missing here are user inputs.
const std::map<std::string, std::string>& sources() {
  static const std::map<std::string, std::string> m = {
      {"synthesis.large_per_class", "Datasets: \"761 stimuli per class\""},
      {"synthesis.small_per_class", kConvention},
      {"synthesis.grid", kConvention},
      {"frontend.sample_rate", "Experiment set-up: \"downsampled the data to 16 kHz\""},
      {"frontend.mel_bands", "Experiment set-up: \"64 mel bands\""},
      {"frontend.window", "Experiment set-up: \"windows of 25 ms\""},
      {"frontend.hop", "Experiment set-up: \"10 ms hop length\""},
      {"frontend.fft_size", kConvention},
      {"frontend.fmin", kConvention},
      {"frontend.fmax", kConvention},
      {"frontend.log_floor", kConvention},
      {"frontend.fixed_frames", kConvention},
      {"model.stride", "Architecture, Table 1"},
      {"model.layers", "Architecture, Table 1"},
      {"dcec.clusters", "Experiment set-up: \"we selected 5 clusters for DCEC\""},
      {"dcec.embedding_dim", "Table 1: \"10 neurons for the embedded layer\""},
      {"dcec.alpha", "Method: \"The parameter alpha is set to 1\""},
      {"dcec.gamma", "Method: \"we fix gamma to 0.1\""},
      {"dcec.refresh_batches", "Experiment set-up: \"every 70 batches\""},
      {"dcec.tolerance", "Experiment set-up: \"convergence threshold to 0.1% of the dataset size\""},
      {"dcec.kmeans_restarts", kConvention},
      {"training.autoencoder.epochs", "Experiment set-up: \"trained an autoencoder for 200 epochs\""},
      {"training.autoencoder.learning_rate", "Experiment set-up: \"learning rate of 0.001\""},
      {"training.autoencoder.batch_size", "Experiment set-up: \"batch size of 64\""},
      {"training.classifier.epochs", "Experiment set-up: \"trained for 200 epochs as well\""},
      {"training.classifier.learning_rate", "Experiment set-up: \"learning rate of 0.001\""},
      {"training.classifier.batch_size", "Experiment set-up: \"batch size of 64\""},
      {"training.dcec.epochs", kConvention},
      {"training.dcec.learning_rate", "Experiment set-up: \"learning rate of 0.001\""},
      {"training.dcec.batch_size", "Experiment set-up: \"batch size of 64\""},
      {"training.finetune.epochs", "Experiment set-up: \"optimized for 40 epochs in each fold\""},
      {"training.finetune.learning_rate", "Experiment set-up: \"learning rate of 0.00001\""},
      {"training.finetune.batch_size", "Experiment set-up: \"batch size of 64\""},
      {"cv.folds", "Experiment set-up: \"4-fold cross-validation\""},
      {"seed", kConvention},
  };
  return m;
}

json stage_json(const StageConfig& s) {
  return {{"epochs", s.epochs}, {"learning_rate", s.learning_rate}, {"batch_size", s.batch_size}};
}

void read_stage(const json& j, StageConfig& s) {
  s.epochs = j.value("epochs", s.epochs);
  s.learning_rate = j.value("learning_rate", s.learning_rate);
  s.batch_size = j.value("batch_size", s.batch_size);
}

json condition_json(const synth::DegradationCondition& c) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, synth::ChopParams>) return {{"period_ms", p.period_ms}, {"fraction", p.chopped_fraction}};
        if constexpr (std::is_same_v<T, synth::ClipParams>) return {{"threshold", p.threshold}};
        if constexpr (std::is_same_v<T, synth::EchoParams>) return {{"delay_ms", p.delay_ms}, {"alpha", p.alpha}};
        if constexpr (std::is_same_v<T, synth::NoiseParams>)
          return {{"snr_db", std::isinf(p.snr_db) ? json("inf") : json(p.snr_db)},
                  {"kind", p.kind == synth::NoiseKind::kPink ? "pink" : "white"}};
        return json::object();
      },
      c.params);
}

synth::DegradationCondition condition_from_json(Degradation d, const json& j) {
  synth::DegradationCondition c;
  switch (d) {
    case Degradation::kChop: c.params = synth::ChopParams{j.at("period_ms").get<double>(), j.at("fraction").get<double>()}; break;
    case Degradation::kClip: c.params = synth::ClipParams{j.at("threshold").get<double>()}; break;
    case Degradation::kEcho: c.params = synth::EchoParams{j.at("delay_ms").get<double>(), j.at("alpha").get<double>()}; break;
    case Degradation::kNoise: {
      const auto& s = j.at("snr_db");
      const double snr = s.is_string() && s.get<std::string>() == "inf" ? synth::kNoiseDisabled : s.get<double>();
      const auto kind = j.value("kind", std::string("white"));
      if (kind != "white" && kind != "pink") throw Error(errc::kConfig, "noise kind must be white or pink");
      c.params = synth::NoiseParams{snr, kind == "pink" ? synth::NoiseKind::kPink : synth::NoiseKind::kWhite};
      break;
    }
    case Degradation::kReference: c.params = synth::ReferenceParams{}; break;
  }
  c.validate();
  return c;
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object() && !prefix.ends_with("grid")) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else {
    out.emplace_back(prefix, j.dump());
  }
}

}  // namespace

json grid_to_json(const synth::ConditionGrid& grid) {
  json j = json::object();
  for (const auto& [d, conds] : grid.conditions) {
    auto& arr = j[std::string(corpus::to_string(d))] = json::array();
    for (const auto& c : conds) arr.push_back(condition_json(c));
  }
  return j;
}

synth::ConditionGrid grid_from_json(const json& j) {
  synth::ConditionGrid g;
  for (const auto& [k, arr] : j.items()) {
    const auto d = corpus::parse_degradation(k);
    auto& list = g.conditions[d];
    for (const auto& c : arr) list.push_back(condition_from_json(d, c));
  }
  return g;
}

void ExperimentConfig::validate() const {
  const auto fail = [](const std::string& m) { throw Error(errc::kConfig, m); };
  if (frontend.sample_rate != 16000) fail("frontend.sample_rate must be 16000");
  if (frontend.mel_bands < 1 || frontend.fixed_frames < 1) fail("frontend needs positive mel_bands and fixed_frames");
  if (convnet.input_bands != frontend.mel_bands || convnet.input_frames != frontend.fixed_frames)
    fail("model input must match the frontend's (mel_bands, fixed_frames)");
  convnet.validate();
  if (dcec.clusters < 1 || dcec.embedding_dim < 1) fail("dcec needs positive clusters and embedding_dim");
  if (!(dcec.alpha > 0) || !(dcec.gamma >= 0) || dcec.refresh_batches < 1 || !(dcec.tolerance > 0))
    fail("dcec parameters out of range");
  for (const auto* s : {&autoencoder, &classifier, &dcec_training, &finetune})
    if (s->epochs < 1 || s->batch_size < 1 || !(s->learning_rate > 0)) fail("training stages need positive epochs, lr and batch");
  if (folds < 1) fail("cv.folds must be positive");
  for (auto d : corpus::kAllDegradations)
    if (!grid.conditions.count(d) || grid.conditions.at(d).empty())
      fail("synthesis.grid has no conditions for " + std::string(corpus::to_string(d)));
}

json ExperimentConfig::to_json() const {
  json layers = json::array();
  for (const auto& l : convnet.layers) layers.push_back({l.kernels, l.kernel_size});
  return {
      {"paths",
       {{"clean_manifest", clean_manifest.string()},
        {"small_manifest", small_manifest.string()},
        {"small_clean_manifest", small_clean_manifest.string()},
        {"workdir", workdir.string()}}},
      {"synthesis", {{"large_per_class", large_per_class}, {"small_per_class", small_per_class}, {"grid", grid_to_json(grid)}}},
      {"frontend",
       {{"sample_rate", frontend.sample_rate},
        {"mel_bands", frontend.mel_bands},
        {"window", frontend.window},
        {"hop", frontend.hop},
        {"fft_size", frontend.fft_size},
        {"fmin", frontend.fmin},
        {"fmax", frontend.fmax},
        {"log_floor", frontend.log_floor},
        {"fixed_frames", frontend.fixed_frames}}},
      {"model", {{"stride", convnet.stride}, {"layers", layers}}},
      {"dcec",
       {{"clusters", dcec.clusters},
        {"embedding_dim", dcec.embedding_dim},
        {"alpha", dcec.alpha},
        {"gamma", dcec.gamma},
        {"refresh_batches", dcec.refresh_batches},
        {"tolerance", dcec.tolerance},
        {"kmeans_restarts", dcec.kmeans_restarts}}},
      {"training",
       {{"autoencoder", stage_json(autoencoder)},
        {"classifier", stage_json(classifier)},
        {"dcec", stage_json(dcec_training)},
        {"finetune", stage_json(finetune)}}},
      {"cv", {{"folds", folds}}},
      {"seed", seed},
  };
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      c.clean_manifest = p.value("clean_manifest", std::string());
      c.small_manifest = p.value("small_manifest", std::string());
      c.small_clean_manifest = p.value("small_clean_manifest", std::string());
      c.workdir = p.value("workdir", c.workdir.string());
    }
    if (j.contains("synthesis")) {
      const auto& s = j["synthesis"];
      c.large_per_class = s.value("large_per_class", c.large_per_class);
      c.small_per_class = s.value("small_per_class", c.small_per_class);
      if (s.contains("grid")) c.grid = grid_from_json(s["grid"]);
    }
    if (j.contains("frontend")) {
      const auto& f = j["frontend"];
      auto& fe = c.frontend;
      fe.sample_rate = f.value("sample_rate", fe.sample_rate);
      fe.mel_bands = f.value("mel_bands", fe.mel_bands);
      fe.window = f.value("window", fe.window);
      fe.hop = f.value("hop", fe.hop);
      fe.fft_size = f.value("fft_size", fe.fft_size);
      fe.fmin = f.value("fmin", fe.fmin);
      fe.fmax = f.value("fmax", fe.fmax);
      fe.log_floor = f.value("log_floor", fe.log_floor);
      fe.fixed_frames = f.value("fixed_frames", fe.fixed_frames);
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      c.convnet.stride = m.value("stride", c.convnet.stride);
      if (m.contains("layers")) {
        c.convnet.layers.clear();
        for (const auto& l : m["layers"]) c.convnet.layers.push_back({l.at(0).get<int>(), l.at(1).get<int>()});
      }
    }
    if (j.contains("dcec")) {
      const auto& d = j["dcec"];
      auto& dc = c.dcec;
      dc.clusters = d.value("clusters", dc.clusters);
      dc.embedding_dim = d.value("embedding_dim", dc.embedding_dim);
      dc.alpha = d.value("alpha", dc.alpha);
      dc.gamma = d.value("gamma", dc.gamma);
      dc.refresh_batches = d.value("refresh_batches", dc.refresh_batches);
      dc.tolerance = d.value("tolerance", dc.tolerance);
      dc.kmeans_restarts = d.value("kmeans_restarts", dc.kmeans_restarts);
    }
    if (j.contains("training")) {
      const auto& t = j["training"];
      if (t.contains("autoencoder")) read_stage(t["autoencoder"], c.autoencoder);
      if (t.contains("classifier")) read_stage(t["classifier"], c.classifier);
      if (t.contains("dcec")) read_stage(t["dcec"], c.dcec_training);
      if (t.contains("finetune")) read_stage(t["finetune"], c.finetune);
    }
    if (j.contains("cv")) c.folds = j["cv"].value("folds", c.folds);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(errc::kConfig, std::string("bad config value: ") + e.what());
  }
  c.convnet.input_bands = c.frontend.mel_bands;
  c.convnet.input_frames = c.frontend.fixed_frames;
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(errc::kIo, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(errc::kConfig, path.string() + ": " + e.what());
  }
  auto c = from_json(j);
  // Relative input paths are taken relative to the config file.
  const auto base = path.parent_path();
  for (auto* p : {&c.clean_manifest, &c.small_manifest, &c.small_clean_manifest})
    if (!p->empty() && p->is_relative()) *p = base / *p;
  return c;
}

std::string ExperimentConfig::hash() const {
  auto j = to_json();
  j["paths"].erase("workdir");
  // Manifests enter by content so the same experiment hashes alike wherever it lives.
  for (auto& [key, value] : j["paths"].items()) {
    const std::filesystem::path p = value.get<std::string>();
    if (p.empty() || !std::filesystem::is_regular_file(p)) continue;
    std::ifstream in(p, std::ios::binary);
    value = to_hex(fnv1a64(std::string(std::istreambuf_iterator<char>(in), {})));
  }
  return to_hex(fnv1a64(j.dump()));
}

std::string ExperimentConfig::describe() const {
  std::vector<std::pair<std::string, std::string>> rows;
  flatten(to_json(), "", rows);
  std::size_t width = 0;
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  std::ostringstream ss;
  for (const auto& [k, v] : rows) {
    const auto it = sources().find(k);
    std::string tag = k.starts_with("paths.") ? "user input" : it == sources().end() ? kConvention : it->second;
    if (tag != kConvention && tag != "user input") tag = std::string(kSource) + ", " + tag;
    ss << k << std::string(width - k.size() + 2, ' ') << v << "  [" << tag << "]\n";
  }
  ss << "config_hash" << std::string(width > 9 ? width - 9 : 2, ' ') << hash() << '\n';
  return ss.str();
}

}  // namespace sqa::app

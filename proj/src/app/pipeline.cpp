#include "sqa/app/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

#include "sqa/common/error.hpp"
#include "sqa/common/hash.hpp"
#include "sqa/dcec/trainer.hpp"
#include "sqa/features/cache.hpp"
#include "sqa/synth/corpus_synth.hpp"
#include "sqa/train/trainer.hpp"

namespace sqa::app {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(errc::kIo, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(errc::kIo, "cannot write " + p.string());
  out << text;
}

void normalize_rows(train::Dataset& d, const features::NormalizationStats& s) {
  const std::size_t fs_ = d.feature_size();
  for (std::size_t i = 0; i < d.size(); ++i)
    for (int b = 0; b < d.bands; ++b) {
      float* row = d.features.data() + i * fs_ + static_cast<std::size_t>(b) * d.frames;
      for (int t = 0; t < d.frames; ++t) row[t] = static_cast<float>((row[t] - s.mean[b]) / s.stddev[b]);
    }
}

features::NormalizationStats dataset_stats(const train::Dataset& d, std::vector<std::string> provenance) {
  std::vector<features::LogMelFeature> view(d.size());
  const std::size_t fs_ = d.feature_size();
  for (std::size_t i = 0; i < d.size(); ++i) {
    view[i].bands = d.bands;
    view[i].frames = d.frames;
    view[i].values.assign(d.features.begin() + static_cast<std::ptrdiff_t>(i * fs_),
                          d.features.begin() + static_cast<std::ptrdiff_t>((i + 1) * fs_));
  }
  return features::compute_stats(view, std::move(provenance));
}

}  // namespace

PretrainStage parse_pretrain_stage(std::string_view name) {
  if (name == "ae") return PretrainStage::kAutoencoder;
  if (name == "dcec") return PretrainStage::kDcec;
  if (name == "classifier") return PretrainStage::kClassifier;
  throw Error(errc::kInvalidArgument, "unknown pretrain stage '" + std::string(name) + "'; valid: ae, dcec, classifier");
}

std::string_view checkpoint_stage(PretrainStage s) {
  switch (s) {
    case PretrainStage::kAutoencoder: return "ae_pretrain";
    case PretrainStage::kDcec: return "dcec";
    case PretrainStage::kClassifier: return "degr_classifier";
  }
  return "";
}

fs::path Workspace::checkpoint(std::string_view stage) const { return checkpoints() / (std::string(stage) + ".ckpt"); }

fs::path resolve_workdir(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("SQA_WORKDIR"); env && *env) return env;
  return cfg.workdir;
}

Pipeline::Pipeline(ExperimentConfig cfg, LogSink progress)
    : cfg_(std::move(cfg)), hash_(cfg_.hash()), progress_(std::move(progress)) {
  cfg_.validate();
  ws_.root = resolve_workdir(cfg_) / hash_;
  for (const auto& d : {ws_.corpus(), ws_.features(), ws_.checkpoints(), ws_.reports(), ws_.logs()})
    fs::create_directories(d);
  write_file(ws_.root / "config.json", cfg_.to_json().dump(2) + "\n");
}

LogSink Pipeline::stage_log(const std::string& name, bool append) {
  auto out = std::make_shared<std::ofstream>(ws_.logs() / (name + ".log"), append ? std::ios::app : std::ios::trunc);
  if (!*out) throw Error(errc::kIo, "cannot open log for " + name);
  return [out, echo = progress_](const std::string& line) {
    *out << line << '\n';
    out->flush();
    emit(echo, line);
  };
}

fs::path Pipeline::small_manifest_path() const {
  return cfg_.small_manifest.empty() ? ws_.small_manifest_copy() : cfg_.small_manifest;
}

void Pipeline::synth() {
  const auto stamp = ws_.corpus() / ".complete";
  if (fs::exists(stamp)) {
    emit(progress_, "stage=synth event=up_to_date");
    return;
  }
  if (cfg_.clean_manifest.empty()) throw Error(errc::kConfig, "paths.clean_manifest is not set");
  const auto clean = corpus::load_manifest(cfg_.clean_manifest);
  std::set<std::string> small_speakers;
  std::optional<corpus::Manifest> small_clean;
  if (!cfg_.small_manifest.empty()) {
    for (const auto& s : corpus::load_manifest(cfg_.small_manifest).speakers()) small_speakers.insert(s);
  } else if (!cfg_.small_clean_manifest.empty()) {
    small_clean = corpus::load_manifest(cfg_.small_clean_manifest);
    for (const auto& s : small_clean->speakers()) small_speakers.insert(s);
  }
  auto log = stage_log("synth", false);
  synth::SynthesisOptions opts;
  opts.per_class = cfg_.large_per_class;
  opts.seed = derive_seed(cfg_.seed, "large-corpus");
  opts.excluded_speakers = small_speakers;
  const auto large = synth::synthesize_corpus(clean, cfg_.clean_manifest, cfg_.grid, ws_.corpus() / "large", opts);
  emit(log, "stage=synth corpus=large rows=" + std::to_string(large.size()));
  if (small_clean) {
    synth::SynthesisOptions so;
    so.per_class = cfg_.small_per_class;
    so.seed = derive_seed(cfg_.seed, "small-corpus");
    so.pseudo_mos = true;
    const auto small = synth::synthesize_corpus(*small_clean, cfg_.small_clean_manifest, cfg_.grid, ws_.corpus() / "small", so);
    emit(log, "stage=synth corpus=small rows=" + std::to_string(small.size()) + " mos=pseudo");
  }
  write_file(stamp, hash_ + "\n");
}

Pipeline::Corpus Pipeline::load_corpus(const fs::path& manifest_path, const std::string& tag) {
  if (!fs::exists(manifest_path))
    throw Error(errc::kDependency, "missing " + manifest_path.string() + "; run `synth` first");
  Corpus c;
  c.manifest_path = manifest_path;
  c.manifest = corpus::load_manifest(manifest_path);
  const features::FeatureCache cache(ws_.features() / tag, cfg_.frontend);
  const features::LogMelExtractor extractor(cfg_.frontend);
  std::map<features::CacheStatus, int> counts;
  for (const auto& e : c.manifest.entries) {
    features::CacheStatus st{};
    c.features.push_back(
        cache.get_or_compute(tag + "/" + e.clip_path, corpus::resolve_clip_path(manifest_path, e.clip_path), extractor, &st));
    ++counts[st];
  }
  emit(progress_, "stage=features corpus=" + tag + " clips=" + std::to_string(c.features.size()) +
                      " hits=" + std::to_string(counts[features::CacheStatus::kHit]) +
                      " misses=" + std::to_string(counts[features::CacheStatus::kMiss]) +
                      " stale=" + std::to_string(counts[features::CacheStatus::kStale]) +
                      " corrupt=" + std::to_string(counts[features::CacheStatus::kCorrupt]));
  return c;
}

const Pipeline::Corpus& Pipeline::large() {
  if (!large_) large_ = load_corpus(ws_.large_manifest(), "large");
  return *large_;
}

const Pipeline::Corpus& Pipeline::small() {
  if (!small_) small_ = load_corpus(small_manifest_path(), "small");
  return *small_;
}

void Pipeline::features() {
  large();
  if (fs::exists(small_manifest_path())) small();
}

features::NormalizationStats Pipeline::large_stats() {
  if (!large_stats_) large_stats_ = features::compute_stats(large().features, {"large"});
  return *large_stats_;
}

std::vector<std::size_t> Pipeline::all_rows(const Corpus& c) const {
  std::vector<std::size_t> rows(c.features.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return rows;
}

train::Dataset Pipeline::pack(const Corpus& c, const features::NormalizationStats& stats,
                              std::span<const std::size_t> rows) const {
  train::Dataset d;
  d.bands = cfg_.frontend.mel_bands;
  d.frames = cfg_.frontend.fixed_frames;
  bool has_mos = true;
  for (auto r : rows) has_mos = has_mos && c.manifest.entries[r].mos.has_value();
  for (auto r : rows) {
    auto f = c.features[r];
    if (!stats.mean.empty()) features::apply_stats(f, stats);
    d.features.insert(d.features.end(), f.values.begin(), f.values.end());
    const auto& e = c.manifest.entries[r];
    d.clip_ids.push_back(e.clip_path);
    d.speakers.push_back(e.speaker_id);
    d.degradations.push_back(e.degradation);
    if (has_mos) d.mos.push_back(*e.mos);
  }
  d.validate();
  return d;
}

nn::Checkpoint Pipeline::require_checkpoint(std::string_view stage) {
  const auto path = ws_.checkpoint(stage);
  if (!fs::exists(path)) {
    const std::string cmd = stage == "ae_pretrain" ? "pretrain ae" : stage == "dcec" ? "pretrain dcec" : "pretrain classifier";
    throw Error(errc::kDependency, "no " + std::string(stage) + " checkpoint; run `" + cmd + "` first");
  }
  auto ckpt = nn::load_checkpoint(path);
  if (ckpt.config_hash != hash_) throw Error(errc::kDependency, path.string() + " was trained under another config");
  return ckpt;
}

nn::Checkpoint Pipeline::pretrain(PretrainStage stage) {
  const std::string tag(checkpoint_stage(stage));
  const auto path = ws_.checkpoint(tag);
  if (fs::exists(path)) {
    auto done = nn::load_checkpoint(path);
    if (done.config_hash == hash_) {
      emit(progress_, "stage=" + tag + " event=up_to_date");
      return done;
    }
  }
  std::optional<nn::Checkpoint> ae;
  if (stage == PretrainStage::kDcec) ae = require_checkpoint("ae_pretrain");

  auto data = pack(large(), large_stats(), all_rows(large()));
  const auto progress_path = ws_.checkpoints() / (tag + ".progress");
  train::StageParams p;
  p.seed = derive_seed(cfg_.seed, tag);
  p.config_hash = hash_;
  p.state_path = progress_path;
  p.log = stage_log(tag, fs::exists(progress_path));
  const auto set = [&](const StageConfig& s) {
    p.epochs = s.epochs;
    p.learning_rate = s.learning_rate;
    p.batch_size = s.batch_size;
  };

  nn::Checkpoint out;
  switch (stage) {
    case PretrainStage::kAutoencoder: {
      set(cfg_.autoencoder);
      auto r = train::pretrain_autoencoder(data, cfg_.convnet, p);
      out = nn::capture(r.model, tag, p.seed, hash_);
      out.meta["final_loss"] = r.history.back().loss;
      break;
    }
    case PretrainStage::kClassifier: {
      set(cfg_.classifier);
      data.use_degradation_labels();
      auto r = train::pretrain_degradation_classifier(data, cfg_.convnet, p);
      out = nn::capture(r.model, tag, p.seed, hash_);
      out.meta["final_loss"] = r.history.back().loss;
      out.meta["train_accuracy"] = r.history.back().accuracy;
      break;
    }
    case PretrainStage::kDcec: {
      set(cfg_.dcec_training);
      auto r = dcec::train_dcec(data, *ae, cfg_.dcec, p);
      out = nn::capture(r.model, tag, p.seed, hash_);
      out.meta["converged"] = r.converged;
      out.meta["epochs"] = r.epochs;
      out.meta["label_changes"] = r.label_changes;
      break;
    }
  }
  nn::save_checkpoint(out, path);
  emit(progress_, "stage=" + tag + " event=saved path=" + path.string());
  return out;
}

corpus::SplitPlan Pipeline::split_plan() { return corpus::make_speaker_folds(small().manifest, cfg_.folds, cfg_.seed); }

std::vector<int> Pipeline::cluster_labels() {
  const auto& c = small();
  const auto path = ws_.cluster_labels();
  if (fs::exists(path)) {
    std::istringstream in(read_file(path));
    std::string line;
    std::map<std::string, int> by_clip;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto comma = line.rfind(',');
      if (comma == std::string::npos) throw Error(errc::kFormat, path.string() + ": malformed row");
      by_clip[line.substr(0, comma)] = std::stoi(line.substr(comma + 1));
    }
    std::vector<int> labels;
    for (const auto& e : c.manifest.entries) {
      const auto it = by_clip.find(e.clip_path);
      if (it == by_clip.end()) throw Error(errc::kFormat, path.string() + " lacks " + e.clip_path);
      labels.push_back(it->second);
    }
    return labels;
  }
  auto model = nn::instantiate(require_checkpoint("dcec"));
  const auto data = pack(c, large_stats(), all_rows(c));
  const auto a = dcec::assign_cluster_labels(model, data, cfg_.dcec_training.batch_size);
  std::ostringstream ss;
  ss << "clip_path,cluster\n";
  std::vector<int> counts(static_cast<std::size_t>(cfg_.dcec.clusters), 0);
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    ss << c.manifest.entries[i].clip_path << ',' << a.labels[i] << '\n';
    ++counts[static_cast<std::size_t>(a.labels[i])];
  }
  write_file(path, ss.str());
  std::string dist;
  for (int k : counts) dist += (dist.empty() ? "" : ",") + std::to_string(k);
  emit(progress_, "stage=cluster_labels clips=" + std::to_string(a.labels.size()) + " counts=" + dist);
  return a.labels;
}

std::vector<eval::Prediction> Pipeline::finetune(train::Variant variant) {
  const std::string name(train::to_string(variant));
  const auto pred_path = ws_.reports() / ("predictions_" + name + ".csv");
  if (fs::exists(pred_path)) {
    emit(progress_, "stage=finetune_" + name + " event=up_to_date");
    return eval::parse_predictions_csv(read_file(pred_path));
  }
  auto recipe = train::TrainingRecipe::for_variant(variant);
  recipe.epochs = cfg_.finetune.epochs;
  recipe.learning_rate = cfg_.finetune.learning_rate;
  recipe.batch_size = cfg_.finetune.batch_size;

  std::optional<nn::Checkpoint> init;
  if (const auto tag = train::stage_tag(recipe.init_from); !tag.empty()) init = require_checkpoint(tag);

  const auto& c = small();
  auto raw = pack(c, {}, all_rows(c));
  if (raw.mos.size() != raw.size()) throw Error(errc::kInvalidArgument, "the small corpus needs a MOS for every clip");
  if (recipe.aux == train::AuxLabels::kDegradation) {
    raw.use_degradation_labels();
  } else if (recipe.aux == train::AuxLabels::kCluster) {
    raw.labels = cluster_labels();
    raw.label_kind = "cluster";
  }

  const bool resuming = fs::exists(ws_.checkpoints() / ("finetune_" + name + "_fold0.progress"));
  auto log = stage_log("finetune_" + name, resuming);
  const auto predictor = [&](train::Variant, int fold, const train::Dataset& tr, const train::Dataset& te) {
    const std::string k = "fold" + std::to_string(fold);
    const auto stats = dataset_stats(tr, {k + "/train"});
    const std::vector<std::string> test_tags{k + "/test"};
    features::assert_no_leakage(stats, test_tags);
    auto train_n = tr, test_n = te;
    normalize_rows(train_n, stats);
    normalize_rows(test_n, stats);
    train::StageParams p;
    p.seed = derive_seed(cfg_.seed, "finetune/" + name, static_cast<std::uint64_t>(fold));
    p.config_hash = hash_;
    p.state_path = ws_.checkpoints() / ("finetune_" + name + "_" + k + ".progress");
    p.log = [&log, k](const std::string& line) { emit(log, line + " fold=" + k.substr(4)); };
    auto r = train::finetune(recipe, train_n, init ? &*init : nullptr, cfg_.convnet, p);
    auto ckpt = nn::capture(r.stage.model, "finetune_" + name, p.seed, hash_);
    ckpt.meta["fold"] = fold;
    ckpt.meta["transfer"] = r.transfer.render();
    ckpt.meta["train_speakers"] = std::set<std::string>(tr.speakers.begin(), tr.speakers.end());
    nn::save_checkpoint(ckpt, ws_.checkpoints() / ("finetune_" + name + "_" + k + ".ckpt"));
    return train::predict_mos(r.stage.model, test_n, recipe.batch_size);
  };
  eval::ReportMetadata meta{cfg_.seed, hash_, to_hex(raw.fingerprint()), cfg_.folds};
  const auto rep = eval::run_protocol({variant}, raw, split_plan(), predictor, meta);
  write_file(pred_path, rep.predictions_csv());
  return rep.predictions;
}

void Pipeline::write_report(const eval::MetricsReport& r) {
  nlohmann::json meta = {{"seed", r.meta.seed},
                         {"config_hash", r.meta.config_hash},
                         {"dataset_fingerprint", r.meta.dataset_fingerprint},
                         {"folds", r.meta.folds},
                         {"variants", r.variants}};
  write_file(ws_.reports() / "meta.json", meta.dump(2) + "\n");
  write_file(ws_.reports() / "predictions.csv", r.predictions_csv());
  write_file(ws_.reports() / "report.txt", r.structured());
  write_file(ws_.reports() / "table.txt", r.table());
}

eval::MetricsReport Pipeline::evaluate(const std::vector<train::Variant>& variants) {
  std::vector<eval::Prediction> all;
  std::vector<std::string> names;
  for (auto v : variants) {
    auto p = finetune(v);
    all.insert(all.end(), p.begin(), p.end());
    names.emplace_back(train::to_string(v));
  }
  const auto& c = small();
  const auto raw = pack(c, {}, all_rows(c));
  eval::ReportMetadata meta{cfg_.seed, hash_, to_hex(raw.fingerprint()), cfg_.folds};
  auto rep = eval::MetricsReport::from_predictions(meta, names, std::move(all));
  write_report(rep);
  return rep;
}

eval::MetricsReport Pipeline::report() {
  const auto meta_path = ws_.reports() / "meta.json";
  if (!fs::exists(meta_path)) throw Error(errc::kDependency, "no stored predictions; run `evaluate` first");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(errc::kFormat, meta_path.string() + ": " + e.what());
  }
  eval::ReportMetadata meta{j.at("seed").get<std::uint64_t>(), j.at("config_hash").get<std::string>(),
                            j.at("dataset_fingerprint").get<std::string>(), j.at("folds").get<int>()};
  auto rep = eval::MetricsReport::from_predictions(meta, j.at("variants").get<std::vector<std::string>>(),
                                                   eval::parse_predictions_csv(read_file(ws_.reports() / "predictions.csv")));
  write_report(rep);
  return rep;
}

}  // namespace sqa::app

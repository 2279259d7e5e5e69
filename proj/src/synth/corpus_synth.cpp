#include "sqa/synth/corpus_synth.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>

#include "sqa/common/error.hpp"
#include "sqa/common/rng.hpp"
#include "sqa/corpus/wav.hpp"

namespace sqa::synth {

ConditionGrid ConditionGrid::defaults() {
  ConditionGrid g;
  auto& chop = g.conditions[Degradation::kChop];
  for (double period : {20.0, 40.0, 80.0})
    for (double fraction : {0.1, 0.2, 0.4}) chop.push_back({ChopParams{period, fraction}});
  auto& clip = g.conditions[Degradation::kClip];
  for (double t : {0.1, 0.2, 0.4, 0.6}) clip.push_back({ClipParams{t}});
  auto& echo = g.conditions[Degradation::kEcho];
  for (double delay : {100.0, 200.0, 400.0})
    for (double alpha : {0.2, 0.4, 0.6}) echo.push_back({EchoParams{delay, alpha}});
  auto& noise = g.conditions[Degradation::kNoise];
  for (double snr : {0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0}) noise.push_back({NoiseParams{snr, NoiseKind::kWhite}});
  g.conditions[Degradation::kReference] = {{ReferenceParams{}}};
  return g;
}

ConditionGrid ConditionGrid::reference_only() {
  ConditionGrid g;
  g.conditions[Degradation::kReference] = {{ReferenceParams{}}};
  return g;
}

std::uint64_t clip_seed(std::uint64_t seed, const std::string& clip_path) {
  return mix64(seed ^ fnv1a64(clip_path));
}

namespace {

struct Job {
  std::size_t clean_index;
  const DegradationCondition* condition;
  std::string rel_path;
};

std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

}  // namespace

corpus::Manifest synthesize_corpus(const corpus::Manifest& clean_manifest,
                                   const std::filesystem::path& clean_manifest_path,
                                   const ConditionGrid& grid,
                                   const std::filesystem::path& output_dir,
                                   const SynthesisOptions& options) {
  if (clean_manifest.entries.empty()) throw Error(errc::kInvalidArgument, "clean manifest is empty");
  for (const auto& spk : clean_manifest.speakers())
    if (options.excluded_speakers.count(spk))
      throw Error(errc::kLeakage, "clean speaker '" + spk + "' is reserved for the MOS-annotated set");

  std::vector<Degradation> classes = options.classes;
  if (classes.empty())
    for (const auto& [cls, conds] : grid.conditions) classes.push_back(cls);
  if (classes.empty()) throw Error(errc::kInvalidArgument, "condition grid is empty");
  for (Degradation cls : classes) {
    auto it = grid.conditions.find(cls);
    if (it == grid.conditions.end() || it->second.empty())
      throw Error(errc::kInvalidArgument, "condition grid has no conditions for " + std::string(corpus::to_string(cls)));
    for (const auto& c : it->second) {
      c.validate();
      if (c.degradation() != cls)
        throw Error(errc::kInvalidArgument, "condition " + c.id() + " listed under " + std::string(corpus::to_string(cls)));
    }
  }

  const std::size_t n_clean = clean_manifest.entries.size();
  const std::size_t per_class = options.per_class == 0 ? n_clean : options.per_class;

  // Conditions cycle fastest; clean clips follow a seeded permutation so every
  // source and every condition is used a balanced number of times.
  std::vector<Job> jobs;
  jobs.reserve(per_class * classes.size());
  for (Degradation cls : classes) {
    const auto& conds = grid.conditions.at(cls);
    Rng rng(derive_seed(options.seed, corpus::to_string(cls)));
    const auto order = permutation(n_clean, rng);
    for (std::size_t i = 0; i < per_class; ++i) {
      const std::size_t src = order[i % n_clean];
      const auto& cond = conds[i % conds.size()];
      std::ostringstream rel;
      rel << corpus::to_string(cls) << '/' << cond.id() << "__" << stem_of(clean_manifest.entries[src].clip_path)
          << "__" << i << ".wav";
      jobs.push_back({src, &cond, rel.str()});
    }
  }

  std::filesystem::create_directories(output_dir);
  std::vector<double> peak_scales(jobs.size(), 1.0);
  std::exception_ptr failure;
  std::mutex failure_mutex;

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(jobs.size()); ++j) {
    try {
      const Job& job = jobs[static_cast<std::size_t>(j)];
      const auto& src_entry = clean_manifest.entries[job.clean_index];
      const auto src_path = corpus::resolve_clip_path(clean_manifest_path, src_entry.clip_path);
      const auto dst_path = output_dir / job.rel_path;
      std::filesystem::create_directories(dst_path.parent_path());
      if (job.condition->degradation() == Degradation::kReference) {
        std::filesystem::copy_file(src_path, dst_path, std::filesystem::copy_options::overwrite_existing);
      } else {
        corpus::AudioClip clean = corpus::read_wav(src_path);
        auto degraded = apply(clean, *job.condition, clip_seed(options.seed, job.rel_path));
        peak_scales[static_cast<std::size_t>(j)] = degraded.peak_scale;
        corpus::write_wav(degraded.clip, dst_path);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  corpus::Manifest out;
  std::ostringstream log;
  log << "clip_path,condition_id,source_path,seed,peak_scale\n";
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const Job& job = jobs[j];
    const auto& src_entry = clean_manifest.entries[job.clean_index];
    corpus::ManifestEntry e;
    e.clip_path = job.rel_path;
    e.degradation = job.condition->degradation();
    e.condition_id = job.condition->id();
    e.speaker_id = src_entry.speaker_id;
    if (options.pseudo_mos) e.mos = pseudo_mos(*job.condition);
    out.entries.push_back(std::move(e));
    log << job.rel_path << ',' << job.condition->id() << ',' << src_entry.clip_path << ','
        << clip_seed(options.seed, job.rel_path) << ',' << peak_scales[j] << '\n';
  }
  corpus::write_manifest(out, output_dir / "manifest.csv");
  std::ofstream(output_dir / "synthesis_log.csv") << log.str();
  return out;
}

}  // namespace sqa::synth

#include "sqa/train/recipe.hpp"

#include "sqa/common/error.hpp"

namespace sqa::train {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kSingleTaskBaseline: return "single_task_baseline";
    case Variant::kMultiTaskBaseline: return "multi_task_baseline";
    case Variant::kDegrSingleTask: return "degr_single_task";
    case Variant::kAeMultiTask: return "ae_multi_task";
    case Variant::kAeSingleTask: return "ae_single_task";
    case Variant::kDcecMultiTask: return "dcec_multi_task";
    case Variant::kDcecSingleTask: return "dcec_single_task";
    case Variant::kMtl: return "mtl";
    case Variant::kSemtl: return "semtl";
  }
  return "?";
}

std::string_view to_string(InitFrom i) {
  switch (i) {
    case InitFrom::kRandom: return "random";
    case InitFrom::kDegradationClassifier: return "degr_classifier";
    case InitFrom::kAutoencoder: return "ae";
    case InitFrom::kDcec: return "dcec";
  }
  return "?";
}

std::string_view to_string(AuxLabels a) {
  switch (a) {
    case AuxLabels::kNone: return "none";
    case AuxLabels::kDegradation: return "degradation";
    case AuxLabels::kCluster: return "cluster";
  }
  return "?";
}

std::string variant_names() {
  std::string out;
  for (auto v : kAllVariants) {
    if (!out.empty()) out += ", ";
    out += to_string(v);
  }
  return out;
}

Variant parse_variant(std::string_view name) {
  for (auto v : kAllVariants)
    if (to_string(v) == name) return v;
  throw Error(errc::kInvalidArgument, "unknown variant '" + std::string(name) + "'; valid: " + variant_names());
}

std::string_view stage_tag(InitFrom i) {
  switch (i) {
    case InitFrom::kRandom: return "";
    case InitFrom::kDegradationClassifier: return "degr_classifier";
    case InitFrom::kAutoencoder: return "ae_pretrain";
    case InitFrom::kDcec: return "dcec";
  }
  return "";
}

TrainingRecipe TrainingRecipe::for_variant(Variant v) {
  TrainingRecipe r;
  r.variant = v;
  switch (v) {
    case Variant::kSingleTaskBaseline: break;
    case Variant::kMultiTaskBaseline: r.aux = AuxLabels::kDegradation; break;
    case Variant::kDegrSingleTask: r.init_from = InitFrom::kDegradationClassifier; break;
    case Variant::kAeMultiTask: r.init_from = InitFrom::kAutoencoder; r.aux = AuxLabels::kDegradation; break;
    case Variant::kAeSingleTask: r.init_from = InitFrom::kAutoencoder; break;
    case Variant::kDcecMultiTask: r.init_from = InitFrom::kDcec; r.aux = AuxLabels::kDegradation; break;
    case Variant::kDcecSingleTask: r.init_from = InitFrom::kDcec; break;
    case Variant::kMtl: r.init_from = InitFrom::kDegradationClassifier; r.aux = AuxLabels::kDegradation; break;
    case Variant::kSemtl: r.init_from = InitFrom::kDcec; r.aux = AuxLabels::kCluster; break;
  }
  return r;
}

void TrainingRecipe::validate() const {
  const auto canon = for_variant(variant);
  if (canon.init_from != init_from || canon.aux != aux)
    throw Error(errc::kConfig, std::string(to_string(variant)) + " requires init=" + std::string(to_string(canon.init_from)) +
                                   " aux=" + std::string(to_string(canon.aux)) + ", got init=" +
                                   std::string(to_string(init_from)) + " aux=" + std::string(to_string(aux)));
  if (epochs < 1 || batch_size < 1 || !(learning_rate > 0.0))
    throw Error(errc::kConfig, "recipe needs positive epochs, batch size and learning rate");
}

}  // namespace sqa::train

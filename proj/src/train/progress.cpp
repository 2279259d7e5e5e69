#include "sqa/train/progress.hpp"

#include <cstdio>

#include "sqa/common/error.hpp"
#include "sqa/common/hash.hpp"
#include "sqa/nn/checkpoint.hpp"

namespace sqa::train {

int Progress::resume(nn::Model& model, nn::Adam& adam, nlohmann::json& state) const {
  if (params_.state_path.empty() || !std::filesystem::exists(params_.state_path)) return 0;
  nn::Checkpoint ckpt;
  try {
    ckpt = nn::load_checkpoint(params_.state_path);
  } catch (const Error& e) {
    warn("ignoring unreadable progress file " + params_.state_path.string() + ": " + e.what());
    return 0;
  }
  if (ckpt.stage != stage_ + ".progress" || ckpt.seed != params_.seed || ckpt.config_hash != params_.config_hash ||
      ckpt.spec.hash() != model.spec().hash()) {
    warn("progress file " + params_.state_path.string() + " belongs to another run; starting fresh");
    return 0;
  }
  nn::restore(model, ckpt);
  adam.load_state(ckpt);
  state = ckpt.meta.value("state", nlohmann::json::object());
  const int done = ckpt.meta.at("epochs_done").get<int>();
  emit(params_.log, "stage=" + stage_ + " event=resume epochs_done=" + std::to_string(done));
  return done;
}

void Progress::save(nn::Model& model, const nn::Adam& adam, const nlohmann::json& state, int epochs_done) const {
  if (params_.state_path.empty()) return;
  auto ckpt = nn::capture(model, stage_ + ".progress", params_.seed, params_.config_hash);
  adam.save_state(ckpt);
  ckpt.meta["epochs_done"] = epochs_done;
  ckpt.meta["state"] = state;
  nn::save_checkpoint(ckpt, params_.state_path);
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace sqa::train

#pragma once

#include <map>
#include <string>
#include <vector>

#include "sqa/nn/checkpoint.hpp"
#include "sqa/nn/layers.hpp"

namespace sqa::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// One bias-corrected update of every parameter from its gradient.
  void step(const std::vector<ParamRef>& params);

  long steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

  void save_state(Checkpoint& ckpt) const;
  void load_state(const Checkpoint& ckpt);

 private:
  struct Moments {
    std::vector<float> m, v;
  };
  AdamConfig cfg_;
  long step_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace sqa::nn

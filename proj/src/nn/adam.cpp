#include "sqa/nn/adam.hpp"

#include <cmath>

#include "sqa/common/error.hpp"

namespace sqa::nn {

void Adam::step(const std::vector<ParamRef>& params) {
  ++step_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  const float b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
  const double lr = cfg_.learning_rate, eps = cfg_.epsilon;
  for (const auto& p : params) {
    if (!p.grad) continue;
    auto& mom = state_[p.name];
    if (mom.m.size() != p.value->size()) {
      mom.m.assign(p.value->size(), 0.0f);
      mom.v.assign(p.value->size(), 0.0f);
    }
    float* w = p.value->data();
    const float* g = p.grad->data();
    const auto n = static_cast<std::ptrdiff_t>(p.value->size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      mom.m[i] = b1 * mom.m[i] + (1.0f - b1) * g[i];
      mom.v[i] = b2 * mom.v[i] + (1.0f - b2) * g[i] * g[i];
      const double mhat = mom.m[i] / c1;
      const double vhat = mom.v[i] / c2;
      w[i] = static_cast<float>(w[i] - lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

void Adam::save_state(Checkpoint& ckpt) const {
  ckpt.optimizer.clear();
  ckpt.meta["adam"] = {{"step", step_},
                       {"learning_rate", cfg_.learning_rate},
                       {"beta1", cfg_.beta1},
                       {"beta2", cfg_.beta2},
                       {"epsilon", cfg_.epsilon}};
  for (const auto& [name, mom] : state_) {
    ckpt.optimizer.push_back({"m:" + name, {static_cast<int>(mom.m.size())}, mom.m});
    ckpt.optimizer.push_back({"v:" + name, {static_cast<int>(mom.v.size())}, mom.v});
  }
}

void Adam::load_state(const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("adam")) throw Error(errc::kFormat, "checkpoint carries no optimizer state");
  step_ = ckpt.meta["adam"]["step"].get<long>();
  state_.clear();
  for (const auto& a : ckpt.optimizer) {
    const bool is_m = a.name.rfind("m:", 0) == 0;
    if (!is_m && a.name.rfind("v:", 0) != 0) continue;
    auto& mom = state_[a.name.substr(2)];
    (is_m ? mom.m : mom.v) = a.data;
  }
}

}  // namespace sqa::nn

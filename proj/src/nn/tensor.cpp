#include "sqa/nn/tensor.hpp"

#include <algorithm>

#include "sqa/common/error.hpp"

namespace sqa::nn {

std::size_t element_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw Error(errc::kShape, "negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape, float fill) : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor& Tensor::reshape(std::vector<int> shape) {
  if (element_count(shape) != data_.size())
    throw Error(errc::kShape, "cannot reshape " + shape_string() + " to a different element count");
  shape_ = std::move(shape);
  return *this;
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::shape_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) s += (i ? ", " : "") + std::to_string(shape_[i]);
  return s + ")";
}

}  // namespace sqa::nn

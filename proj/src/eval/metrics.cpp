#include "sqa/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sqa/common/error.hpp"

namespace sqa::eval {
namespace {

void check_pair(std::span<const double> a, std::span<const double> b, std::size_t min_len, const char* what) {
  if (a.size() != b.size())
    throw Error(errc::kInvalidArgument, std::string(what) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                                            std::to_string(b.size()) + ")");
  if (a.size() < min_len)
    throw Error(errc::kInvalidArgument, std::string(what) + ": needs at least " + std::to_string(min_len) + " values");
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> mos) {
  check_pair(pred, mos, 1, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - mos[i]) * (pred[i] - mos[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

double pcc(std::span<const double> pred, std::span<const double> mos) {
  check_pair(pred, mos, 2, "pcc");
  const auto n = static_cast<double>(pred.size());
  const double ma = std::accumulate(pred.begin(), pred.end(), 0.0) / n;
  const double mb = std::accumulate(mos.begin(), mos.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double da = pred[i] - ma, db = mos[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw Error(errc::kUndefined, "correlation undefined for a constant vector");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double srcc(std::span<const double> pred, std::span<const double> mos) {
  check_pair(pred, mos, 2, "srcc");
  return pcc(average_ranks(pred), average_ranks(mos));
}

}  // namespace sqa::eval

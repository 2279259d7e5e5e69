#pragma once

#include <span>
#include <vector>

namespace sqa::eval {

/// sqrt(mean((pred - mos)^2)). Throws on empty or mismatched input.
double rmse(std::span<const double> pred, std::span<const double> mos);

/// Sample Pearson correlation. Throws sqa::Error(kUndefined) when either
/// vector is constant, rather than returning a sentinel.
double pcc(std::span<const double> pred, std::span<const double> mos);

/// 1-based ranks; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> v);

/// Pearson correlation of average ranks.
double srcc(std::span<const double> pred, std::span<const double> mos);

}  // namespace sqa::eval

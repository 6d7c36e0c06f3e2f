#pragma once

#include <optional>
#include <span>
#include <vector>

namespace cotd {

/// Fractional ranks (1-based, ties share the mean rank).
std::vector<double> fractional_ranks(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

/// Spearman rank correlation. Empty when fewer than two points or when
/// either input is constant (the statistic is undefined there).
std::optional<double> spearman(std::span<const double> x,
                               std::span<const double> y);

double mean(std::span<const double> values);
double median(std::vector<double> values);

}  // namespace cotd

#pragma once

// Closed-form error bounds and gains for tree-structured (chain of thought)
// prediction, plus exhaustive searches over degree profiles.
//
// All error/gain quantities are expressed through a single prefactor that
// stands for c * D^(-1/d). The bounds are stated up to proportionality; the
// prefactor is the proportionality constant throughout.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cotd::theory {

struct ErrorModelParams {
  double d = 0.0;          ///< intrinsic dimension, > 0
  double prefactor = 0.0;  ///< c * D^(-1/d), > 0

  ErrorModelParams() = default;
  ErrorModelParams(double dim, double pref);

  /// Builds the combined prefactor c * D^(-1/d) from its parts.
  static ErrorModelParams from_constants(double c, double sample_count, double dim);
};

/// Per-level degrees m_1..m_n. Degrees are >= 1; integers for task trees,
/// positive reals in grid mode.
struct DegreeProfile {
  std::vector<double> degrees;

  DegreeProfile() = default;
  explicit DegreeProfile(std::vector<double> ds);
  static DegreeProfile constant(double m, std::size_t n);

  std::size_t depth() const { return degrees.size(); }
  /// Product of the degrees (the task size N).
  double task_size() const;
  bool operator==(const DegreeProfile&) const = default;
};

/// Throws std::domain_error unless every degree is >= 1 and the profile is
/// non-empty.
void validate(const DegreeProfile& profile);

// -- scalar bounds ---------------------------------------------------------

/// prefactor * N^(2/d)
double direct_error(double task_size, const ErrorModelParams& params);

/// prefactor * sum_k m_k^(2/d)
double reason_error(const DegreeProfile& profile, const ErrorModelParams& params);

/// prefactor * (prod_k m_k^(2/d) - sum_k m_k^(2/d)). Positive when the
/// decomposition beats direct prediction.
double reasoning_gain(const DegreeProfile& profile, const ErrorModelParams& params);

/// e^(d/2)
double optimal_degree(double d);

/// N^(2/d) - e ln N / (d/2), in prefactor units.
double optimal_gain(double task_size, double d);

/// Gain of the constant-degree tree with real depth n = ln N / ln m at fixed
/// task size: prefactor * (N^(2/d) - (ln N / ln m) m^(2/d)). Requires m > 1.
double constant_degree_gain(double task_size, double m, const ErrorModelParams& params);

/// m^(1/r)
double effective_degree(double m, double r);

/// prefactor * (r n) * m^(2/(r d))
double think_error(double m, double n, double r, const ErrorModelParams& params);

/// reason_error([m] x n) - think_error(m, n, r)
double thinking_gain(double m, double n, double r, const ErrorModelParams& params);

/// (2/d) ln N
double optimal_depth(double task_size, double d);

/// Depth factor r > 1 at which thinking gain crosses zero for degree m, i.e.
/// the root of r ln r / (r - 1) = (2/d) ln m. Empty when m <= e^(d/2): no
/// depth factor above 1 helps there.
std::optional<double> thinking_break_even(double m, double d);

/// Depth n > 1 at which the constant-degree reasoning gain crosses zero.
/// For m >= e^(d/2) the gain is positive for every n > 1 and 1 is returned;
/// for m <= 1 it is never positive and the result is empty.
std::optional<double> reasoning_break_even(double m, double d);

// -- grids -----------------------------------------------------------------

enum class GainKind { reasoning, thinking };

struct GainGrid {
  GainKind kind = GainKind::reasoning;
  std::vector<double> m_axis;
  std::vector<double> second_axis;  ///< depth n (reasoning) or factor r (thinking)
  std::vector<double> values;       ///< row-major, values[i * second_axis.size() + j]

  double at(std::size_t i_m, std::size_t j) const {
    return values[i_m * second_axis.size() + j];
  }
  std::string second_axis_name() const { return kind == GainKind::reasoning ? "n" : "r"; }
};

/// A point (m, value) on a curve drawn over a gain grid.
struct CurvePoint {
  double m;
  double value;
};

/// Inclusive arithmetic range lo, lo+step, ..., up to hi (with a small
/// tolerance so hi is kept when it is a whole number of steps away).
std::vector<double> linear_range(double lo, double hi, double step);

/// Reasoning gain of the constant-degree profile [m] x n for every (m, n).
/// Real-valued m and n are allowed.
GainGrid reasoning_gain_grid(std::span<const double> m_range,
                             std::span<const double> n_range,
                             const ErrorModelParams& params);

/// Thinking gain for every (m, r) at base depth n.
GainGrid thinking_gain_grid(std::span<const double> m_range,
                            std::span<const double> r_range, double n,
                            const ErrorModelParams& params);

/// Zero-gain boundary of a grid: n(m) for reasoning, r(m) for thinking.
/// Thinking points are omitted where no crossing exists.
std::vector<CurvePoint> zero_gain_boundary(const GainGrid& grid, double d);

/// Optimal curve. Thinking: r = (2/d) ln m wherever that is >= 1.
/// Reasoning: the vertical line m = e^(d/2), one point per n on the axis.
std::vector<CurvePoint> optimal_curve(const GainGrid& grid, double d);

/// Grid point maximizing constant_degree_gain at fixed task size over
/// m in [m_lo, m_hi] with the given step.
double argmax_constant_degree(double task_size, const ErrorModelParams& params,
                              double m_lo, double m_hi, double step);

// -- integer profiles ------------------------------------------------------

enum class ProfileSearch { factorizations, constant_degree };

struct IntegerProfile {
  std::vector<std::uint64_t> degrees;
  double cost = 0.0;  ///< sum_k m_k^(2/d) (multiply by the prefactor for an error)
};

/// Number of ordered factorizations of N into integers >= 2 (1 for N = 1).
std::uint64_t ordered_factorization_count(std::uint64_t n);

/// Calls visit(degrees) for every ordered factorization of N into integers
/// >= 2. Throws std::length_error if there are more than max_count.
void for_each_ordered_factorization(
    std::uint64_t n, std::uint64_t max_count,
    const std::function<void(std::span<const std::uint64_t>)>& visit);

/// Sum of m^(2/d) over the degrees.
double profile_cost(std::span<const std::uint64_t> degrees, double d);

/// Cost-minimizing integer profile for task size N >= 2. Ties (relative
/// tolerance 1e-12) go to the shorter profile, then the lexicographically
/// smallest one. Factorization mode throws std::length_error when N has
/// more than max_factorizations ordered factorizations.
IntegerProfile best_profile(std::uint64_t task_size, double d, ProfileSearch mode,
                            std::uint64_t max_factorizations = 10'000'000);

}  // namespace cotd::theory

#include "cotd/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cotd::theory {
namespace {

constexpr double kLogSpaceThreshold = 600.0;

void require(bool ok, const char* what) {
  if (!ok) throw std::domain_error(what);
}

void require_params(const ErrorModelParams& p) {
  require(p.d > 0.0 && std::isfinite(p.d), "intrinsic dimension d must be positive");
  require(p.prefactor > 0.0 && std::isfinite(p.prefactor), "prefactor must be positive");
}

// scale * base^exponent, switching to log space when base^exponent would
// overflow on its own.
double scaled_power(double scale, double base, double exponent) {
  const double log_term = exponent * std::log(base);
  if (log_term > kLogSpaceThreshold) return std::exp(std::log(scale) + log_term);
  return scale * std::pow(base, exponent);
}

// Root of a continuous increasing function on [lo, +inf) with f(lo) < 0.
template <typename F>
double increasing_root(F f, double lo) {
  double hi = std::max(2.0 * lo, lo + 1.0);
  while (f(hi) <= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw std::overflow_error("root bracket overflow");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) <= 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

ErrorModelParams::ErrorModelParams(double dim, double pref) : d(dim), prefactor(pref) {
  require_params(*this);
}

ErrorModelParams ErrorModelParams::from_constants(double c, double sample_count, double dim) {
  require(c > 0.0, "constant c must be positive");
  require(sample_count > 0.0, "sample count D must be positive");
  require(dim > 0.0, "intrinsic dimension d must be positive");
  return ErrorModelParams(dim, c * std::pow(sample_count, -1.0 / dim));
}

DegreeProfile::DegreeProfile(std::vector<double> ds) : degrees(std::move(ds)) {
  validate(*this);
}

DegreeProfile DegreeProfile::constant(double m, std::size_t n) {
  return DegreeProfile(std::vector<double>(n, m));
}

double DegreeProfile::task_size() const {
  double p = 1.0;
  for (double m : degrees) p *= m;
  return p;
}

void validate(const DegreeProfile& profile) {
  require(!profile.degrees.empty(), "degree profile must have at least one level");
  for (double m : profile.degrees) {
    require(std::isfinite(m) && m >= 1.0, "every degree must be >= 1");
  }
}

double direct_error(double task_size, const ErrorModelParams& params) {
  require_params(params);
  require(task_size >= 1.0, "task size N must be >= 1");
  return scaled_power(params.prefactor, task_size, 2.0 / params.d);
}

double reason_error(const DegreeProfile& profile, const ErrorModelParams& params) {
  require_params(params);
  validate(profile);
  const double e = 2.0 / params.d;
  double sum = 0.0;
  for (double m : profile.degrees) sum += std::pow(m, e);
  return params.prefactor * sum;
}

double reasoning_gain(const DegreeProfile& profile, const ErrorModelParams& params) {
  require_params(params);
  validate(profile);
  const double e = 2.0 / params.d;
  double sum = 0.0;
  double product = 1.0;
  double log_product = 0.0;
  for (double m : profile.degrees) {
    const double t = std::pow(m, e);
    sum += t;
    product *= t;
    log_product += e * std::log(m);
  }
  if (!std::isfinite(product) || log_product > kLogSpaceThreshold) {
    return std::exp(log_product + std::log(params.prefactor)) - params.prefactor * sum;
  }
  return params.prefactor * (product - sum);
}

double optimal_degree(double d) {
  require(d > 0.0, "intrinsic dimension d must be positive");
  return std::exp(d / 2.0);
}

double optimal_gain(double task_size, double d) {
  require(d > 0.0, "intrinsic dimension d must be positive");
  require(task_size >= 1.0, "task size N must be >= 1");
  return std::pow(task_size, 2.0 / d) - std::numbers::e * std::log(task_size) / (d / 2.0);
}

double constant_degree_gain(double task_size, double m, const ErrorModelParams& params) {
  require_params(params);
  require(task_size >= 1.0, "task size N must be >= 1");
  require(m > 1.0, "degree m must be > 1 for a finite depth");
  const double e = 2.0 / params.d;
  const double depth = std::log(task_size) / std::log(m);
  return params.prefactor * (std::pow(task_size, e) - depth * std::pow(m, e));
}

double effective_degree(double m, double r) {
  require(m >= 1.0, "degree m must be >= 1");
  require(r >= 1.0, "depth factor r must be >= 1");
  return std::pow(m, 1.0 / r);
}

double think_error(double m, double n, double r, const ErrorModelParams& params) {
  require_params(params);
  require(m >= 1.0, "degree m must be >= 1");
  require(n >= 1.0, "depth n must be >= 1");
  require(r >= 1.0, "depth factor r must be >= 1");
  return params.prefactor * (r * n) * std::pow(m, 2.0 / (r * params.d));
}

double thinking_gain(double m, double n, double r, const ErrorModelParams& params) {
  // Written out so that r = 1 cancels exactly: r * n == n and
  // 2 / (r * d) == 2 / d bit for bit.
  const double reason = params.prefactor * n * std::pow(m, 2.0 / params.d);
  return reason - think_error(m, n, r, params);
}

double optimal_depth(double task_size, double d) {
  require(d > 0.0, "intrinsic dimension d must be positive");
  require(task_size >= 1.0, "task size N must be >= 1");
  return (2.0 / d) * std::log(task_size);
}

std::optional<double> thinking_break_even(double m, double d) {
  require(d > 0.0, "intrinsic dimension d must be positive");
  require(m >= 1.0, "degree m must be >= 1");
  const double level = (2.0 / d) * std::log(m);
  if (level <= 1.0) return std::nullopt;
  // r ln r / (r - 1) increases from 1 (at r -> 1) without bound.
  const auto f = [level](double r) {
    if (r <= 1.0) return 1.0 - level;
    return r * std::log(r) / (r - 1.0) - level;
  };
  return increasing_root(f, 1.0);
}

std::optional<double> reasoning_break_even(double m, double d) {
  require(d > 0.0, "intrinsic dimension d must be positive");
  const double a = (2.0 / d) * std::log(m);
  if (a <= 0.0) return std::nullopt;
  if (a >= 1.0) return 1.0;
  // Gain sign equals sign of h(n) = a n - ln n - a; h(1) = 0, h falls to its
  // minimum at n0 = 1/a and then increases.
  const auto h = [a](double n) { return a * n - std::log(n) - a; };
  return increasing_root(h, 1.0 / a);
}

std::vector<double> linear_range(double lo, double hi, double step) {
  require(std::isfinite(lo) && std::isfinite(hi), "range bounds must be finite");
  require(step > 0.0, "range step must be positive");
  require(hi >= lo, "range upper bound must be >= lower bound");
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = lo + static_cast<double>(i) * step;
  return out;
}

namespace {

void require_axis(std::span<const double> axis, const char* name) {
  if (axis.empty()) throw std::domain_error(std::string(name) + " range is empty");
  for (std::size_t i = 1; i < axis.size(); ++i) {
    if (!(axis[i] > axis[i - 1])) {
      throw std::domain_error(std::string(name) + " range must be strictly increasing");
    }
  }
}

}  // namespace

GainGrid reasoning_gain_grid(std::span<const double> m_range, std::span<const double> n_range,
                             const ErrorModelParams& params) {
  require_params(params);
  require_axis(m_range, "m");
  require_axis(n_range, "n");
  require(m_range.front() >= 1.0, "degrees must be >= 1");
  require(n_range.front() >= 1.0, "depths must be >= 1");
  GainGrid grid;
  grid.kind = GainKind::reasoning;
  grid.m_axis.assign(m_range.begin(), m_range.end());
  grid.second_axis.assign(n_range.begin(), n_range.end());
  grid.values.reserve(m_range.size() * n_range.size());
  const double e = 2.0 / params.d;
  for (double m : m_range) {
    const double term = std::pow(m, e);
    for (double n : n_range) {
      const double product = scaled_power(1.0, term, n);
      grid.values.push_back(params.prefactor * (product - n * term));
    }
  }
  return grid;
}

GainGrid thinking_gain_grid(std::span<const double> m_range, std::span<const double> r_range,
                            double n, const ErrorModelParams& params) {
  require_params(params);
  require_axis(m_range, "m");
  require_axis(r_range, "r");
  require(n >= 1.0, "depth n must be >= 1");
  GainGrid grid;
  grid.kind = GainKind::thinking;
  grid.m_axis.assign(m_range.begin(), m_range.end());
  grid.second_axis.assign(r_range.begin(), r_range.end());
  grid.values.reserve(m_range.size() * r_range.size());
  for (double m : m_range) {
    for (double r : r_range) grid.values.push_back(thinking_gain(m, n, r, params));
  }
  return grid;
}

std::vector<CurvePoint> zero_gain_boundary(const GainGrid& grid, double d) {
  std::vector<CurvePoint> out;
  for (double m : grid.m_axis) {
    const auto v = grid.kind == GainKind::reasoning ? reasoning_break_even(m, d)
                                                    : thinking_break_even(m, d);
    if (v) out.push_back({m, *v});
  }
  return out;
}

std::vector<CurvePoint> optimal_curve(const GainGrid& grid, double d) {
  std::vector<CurvePoint> out;
  if (grid.kind == GainKind::reasoning) {
    const double m_star = optimal_degree(d);
    for (double n : grid.second_axis) out.push_back({m_star, n});
    return out;
  }
  for (double m : grid.m_axis) {
    const double r = (2.0 / d) * std::log(m);
    if (r >= 1.0) out.push_back({m, r});
  }
  return out;
}

double argmax_constant_degree(double task_size, const ErrorModelParams& params, double m_lo,
                              double m_hi, double step) {
  require(m_lo > 1.0, "scan must start above m = 1");
  const auto ms = linear_range(m_lo, m_hi, step);
  double best_m = ms.front();
  double best = -std::numeric_limits<double>::infinity();
  for (double m : ms) {
    const double g = constant_degree_gain(task_size, m, params);
    if (g > best) {
      best = g;
      best_m = m;
    }
  }
  return best_m;
}

// -- integer profiles ------------------------------------------------------

namespace {

std::vector<std::uint64_t> divisors_from_two(std::uint64_t n) {
  std::vector<std::uint64_t> small, large;
  for (std::uint64_t k = 1; k * k <= n; ++k) {
    if (n % k != 0) continue;
    if (k >= 2) small.push_back(k);
    if (k * k != n && n / k >= 2) large.push_back(n / k);
  }
  small.insert(small.end(), large.rbegin(), large.rend());
  return small;
}

std::uint64_t count_memo(std::uint64_t n, std::map<std::uint64_t, std::uint64_t>& memo,
                         std::uint64_t cap) {
  if (n == 1) return 1;
  if (auto it = memo.find(n); it != memo.end()) return it->second;
  std::uint64_t total = 0;
  for (std::uint64_t dv : divisors_from_two(n)) {
    total += count_memo(n / dv, memo, cap);
    if (total > cap) {
      total = cap + 1;  // saturate
      break;
    }
  }
  memo[n] = total;
  return total;
}

void enumerate(std::uint64_t rem, std::vector<std::uint64_t>& prefix,
               const std::function<void(std::span<const std::uint64_t>)>& visit) {
  if (rem == 1) {
    visit(prefix);
    return;
  }
  for (std::uint64_t dv : divisors_from_two(rem)) {
    prefix.push_back(dv);
    enumerate(rem / dv, prefix, visit);
    prefix.pop_back();
  }
}

// True when candidate should replace incumbent.
bool better(const IntegerProfile& cand, const IntegerProfile& inc) {
  const double tol = 1e-12 * std::max(std::abs(cand.cost), std::abs(inc.cost));
  if (cand.cost < inc.cost - tol) return true;
  if (cand.cost > inc.cost + tol) return false;
  if (cand.degrees.size() != inc.degrees.size()) {
    return cand.degrees.size() < inc.degrees.size();
  }
  return cand.degrees < inc.degrees;
}

}  // namespace

std::uint64_t ordered_factorization_count(std::uint64_t n) {
  if (n == 0) throw std::domain_error("task size must be >= 1");
  std::map<std::uint64_t, std::uint64_t> memo;
  return count_memo(n, memo, std::numeric_limits<std::uint64_t>::max() / 2);
}

void for_each_ordered_factorization(
    std::uint64_t n, std::uint64_t max_count,
    const std::function<void(std::span<const std::uint64_t>)>& visit) {
  if (n == 0) throw std::domain_error("task size must be >= 1");
  std::map<std::uint64_t, std::uint64_t> memo;
  if (count_memo(n, memo, max_count) > max_count) {
    throw std::length_error("task size " + std::to_string(n) +
                            " has more ordered factorizations than the configured bound " +
                            std::to_string(max_count));
  }
  std::vector<std::uint64_t> prefix;
  enumerate(n, prefix, visit);
}

double profile_cost(std::span<const std::uint64_t> degrees, double d) {
  const double e = 2.0 / d;
  double s = 0.0;
  for (auto m : degrees) s += std::pow(static_cast<double>(m), e);
  return s;
}

IntegerProfile best_profile(std::uint64_t task_size, double d, ProfileSearch mode,
                            std::uint64_t max_factorizations) {
  require(task_size >= 2, "task size N must be >= 2");
  require(d > 0.0, "intrinsic dimension d must be positive");
  IntegerProfile best;
  bool have = false;
  const auto offer = [&](std::span<const std::uint64_t> degrees) {
    IntegerProfile cand{{degrees.begin(), degrees.end()}, profile_cost(degrees, d)};
    if (!have || better(cand, best)) {
      best = std::move(cand);
      have = true;
    }
  };

  if (mode == ProfileSearch::factorizations) {
    for_each_ordered_factorization(task_size, max_factorizations, offer);
    return best;
  }

  for (std::size_t n = 1; n < 64; ++n) {
    const double root = std::pow(static_cast<double>(task_size), 1.0 / static_cast<double>(n));
    if (root < 1.5) break;
    const auto guess = static_cast<std::uint64_t>(std::llround(root));
    for (std::uint64_t m = guess > 2 ? guess - 1 : 2; m <= guess + 1; ++m) {
      std::uint64_t p = 1;
      bool overflow = false;
      for (std::size_t k = 0; k < n && !overflow; ++k) {
        if (p > task_size / m) overflow = true;
        else p *= m;
      }
      if (!overflow && p == task_size) offer(std::vector<std::uint64_t>(n, m));
    }
  }
  return best;
}

}  // namespace cotd::theory

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "cotd/learner.hpp"

namespace cotd::learner {
namespace {

void check_points(std::span<const Point2> points) {
  if (points.size() < 3) throw std::invalid_argument("power-law fit needs at least 3 points");
  for (const auto& p : points) {
    if (!(p.x > 0.0) || !std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw std::invalid_argument("power-law fit needs finite points with x > 0");
    }
  }
  const double x0 = points.front().x;
  if (std::all_of(points.begin(), points.end(), [&](const Point2& p) { return p.x == x0; })) {
    throw std::invalid_argument("power-law fit needs at least two distinct x values");
  }
}

PowerLawFit solve(std::span<const Point2> points, double exponent) {
  const double n = static_cast<double>(points.size());
  std::vector<double> u(points.size());
  double mu = 0.0, my = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    u[i] = std::pow(points[i].x, exponent);
    mu += u[i];
    my += points[i].y;
  }
  mu /= n;
  my /= n;
  double suu = 0.0, suy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double du = u[i] - mu, dy = points[i].y - my;
    suu += du * du;
    suy += du * dy;
    syy += dy * dy;
  }
  if (!(suu > 0.0) || !std::isfinite(suu)) {
    throw std::invalid_argument("power-law fit is degenerate: x^p takes a single value");
  }
  PowerLawFit fit;
  fit.exponent = exponent;
  fit.a = suy / suu;
  fit.b = my - fit.a * mu;
  double sse = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double e = points[i].y - (fit.a * u[i] + fit.b);
    sse += e * e;
  }
  fit.residual = sse;
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  fit.d_estimate = 2.0 / exponent;
  return fit;
}

}  // namespace

PowerLawFit fit_power_law_fixed(std::span<const Point2> points, double exponent) {
  check_points(points);
  if (!(exponent > 0.0) || !std::isfinite(exponent)) {
    throw std::invalid_argument("power-law exponent must be positive");
  }
  return solve(points, exponent);
}

PowerLawFit fit_power_law_free(std::span<const Point2> points, const FreeExponentOptions& opts) {
  check_points(points);
  if (!(opts.p_lo > 0.0) || !(opts.p_hi > opts.p_lo) || !(opts.tolerance > 0.0)) {
    throw std::invalid_argument("bad exponent search range");
  }
  const auto sse = [&](double p) {
    try {
      return solve(points, p).residual;
    } catch (const std::invalid_argument&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  constexpr int kScan = 300;
  const double step = (opts.p_hi - opts.p_lo) / (kScan - 1);
  int best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kScan; ++i) {
    const double v = sse(opts.p_lo + step * i);
    if (v < best_sse) {
      best_sse = v;
      best = i;
    }
  }
  if (!std::isfinite(best_sse)) throw std::invalid_argument("power-law fit is degenerate");

  double lo = opts.p_lo + step * std::max(best - 1, 0);
  double hi = opts.p_lo + step * std::min(best + 1, kScan - 1);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = sse(x1), f2 = sse(x2);
  while (hi - lo > opts.tolerance) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = sse(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = sse(x2);
    }
  }
  double p = 0.5 * (lo + hi);
  // Keep the scan point if refinement did not beat it.
  const double scan_p = opts.p_lo + step * best;
  if (sse(p) > best_sse) p = scan_p;
  return solve(points, p);
}

void write_fit_csv(std::ostream& out, std::span<const PowerLawFit> fits) {
  out << "a,b,exponent,d_estimate,residual,r2\n";
  for (const auto& f : fits) {
    out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", f.a, f.b, f.exponent,
                       f.d_estimate, f.residual, f.r2);
  }
}

}  // namespace cotd::learner

#pragma once

// Student-teacher classification on the unit sphere: a Voronoi teacher, an
// interpolating memorizer student, error sweeps and power-law fits of the
// error against the class count.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cotd/random.hpp"

namespace cotd::learner {

/// Row-major set of points in R^dim.
struct PointSet {
  std::size_t dim = 0;
  std::vector<double> coords;

  std::size_t size() const { return dim == 0 ? 0 : coords.size() / dim; }
  std::span<const double> operator[](std::size_t i) const {
    return {coords.data() + i * dim, dim};
  }
};

/// m prototypes uniform on the sphere; class of x = argmax dot product.
/// Class ids are 0-based.
struct VoronoiTask {
  std::size_t d = 0;
  std::size_t m = 0;
  PointSet prototypes;
};

VoronoiTask make_task(std::size_t d, std::size_t m, std::uint64_t seed);

/// argmax_i x . prototype_i, lowest index on ties.
std::size_t label(const VoronoiTask& task, std::span<const double> x);

enum class Decode { sample, greedy };
std::string_view to_string(Decode decode);
Decode parse_decode(std::string_view text);

/// Interpolating predictor. Without a bandwidth it is 1-nearest-neighbor.
/// With bandwidth h, p(y|x) is proportional to the sum over training points
/// of class y of exp(-|x - x_i|^2 / h^2).
struct Memorizer {
  PointSet train_x;
  std::vector<std::size_t> train_y;
  std::size_t classes = 0;
  std::optional<double> bandwidth;
};

/// Median pairwise Euclidean distance of the training inputs.
double median_pairwise_distance(const PointSet& points);

/// Class distribution p(.|x) of the kernel memorizer (one-hot for 1-NN).
std::vector<double> class_probabilities(const Memorizer& model, std::span<const double> x);

std::size_t predict(const Memorizer& model, std::span<const double> x, Decode decode,
                    Rng& rng);
std::size_t predict(const Memorizer& model, std::span<const double> x, Decode decode,
                    std::uint64_t seed);

struct ErrorOptions {
  bool balanced = true;
  /// Kernel mode; unset is 1-NN.
  bool kernel = false;
  /// Explicit kernel width; unset uses the median pairwise distance.
  std::optional<double> bandwidth;
  /// Candidate draws per training sample allowed when balancing.
  std::size_t balance_budget = 8;
};

struct ErrorResult {
  double error = 0.0;
  /// Classes that stayed below their D/m quota after the balancing budget.
  std::size_t underfilled_classes = 0;
};

/// Draws D labeled training points and test_count uniform test points and
/// returns the fraction of test points the memorizer gets wrong.
ErrorResult measure_error(std::size_t d, std::size_t m, std::size_t sample_count,
                          std::size_t test_count, Decode decode, std::uint64_t seed,
                          const ErrorOptions& options = {});

/// Builds the training set used by measure_error.
Memorizer build_memorizer(const VoronoiTask& task, std::size_t sample_count, std::uint64_t seed,
                          const ErrorOptions& options, std::size_t* underfilled = nullptr);

struct SweepRow {
  std::size_t d;
  std::size_t m;
  std::size_t sample_count;
  std::size_t replicate;
  std::uint64_t seed;
  Decode decode;
  double error;
};

struct SweepSpec {
  std::vector<std::size_t> d_list;
  std::vector<std::size_t> m_list;
  std::vector<std::size_t> sample_counts;
  std::size_t replicates = 1;
  std::size_t test_count = 2000;
  Decode decode = Decode::greedy;
  std::uint64_t seed = 0;
  ErrorOptions options;
  std::size_t max_cells = 100'000;
};

/// Full factorial sweep; every cell draws from a seed derived from the master
/// seed and the cell coordinates. Rows are ordered d, m, D, replicate.
std::vector<SweepRow> sweep(const SweepSpec& spec);

/// CSV with header d,m,D,replicate,seed,decode,error.
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

// -- power-law fitting -----------------------------------------------------

struct Point2 {
  double x;
  double y;
};

struct PowerLawFit {
  double a = 0.0;
  double b = 0.0;
  double exponent = 0.0;
  double residual = 0.0;  ///< sum of squared errors
  double r2 = 0.0;
  double d_estimate = 0.0;  ///< 2 / exponent
};

/// Least squares for y = a x^p + b with p fixed: exact solve of the 2x2
/// normal equations.
PowerLawFit fit_power_law_fixed(std::span<const Point2> points, double exponent);

struct FreeExponentOptions {
  double p_lo = 0.01;
  double p_hi = 3.0;
  double tolerance = 1e-8;
};

/// Same model with p free: coarse scan then golden-section refinement over
/// [p_lo, p_hi], with the linear solve inside.
PowerLawFit fit_power_law_free(std::span<const Point2> points, const FreeExponentOptions& opts = {});

/// CSV with header a,b,exponent,d_estimate,residual,r2 (one row per fit).
void write_fit_csv(std::ostream& out, std::span<const PowerLawFit> fits);

}  // namespace cotd::learner

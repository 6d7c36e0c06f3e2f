#include "cotd/intrinsic_dim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace cotd::dim {
namespace {

// The k smallest nonzero neighbor distances of every point, ascending.
struct Neighbors {
  std::vector<std::vector<double>> dist;
  std::size_t duplicate_pairs = 0;
};

Neighbors nearest_distances(const EmbeddingMatrix& x, std::size_t k) {
  const std::size_t n = x.samples();
  const std::size_t dim = x.ambient_dim();
  // Row-major copy so each point is contiguous.
  std::vector<double> pts(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dim; ++c) {
      pts[i * dim + c] = x.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    }
  }
  Neighbors out;
  out.dist.resize(n);
  std::vector<double> heap;
  for (std::size_t i = 0; i < n; ++i) {
    heap.clear();
    const double* a = &pts[i * dim];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double* b = &pts[j * dim];
      double s = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double t = a[c] - b[c];
        s += t * t;
      }
      if (s == 0.0) {
        ++out.duplicate_pairs;
        continue;
      }
      if (heap.size() < k) {
        heap.push_back(s);
        std::push_heap(heap.begin(), heap.end());
      } else if (s < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = s;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    std::sort_heap(heap.begin(), heap.end());
    for (double& v : heap) v = std::sqrt(v);
    out.dist[i] = heap;
  }
  out.duplicate_pairs /= 2;
  return out;
}

}  // namespace

void validate(const EmbeddingMatrix& x) {
  if (x.data.rows() < 2) throw std::invalid_argument("embedding matrix needs at least 2 samples");
  if (x.data.cols() < 1) throw std::invalid_argument("embedding matrix has no columns");
  if (!x.data.allFinite()) throw std::invalid_argument("embedding matrix has non-finite entries");
}

std::vector<double> covariance_spectrum(const EmbeddingMatrix& x) {
  validate(x);
  const Eigen::MatrixXd centered = x.data.rowwise() - x.data.colwise().mean();
  const Eigen::MatrixXd cov =
      (centered.adjoint() * centered) / static_cast<double>(x.data.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigen decomposition failed");
  std::vector<double> ev(solver.eigenvalues().data(),
                         solver.eigenvalues().data() + solver.eigenvalues().size());
  for (double& v : ev) v = std::max(v, 0.0);
  std::sort(ev.begin(), ev.end(), std::greater<>());
  return ev;
}

std::size_t pca_dim(const EmbeddingMatrix& x, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("PCA threshold must lie in (0, 1]");
  }
  validate(x);
  bool constant = true;
  for (Eigen::Index r = 1; r < x.data.rows() && constant; ++r) {
    constant = x.data.row(r) == x.data.row(0);
  }
  if (constant) return 0;
  const auto ev = covariance_spectrum(x);
  double total = 0.0;
  for (double v : ev) total += v;
  if (!(total > 0.0)) return 0;
  const double target = threshold * total * (1.0 - 1e-10);
  double cum = 0.0;
  for (std::size_t k = 0; k < ev.size(); ++k) {
    cum += ev[k];
    if (cum >= target) return k + 1;
  }
  return ev.size();
}

DimEstimate mle_dim(const EmbeddingMatrix& x, std::size_t k) {
  validate(x);
  if (k < 2) throw std::invalid_argument("MLE neighbor count k must be >= 2");
  if (x.samples() <= k) {
    throw std::invalid_argument(fmt::format("MLE needs more than k = {} samples", k));
  }
  const auto nb = nearest_distances(x, k);
  DimEstimate est;
  est.duplicate_pairs = nb.duplicate_pairs;
  double inv_sum = 0.0;
  for (const auto& t : nb.dist) {
    if (t.size() < k) {
      ++est.excluded_points;
      continue;
    }
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < k; ++j) s += std::log(t[k - 1] / t[j]);
    inv_sum += s / static_cast<double>(k - 1);
    ++est.valid_points;
  }
  if (est.valid_points == 0) throw std::invalid_argument("MLE: no point has k distinct neighbors");
  if (!(inv_sum > 0.0)) throw std::invalid_argument("MLE: all neighbor distances are equal");
  est.dimension = static_cast<double>(est.valid_points) / inv_sum;
  return est;
}

DimEstimate two_nn_dim(const EmbeddingMatrix& x) {
  validate(x);
  if (x.samples() < 3) throw std::invalid_argument("TwoNN needs at least 3 samples");
  const auto nb = nearest_distances(x, 2);
  DimEstimate est;
  est.duplicate_pairs = nb.duplicate_pairs;
  double log_sum = 0.0;
  for (const auto& t : nb.dist) {
    if (t.size() < 2 || !(t[1] > t[0])) {
      ++est.excluded_points;
      continue;
    }
    log_sum += std::log(t[1] / t[0]);
    ++est.valid_points;
  }
  if (est.valid_points < 10) {
    throw std::invalid_argument(
        fmt::format("TwoNN needs at least 10 valid points, found {}", est.valid_points));
  }
  est.dimension = static_cast<double>(est.valid_points) / log_sum;
  return est;
}

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::pca: return "pca";
    case Estimator::mle: return "mle";
    case Estimator::two_nn: return "twonn";
  }
  return "?";
}

Estimator parse_estimator(std::string_view text) {
  if (text == "pca") return Estimator::pca;
  if (text == "mle") return Estimator::mle;
  if (text == "twonn" || text == "two_nn") return Estimator::two_nn;
  throw std::invalid_argument("unknown estimator '" + std::string(text) + "'");
}

double estimate(const EmbeddingMatrix& x, Estimator e, const EstimatorParams& params) {
  switch (e) {
    case Estimator::pca: return static_cast<double>(pca_dim(x, params.threshold));
    case Estimator::mle: return mle_dim(x, params.k).dimension;
    case Estimator::two_nn: return two_nn_dim(x).dimension;
  }
  throw std::invalid_argument("unknown estimator");
}

std::vector<ProfileRow> dim_profile(std::span<const EmbeddingMatrix> matrices, Estimator e,
                                    const EstimatorParams& params) {
  if (matrices.empty()) throw std::invalid_argument("dimension profile needs at least one matrix");
  std::vector<ProfileRow> rows;
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const auto& m = matrices[i];
    rows.push_back({m.position.value_or(std::to_string(i)), e, estimate(m, e, params), m.samples()});
  }
  return rows;
}

void write_profile_csv(std::ostream& out, std::span<const ProfileRow> rows) {
  out << "position,estimator,dimension,n_samples\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{:.17g},{}\n", r.position, to_string(r.estimator), r.dimension,
                       r.samples);
  }
}

}  // namespace cotd::dim

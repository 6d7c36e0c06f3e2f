#pragma once

// Intrinsic-dimension estimators on embedding matrices (rows are samples):
// PCA variance threshold, Levina-Bickel MLE and TwoNN.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cotd::dim {

struct EmbeddingMatrix {
  Eigen::MatrixXd data;
  std::optional<std::string> position;

  std::size_t samples() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t ambient_dim() const { return static_cast<std::size_t>(data.cols()); }
};

/// Throws std::invalid_argument for fewer than two rows or non-finite entries.
void validate(const EmbeddingMatrix& x);

/// Smallest k whose top-k covariance eigenvalues hold at least `threshold`
/// of the total variance (inclusive; relative slack 1e-10). 0 for data with
/// no variance.
std::size_t pca_dim(const EmbeddingMatrix& x, double threshold = 0.8);

/// Explained-variance spectrum, descending, clipped at zero.
std::vector<double> covariance_spectrum(const EmbeddingMatrix& x);

struct DimEstimate {
  double dimension = 0.0;
  std::size_t valid_points = 0;
  /// Points dropped for lack of distinct neighbors or a degenerate ratio.
  std::size_t excluded_points = 0;
  /// Zero-distance neighbor pairs skipped (duplicates).
  std::size_t duplicate_pairs = 0;
};

/// Levina-Bickel with 1/(k-1) normalization; the aggregate is the inverse of
/// the mean per-point inverse estimate.
DimEstimate mle_dim(const EmbeddingMatrix& x, std::size_t k = 10);

/// d = N' / sum ln(r2/r1) over points with r2 > r1 > 0.
DimEstimate two_nn_dim(const EmbeddingMatrix& x);

enum class Estimator { pca, mle, two_nn };
std::string_view to_string(Estimator e);
Estimator parse_estimator(std::string_view text);

struct EstimatorParams {
  double threshold = 0.8;
  std::size_t k = 10;
};

double estimate(const EmbeddingMatrix& x, Estimator e, const EstimatorParams& params = {});

struct ProfileRow {
  std::string position;
  Estimator estimator;
  double dimension;
  std::size_t samples;
};

/// One row per matrix; unnamed positions are numbered from 0.
std::vector<ProfileRow> dim_profile(std::span<const EmbeddingMatrix> matrices, Estimator e,
                                    const EstimatorParams& params = {});

/// CSV position,estimator,dimension,n_samples.
void write_profile_csv(std::ostream& out, std::span<const ProfileRow> rows);

// -- matrix files ------------------------------------------------------------
// CSV: first non-comment line "rows,cols", then one comma-separated row per
// line; '#' lines are skipped. Binary: uint64 rows, uint64 cols (little
// endian), then rows*cols float64 in column-major order.

EmbeddingMatrix read_matrix_csv(std::istream& in);
void write_matrix_csv(std::ostream& out, const EmbeddingMatrix& x);
EmbeddingMatrix read_matrix_binary(std::istream& in);
void write_matrix_binary(std::ostream& out, const EmbeddingMatrix& x);

/// Binary when the extension is .bin, CSV otherwise.
EmbeddingMatrix read_matrix_file(const std::filesystem::path& path);

}  // namespace cotd::dim

#pragma once

// Dense linear-algebra primitives shared by the rest of the toolkit: SVD with
// a deterministic sign convention, row-space bases, orthogonal projectors,
// norms and principal angles. Everything works in double precision.

#include <Eigen/Dense>

#include <cstddef>

namespace sdec {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Singular values at or below this fraction of the largest one count as zero.
inline constexpr double kDefaultRankTolerance = 1e-10;

/// An n x d matrix of token embeddings (one token per row). Always non-empty
/// and finite; construction throws otherwise.
class EmbeddingMatrix {
 public:
  explicit EmbeddingMatrix(MatrixXd values);

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }
  const MatrixXd& values() const { return values_; }

  /// Rows [begin, end) as a new embedding matrix.
  EmbeddingMatrix row_block(Index begin, Index end) const;

 private:
  MatrixXd values_;
};

/// Thin SVD A = U diag(S) V^T with S descending and nonnegative.
/// U is n x r, V is d x r, r = min(n, d).
struct SvdFactors {
  MatrixXd U;
  VectorXd S;
  MatrixXd V;

  Index rank_bound() const { return S.size(); }
};

/// Symmetric idempotent d x d matrix together with its rank.
class Projector {
 public:
  /// P = B B^T for a column-orthonormal B (tolerance 1e-8 on ||B^T B - I||_F).
  static Projector from_basis(const MatrixXd& basis);

  /// Validates an arbitrary matrix as an orthogonal projector. Throws
  /// NotProjector when symmetry, idempotence or integral trace fail.
  static Projector from_matrix(const MatrixXd& p);

  static Projector zero(Index dim);
  static Projector identity(Index dim);

  Index dim() const { return data_.rows(); }
  Index rank() const { return rank_; }
  const MatrixXd& matrix() const { return data_; }

  /// I - P.
  Projector complement() const;

 private:
  Projector(MatrixXd data, Index rank) : data_(std::move(data)), rank_(rank) {}

  MatrixXd data_;
  Index rank_;
};

/// Throws NonFinite if any entry is NaN or infinite.
void require_finite(const MatrixXd& a, const char* what);

SvdFactors svd_decompose(const MatrixXd& a);

MatrixXd reconstruct(const SvdFactors& f);

/// Count of singular values strictly greater than tol * S_max.
Index numerical_rank(const VectorXd& singular_values,
                     double tol = kDefaultRankTolerance);

/// Orthonormal basis (d x r) of the row space of A.
MatrixXd orth(const MatrixXd& a, double rank_tol = kDefaultRankTolerance);

/// Householder QR; returns the thin Q factor of A (same shape as A).
MatrixXd orthonormalize_columns(const MatrixXd& a);

Projector projector_from_basis(const MatrixXd& basis);

double spectral_norm(const MatrixXd& a);

double frobenius_norm(const MatrixXd& a);

/// Distance of B^T B from the identity, in Frobenius norm.
double orthonormality_defect(const MatrixXd& basis);

/// Cosines of the principal angles between span(B1) and span(B2), descending
/// and clamped into [0, 1]. Length min(r1, r2).
VectorXd principal_angle_cosines(const MatrixXd& b1, const MatrixXd& b2);

}  // namespace sdec

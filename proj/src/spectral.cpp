#include "sdec/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sdec/errors.hpp"

namespace sdec {
namespace {

constexpr double kOrthonormalTol = 1e-8;
constexpr double kSymmetryTol = 1e-10;
constexpr double kIdempotenceTol = 1e-9;
constexpr double kTraceTol = 1e-8;
constexpr double kZeroMatrixTol = 1e-14;

void require_orthonormal(const MatrixXd& basis, const char* what) {
  const double defect = orthonormality_defect(basis);
  if (!(defect <= kOrthonormalTol)) {
    throw Error(ErrorCode::kNotOrthonormal,
                std::string(what) + " has ||B^T B - I||_F = " +
                    std::to_string(defect));
  }
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw Error(ErrorCode::kShapeNotTwoDim,
                "embedding matrix must have at least one row and one column");
  }
  require_finite(values_, "embedding matrix");
}

EmbeddingMatrix EmbeddingMatrix::row_block(Index begin, Index end) const {
  if (begin < 0 || end > rows() || begin >= end) {
    throw Error(ErrorCode::kInvalidArgument,
                "row block [" + std::to_string(begin) + ", " +
                    std::to_string(end) + ") outside 0.." +
                    std::to_string(rows()));
  }
  return EmbeddingMatrix(values_.middleRows(begin, end - begin));
}

void require_finite(const MatrixXd& a, const char* what) {
  if (!a.allFinite()) {
    throw Error(ErrorCode::kNonFinite,
                std::string(what) + " contains NaN or Inf");
  }
}

SvdFactors svd_decompose(const MatrixXd& a) {
  require_finite(a, "svd input");
  if (a.size() == 0) {
    throw Error(ErrorCode::kShapeNotTwoDim, "svd of an empty matrix");
  }
  Eigen::JacobiSVD<MatrixXd, Eigen::ColPivHouseholderQRPreconditioner> svd(
      a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdFactors f{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  if (!f.U.allFinite() || !f.S.allFinite() || !f.V.allFinite()) {
    throw Error(ErrorCode::kConvergenceFailure,
                "Jacobi SVD produced non-finite factors");
  }

  // Sign convention: the largest-magnitude entry of each V column is >= 0.
  for (Index j = 0; j < f.V.cols(); ++j) {
    Index idx = 0;
    f.V.col(j).cwiseAbs().maxCoeff(&idx);
    if (f.V(idx, j) < 0.0) {
      f.V.col(j) = -f.V.col(j);
      f.U.col(j) = -f.U.col(j);
    }
  }
  return f;
}

MatrixXd reconstruct(const SvdFactors& f) {
  return f.U * f.S.asDiagonal() * f.V.transpose();
}

Index numerical_rank(const VectorXd& singular_values, double tol) {
  if (singular_values.size() == 0) return 0;
  const double cutoff = tol * singular_values.maxCoeff();
  Index r = 0;
  for (Index i = 0; i < singular_values.size(); ++i) {
    if (singular_values[i] > cutoff) ++r;
  }
  return r;
}

MatrixXd orth(const MatrixXd& a, double rank_tol) {
  require_finite(a, "orth input");
  if (a.size() == 0 || a.norm() <= kZeroMatrixTol) {
    throw Error(ErrorCode::kZeroMatrix, "orth of a zero matrix");
  }
  const SvdFactors f = svd_decompose(a);
  return f.V.leftCols(numerical_rank(f.S, rank_tol));
}

MatrixXd orthonormalize_columns(const MatrixXd& a) {
  if (a.cols() == 0) return MatrixXd(a.rows(), 0);
  Eigen::HouseholderQR<MatrixXd> qr(a);
  return qr.householderQ() * MatrixXd::Identity(a.rows(), a.cols());
}

Projector Projector::from_basis(const MatrixXd& basis) {
  require_finite(basis, "projector basis");
  require_orthonormal(basis, "projector basis");
  MatrixXd p = basis * basis.transpose();
  MatrixXd sym = 0.5 * (p + p.transpose());
  return Projector(std::move(sym), basis.cols());
}

Projector Projector::from_matrix(const MatrixXd& p) {
  if (p.rows() != p.cols()) {
    throw Error(ErrorCode::kNotProjector, "projector must be square");
  }
  require_finite(p, "projector");
  const double asym = (p - p.transpose()).norm();
  if (!(asym <= kSymmetryTol)) {
    throw Error(ErrorCode::kNotProjector,
                "||P - P^T||_F = " + std::to_string(asym));
  }
  const double idem = (p * p - p).norm();
  if (!(idem <= kIdempotenceTol)) {
    throw Error(ErrorCode::kNotProjector,
                "||P P - P||_F = " + std::to_string(idem));
  }
  const double trace = p.trace();
  const double rank = std::round(trace);
  if (!(std::abs(trace - rank) <= kTraceTol) || rank < 0) {
    throw Error(ErrorCode::kNotProjector,
                "trace " + std::to_string(trace) + " is not a nonnegative integer");
  }
  return Projector(p, static_cast<Index>(rank));
}

Projector Projector::zero(Index dim) {
  return Projector(MatrixXd::Zero(dim, dim), 0);
}

Projector Projector::identity(Index dim) {
  return Projector(MatrixXd::Identity(dim, dim), dim);
}

Projector Projector::complement() const {
  return Projector(MatrixXd::Identity(dim(), dim()) - data_, dim() - rank_);
}

Projector projector_from_basis(const MatrixXd& basis) {
  return Projector::from_basis(basis);
}

double spectral_norm(const MatrixXd& a) {
  require_finite(a, "spectral_norm input");
  if (a.size() == 0) return 0.0;
  if (a.rows() == 1 || a.cols() == 1) return a.norm();
  Eigen::JacobiSVD<MatrixXd, Eigen::ColPivHouseholderQRPreconditioner> svd(a);
  return svd.singularValues()(0);
}

double frobenius_norm(const MatrixXd& a) { return a.norm(); }

double orthonormality_defect(const MatrixXd& basis) {
  return (basis.transpose() * basis -
          MatrixXd::Identity(basis.cols(), basis.cols()))
      .norm();
}

VectorXd principal_angle_cosines(const MatrixXd& b1, const MatrixXd& b2) {
  if (b1.rows() != b2.rows()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "bases live in R^" + std::to_string(b1.rows()) + " and R^" +
                    std::to_string(b2.rows()));
  }
  require_finite(b1, "first basis");
  require_finite(b2, "second basis");
  require_orthonormal(b1, "first basis");
  require_orthonormal(b2, "second basis");
  if (b1.cols() == 0 || b2.cols() == 0) return VectorXd(0);

  const MatrixXd m = b1.transpose() * b2;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  return svd.singularValues().cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace sdec

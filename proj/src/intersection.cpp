#include "sdec/intersection.hpp"

#include <string>

#include "sdec/errors.hpp"

namespace sdec {
namespace {

constexpr double kZeroMatrixTol = 1e-14;

MatrixXd leading_row_basis(const MatrixXd& a, std::optional<Index> rank,
                           double tol, const char* what) {
  if (a.norm() <= kZeroMatrixTol) {
    throw Error(ErrorCode::kZeroMatrix, std::string(what) + " is zero");
  }
  const SvdFactors f = svd_decompose(a);
  Index r = numerical_rank(f.S, tol);
  if (rank) {
    if (*rank < 1 || *rank > f.S.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(what) + " rank cap " + std::to_string(*rank) +
                      " outside 1.." + std::to_string(f.S.size()));
    }
    r = *rank;
  }
  return f.V.leftCols(r);
}

}  // namespace

IntersectionEstimate estimate_intersection(const EmbeddingMatrix& z_id,
                                           const EmbeddingMatrix& z_sc,
                                           const IntersectionOptions& options) {
  if (!(options.tau > 0.0 && options.tau <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tau must lie in (0, 1]");
  }
  if (z_id.cols() != z_sc.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "identity and scene embeddings differ in dimension");
  }
  const MatrixXd b_id = leading_row_basis(z_id.values(), options.id_rank,
                                          options.rank_tolerance, "identity embedding");
  const MatrixXd b_sc = leading_row_basis(z_sc.values(), options.scene_rank,
                                          options.rank_tolerance, "scene embedding");

  const MatrixXd m = b_id.transpose() * b_sc;
  Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeThinU);
  IntersectionEstimate est{
      svd.singularValues().cwiseMax(0.0).cwiseMin(1.0),
      options.tau,
      {},
      MatrixXd(z_id.cols(), 0),
      Projector::zero(z_id.cols()),
  };
  for (Index i = 0; i < est.cosines.size(); ++i) {
    if (est.cosines[i] >= options.tau) est.selected.push_back(i);
  }
  if (est.selected.empty()) return est;

  MatrixXd directions(b_id.cols(), static_cast<Index>(est.selected.size()));
  for (std::size_t k = 0; k < est.selected.size(); ++k) {
    directions.col(static_cast<Index>(k)) = svd.matrixU().col(est.selected[k]);
  }
  est.basis_cap = orthonormalize_columns(b_id * directions);
  est.p_cap = Projector::from_basis(est.basis_cap);
  return est;
}

EmbeddingMatrix hard_suppress(const EmbeddingMatrix& z_id,
                              const Projector& p_cap) {
  if (p_cap.dim() != z_id.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "projector dimension " + std::to_string(p_cap.dim()) +
                    " differs from embedding dimension " +
                    std::to_string(z_id.cols()));
  }
  if (p_cap.rank() == 0) return z_id;
  return EmbeddingMatrix(z_id.values() - z_id.values() * p_cap.matrix());
}

}  // namespace sdec

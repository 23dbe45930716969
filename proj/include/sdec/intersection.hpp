#pragma once

// Hard estimate of the identity/scene intersection subspace from principal
// angles between the two row spaces, and suppression of that subspace.

#include <optional>
#include <vector>

#include "sdec/spectral.hpp"

namespace sdec {

struct IntersectionOptions {
  double tau = 0.98;
  /// Explicit row-space ranks; numerical rank when unset.
  std::optional<Index> id_rank;
  std::optional<Index> scene_rank;
  double rank_tolerance = kDefaultRankTolerance;
};

struct IntersectionEstimate {
  VectorXd cosines;             // descending
  double tau = 0.98;
  std::vector<Index> selected;  // {i : cosines[i] >= tau}, 0-based
  MatrixXd basis_cap;           // d x |selected|, orthonormal
  Projector p_cap;
};

IntersectionEstimate estimate_intersection(const EmbeddingMatrix& z_id,
                                           const EmbeddingMatrix& z_sc,
                                           const IntersectionOptions& options = {});

/// Z_id (I - P_cap).
EmbeddingMatrix hard_suppress(const EmbeddingMatrix& z_id, const Projector& p_cap);

}  // namespace sdec

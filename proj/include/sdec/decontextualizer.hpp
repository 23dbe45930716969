#pragma once

// Scene de-contextualization of an identity prompt embedding.
//
// The identity embedding Z_id = U diag(lambda_o) V^T keeps its singular
// vectors fixed while its spectrum is first pulled toward the scene embedding
// (phase 1, beta = 0) and then pushed back toward the original (phase 2,
// beta > 0). Directions whose singular values travel far during this round
// trip are the ones entangled with the scene. Each direction's excursion
// |lambda* - lambda_o| is mapped to a weight in [1, 1 + omega] and the
// refined embedding is U diag(weight * lambda_o) V^T.

#include <functional>
#include <vector>

#include "sdec/spectral.hpp"

namespace sdec {

struct OptimizerConfig {
  double beta = 10.0;
  int m_switch = 20;     // phase-1 length M; beta = 0 for iter <= M
  int total_iters = 40;
  double omega = 1.0;
  double step_size = 0.01;
  bool clamp_nonnegative = true;
  bool invert_weighting = false;
  double degenerate_eps = 1e-12;

  /// Throws InvalidArgument.
  void validate() const;
};

struct OptimizationResult {
  VectorXd lambda_star;
  /// Loss at the start of each iteration (before its update); total_iters long.
  std::vector<double> loss_trace;
  /// ||U diag(lambda) V^T - Z_sc||_F after k updates, k = 0..total_iters.
  std::vector<double> scene_distance;
  /// ||U diag(lambda) V^T - Z_id||_F after k updates, k = 0..total_iters.
  std::vector<double> id_distance;
  /// 1-based iterations after which the step size was halved.
  std::vector<int> step_halvings;
  double final_step_size = 0.0;
};

struct ExcursionProfile {
  VectorXd lambda_o;
  VectorXd lambda_star;
  VectorXd lambda_delta;
  VectorXd lambda_omega;
  std::vector<double> loss_trace;
  std::vector<double> scene_distance;
  std::vector<double> id_distance;
  std::vector<int> step_halvings;
};

struct RefineResult {
  EmbeddingMatrix z_id_star;
  ExcursionProfile profile;
};

/// Computes per-direction excursion from (lambda_o, lambda_star).
using ExcursionTransform =
    std::function<VectorXd(const VectorXd& lambda_o, const VectorXd& lambda_star)>;

/// Scene rows are truncated or zero-padded to Z_id's row count; the column
/// counts must agree.
MatrixXd align_scene_rows(const MatrixXd& z_sc, Index rows);

/// Gradient descent on the diagonal of Lambda for
///   L = ||U Lambda V^T - Z_sc||_F^2 + beta(iter) ||U Lambda V^T - Z_id||_F^2.
/// The step size halves after 5 consecutive loss increases. Throws ZeroMatrix
/// for zero inputs and Diverged when the loss passes 1e6 x its initial value.
OptimizationResult two_phase_optimize(const EmbeddingMatrix& z_id,
                                      const EmbeddingMatrix& z_sc,
                                      const OptimizerConfig& cfg);

/// Same, reusing an existing SVD of Z_id.
OptimizationResult two_phase_optimize(const SvdFactors& id_svd,
                                      const MatrixXd& z_id,
                                      const MatrixXd& z_sc,
                                      const OptimizerConfig& cfg);

/// |lambda_star - lambda_o| elementwise.
VectorXd excursion(const VectorXd& lambda_o, const VectorXd& lambda_star);

/// Min-max normalized excursion mapped into [1, 1 + omega]. Returns all ones
/// when the excursion range is at most degenerate_eps. With invert, the
/// smallest excursion gets the largest weight.
VectorXd reweight(const VectorXd& lambda_delta, double omega, bool invert,
                  double degenerate_eps = 1e-12);

RefineResult refine(const EmbeddingMatrix& z_id, const EmbeddingMatrix& z_sc,
                    const OptimizerConfig& cfg,
                    const ExcursionTransform& transform = {});

enum class SuppressionCriterion { kOriginal, kOmega };

/// Keeps the highest-ranked singular directions of Z (ranked by lambda_o or by
/// the profile's weights) until their share of the criterion's squared energy
/// reaches energy_threshold, and zeroes the rest. Threshold 0 keeps nothing.
EmbeddingMatrix pca_suppress(const EmbeddingMatrix& z,
                             SuppressionCriterion criterion,
                             const ExcursionProfile* profile,
                             double energy_threshold);

}  // namespace sdec

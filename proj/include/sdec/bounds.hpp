#pragma once

// Upper bound on the strength of scene contextualization ||T_sc||_2, split
// into the part carried by the identity/scene intersection (P_cap) and the
// scene-only remainder (P_perp = Pi_sc - P_cap):
//
//   ||T_sc|| <= eps * ||R_cap||_2 * ||T_cap||_F + eps * ||R_perp||_2 * ||T_perp||_F
//
// with eps = ||alpha_sc||, R_x = Z_sc P_x and T_x = P_x W_V Pi_id. The
// Frobenius factors also equal sigma_x = ||P_x W_V U||_F for an orthonormal
// basis U of the identity subspace.

#include <cstdint>

#include "sdec/attention_sim.hpp"
#include "sdec/spectral.hpp"
#include "sdec/stats.hpp"

namespace sdec {

struct BoundBreakdown {
  double epsilon = 0;
  double r_cap_norm = 0;
  double r_perp_norm = 0;
  double t_cap_fro = 0;   // ||P_cap W_V Pi_id||_F
  double t_perp_fro = 0;  // ||P_perp W_V Pi_id||_F
  double sigma_cap = 0;   // ||P_cap W_V U||_F
  double sigma_perp = 0;  // ||P_perp W_V U||_F
  double bound = 0;
  double bound_sigma = 0;  // same bound written with sigma_cap, sigma_perp
  double measured = 0;     // ||alpha_sc^T Z_sc W_V Pi_id||_2

  // Alternative orientation T_cap' = Pi_id W_V P_cap, reported for reference.
  double t_cap_fro_alt = 0;

  // Individual terms ||alpha_sc^T R_x T_x||_2 of the triangle inequality.
  double term_cap = 0;
  double term_perp = 0;
};

/// The query-independent part of the bound for one instance.
struct BoundFactors {
  MatrixXd z_sc;
  MatrixXd scene_values;  // Z_sc W_V Pi_id
  MatrixXd r_cap;         // Z_sc P_cap
  MatrixXd r_perp;
  MatrixXd t_cap;         // P_cap W_V Pi_id
  MatrixXd t_perp;
  BoundBreakdown norms;   // every field except epsilon, bound*, measured, term*
};

/// Throws NotNested when Pi_sc P_cap != P_cap and NotProjector when
/// Pi_sc - P_cap is not a projector.
BoundFactors prepare_bound(const MatrixXd& z_sc, const MatrixXd& w_v,
                           const Projector& pi_id, const Projector& pi_sc,
                           const Projector& p_cap);

/// alpha_sc is the scene part of one softmax row (entries >= 0).
BoundBreakdown evaluate_bound(const BoundFactors& factors,
                              const VectorXd& alpha_sc);

/// prepare_bound followed by evaluate_bound.
BoundBreakdown compute_bound(const MatrixXd& z_sc, const VectorXd& alpha_sc,
                             const MatrixXd& w_v, const Projector& pi_id,
                             const Projector& pi_sc, const Projector& p_cap);

struct BoundSweepConfig {
  SubspaceSpec spec;
  Index n_id = 16;
  Index n_sc = 16;
  Index trials = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr double kBoundRelativeTolerance = 1e-9;

struct BoundSweepSummary {
  Index trials = 0;
  Index instances = 0;  // trials x identity query rows
  Index violations = 0; // measured > bound * (1 + 1e-9)
  Index chain_violations = 0;  // a term exceeds its own factor product
  Quantiles tightness;         // measured / bound over instances with bound > 0
  double max_first_summand = 0;       // eps * ||R_cap|| * ||T_cap||_F
  double max_sigma_bound_gap = 0;     // |bound_sigma - bound|, relative
  double max_t_sigma_gap = 0;         // |t_x - sigma_x|
};

/// build_subspaces -> sample_embedding -> attention_forward -> compute_bound
/// for every identity query of every trial. Trial t uses sub-seed
/// derive_seed(seed, t). Per-trial failures are rethrown with the trial
/// index in the message.
BoundSweepSummary monte_carlo_bound_sweep(const BoundSweepConfig& config);

}  // namespace sdec

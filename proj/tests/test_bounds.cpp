#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sdec/attention_sim.hpp"
#include "sdec/bounds.hpp"
#include "sdec/errors.hpp"

namespace sdec {
namespace {

struct Fixture {
  SyntheticInstance inst;
  MatrixXd z_sc;
  VectorXd alpha_sc;
};

Fixture fixture(const SubspaceSpec& spec, Index q = 0) {
  Fixture f{make_instance(spec, 16, 16), {}, {}};
  f.z_sc = f.inst.z.values().middleRows(16, 16);
  f.alpha_sc = attention_forward(f.inst.z, f.inst.weights, q).alpha.segment(16, 16);
  return f;
}

BoundBreakdown bound_of(const Fixture& f, const VectorXd& alpha) {
  return compute_bound(f.z_sc, alpha, f.inst.weights.value, f.inst.pi_id,
                       f.inst.pi_sc, f.inst.p_cap);
}

TEST(ComputeBound, ZeroSceneAttention) {
  const Fixture f = fixture({16, 4, 4, 1, 3});
  const BoundBreakdown b = bound_of(f, VectorXd::Zero(16));
  EXPECT_EQ(b.epsilon, 0.0);
  EXPECT_EQ(b.bound, 0.0);
  EXPECT_EQ(b.measured, 0.0);
}

TEST(ComputeBound, DegenerateValueMatrix) {
  Fixture f = fixture({64, 8, 8, 0, 5});
  f.inst.weights = make_degenerate_wv(f.inst.bases.id, f.inst.bases.scene, 5);
  const BoundBreakdown b = bound_of(f, f.alpha_sc);
  EXPECT_LE(b.measured, 1e-10);
  EXPECT_GE(b.bound, 0.0);
  EXPECT_EQ(b.r_cap_norm, 0.0);
  EXPECT_EQ(b.t_cap_fro, 0.0);
}

// Every norm re-derived with loops, Gram eigenvalues and power iteration.
TEST(ComputeBound, RandomInstanceAgainstBruteForce) {
  const Fixture f = fixture({64, 8, 8, 2, 7}, 3);
  const BoundBreakdown b = bound_of(f, f.alpha_sc);
  const MatrixXd& w = f.inst.weights.value;
  const MatrixXd pid = f.inst.bases.id * f.inst.bases.id.transpose();
  const MatrixXd pcap = f.inst.bases.shared * f.inst.bases.shared.transpose();
  const MatrixXd psc = f.inst.bases.scene * f.inst.bases.scene.transpose();
  const MatrixXd pperp = psc - pcap;

  const VectorXd scene_term = oracle::row_times(
      oracle::row_times(oracle::row_times(f.alpha_sc, f.z_sc), w), pid);
  const double eps = std::sqrt(f.alpha_sc.squaredNorm());
  const double r_cap = oracle::singular_values_via_gram(
      oracle::loop_product(f.z_sc, pcap))[0];
  const double r_perp = oracle::power_iteration_norm(oracle::loop_product(f.z_sc, pperp));
  const double t_cap = oracle::loop_product(oracle::loop_product(pcap, w), pid).norm();
  const double t_perp = oracle::loop_product(oracle::loop_product(pperp, w), pid).norm();
  const double bound = eps * (r_cap * t_cap + r_perp * t_perp);

  EXPECT_NEAR(b.measured, scene_term.norm(), 1e-12);
  EXPECT_NEAR(b.epsilon, eps, 1e-15);
  EXPECT_NEAR(b.r_cap_norm, r_cap, 1e-8 * r_cap);
  EXPECT_NEAR(b.r_perp_norm, r_perp, 1e-8 * r_perp);
  EXPECT_NEAR(b.t_cap_fro, t_cap, 1e-12);
  EXPECT_NEAR(b.t_perp_fro, t_perp, 1e-12);
  EXPECT_NEAR(b.bound, bound, 1e-8 * bound);
  EXPECT_GT(b.measured, 0.0);
  EXPECT_LE(b.measured, b.bound);
  EXPECT_LE(scene_term.norm(), bound);
}

TEST(ComputeBound, SigmaFormMatchesProjectorForm) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Fixture f = fixture({32, 6, 5, static_cast<Index>(s % 4), s}, static_cast<Index>(s % 16));
    const BoundBreakdown b = bound_of(f, f.alpha_sc);
    EXPECT_NEAR(b.t_cap_fro, b.sigma_cap, 1e-10);
    EXPECT_NEAR(b.t_perp_fro, b.sigma_perp, 1e-10);
    EXPECT_NEAR(b.bound_sigma, b.bound, 1e-10 * std::max(1.0, b.bound));
  }
}

TEST(ComputeBound, PreparedFactorsServeEveryQuery) {
  const SyntheticInstance inst = make_instance({32, 5, 5, 2, 4}, 8, 8);
  const MatrixXd z_sc = inst.z.values().bottomRows(8);
  const BoundFactors f = prepare_bound(z_sc, inst.weights.value, inst.pi_id,
                                       inst.pi_sc, inst.p_cap);
  for (Index q = 0; q < 8; ++q) {
    const VectorXd alpha = attention_forward(inst.z, inst.weights, q).alpha.tail(8);
    const BoundBreakdown a = evaluate_bound(f, alpha);
    const BoundBreakdown b = compute_bound(z_sc, alpha, inst.weights.value,
                                           inst.pi_id, inst.pi_sc, inst.p_cap);
    EXPECT_EQ(a.bound, b.bound);
    EXPECT_EQ(a.measured, b.measured);
    EXPECT_EQ(a.sigma_perp, b.sigma_perp);
  }
}

TEST(ComputeBound, BoundFormulaIsExact) {
  const Fixture f = fixture({24, 5, 5, 2, 11});
  const BoundBreakdown b = bound_of(f, f.alpha_sc);
  EXPECT_EQ(b.bound, b.epsilon * (b.r_cap_norm * b.t_cap_fro +
                                  b.r_perp_norm * b.t_perp_fro));
}

TEST(ComputeBound, LinearInSceneAttention) {
  const Fixture f = fixture({32, 6, 6, 2, 13});
  const BoundBreakdown base = bound_of(f, f.alpha_sc);
  for (double c : {1.0, 0.5, 0.125, 1e-3}) {
    const BoundBreakdown scaled = bound_of(f, c * f.alpha_sc);
    EXPECT_NEAR(scaled.measured, c * base.measured, 1e-13 * base.measured);
    EXPECT_NEAR(scaled.bound, c * base.bound, 1e-13 * base.bound);
  }
}

TEST(ComputeBound, TermsObeySubmultiplicativeChain) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Fixture f = fixture({20, 4, 4, static_cast<Index>(1 + s % 3), s + 100});
    const BoundBreakdown b = bound_of(f, f.alpha_sc);
    EXPECT_LE(b.term_cap, b.epsilon * b.r_cap_norm * b.t_cap_fro * (1 + 1e-12) + 1e-15);
    EXPECT_LE(b.term_perp, b.epsilon * b.r_perp_norm * b.t_perp_fro * (1 + 1e-12) + 1e-15);
    EXPECT_LE(b.measured, (b.term_cap + b.term_perp) * (1 + 1e-12) + 1e-15);
  }
}

TEST(ComputeBound, RejectsUnnestedIntersection) {
  const Fixture f = fixture({16, 4, 4, 1, 2});
  // A projector onto an identity-only direction is not inside Pi_sc.
  const Projector outside = Projector::from_basis(f.inst.bases.id.col(0));
  try {
    compute_bound(f.z_sc, f.alpha_sc, f.inst.weights.value, f.inst.pi_id,
                  f.inst.pi_sc, outside);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotNested);
  }
}

TEST(ComputeBound, RejectsBadInputs) {
  const Fixture f = fixture({16, 4, 4, 1, 2});
  EXPECT_THROW(bound_of(f, VectorXd::Zero(3)), Error);
  VectorXd negative = f.alpha_sc;
  negative[0] = -0.1;
  EXPECT_THROW(bound_of(f, negative), Error);
  EXPECT_THROW(compute_bound(f.z_sc, f.alpha_sc, MatrixXd::Identity(4, 4),
                             f.inst.pi_id, f.inst.pi_sc, f.inst.p_cap),
               Error);
}

TEST(BoundSweep, NoIntersectionMeansNoFirstSummand) {
  BoundSweepConfig cfg;
  cfg.spec = {64, 8, 8, 0, 0};
  cfg.trials = 40;
  cfg.seed = 1;
  const BoundSweepSummary s = monte_carlo_bound_sweep(cfg);
  EXPECT_EQ(s.violations, 0);
  EXPECT_EQ(s.chain_violations, 0);
  EXPECT_EQ(s.max_first_summand, 0.0);
  EXPECT_EQ(s.instances, 40 * 16);
  EXPECT_LE(s.tightness.max, 1.0);
}

TEST(BoundSweep, ReproducibleForFixedSeed) {
  BoundSweepConfig cfg;
  cfg.spec = {64, 8, 8, 2, 0};
  cfg.trials = 30;
  cfg.seed = 7;
  const BoundSweepSummary a = monte_carlo_bound_sweep(cfg);
  const BoundSweepSummary b = monte_carlo_bound_sweep(cfg);
  EXPECT_EQ(a.violations, 0);
  EXPECT_EQ(a.tightness.max, b.tightness.max);
  EXPECT_EQ(a.tightness.median, b.tightness.median);
  EXPECT_EQ(a.tightness.min, b.tightness.min);
  EXPECT_GT(a.max_first_summand, 0.0);
  cfg.seed = 8;
  EXPECT_NE(monte_carlo_bound_sweep(cfg).tightness.max, a.tightness.max);
}

TEST(BoundSweep, RejectsZeroTrials) {
  BoundSweepConfig cfg;
  cfg.trials = 0;
  EXPECT_THROW(monte_carlo_bound_sweep(cfg), Error);
}

// Property: the bound holds for random specs, token counts and queries.
TEST(BoundProperty, HoldsOnRandomSpecs) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 150; ++trial) {
    const Index d = 6 + static_cast<Index>(rng() % 30);
    const Index k_id = 1 + static_cast<Index>(rng() % 3);
    const Index k_sc = 1 + static_cast<Index>(rng() % 3);
    const Index k_cap = static_cast<Index>(rng() % (std::min(k_id, k_sc) + 1));
    const Index n_sc = 1 + static_cast<Index>(rng() % 8);
    const SyntheticInstance inst =
        make_instance({d, k_id, k_sc, k_cap, rng()}, 3, n_sc);
    const AttentionResult fwd = attention_forward(inst.z, inst.weights, 1);
    const MatrixXd z_sc = inst.z.values().bottomRows(n_sc);
    const BoundBreakdown b =
        compute_bound(z_sc, fwd.alpha.tail(n_sc), inst.weights.value,
                      inst.pi_id, inst.pi_sc, inst.p_cap);
    EXPECT_GE(b.measured, 0.0);
    EXPECT_LE(b.measured, b.bound + 1e-9 * std::max(1.0, b.bound));
  }
}

}  // namespace
}  // namespace sdec

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sdec/decontextualizer.hpp"
#include "sdec/errors.hpp"

namespace sdec {
namespace {

MatrixXd diag2(double a, double b) {
  MatrixXd m = MatrixXd::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

// The closed-form fixture: U = V = I, scene zero, plain descent throughout.
OptimizerConfig diag_fixture_config() {
  OptimizerConfig cfg;
  cfg.beta = 0.0;
  cfg.m_switch = 1;
  cfg.total_iters = 2;
  cfg.step_size = 0.05;
  cfg.clamp_nonnegative = false;
  return cfg;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIoError;
}

TEST(OptimizerConfig, Validation) {
  EXPECT_NO_THROW(OptimizerConfig{}.validate());
  OptimizerConfig c;
  c.m_switch = 40;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.m_switch = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.beta = -1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.omega = -0.5;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.step_size = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(TwoPhaseOptimize, DiagonalClosedForm) {
  const OptimizationResult r =
      two_phase_optimize(EmbeddingMatrix(diag2(2, 1)),
                         EmbeddingMatrix(MatrixXd::Zero(2, 2)),
                         diag_fixture_config());
  VectorXd start(2);
  start << 2.0, 1.0;
  const VectorXd expected = oracle::hand_descent_to(start, VectorXd::Zero(2), 0.05, 2);
  EXPECT_NEAR(expected[0], 1.62, 1e-15);
  EXPECT_NEAR(expected[1], 0.81, 1e-15);
  EXPECT_LE((r.lambda_star - expected).cwiseAbs().maxCoeff(), 1e-12);
  ASSERT_EQ(r.loss_trace.size(), 2u);
  EXPECT_NEAR(r.loss_trace[0], 5.0, 1e-12);
  EXPECT_NEAR(r.loss_trace[1], 1.8 * 1.8 + 0.9 * 0.9, 1e-12);
  ASSERT_EQ(r.scene_distance.size(), 3u);
  EXPECT_NEAR(r.scene_distance[2], std::hypot(1.62, 0.81), 1e-12);
}

TEST(TwoPhaseOptimize, SelfSceneIsFixedPoint) {
  std::mt19937_64 rng(5);
  const MatrixXd z = oracle::random_matrix(rng, 6, 8);
  const OptimizationResult r =
      two_phase_optimize(EmbeddingMatrix(z), EmbeddingMatrix(z), OptimizerConfig{});
  const VectorXd lambda_o = oracle::singular_values_via_gram(z);
  EXPECT_LE((r.lambda_star - lambda_o).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(TwoPhaseOptimize, MatchesHandDescentOnDiagonalScene) {
  // Diagonal identity and scene: every coordinate descends independently
  // toward the scene value, then toward (s + beta l_o) / (1 + beta).
  OptimizerConfig cfg;
  cfg.clamp_nonnegative = false;
  const MatrixXd z_id = diag2(3.0, 1.0);
  const MatrixXd z_sc = diag2(1.0, 2.0);
  const OptimizationResult r =
      two_phase_optimize(EmbeddingMatrix(z_id), EmbeddingMatrix(z_sc), cfg);
  VectorXd l(2), s(2), o(2);
  l << 3.0, 1.0;
  o = l;
  s << 1.0, 2.0;
  l = oracle::hand_descent_to(l, s, cfg.step_size, cfg.m_switch);
  const VectorXd target2 = (s + cfg.beta * o) / (1.0 + cfg.beta);
  l = oracle::hand_descent_to(l, target2, cfg.step_size * (1.0 + cfg.beta),
                              cfg.total_iters - cfg.m_switch);
  EXPECT_LE((r.lambda_star - l).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TwoPhaseOptimize, PhaseBehaviourOnRandomFixture) {
  std::mt19937_64 rng(31);
  const MatrixXd z_id = oracle::random_matrix(rng, 6, 8);
  const MatrixXd z_sc = oracle::random_matrix(rng, 6, 8);
  const OptimizerConfig cfg;
  const OptimizationResult r =
      two_phase_optimize(EmbeddingMatrix(z_id), EmbeddingMatrix(z_sc), cfg);
  const auto m = static_cast<std::size_t>(cfg.m_switch);
  EXPECT_LT(r.scene_distance[m], r.scene_distance[0]);
  EXPECT_LT(r.id_distance.back(), r.id_distance[m]);
  EXPECT_LE(r.loss_trace[m - 1], r.loss_trace[0]);
  EXPECT_EQ(r.loss_trace.size(), static_cast<std::size_t>(cfg.total_iters));

  // Independent re-evaluation of the recorded distances at iteration M.
  const SvdFactors f = svd_decompose(z_id);
  VectorXd l = f.S;
  for (int it = 1; it <= cfg.m_switch; ++it) {
    const MatrixXd resid = f.U * l.asDiagonal() * f.V.transpose() - z_sc;
    for (Index i = 0; i < l.size(); ++i) {
      l[i] = std::max(0.0, l[i] - cfg.step_size * 2.0 * f.U.col(i).dot(resid * f.V.col(i)));
    }
  }
  const double dist = (f.U * l.asDiagonal() * f.V.transpose() - z_sc).norm();
  EXPECT_NEAR(r.scene_distance[m], dist, 1e-12);
}

TEST(TwoPhaseOptimize, SceneRowsAreAligned) {
  std::mt19937_64 rng(8);
  const MatrixXd z_id = oracle::random_matrix(rng, 4, 5);
  const MatrixXd longer = oracle::random_matrix(rng, 7, 5);
  const MatrixXd shorter = longer.topRows(2);
  MatrixXd padded = MatrixXd::Zero(4, 5);
  padded.topRows(2) = shorter;
  const OptimizerConfig cfg;
  EXPECT_EQ(two_phase_optimize(EmbeddingMatrix(z_id), EmbeddingMatrix(longer), cfg).lambda_star,
            two_phase_optimize(EmbeddingMatrix(z_id), EmbeddingMatrix(longer.topRows(4)), cfg)
                .lambda_star);
  EXPECT_EQ(two_phase_optimize(EmbeddingMatrix(z_id), EmbeddingMatrix(shorter), cfg).lambda_star,
            two_phase_optimize(EmbeddingMatrix(z_id), EmbeddingMatrix(padded), cfg).lambda_star);
}

TEST(TwoPhaseOptimize, StepHalvesAfterFiveIncreases) {
  // Phase 2 with a huge beta overshoots: the loss grows every iteration
  // until the step is halved.
  OptimizerConfig cfg;
  cfg.beta = 110.0;
  cfg.m_switch = 1;
  cfg.total_iters = 30;
  cfg.step_size = 0.01;
  cfg.clamp_nonnegative = false;
  const OptimizationResult r = two_phase_optimize(
      EmbeddingMatrix(diag2(2, 1)), EmbeddingMatrix(diag2(0.5, 0.5)), cfg);
  ASSERT_FALSE(r.step_halvings.empty());
  const int first = r.step_halvings.front();
  for (int k = first - 5; k < first; ++k) {
    EXPECT_GT(r.loss_trace[static_cast<std::size_t>(k)],
              r.loss_trace[static_cast<std::size_t>(k - 1)]);
  }
  EXPECT_LT(r.final_step_size, cfg.step_size);
}

TEST(TwoPhaseOptimize, DivergenceIsReported) {
  OptimizerConfig cfg;
  cfg.m_switch = 1;
  cfg.total_iters = 200;
  cfg.beta = 0.0;
  cfg.step_size = 5.0;
  cfg.clamp_nonnegative = false;
  EXPECT_EQ(code_of([&] {
              two_phase_optimize(EmbeddingMatrix(diag2(2, 1)),
                                 EmbeddingMatrix(diag2(1, 0.5)), cfg);
            }),
            ErrorCode::kDiverged);
}

TEST(TwoPhaseOptimize, Errors) {
  EXPECT_EQ(code_of([] {
              two_phase_optimize(EmbeddingMatrix(MatrixXd::Zero(2, 2)),
                                 EmbeddingMatrix(MatrixXd::Ones(2, 2)), {});
            }),
            ErrorCode::kZeroMatrix);
  EXPECT_EQ(code_of([] {
              two_phase_optimize(EmbeddingMatrix(MatrixXd::Ones(2, 2)),
                                 EmbeddingMatrix(MatrixXd::Ones(2, 3)), {});
            }),
            ErrorCode::kDimensionMismatch);
}

TEST(TwoPhaseOptimize, Deterministic) {
  std::mt19937_64 rng(17);
  const MatrixXd z_id = oracle::random_matrix(rng, 5, 9);
  const MatrixXd z_sc = oracle::random_matrix(rng, 6, 9);
  const RefineResult a = refine(EmbeddingMatrix(z_id), EmbeddingMatrix(z_sc), {});
  const RefineResult b = refine(EmbeddingMatrix(z_id), EmbeddingMatrix(z_sc), {});
  EXPECT_EQ(a.z_id_star.values(), b.z_id_star.values());
  EXPECT_EQ(a.profile.loss_trace, b.profile.loss_trace);
}

TEST(Excursion, Examples) {
  VectorXd o(3), s(3);
  o << 3, 2, 1;
  s << 3, 1, 2;
  EXPECT_EQ(excursion(o, o), VectorXd::Zero(3));
  VectorXd expected(3);
  expected << 0, 1, 1;
  EXPECT_EQ(excursion(o, s), expected);
  EXPECT_EQ(code_of([&] { excursion(o, VectorXd::Zero(2)); }),
            ErrorCode::kLengthMismatch);
}

TEST(Excursion, FromDiagonalFixture) {
  const RefineResult r = refine(EmbeddingMatrix(diag2(2, 1)),
                                EmbeddingMatrix(MatrixXd::Zero(2, 2)),
                                diag_fixture_config());
  EXPECT_NEAR(r.profile.lambda_delta[0], 0.38, 1e-12);
  EXPECT_NEAR(r.profile.lambda_delta[1], 0.19, 1e-12);
}

TEST(Reweight, Examples) {
  VectorXd d(3);
  d << 0, 1, 2;
  VectorXd expected(3);
  expected << 1, 1.5, 2;
  EXPECT_LE((reweight(d, 1.0, false) - expected).norm(), 1e-15);

  EXPECT_EQ(reweight(VectorXd::Constant(4, 0.7), 1.0, false), VectorXd::Ones(4));

  d << 0.2, 0.8, 0.5;
  expected << 2, 1, 1.5;
  EXPECT_LE((reweight(d, 1.0, true) - expected).norm(), 1e-15);

  d << 0.1, -0.2, 0.3;
  EXPECT_EQ(code_of([&] { reweight(d, 1.0, false); }),
            ErrorCode::kNegativeExcursion);
}

TEST(ReweightProperty, WeightsStayInRange) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const Index n = 1 + static_cast<Index>(rng() % 12);
    const double scale = std::pow(10.0, -12.0 + 16.0 * unit(rng));
    const double omega = trial % 7 == 0 ? 0.0 : 5.0 * unit(rng);
    VectorXd d(n);
    for (Index i = 0; i < n; ++i) d[i] = scale * unit(rng);
    for (bool invert : {false, true}) {
      const VectorXd w = reweight(d, omega, invert);
      EXPECT_GE(w.minCoeff(), 1.0);
      EXPECT_LE(w.maxCoeff(), 1.0 + omega);
    }
  }
}

TEST(Refine, DiagonalEndToEnd) {
  const RefineResult r = refine(EmbeddingMatrix(diag2(2, 1)),
                                EmbeddingMatrix(MatrixXd::Zero(2, 2)),
                                diag_fixture_config());
  // Excursions (0.38, 0.19) normalize to (1, 0), giving weights (2, 1).
  EXPECT_NEAR(r.profile.lambda_omega[0], 2.0, 1e-12);
  EXPECT_NEAR(r.profile.lambda_omega[1], 1.0, 1e-12);
  EXPECT_LE((r.z_id_star.values() - diag2(4, 1)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Refine, ZeroOmegaIsIdentity) {
  std::mt19937_64 rng(3);
  const MatrixXd z_id = oracle::random_matrix(rng, 5, 7);
  const MatrixXd z_sc = oracle::random_matrix(rng, 9, 7);
  OptimizerConfig cfg;
  cfg.omega = 0.0;
  const RefineResult r = refine(EmbeddingMatrix(z_id), EmbeddingMatrix(z_sc), cfg);
  EXPECT_LE((r.z_id_star.values() - z_id).norm(), 1e-10);
  EXPECT_EQ(r.profile.lambda_omega, VectorXd::Ones(5));
}

TEST(Refine, SelfSceneReproducesInput) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd z = oracle::random_matrix(rng, 4 + trial % 3, 10);
    const RefineResult r = refine(EmbeddingMatrix(z), EmbeddingMatrix(z), {});
    EXPECT_LE((r.z_id_star.values() - z).norm(), 1e-6 * z.norm());
  }
}

TEST(RefineProperty, ShapeRangeAndRowSpace) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    const Index n = 1 + static_cast<Index>(rng() % 8);
    const Index m = 1 + static_cast<Index>(rng() % 8);
    const Index d = 2 + static_cast<Index>(rng() % 10);
    const MatrixXd z_id = oracle::random_matrix(rng, n, d);
    const MatrixXd z_sc = oracle::random_matrix(rng, m, d);
    OptimizerConfig cfg;
    cfg.omega = static_cast<double>(rng() % 4);
    cfg.invert_weighting = trial % 2 == 1;
    const RefineResult r = refine(EmbeddingMatrix(z_id), EmbeddingMatrix(z_sc), cfg);
    ASSERT_EQ(r.z_id_star.rows(), n);
    ASSERT_EQ(r.z_id_star.cols(), d);
    EXPECT_GE(r.profile.lambda_omega.minCoeff(), 1.0);
    EXPECT_LE(r.profile.lambda_omega.maxCoeff(), 1.0 + cfg.omega);
    EXPECT_GE(r.profile.lambda_delta.minCoeff(), 0.0);
    EXPECT_EQ(r.profile.loss_trace.size(), static_cast<std::size_t>(cfg.total_iters));
    // Rows of the output lie in the row space of the input.
    const MatrixXd basis = oracle::gram_schmidt_rows(z_id);
    const MatrixXd out = r.z_id_star.values();
    EXPECT_LE((out - out * basis * basis.transpose()).norm(),
              1e-8 * std::max(1.0, out.norm()));
  }
}

TEST(Refine, CustomExcursionTransform) {
  std::mt19937_64 rng(6);
  const MatrixXd z_id = oracle::random_matrix(rng, 3, 4);
  const MatrixXd z_sc = oracle::random_matrix(rng, 3, 4);
  const ExcursionTransform relative = [](const VectorXd& o, const VectorXd& s) {
    return VectorXd((s - o).cwiseAbs().cwiseQuotient(o));
  };
  const RefineResult r =
      refine(EmbeddingMatrix(z_id), EmbeddingMatrix(z_sc), {}, relative);
  const VectorXd expected =
      (r.profile.lambda_star - r.profile.lambda_o).cwiseAbs().cwiseQuotient(r.profile.lambda_o);
  EXPECT_LE((r.profile.lambda_delta - expected).norm(), 1e-15);
}

TEST(PcaSuppress, Examples) {
  const EmbeddingMatrix z(diag2(4, 3));
  EXPECT_LE((pca_suppress(z, SuppressionCriterion::kOriginal, nullptr, 1.0).values() -
             diag2(4, 3)).norm(),
            1e-10);
  EXPECT_EQ(pca_suppress(z, SuppressionCriterion::kOriginal, nullptr, 0.0).values(),
            MatrixXd::Zero(2, 2));
  // 16 / 25 = 0.64 reaches 0.6 with the first direction alone.
  EXPECT_LE((pca_suppress(z, SuppressionCriterion::kOriginal, nullptr, 0.6).values() -
             diag2(4, 0)).norm(),
            1e-12);
  EXPECT_LE((pca_suppress(z, SuppressionCriterion::kOriginal, nullptr, 0.65).values() -
             diag2(4, 3)).norm(),
            1e-12);
}

TEST(PcaSuppress, OmegaCriterionUsesProfileOrder) {
  const EmbeddingMatrix z(diag2(4, 3));
  ExcursionProfile p;
  p.lambda_omega = VectorXd(2);
  p.lambda_omega << 1.0, 2.0;
  // Ranked by weight the second direction (value 3) comes first: 4 / 5 >= 0.7.
  EXPECT_LE((pca_suppress(z, SuppressionCriterion::kOmega, &p, 0.7).values() -
             diag2(0, 3)).norm(),
            1e-12);
  EXPECT_EQ(code_of([&] { pca_suppress(z, SuppressionCriterion::kOmega, nullptr, 0.5); }),
            ErrorCode::kMissingProfile);
  p.lambda_omega = VectorXd::Ones(3);
  EXPECT_EQ(code_of([&] { pca_suppress(z, SuppressionCriterion::kOmega, &p, 0.5); }),
            ErrorCode::kLengthMismatch);
  EXPECT_EQ(code_of([&] { pca_suppress(z, SuppressionCriterion::kOriginal, nullptr, 1.5); }),
            ErrorCode::kInvalidArgument);
}

TEST(PcaSuppressProperty, EnergyIsMonotoneInThreshold) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const MatrixXd z = oracle::random_matrix(rng, 6, 9);
    double previous = -1.0;
    for (int step = 0; step <= 10; ++step) {
      const double e =
          pca_suppress(EmbeddingMatrix(z), SuppressionCriterion::kOriginal,
                       nullptr, step / 10.0)
              .values()
              .squaredNorm();
      EXPECT_GE(e, previous - 1e-12);
      EXPECT_GE(e, (step / 10.0) * z.squaredNorm() - 1e-9);
      previous = e;
    }
  }
}

}  // namespace
}  // namespace sdec

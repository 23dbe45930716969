#include "sdec/decontextualizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sdec/errors.hpp"

namespace sdec {
namespace {

constexpr double kZeroMatrixTol = 1e-14;
constexpr double kDivergenceFactor = 1e6;
constexpr int kIncreasesBeforeHalving = 5;

// SVD restricted to the numerically nonzero singular directions.
SvdFactors truncated_svd(const MatrixXd& a) {
  SvdFactors f = svd_decompose(a);
  const Index r = numerical_rank(f.S);
  return SvdFactors{f.U.leftCols(r), f.S.head(r), f.V.leftCols(r)};
}

MatrixXd compose(const SvdFactors& f, const VectorXd& lambda) {
  return f.U * lambda.asDiagonal() * f.V.transpose();
}

// g_i = u_i^T R v_i for every retained direction.
VectorXd diagonal_projection(const SvdFactors& f, const MatrixXd& residual) {
  const MatrixXd ut_r = f.U.transpose() * residual;
  VectorXd g(f.S.size());
  for (Index i = 0; i < g.size(); ++i) g[i] = ut_r.row(i).dot(f.V.col(i));
  return g;
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(m_switch > 0 && m_switch < total_iters)) {
    throw Error(ErrorCode::kInvalidArgument,
                "need 0 < m_switch < total_iters (got " +
                    std::to_string(m_switch) + ", " +
                    std::to_string(total_iters) + ")");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::kInvalidArgument, "beta must be >= 0");
  }
  if (!(omega >= 0.0) || !std::isfinite(omega)) {
    throw Error(ErrorCode::kInvalidArgument, "omega must be >= 0");
  }
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw Error(ErrorCode::kInvalidArgument, "step_size must be > 0");
  }
  if (!(degenerate_eps >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "degenerate_eps must be >= 0");
  }
}

MatrixXd align_scene_rows(const MatrixXd& z_sc, Index rows) {
  MatrixXd aligned = MatrixXd::Zero(rows, z_sc.cols());
  const Index keep = std::min(rows, z_sc.rows());
  aligned.topRows(keep) = z_sc.topRows(keep);
  return aligned;
}

OptimizationResult two_phase_optimize(const EmbeddingMatrix& z_id,
                                      const EmbeddingMatrix& z_sc,
                                      const OptimizerConfig& cfg) {
  if (z_id.values().norm() <= kZeroMatrixTol) {
    throw Error(ErrorCode::kZeroMatrix, "identity embedding is zero");
  }
  return two_phase_optimize(truncated_svd(z_id.values()), z_id.values(),
                            z_sc.values(), cfg);
}

OptimizationResult two_phase_optimize(const SvdFactors& id_svd,
                                      const MatrixXd& z_id,
                                      const MatrixXd& z_sc,
                                      const OptimizerConfig& cfg) {
  cfg.validate();
  if (z_sc.cols() != z_id.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "scene embedding has " + std::to_string(z_sc.cols()) +
                    " columns, identity has " + std::to_string(z_id.cols()));
  }
  if (z_id.norm() <= kZeroMatrixTol || id_svd.S.size() == 0) {
    throw Error(ErrorCode::kZeroMatrix, "identity embedding is zero");
  }
  require_finite(z_sc, "scene embedding");
  const MatrixXd scene = align_scene_rows(z_sc, z_id.rows());

  OptimizationResult out;
  out.loss_trace.reserve(static_cast<std::size_t>(cfg.total_iters));
  VectorXd lambda = id_svd.S;
  double step = cfg.step_size;

  auto record_distances = [&](const MatrixXd& recon) {
    out.scene_distance.push_back((recon - scene).norm());
    out.id_distance.push_back((recon - z_id).norm());
  };
  record_distances(compose(id_svd, lambda));

  double initial_loss = 0.0;
  int increases = 0;
  for (int iter = 1; iter <= cfg.total_iters; ++iter) {
    const double beta = iter <= cfg.m_switch ? 0.0 : cfg.beta;
    const MatrixXd recon = compose(id_svd, lambda);
    const MatrixXd to_scene = recon - scene;
    const MatrixXd to_id = recon - z_id;
    const double loss =
        to_scene.squaredNorm() + beta * to_id.squaredNorm();

    if (iter == 1) initial_loss = loss;
    if (!std::isfinite(loss) ||
        (initial_loss > 0.0 && loss > kDivergenceFactor * initial_loss)) {
      throw Error(ErrorCode::kDiverged,
                  "loss " + std::to_string(loss) + " at iteration " +
                      std::to_string(iter));
    }
    if (!out.loss_trace.empty() && loss > out.loss_trace.back()) {
      if (++increases >= kIncreasesBeforeHalving) {
        step *= 0.5;
        increases = 0;
        out.step_halvings.push_back(iter);
      }
    } else {
      increases = 0;
    }
    out.loss_trace.push_back(loss);

    VectorXd grad = 2.0 * diagonal_projection(id_svd, to_scene);
    if (beta != 0.0) grad += 2.0 * beta * diagonal_projection(id_svd, to_id);
    lambda -= step * grad;
    if (cfg.clamp_nonnegative) lambda = lambda.cwiseMax(0.0);

    record_distances(compose(id_svd, lambda));
  }

  out.lambda_star = std::move(lambda);
  out.final_step_size = step;
  return out;
}

VectorXd excursion(const VectorXd& lambda_o, const VectorXd& lambda_star) {
  if (lambda_o.size() != lambda_star.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "spectra of length " + std::to_string(lambda_o.size()) +
                    " and " + std::to_string(lambda_star.size()));
  }
  return (lambda_star - lambda_o).cwiseAbs();
}

VectorXd reweight(const VectorXd& lambda_delta, double omega, bool invert,
                  double degenerate_eps) {
  if (!lambda_delta.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "excursion contains NaN or Inf");
  }
  if (lambda_delta.size() == 0) return VectorXd(0);
  if (lambda_delta.minCoeff() < 0.0) {
    throw Error(ErrorCode::kNegativeExcursion, "excursion values must be >= 0");
  }
  const double lo = lambda_delta.minCoeff();
  const double hi = lambda_delta.maxCoeff();
  const double range = hi - lo;
  if (range <= degenerate_eps) return VectorXd::Ones(lambda_delta.size());

  VectorXd normalized = (lambda_delta.array() - lo) / range;
  if (invert) normalized = (hi - lambda_delta.array()) / range;
  // Rounding can push the normalized value a hair outside [0, 1].
  return (1.0 + omega * normalized.array().max(0.0).min(1.0)).matrix();
}

RefineResult refine(const EmbeddingMatrix& z_id, const EmbeddingMatrix& z_sc,
                    const OptimizerConfig& cfg,
                    const ExcursionTransform& transform) {
  cfg.validate();
  if (z_id.values().norm() <= kZeroMatrixTol) {
    throw Error(ErrorCode::kZeroMatrix, "identity embedding is zero");
  }
  const SvdFactors f = truncated_svd(z_id.values());
  OptimizationResult opt =
      two_phase_optimize(f, z_id.values(), z_sc.values(), cfg);

  ExcursionProfile profile;
  profile.lambda_o = f.S;
  profile.lambda_star = opt.lambda_star;
  profile.lambda_delta = transform ? transform(f.S, opt.lambda_star)
                                   : excursion(f.S, opt.lambda_star);
  if (profile.lambda_delta.size() != f.S.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "excursion transform changed the spectrum length");
  }
  profile.lambda_omega = reweight(profile.lambda_delta, cfg.omega,
                                  cfg.invert_weighting, cfg.degenerate_eps);
  profile.loss_trace = std::move(opt.loss_trace);
  profile.scene_distance = std::move(opt.scene_distance);
  profile.id_distance = std::move(opt.id_distance);
  profile.step_halvings = std::move(opt.step_halvings);

  const VectorXd weighted = profile.lambda_omega.cwiseProduct(f.S);
  return RefineResult{EmbeddingMatrix(compose(f, weighted)), std::move(profile)};
}

EmbeddingMatrix pca_suppress(const EmbeddingMatrix& z,
                             SuppressionCriterion criterion,
                             const ExcursionProfile* profile,
                             double energy_threshold) {
  if (!(energy_threshold >= 0.0 && energy_threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "energy threshold must lie in [0, 1]");
  }
  if (criterion == SuppressionCriterion::kOmega && profile == nullptr) {
    throw Error(ErrorCode::kMissingProfile,
                "omega criterion needs an excursion profile");
  }
  if (z.values().norm() <= kZeroMatrixTol) {
    return EmbeddingMatrix(MatrixXd::Zero(z.rows(), z.cols()));
  }
  const SvdFactors f = truncated_svd(z.values());
  const VectorXd& values =
      criterion == SuppressionCriterion::kOriginal ? f.S : profile->lambda_omega;
  if (values.size() != f.S.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "profile has " + std::to_string(values.size()) +
                    " weights, matrix has " + std::to_string(f.S.size()) +
                    " singular directions");
  }

  std::vector<Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return values[a] > values[b]; });

  VectorXd kept = VectorXd::Zero(f.S.size());
  if (energy_threshold > 0.0) {
    std::vector<double> cumulative;
    double running = 0.0;
    for (Index idx : order) {
      running += values[idx] * values[idx];
      cumulative.push_back(running);
    }
    const double total = running;
    for (std::size_t k = 0; k < order.size(); ++k) {
      kept[order[k]] = f.S[order[k]];
      if (cumulative[k] >= energy_threshold * total) break;
    }
  }
  return EmbeddingMatrix(compose(f, kept));
}

}  // namespace sdec

#include "sdec/bounds.hpp"

#include <cmath>
#include <string>

#include "sdec/errors.hpp"
#include "sdec/random.hpp"

namespace sdec {
namespace {

constexpr double kNestedTol = 1e-8;

}  // namespace

BoundFactors prepare_bound(const MatrixXd& z_sc, const MatrixXd& w_v,
                           const Projector& pi_id, const Projector& pi_sc,
                           const Projector& p_cap) {
  const Index d = w_v.rows();
  if (w_v.cols() != d || z_sc.cols() != d || pi_id.dim() != d ||
      pi_sc.dim() != d || p_cap.dim() != d) {
    throw Error(ErrorCode::kDimensionMismatch,
                "W_V, Z_sc and projectors must share dimension d");
  }
  require_finite(z_sc, "Z_sc");
  require_finite(w_v, "W_V");

  const MatrixXd& pid = pi_id.matrix();
  const MatrixXd& psc = pi_sc.matrix();
  const MatrixXd& pcap = p_cap.matrix();
  const double nest_gap = (psc * pcap - pcap).norm();
  if (!(nest_gap <= kNestedTol)) {
    throw Error(ErrorCode::kNotNested,
                "||Pi_sc P_cap - P_cap||_F = " + std::to_string(nest_gap));
  }
  const Projector p_perp = Projector::from_matrix(psc - pcap);
  const MatrixXd& pperp = p_perp.matrix();

  BoundFactors f;
  f.z_sc = z_sc;
  f.scene_values = z_sc * w_v * pid;
  f.r_cap = z_sc * pcap;
  f.r_perp = z_sc * pperp;
  f.t_cap = pcap * w_v * pid;
  f.t_perp = pperp * w_v * pid;

  BoundBreakdown& b = f.norms;
  b.r_cap_norm = spectral_norm(f.r_cap);
  b.r_perp_norm = spectral_norm(f.r_perp);
  b.t_cap_fro = f.t_cap.norm();
  b.t_perp_fro = f.t_perp.norm();
  b.t_cap_fro_alt = (pid * w_v * pcap).norm();
  if (pi_id.rank() > 0) {
    const MatrixXd u = orth(pid);
    b.sigma_cap = (pcap * w_v * u).norm();
    b.sigma_perp = (pperp * w_v * u).norm();
  }
  return f;
}

BoundBreakdown evaluate_bound(const BoundFactors& f, const VectorXd& alpha_sc) {
  if (alpha_sc.size() != f.z_sc.rows()) {
    throw Error(ErrorCode::kLengthMismatch,
                "alpha_sc length differs from scene token count");
  }
  require_finite(alpha_sc, "alpha_sc");
  if (alpha_sc.size() > 0 && alpha_sc.minCoeff() < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "alpha_sc has negative entries");
  }

  BoundBreakdown b = f.norms;
  b.epsilon = alpha_sc.norm();
  b.bound = b.epsilon * (b.r_cap_norm * b.t_cap_fro + b.r_perp_norm * b.t_perp_fro);
  b.bound_sigma =
      b.epsilon * (b.r_cap_norm * b.sigma_cap + b.r_perp_norm * b.sigma_perp);

  const Eigen::RowVectorXd a = alpha_sc.transpose();
  b.measured = (a * f.scene_values).norm();
  b.term_cap = ((a * f.r_cap) * f.t_cap).norm();
  b.term_perp = ((a * f.r_perp) * f.t_perp).norm();
  return b;
}

BoundBreakdown compute_bound(const MatrixXd& z_sc, const VectorXd& alpha_sc,
                             const MatrixXd& w_v, const Projector& pi_id,
                             const Projector& pi_sc, const Projector& p_cap) {
  if (alpha_sc.size() != z_sc.rows()) {
    throw Error(ErrorCode::kLengthMismatch,
                "alpha_sc length differs from scene token count");
  }
  return evaluate_bound(prepare_bound(z_sc, w_v, pi_id, pi_sc, p_cap), alpha_sc);
}

void BoundSweepConfig::validate() const {
  spec.validate();
  if (trials < 1) {
    throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
  }
  if (n_id < 1 || n_sc < 1) {
    throw Error(ErrorCode::kInvalidArgument, "n_id and n_sc must be >= 1");
  }
}

BoundSweepSummary monte_carlo_bound_sweep(const BoundSweepConfig& config) {
  config.validate();
  BoundSweepSummary summary;
  summary.trials = config.trials;
  std::vector<double> ratios;

  for (Index t = 0; t < config.trials; ++t) {
    try {
      SubspaceSpec spec = config.spec;
      spec.seed = derive_seed(config.seed, static_cast<std::uint64_t>(t));
      const SyntheticInstance inst =
          make_instance(spec, config.n_id, config.n_sc);
      const BoundFactors factors = prepare_bound(
          inst.z.values().middleRows(inst.sc_rows.begin, inst.sc_rows.size()),
          inst.weights.value, inst.pi_id, inst.pi_sc, inst.p_cap);
      for (Index q = inst.id_rows.begin; q < inst.id_rows.end; ++q) {
        const AttentionResult fwd = attention_forward(inst.z, inst.weights, q);
        const VectorXd alpha_sc =
            fwd.alpha.segment(inst.sc_rows.begin, inst.sc_rows.size());
        const BoundBreakdown b = evaluate_bound(factors, alpha_sc);
        ++summary.instances;
        const double slack = kBoundRelativeTolerance;
        if (b.measured > b.bound * (1.0 + slack)) ++summary.violations;
        const double cap_limit = b.epsilon * b.r_cap_norm * b.t_cap_fro;
        const double perp_limit = b.epsilon * b.r_perp_norm * b.t_perp_fro;
        if (b.term_cap > cap_limit * (1.0 + slack) ||
            b.term_perp > perp_limit * (1.0 + slack)) {
          ++summary.chain_violations;
        }
        if (b.bound > 0.0) ratios.push_back(b.measured / b.bound);
        summary.max_first_summand = std::max(summary.max_first_summand, cap_limit);
        summary.max_sigma_bound_gap =
            std::max(summary.max_sigma_bound_gap,
                     std::abs(b.bound_sigma - b.bound) / std::max(1.0, b.bound));
        summary.max_t_sigma_gap =
            std::max({summary.max_t_sigma_gap, std::abs(b.t_cap_fro - b.sigma_cap),
                      std::abs(b.t_perp_fro - b.sigma_perp)});
      }
    } catch (const Error& e) {
      throw Error(e.code(), "trial " + std::to_string(t) + ": " + e.what());
    }
  }
  summary.tightness = Quantiles::of(std::move(ratios));
  return summary;
}

}  // namespace sdec

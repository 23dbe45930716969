#include "sdec/attention_sim.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sdec/errors.hpp"
#include "sdec/random.hpp"

namespace sdec {
namespace {

constexpr double kNonzeroThreshold = 1e-12;
constexpr double kDisjointTol = 1e-8;

void require_square(const MatrixXd& m, Index d, const char* what) {
  if (m.rows() != d || m.cols() != d) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + " must be " + std::to_string(d) + "x" +
                    std::to_string(d));
  }
}

double degenerate_scale(const MatrixXd& z_sc, const MatrixXd& w_v) {
  return std::max(1.0, z_sc.norm() * w_v.norm());
}

}  // namespace

void SubspaceSpec::validate() const {
  if (d < 1 || k_id < 1 || k_sc < 1 || k_cap < 0) {
    throw Error(ErrorCode::kInfeasibleSpec,
                "need d >= 1, k_id >= 1, k_sc >= 1, k_cap >= 0");
  }
  if (k_cap > std::min(k_id, k_sc)) {
    throw Error(ErrorCode::kInfeasibleSpec, "k_cap exceeds min(k_id, k_sc)");
  }
  if (k_id + k_sc - k_cap > d) {
    throw Error(ErrorCode::kInfeasibleSpec,
                "k_id + k_sc - k_cap = " + std::to_string(k_id + k_sc - k_cap) +
                    " exceeds d = " + std::to_string(d));
  }
}

AttentionWeights AttentionWeights::random(Index d, std::uint64_t seed) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
  AttentionWeights w;
  w.query = gaussian_matrix(d, d, derive_seed(seed, 0), stddev);
  w.key = gaussian_matrix(d, d, derive_seed(seed, 1), stddev);
  w.value = gaussian_matrix(d, d, derive_seed(seed, 2), stddev);
  w.key_dim = static_cast<double>(d);
  return w;
}

SubspaceBases build_subspaces(const SubspaceSpec& spec) {
  spec.validate();
  const Index width = spec.k_id + spec.k_sc - spec.k_cap;
  const MatrixXd frame =
      orthonormalize_columns(gaussian_matrix(spec.d, width, spec.seed));
  const Index shared_begin = spec.k_id - spec.k_cap;
  return SubspaceBases{
      frame.leftCols(spec.k_id),
      frame.middleCols(shared_begin, spec.k_sc),
      frame.middleCols(shared_begin, spec.k_cap),
  };
}

EmbeddingMatrix sample_embedding(const MatrixXd& basis, Index n,
                                 std::uint64_t seed) {
  if (n < 1) {
    throw Error(ErrorCode::kInvalidArgument, "token count must be >= 1");
  }
  require_finite(basis, "basis");
  const MatrixXd coeffs = gaussian_matrix(n, basis.cols(), seed);
  return EmbeddingMatrix(coeffs * basis.transpose());
}

AttentionResult attention_forward(const EmbeddingMatrix& z,
                                  const AttentionWeights& w, Index q_row,
                                  std::optional<RowRange> masked) {
  const Index n = z.rows();
  const Index d = z.cols();
  if (q_row < 0 || q_row >= n) {
    throw Error(ErrorCode::kInvalidArgument,
                "query row " + std::to_string(q_row) + " outside 0.." +
                    std::to_string(n));
  }
  require_square(w.query, d, "W_Q");
  require_square(w.key, d, "W_K");
  require_square(w.value, d, "W_V");
  if (!(w.key_dim > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "key_dim must be positive");
  }
  require_finite(w.query, "W_Q");
  require_finite(w.key, "W_K");
  require_finite(w.value, "W_V");

  const MatrixXd& zv = z.values();
  const VectorXd q = (zv.row(q_row) * w.query).transpose();
  const MatrixXd keys = zv * w.key;
  VectorXd logits = (keys * q) / std::sqrt(w.key_dim);

  std::vector<bool> is_masked(static_cast<std::size_t>(n), false);
  if (masked) {
    for (Index i = std::max<Index>(0, masked->begin);
         i < std::min(n, masked->end); ++i) {
      is_masked[static_cast<std::size_t>(i)] = true;
    }
  }

  double max_logit = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    if (is_masked[static_cast<std::size_t>(i)]) continue;
    if (!std::isfinite(logits[i])) {
      throw Error(ErrorCode::kNonFinite, "attention logit overflow");
    }
    max_logit = std::max(max_logit, logits[i]);
  }
  if (!std::isfinite(max_logit)) {
    throw Error(ErrorCode::kInvalidArgument, "every token is masked");
  }

  VectorXd alpha(n);
  for (Index i = 0; i < n; ++i) {
    alpha[i] = is_masked[static_cast<std::size_t>(i)]
                   ? 0.0
                   : std::exp(logits[i] - max_logit);
  }
  const double total = alpha.sum();
  if (!std::isfinite(total) || total <= 0.0) {
    throw Error(ErrorCode::kNonFinite, "softmax normalizer is not finite");
  }
  alpha /= total;

  AttentionResult result;
  result.output = ((zv * w.value).transpose() * alpha);
  result.alpha = std::move(alpha);
  return result;
}

ContextualizationReport split_contextualization(const EmbeddingMatrix& z,
                                                const AttentionWeights& w,
                                                Index q_row, RowRange id_slice,
                                                RowRange sc_slice,
                                                const Projector& pi_id,
                                                bool mask_scene) {
  const Index n = z.rows();
  if (id_slice.begin < 0 || sc_slice.begin < 0 || id_slice.end > n ||
      sc_slice.end > n || id_slice.empty()) {
    throw Error(ErrorCode::kSliceOverlap, "slices must lie within 0..n");
  }
  if (id_slice.overlaps(sc_slice)) {
    throw Error(ErrorCode::kSliceOverlap, "identity and scene slices overlap");
  }
  if (id_slice.size() + std::max<Index>(0, sc_slice.size()) != n) {
    throw Error(ErrorCode::kSliceOverlap,
                "identity and scene slices must partition 0..n");
  }
  if (!id_slice.contains(q_row)) {
    throw Error(ErrorCode::kQueryNotInId,
                "query row " + std::to_string(q_row) +
                    " is not an identity token");
  }
  if (pi_id.dim() != z.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "Pi_id dimension differs from embedding dimension");
  }

  AttentionResult fwd = attention_forward(
      z, w, q_row, mask_scene ? std::optional<RowRange>(sc_slice) : std::nullopt);

  const MatrixXd& zv = z.values();
  const MatrixXd& pi = pi_id.matrix();
  ContextualizationReport report;
  report.attention = AttentionRow{fwd.alpha, id_slice, sc_slice};

  auto weighted_values = [&](const RowRange& r) -> VectorXd {
    if (r.empty()) return VectorXd::Zero(z.cols());
    const VectorXd a = fwd.alpha.segment(r.begin, r.size());
    return (zv.middleRows(r.begin, r.size()) * w.value).transpose() * a;
  };
  report.t_id = pi.transpose() * weighted_values(id_slice);
  report.t_sc = pi.transpose() * weighted_values(sc_slice);
  report.t_sc_norm = report.t_sc.norm();
  report.projected_output = pi.transpose() * fwd.output;
  report.output = std::move(fwd.output);
  return report;
}

AttentionWeights make_degenerate_wv(const MatrixXd& b_id, const MatrixXd& b_sc,
                                    std::uint64_t seed) {
  const VectorXd cosines = principal_angle_cosines(b_id, b_sc);
  if (cosines.size() > 0 && cosines.maxCoeff() > kDisjointTol) {
    throw Error(ErrorCode::kNonDisjoint,
                "identity and scene subspaces intersect (max cosine " +
                    std::to_string(cosines.maxCoeff()) + ")");
  }
  const Index d = b_id.rows();
  const MatrixXd pi_id = b_id * b_id.transpose();
  const MatrixXd pi_sc = b_sc * b_sc.transpose();

  AttentionWeights w = AttentionWeights::random(d, seed);
  const MatrixXd w0 = w.value;
  w.value = w0 - pi_sc * w0 * pi_id;
  return w;
}

SyntheticInstance make_instance(const SubspaceSpec& spec, Index n_id,
                                Index n_sc) {
  SubspaceBases bases = build_subspaces(spec);
  const EmbeddingMatrix z_id =
      sample_embedding(bases.id, n_id, derive_seed(spec.seed, 11));
  const EmbeddingMatrix z_sc =
      sample_embedding(bases.scene, n_sc, derive_seed(spec.seed, 12));
  MatrixXd stacked(n_id + n_sc, spec.d);
  stacked << z_id.values(), z_sc.values();

  Projector pi_id = Projector::from_basis(bases.id);
  Projector pi_sc = Projector::from_basis(bases.scene);
  Projector p_cap = spec.k_cap > 0 ? Projector::from_basis(bases.shared)
                                   : Projector::zero(spec.d);
  return SyntheticInstance{
      std::move(bases),
      EmbeddingMatrix(std::move(stacked)),
      RowRange{0, n_id},
      RowRange{n_id, n_id + n_sc},
      AttentionWeights::random(spec.d, derive_seed(spec.seed, 13)),
      std::move(pi_id),
      std::move(pi_sc),
      std::move(p_cap),
  };
}

void ContextualizationSweepConfig::validate() const {
  spec.validate();
  if (trials < 1) {
    throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
  }
  if (n_id < 1 || n_sc < 1) {
    throw Error(ErrorCode::kInvalidArgument, "n_id and n_sc must be >= 1");
  }
  if (degenerate_seeds < 0) {
    throw Error(ErrorCode::kInvalidArgument, "degenerate_seeds must be >= 0");
  }
}

ContextualizationSweepSummary run_contextualization_sweep(
    const ContextualizationSweepConfig& config) {
  config.validate();
  ContextualizationSweepSummary summary;
  summary.trials = config.trials;
  summary.min_alpha_entry = std::numeric_limits<double>::infinity();
  summary.per_query_min_t_sc_norm.assign(
      static_cast<std::size_t>(config.n_id),
      std::numeric_limits<double>::infinity());

  std::vector<double> norms;
  norms.reserve(static_cast<std::size_t>(config.trials * config.n_id));
  for (Index t = 0; t < config.trials; ++t) {
    SubspaceSpec spec = config.spec;
    spec.seed = derive_seed(config.seed, static_cast<std::uint64_t>(t));
    const SyntheticInstance inst = make_instance(spec, config.n_id, config.n_sc);
    for (Index q = inst.id_rows.begin; q < inst.id_rows.end; ++q) {
      const ContextualizationReport r = split_contextualization(
          inst.z, inst.weights, q, inst.id_rows, inst.sc_rows, inst.pi_id);
      const double rel_err =
          (r.t_id + r.t_sc - r.projected_output).norm() /
          std::max(1.0, r.output.norm());
      summary.max_decomposition_error =
          std::max(summary.max_decomposition_error, rel_err);
      summary.max_alpha_sum_error = std::max(
          summary.max_alpha_sum_error, std::abs(r.attention.alpha.sum() - 1.0));
      summary.min_alpha_entry =
          std::min(summary.min_alpha_entry, r.attention.alpha.minCoeff());
      if (r.t_sc_norm > kNonzeroThreshold) ++summary.nonzero_instances;
      auto& slot = summary.per_query_min_t_sc_norm[static_cast<std::size_t>(
          q - inst.id_rows.begin)];
      slot = std::min(slot, r.t_sc_norm);
      norms.push_back(r.t_sc_norm);
      ++summary.instances;
    }
  }
  summary.t_sc_norm = Quantiles::of(std::move(norms));

  if (config.spec.k_cap == 0 && config.degenerate_seeds > 0) {
    summary.degenerate_checked = true;
    for (Index s = 0; s < config.degenerate_seeds; ++s) {
      SubspaceSpec spec = config.spec;
      spec.seed = static_cast<std::uint64_t>(s);
      SyntheticInstance inst = make_instance(spec, config.n_id, config.n_sc);
      inst.weights = make_degenerate_wv(inst.bases.id, inst.bases.scene,
                                        static_cast<std::uint64_t>(s));
      const MatrixXd z_sc =
          inst.z.values().middleRows(inst.sc_rows.begin, inst.sc_rows.size());
      const double scale = degenerate_scale(z_sc, inst.weights.value);
      for (Index q = inst.id_rows.begin; q < inst.id_rows.end; ++q) {
        const ContextualizationReport r = split_contextualization(
            inst.z, inst.weights, q, inst.id_rows, inst.sc_rows, inst.pi_id);
        summary.degenerate_max_ratio =
            std::max(summary.degenerate_max_ratio, r.t_sc_norm / scale);
      }
    }
  }
  return summary;
}

}  // namespace sdec

#pragma once

// A single synthetic softmax attention block over a prompt embedding whose
// rows are split into identity tokens and scene tokens. Used to measure how
// much of the scene tokens' value vectors lands in the identity subspace.
//
// Convention: embeddings are row vectors and projectors act by
// right-multiplication, so "project x onto H_id" is x * Pi_id.

#include <cstdint>
#include <optional>
#include <vector>

#include "sdec/spectral.hpp"
#include "sdec/stats.hpp"

namespace sdec {

struct SubspaceSpec {
  Index d = 64;
  Index k_id = 8;
  Index k_sc = 8;
  Index k_cap = 0;
  std::uint64_t seed = 0;

  /// Throws InfeasibleSpec.
  void validate() const;
};

struct SubspaceBases {
  MatrixXd id;      // d x k_id
  MatrixXd scene;   // d x k_sc
  MatrixXd shared;  // d x k_cap, the columns id and scene have in common
};

/// Half-open row range [begin, end).
struct RowRange {
  Index begin = 0;
  Index end = 0;

  Index size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(Index i) const { return i >= begin && i < end; }
  bool overlaps(const RowRange& o) const {
    return !empty() && !o.empty() && begin < o.end && o.begin < end;
  }
};

struct AttentionWeights {
  MatrixXd query;
  MatrixXd key;
  MatrixXd value;
  double key_dim = 0.0;  // softmax scale is 1/sqrt(key_dim)

  /// Entries i.i.d. N(0, 1/d); key_dim = d.
  static AttentionWeights random(Index d, std::uint64_t seed);

  Index dim() const { return value.rows(); }
};

struct AttentionResult {
  VectorXd alpha;   // softmax row, length n
  VectorXd output;  // alpha^T (Z W_V), length d
};

struct AttentionRow {
  VectorXd alpha;
  RowRange id_slice;
  RowRange sc_slice;
};

struct ContextualizationReport {
  AttentionRow attention;
  VectorXd output;            // O(q_id)
  VectorXd projected_output;  // O(q_id) * Pi_id
  VectorXd t_id;
  VectorXd t_sc;
  double t_sc_norm = 0.0;
};

/// Random orthonormal frame split into an identity basis and a scene basis
/// that share exactly k_cap columns.
SubspaceBases build_subspaces(const SubspaceSpec& spec);

/// n rows, each a standard-normal combination of the columns of `basis`.
EmbeddingMatrix sample_embedding(const MatrixXd& basis, Index n,
                                 std::uint64_t seed);

/// Softmax attention of row `q_row` against all rows of Z. Logits of rows in
/// `masked` are set to -inf before normalization.
AttentionResult attention_forward(const EmbeddingMatrix& z,
                                  const AttentionWeights& w, Index q_row,
                                  std::optional<RowRange> masked = std::nullopt);

/// Splits the identity projection of the attention output into the part
/// contributed by identity tokens (T_id) and by scene tokens (T_sc).
/// With mask_scene the scene logits are masked, forcing alpha_sc = 0.
ContextualizationReport split_contextualization(const EmbeddingMatrix& z,
                                                const AttentionWeights& w,
                                                Index q_row, RowRange id_slice,
                                                RowRange sc_slice,
                                                const Projector& pi_id,
                                                bool mask_scene = false);

/// W_V = W0 - Pi_sc W0 Pi_id: every scene vector maps orthogonally to H_id.
/// Requires disjoint subspaces (throws NonDisjoint otherwise).
AttentionWeights make_degenerate_wv(const MatrixXd& b_id, const MatrixXd& b_sc,
                                    std::uint64_t seed);

/// One fully specified random instance: Z = [Z_id; Z_sc] plus projectors.
struct SyntheticInstance {
  SubspaceBases bases;
  EmbeddingMatrix z;
  RowRange id_rows;
  RowRange sc_rows;
  AttentionWeights weights;
  Projector pi_id;
  Projector pi_sc;
  Projector p_cap;
};

SyntheticInstance make_instance(const SubspaceSpec& spec, Index n_id,
                                Index n_sc);

struct ContextualizationSweepConfig {
  SubspaceSpec spec;
  Index n_id = 16;
  Index n_sc = 16;
  Index trials = 1000;
  std::uint64_t seed = 0;
  Index degenerate_seeds = 10;

  void validate() const;
};

struct ContextualizationSweepSummary {
  Index trials = 0;
  Index instances = 0;  // trials x identity query rows
  Quantiles t_sc_norm;
  Index nonzero_instances = 0;        // t_sc_norm > 1e-12
  double max_decomposition_error = 0; // relative, |T_id + T_sc - O Pi_id|
  double max_alpha_sum_error = 0;
  double min_alpha_entry = 0;
  std::vector<double> per_query_min_t_sc_norm;  // indexed by identity row
  bool degenerate_checked = false;    // only when k_cap == 0
  double degenerate_max_ratio = 0;    // max t_sc_norm / scale over seeds
};

/// Relative slack used when judging a degenerate instance's T_sc as zero.
inline constexpr double kDegenerateTolerance = 1e-10;

ContextualizationSweepSummary run_contextualization_sweep(
    const ContextualizationSweepConfig& config);

}  // namespace sdec

"""Scene de-contextualization of prompt embeddings (C++ core)."""

from ._sdec import (
    OptimizerConfig,
    SdecError,
    attention_forward,
    build_subspaces,
    compute_bound,
    estimate_intersection,
    excursion,
    hard_suppress,
    load_array,
    make_degenerate_wv,
    monte_carlo_bound_sweep,
    orth,
    pca_suppress,
    principal_angle_cosines,
    projector_from_basis,
    refine,
    reweight,
    sample_embedding,
    save_array,
    spectral_norm,
    split_contextualization,
    svd_decompose,
    two_phase_optimize,
)

__version__ = "0.1.0"

__all__ = [
    "OptimizerConfig",
    "SdecError",
    "attention_forward",
    "build_subspaces",
    "compute_bound",
    "estimate_intersection",
    "excursion",
    "hard_suppress",
    "load_array",
    "make_degenerate_wv",
    "monte_carlo_bound_sweep",
    "orth",
    "pca_suppress",
    "principal_angle_cosines",
    "projector_from_basis",
    "refine",
    "reweight",
    "sample_embedding",
    "save_array",
    "spectral_norm",
    "split_contextualization",
    "svd_decompose",
    "two_phase_optimize",
]

"""Control-flow-change features from IA-32 PE files."""

from ._core import (
    CfcscanError,
    RawModel,
    decode,
    displacements,
    gate,
    load_model,
    ngram_histogram,
    run_cli,
    sample_stats,
    scan_file,
    sha256_hex,
    shannon_entropy,
    spearman_rho,
    train_raw,
)

__all__ = [
    "CfcscanError",
    "RawModel",
    "decode",
    "displacements",
    "gate",
    "load_model",
    "ngram_histogram",
    "run_cli",
    "sample_stats",
    "scan_file",
    "sha256_hex",
    "shannon_entropy",
    "spearman_rho",
    "train_raw",
]

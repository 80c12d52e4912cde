"""Multi-scale orthogonal factor models for multiple binary networks."""

import json
import os

from ._core import (
    ConfigError,
    Error,
    FileError,
    RankError,
    ValidationError,
    build_x,
    cells_at_level,
    cholesky,
    ess_batch_means,
    extract_column_partition,
    log_g,
    orthonormality_error,
    potential,
    random_partition,
    rank_ok,
    subspace_error,
    whiten,
    whiten_backward,
)

__all__ = [
    "ConfigError",
    "Error",
    "FileError",
    "RankError",
    "ValidationError",
    "build_x",
    "cells_at_level",
    "cholesky",
    "ess_batch_means",
    "extract_column_partition",
    "fit",
    "log_g",
    "orthonormality_error",
    "potential",
    "random_partition",
    "rank_ok",
    "simulate",
    "subspace_error",
    "summarize",
    "whiten",
    "whiten_backward",
]


def simulate(config):
    """Write dataset.json, truth.json and config.json under config["out"]; return the truth."""
    from ._core import _simulate

    return json.loads(_simulate(json.dumps(config)))


def fit(config):
    """Run the sampler chains and write their traces; return per-chain statistics."""
    from ._core import _fit

    return json.loads(_fit(json.dumps(config)))


def summarize(config, truth=None):
    """Pool chain traces under config["out"] into summary.json and return it."""
    from ._core import _summarize

    return json.loads(_summarize(json.dumps(config), None if truth is None else os.fspath(truth)))

"""Double machine learning with multimodal confounders."""

import json

from ._core import (
    Dataset,
    DegenerateError,
    Error,
    IoError,
    NumericalError,
    SchemaError,
    TrainingDivergedError,
    ValidationError,
    WeakIdentificationError,
    import_embeddings,
    ols_baseline,
    read_dataset,
    write_dataset,
)
from . import _core

__all__ = [
    "Dataset",
    "DegenerateError",
    "Error",
    "IoError",
    "NumericalError",
    "SchemaError",
    "TrainingDivergedError",
    "ValidationError",
    "WeakIdentificationError",
    "attenuated_theta_plim",
    "benchmark",
    "estimate",
    "generate",
    "import_embeddings",
    "ols_baseline",
    "oracle_bounds",
    "orthogonality_check",
    "read_dataset",
    "trace",
    "write_dataset",
]


def generate(dgp=None, seed=0):
    """Semi-synthetic dataset from a dgp config dict (same keys as the JSON config)."""
    return _core._generate(json.dumps(dgp or {}), seed)


def attenuated_theta_plim(dgp=None):
    return _core._attenuated_theta_plim(json.dumps(dgp or {}))


def oracle_bounds(dataset):
    return json.loads(_core._oracle_bounds(dataset))


def estimate(dataset, learner=None, modalities=None, scheme=None, threads=1, alpha=0.05):
    """Theta estimate for one learner spec dict, e.g. {"kind": "ridge", "penalty": 1.0}."""
    learner = learner or {"kind": "ridge"}
    return json.loads(
        _core._estimate(dataset, json.dumps(learner), list(modalities or []), json.dumps(scheme or {}), threads, alpha)
    )


def benchmark(dataset, config, threads=1):
    """Runs the roster of a run config dict and returns the report as a dict."""
    return json.loads(_core._benchmark(dataset, json.dumps(config), threads))


def trace(dataset, learner=None, modalities=None, train_fraction=0.5, split_seed=0, alpha=0.05):
    """Per-epoch estimates of a fusion learner; one dict per epoch."""
    learner = learner or {"kind": "fusion"}
    return json.loads(
        _core._trace(dataset, json.dumps(learner), list(modalities or []), train_fraction, split_seed, alpha)
    )


def orthogonality_check(dataset, t=0.01, seed=0, naive=False):
    """Finite-difference derivatives (d/dl, d/dm) of the mean score at the true nuisances."""
    return _core._orthogonality_check(dataset, t, seed, naive)

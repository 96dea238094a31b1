"""Explainable credit scoring: transaction KPIs, resampling, models and TreeSHAP."""

import json as _json

from . import _core
from ._core import (
    ComputeError,
    ConfigError,
    DataError,
    Model,
    benchmark,
    build_features,
    gini,
    kpi_names,
    resample,
    roc_auc,
    stage_names,
    standardize,
    synthesize,
)

__all__ = [
    "ComputeError", "ConfigError", "DataError", "Model", "benchmark", "build_features", "cross_validate",
    "fit", "gini", "kpi_names", "resample", "roc_auc", "run_stage", "stage_names", "standardize", "synthesize",
]


def _dump(config):
    return _json.dumps(config or {})


def fit(family, x, y, names=None, config=None, weights=None):
    """Fit a model family ('logistic', 'oblivious_boosting', ...) on x, y."""
    return _core.fit(family, x, list(y), list(names or []), _dump(config), list(weights or []))


def cross_validate(family, x, y, k=5, seed=0, resampler="none", config=None):
    """Stratified k-fold CV; returns the fold Ginis, mean, std and pooled ROC as a dict."""
    return _json.loads(_core.cross_validate(family, x, list(y), k, seed, resampler, _dump(config)))


def run_stage(stage, config):
    """Run a pipeline stage with a config dict (flat dotted keys or nested)."""
    return _core.run_stage(stage, _dump(config))

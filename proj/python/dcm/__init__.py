"""Determinantal subset-choice models."""

import json as _json

from . import _dcm
from ._dcm import (
    DcmError,
    build_kernel,
    enumerate_pmf,
    fit,
    log_det_submatrix,
    log_normalizer,
    logistic_log_likelihood,
    mcc,
    mnl_log_likelihood,
    sample,
    simulate_lora,
    simulate_spatial,
    subset_probability,
    sweep,
)

__version__ = _dcm.__version__


def verify(seed=0, trials=0, draws=100000):
    """Run the equivalence checks and return the report as a dict."""
    return _json.loads(_dcm.verify(seed, trials, draws))


__all__ = [
    "DcmError",
    "build_kernel",
    "enumerate_pmf",
    "fit",
    "log_det_submatrix",
    "log_normalizer",
    "logistic_log_likelihood",
    "mcc",
    "mnl_log_likelihood",
    "sample",
    "simulate_lora",
    "simulate_spatial",
    "subset_probability",
    "sweep",
    "verify",
]

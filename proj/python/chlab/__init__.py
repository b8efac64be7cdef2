"""Conformal Hadamard covariance checks."""

import csv
import io
import json

from ._chlab import (
    Catalog,
    CatalogError,
    UsageError,
    pairing_count,
    stated_alpha,
    suite_names,
    wick_expand,
    wick_inverse,
)
from . import _chlab

__all__ = [
    "Catalog",
    "CatalogError",
    "UsageError",
    "pairing_count",
    "stated_alpha",
    "run",
    "suite_names",
    "wick_expand",
    "wick_inverse",
]


def run(catalog, suite="all", seed=42, kappa=0.5, mu=1.0, tol_scale=1.0, threads=0):
    """Run suites; returns (rows, report) with rows from the CSV and report from the JSON."""
    text, js = _chlab.run(catalog, suite, seed, kappa, mu, tol_scale, threads)
    rows = list(csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#")))
    return rows, json.loads(js)

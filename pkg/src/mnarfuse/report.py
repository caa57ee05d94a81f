"""Estimate reports and the numeric array view of a pooled dataset."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import DomainTag, PooledDataset, expand_m
from .solver import SolverResult


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    method: str = "percentile-bootstrap"
    n_failed: int = 0

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass
class EstimateReport:
    beta_hat: float
    estimator: str
    nuisance: dict = field(default_factory=dict)
    solver: Optional[SolverResult] = None
    diagnostics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    ci: Optional[ConfidenceInterval] = None

    def to_dict(self) -> dict:
        out = {
            "beta_hat": self.beta_hat,
            "estimator": self.estimator,
            "nuisance": {k: list(np.atleast_1d(v)) for k, v in self.nuisance.items()},
            "diagnostics": dict(self.diagnostics),
            "warnings": list(self.warnings),
        }
        if self.solver is not None:
            out["solver"] = {
                "status": self.solver.status,
                "final_residual_norm": self.solver.final_residual_norm,
                "iterations": self.solver.iterations,
            }
        if self.ci is not None:
            out["ci"] = {
                "lo": self.ci.lo,
                "hi": self.ci.hi,
                "width": self.ci.width,
                "method": self.ci.method,
                "n_failed": self.ci.n_failed,
            }
        return out


@dataclass(frozen=True)
class DomainArrays:
    """Numeric view of one domain: NaN marks missing M / Y entries."""

    x: np.ndarray  # (n, d)
    m: np.ndarray  # (n, m_dim)
    y: np.ndarray  # (n,)
    r: np.ndarray  # (n,) in {0, 1}

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def complete(self) -> np.ndarray:
        return self.r == 1


def domain_arrays(dataset: PooledDataset, tag: DomainTag) -> DomainArrays:
    schema = dataset.schema
    m_dim = schema.m_dim
    recs = [rec for rec in dataset.records if rec.g == tag]
    n = len(recs)
    x = np.empty((n, schema.n_covariates))
    m = np.full((n, m_dim), np.nan)
    y = np.full(n, np.nan)
    r = np.empty(n, dtype=int)
    for i, rec in enumerate(recs):
        x[i] = rec.x
        r[i] = rec.r
        if rec.m is not None:
            m[i] = expand_m(rec.m, schema)
        if rec.y is not None:
            y[i] = rec.y
    return DomainArrays(x=x, m=m, y=y, r=r)

"""Resampling-based uncertainty and Monte Carlo replication.

Both routines key every random draw off a root seed and an integer path
(resample index or replicate index) through the same counter-based generator
the simulators use, so results do not depend on execution order or on the
number of worker processes.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .baselines import mar_estimate, mcar_estimate
from .data import DomainTag, PooledDataset
from .model1 import estimate_model1
from .model2 import estimate_model2
from .report import ConfidenceInterval, EstimateReport
from .simulate import (
    Model1Design,
    Model2Design,
    TrueBeta,
    generate_model1,
    generate_model2,
    make_rng,
    true_beta,
)

Estimator = Callable[[PooledDataset], EstimateReport]


class BootstrapError(RuntimeError):
    pass


@dataclass(frozen=True)
class BootstrapConfig:
    k: int = 1000
    ci_level: float = 0.95
    stratified_by_domain: bool = True
    seed: int = 0
    max_failure_fraction: float = 0.2


def _resample(dataset: PooledDataset, rng: np.random.Generator,
              stratified: bool) -> PooledDataset:
    records = dataset.records
    if stratified:
        picked = []
        for tag in (DomainTag.PRIMARY, DomainTag.AUXILIARY):
            idx = [i for i, rec in enumerate(records) if rec.g == tag]
            if idx:
                draw = rng.integers(0, len(idx), size=len(idx))
                picked.extend(records[idx[j]] for j in draw)
        resampled = tuple(picked)
    else:
        draw = rng.integers(0, len(records), size=len(records))
        resampled = tuple(records[j] for j in draw)
    return PooledDataset(records=resampled, schema=dataset.schema)


def bootstrap_ci(
    dataset: PooledDataset,
    estimator: Estimator,
    config: Optional[BootstrapConfig] = None,
) -> ConfidenceInterval:
    """Percentile bootstrap interval for the point estimator.

    Resampling is with replacement within each domain (domain sizes are fixed
    design quantities, not random).  Resamples where the estimator raises or
    returns a non-finite value are dropped and counted; more than
    max_failure_fraction failures is an error rather than a silently
    narrower interval.
    """
    if config is None:
        config = BootstrapConfig()
    estimates = []
    n_failed = 0
    for b in range(config.k):
        rng = make_rng(config.seed, b)
        resampled = _resample(dataset, rng, config.stratified_by_domain)
        try:
            value = estimator(resampled).beta_hat
        except Exception:
            n_failed += 1
            continue
        if not math.isfinite(value):
            n_failed += 1
            continue
        estimates.append(value)
    if n_failed > config.max_failure_fraction * config.k:
        raise BootstrapError(
            f"{n_failed} of {config.k} bootstrap resamples failed"
        )
    tail = 0.5 * (1.0 - config.ci_level)
    lo, hi = np.quantile(np.asarray(estimates), [tail, 1.0 - tail])
    return ConfidenceInterval(lo=float(lo), hi=float(hi),
                              method="percentile-bootstrap", n_failed=n_failed)


# ---------------------------------------------------------------------------
# replication harness
# ---------------------------------------------------------------------------

def generate_for(design, seed: int) -> PooledDataset:
    if isinstance(design, Model1Design):
        return generate_model1(design, seed)[0]
    if isinstance(design, Model2Design):
        return generate_model2(design, seed)[0]
    raise TypeError(f"unknown design {type(design).__name__}")


def default_estimators(design) -> dict:
    """Named estimator bank for a design: the matching IPW estimator plus the
    MAR and MCAR references."""
    ipw = estimate_model1 if isinstance(design, Model1Design) else estimate_model2
    return {"ipw": ipw, "mar": mar_estimate, "mcar": mcar_estimate}


@dataclass(frozen=True)
class EstimatorSummary:
    name: str
    bias: float
    pct_bias: float
    mse: float
    variance: float
    mean: float
    n_ok: int
    n_failed: int


@dataclass(frozen=True)
class ReplicationReport:
    design_label: str
    n: int
    n_reps: int
    seed: int
    beta_true: TrueBeta
    summaries: tuple[EstimatorSummary, ...]
    estimates: dict  # name -> (n_reps,) array, NaN where the replicate failed

    def to_text(self) -> str:
        header = (
            f"{'estimator':<10} {'bias':>10} {'%bias':>10} {'mse':>10} "
            f"{'var':>10} {'n_ok':>6} {'n_fail':>6}"
        )
        lines = [
            f"design={self.design_label} n={self.n} reps={self.n_reps} "
            f"beta_true={self.beta_true.value:.4f} ({self.beta_true.provenance})",
            header,
        ]
        for s in self.summaries:
            lines.append(
                f"{s.name:<10} {s.bias:>10.4f} {100 * s.pct_bias:>9.2f}% "
                f"{s.mse:>10.4f} {s.variance:>10.4f} {s.n_ok:>6d} {s.n_failed:>6d}"
            )
        return "\n".join(lines)

    def write_summary_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["design", "n", "n_reps", "beta_true", "estimator",
                 "bias", "pct_bias", "mse", "variance", "n_ok", "n_failed"]
            )
            for s in self.summaries:
                writer.writerow(
                    [self.design_label, self.n, self.n_reps,
                     repr(self.beta_true.value), s.name, repr(s.bias),
                     repr(s.pct_bias), repr(s.mse), repr(s.variance),
                     s.n_ok, s.n_failed]
                )

    def write_replicates_csv(self, path: str) -> None:
        """Long-format replicate-level estimates (empty cell on failure)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["replicate", "estimator", "beta_hat"])
            for rep in range(self.n_reps):
                for name, values in self.estimates.items():
                    v = values[rep]
                    writer.writerow(
                        [rep, name, "" if np.isnan(v) else repr(float(v))]
                    )


def _run_replicate(design, seed: int, rep: int, estimators: dict) -> dict:
    dataset = generate_for(design, int(make_rng(seed, rep).integers(2**31)))
    out = {}
    for name, fn in estimators.items():
        try:
            value = fn(dataset).beta_hat
        except Exception:
            value = float("nan")
        out[name] = value if math.isfinite(value) else float("nan")
    return out


def replicate(
    design,
    n_reps: int,
    seed: int = 0,
    estimators: Optional[dict] = None,
    n_workers: int = 1,
    beta_true: Optional[TrueBeta] = None,
) -> ReplicationReport:
    """Monte Carlo replication of the estimator bank over fresh datasets.

    Replicate r draws its dataset seed from the (seed, r) stream, so the
    estimate array is a pure function of (design, seed, n_reps) regardless of
    worker count or completion order.
    """
    if estimators is None:
        estimators = default_estimators(design)
    if beta_true is None:
        beta_true = true_beta(design)

    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(
                pool.map(
                    _run_replicate,
                    [design] * n_reps,
                    [seed] * n_reps,
                    range(n_reps),
                    [estimators] * n_reps,
                    chunksize=max(1, n_reps // (4 * n_workers)),
                )
            )
    else:
        rows = [_run_replicate(design, seed, rep, estimators) for rep in range(n_reps)]

    estimates = {
        name: np.array([row[name] for row in rows]) for name in estimators
    }
    summaries = []
    for name, values in estimates.items():
        ok = values[np.isfinite(values)]
        n_ok = ok.size
        if n_ok == 0:
            summaries.append(EstimatorSummary(name, math.nan, math.nan, math.nan,
                                              math.nan, math.nan, 0, n_reps))
            continue
        bias = float(ok.mean() - beta_true.value)
        summaries.append(
            EstimatorSummary(
                name=name,
                bias=bias,
                pct_bias=bias / beta_true.value,
                mse=float(np.mean((ok - beta_true.value) ** 2)),
                variance=float(ok.var(ddof=1)) if n_ok > 1 else 0.0,
                mean=float(ok.mean()),
                n_ok=n_ok,
                n_failed=n_reps - n_ok,
            )
        )
    label = f"model{1 if isinstance(design, Model1Design) else 2}-{design.setting}"
    return ReplicationReport(
        design_label=label,
        n=design.n,
        n_reps=n_reps,
        seed=seed,
        beta_true=beta_true,
        summaries=tuple(summaries),
        estimates=estimates,
    )

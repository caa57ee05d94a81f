"""Synthetic data generators for the two-domain missing-data designs.

Each design has a correctly-specified (T) and a misspecified (F) setting.
Generators are pure functions of (design, seed): the same pair always yields
a byte-identical dataset.  Pre-masking latent values are returned in a truth
sidecar for bias computation and generator checks; estimators never read it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import DomainTag, PooledDataset, UnitRecord, VariableSchema
from .models import logistic

SCALAR_SCHEMA = VariableSchema(covariate_names=("x1",))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator (Philox) keyed by the seed and a stream path.

    Derived streams (per replicate, per bootstrap resample) use the same
    construction, so parallel and serial runs see identical draws.
    """
    return np.random.Generator(np.random.Philox(seed=np.random.SeedSequence([seed, *stream])))


@dataclass(frozen=True)
class Model1Design:
    """M-driven missingness design.

    Primary domain: X ~ N(1,1), M ~ N(0.4 X^2, 1), Y ~ N(X + M, 1),
    selection logis(0.3 + 0.1 X + M) in the T setting and
    logis(0.3 + 0.1 X - M^2) in the F setting.
    Auxiliary domain: X ~ N(0,1), same M law, selection logis(1.4 + X).
    """

    n: int
    setting: str = "T"

    def __post_init__(self):
        if self.setting not in ("T", "F"):
            raise ValueError(f"setting must be T or F, got {self.setting!r}")
        if self.n < 1:
            raise ValueError("n must be at least 1")

    @property
    def a2(self) -> float:
        return 1.0 if self.setting == "T" else 0.0

    @property
    def a3(self) -> float:
        return 0.0 if self.setting == "T" else -1.0


@dataclass(frozen=True)
class Model2Design:
    """Y-driven missingness design, generated sequentially X -> R -> M -> Y.

    Primary domain: X ~ N(0,1); logit p(R=1|X) follows the closed form implied
    by baseline logit 0.5 + 0.4 X + a2 X^2 (a2 = 0 for T, 0.4 for F) and odds
    ratio exp(-0.3 Y); M | R=1 ~ N(-0.4 X^2, 1) and M | R=0 is shifted down by
    0.3; Y | R=1 ~ N(X + M, 1) and Y | R=0 is shifted down by 0.3.
    Auxiliary domain: X ~ N(1,1), M drawn through the same temporary-indicator
    construction, true selection logis(X).
    """

    n: int
    setting: str = "T"
    gamma: float = 0.3
    beta_y3: float = 1.0

    def __post_init__(self):
        if self.setting not in ("T", "F"):
            raise ValueError(f"setting must be T or F, got {self.setting!r}")
        if self.n < 1:
            raise ValueError("n must be at least 1")

    @property
    def a2(self) -> float:
        return 0.0 if self.setting == "T" else 0.4


@dataclass(frozen=True)
class TruthSidecar:
    """Pre-masking latent values, aligned with the dataset rows."""

    g: np.ndarray
    r: np.ndarray
    m_latent: np.ndarray
    y_latent: np.ndarray  # NaN in the auxiliary domain


@dataclass(frozen=True)
class TrueBeta:
    value: float
    provenance: str  # "analytic" or "monte_carlo(n_trials=..., n_per_trial=..., seed=...)"


def _assemble(g, x, m_latent, y_latent, r) -> tuple[PooledDataset, TruthSidecar]:
    records = []
    for i in range(g.size):
        primary = g[i] == 1
        observed = r[i] == 1
        records.append(
            UnitRecord(
                g=DomainTag.PRIMARY if primary else DomainTag.AUXILIARY,
                x=(float(x[i]),),
                m=float(m_latent[i]) if observed else None,
                y=float(y_latent[i]) if (primary and observed) else None,
                r=int(r[i]),
            )
        )
    dataset = PooledDataset(records=tuple(records), schema=SCALAR_SCHEMA)
    sidecar = TruthSidecar(g=g.copy(), r=r.copy(), m_latent=m_latent.copy(),
                           y_latent=y_latent.copy())
    return dataset, sidecar


def _model1_arrays(design: Model1Design, rng: np.random.Generator):
    n = design.n
    g = np.where(rng.random(n) < 0.5, 1, 2)
    x = rng.normal(0.0, 1.0, n) + (g == 1)  # N(1,1) primary, N(0,1) auxiliary
    m = rng.normal(0.4 * x**2, 1.0)
    y = rng.normal(x + m, 1.0)
    y[g == 2] = np.nan
    p_primary = logistic(0.3 + 0.1 * x + design.a2 * m + design.a3 * m**2)
    p_aux = logistic(1.4 + x)
    p = np.where(g == 1, p_primary, p_aux)
    r = (rng.random(n) < p).astype(int)
    return g, x, m, y, r


def generate_model1(design: Model1Design, seed: int) -> tuple[PooledDataset, TruthSidecar]:
    rng = make_rng(seed)
    return _assemble(*_model1_arrays(design, rng))


def _model2_selection_logit(design: Model2Design, x: np.ndarray) -> np.ndarray:
    gamma, b3 = design.gamma, design.beta_y3
    mu_y_tilde = x  # outcome mean with the M contribution removed
    mu_m = -0.4 * x**2
    mu_r = 0.5 + 0.4 * x + design.a2 * x**2
    return (
        mu_y_tilde * gamma
        - 0.5 * gamma**2
        + mu_m * b3 * gamma
        - 0.5 * b3**2 * gamma**2
        + mu_r
    )


def _model2_arrays(design: Model2Design, rng: np.random.Generator):
    n = design.n
    gamma, b3 = design.gamma, design.beta_y3
    g = np.where(rng.random(n) < 0.5, 1, 2)
    x = rng.normal(0.0, 1.0, n) + (g == 2)  # N(0,1) primary, N(1,1) auxiliary
    mu_m = -0.4 * x**2

    logit_r = _model2_selection_logit(design, x)
    # primary R and the auxiliary temporary indicator come from the same law
    sel = (rng.random(n) < logistic(logit_r)).astype(int)
    m = rng.normal(mu_m, 1.0) - (1 - sel) * b3 * gamma
    y = rng.normal(x + m, 1.0) - (1 - sel) * gamma
    y[g == 2] = np.nan

    r = sel.copy()
    aux = g == 2
    r_aux = (rng.random(n) < logistic(x)).astype(int)
    r[aux] = r_aux[aux]
    return g, x, m, y, r


def generate_model2(design: Model2Design, seed: int) -> tuple[PooledDataset, TruthSidecar]:
    rng = make_rng(seed)
    return _assemble(*_model2_arrays(design, rng))


_TRUE_BETA_CACHE: dict = {}
_TRUE_BETA_SEED = 20240229
_TRUE_BETA_TRIALS = 1000
_TRUE_BETA_N = 20000


def true_beta(design) -> TrueBeta:
    """Target value of the outcome mean for a design.

    The M-driven design admits the closed form E[X] + 0.4 E[X^2] = 1.8; the
    Y-driven design is evaluated by Monte Carlo over the latent outcomes.
    """
    if isinstance(design, Model1Design):
        return TrueBeta(value=1.8, provenance="analytic")
    if not isinstance(design, Model2Design):
        raise TypeError(f"unknown design {type(design).__name__}")
    key = (design.setting, design.gamma, design.beta_y3)
    cached = _TRUE_BETA_CACHE.get(key)
    if cached is not None:
        return cached
    totals = 0.0
    count = 0
    for trial in range(_TRUE_BETA_TRIALS):
        rng = make_rng(_TRUE_BETA_SEED, trial)
        sized = Model2Design(
            n=_TRUE_BETA_N,
            setting=design.setting,
            gamma=design.gamma,
            beta_y3=design.beta_y3,
        )
        g, _, _, y, _ = _model2_arrays(sized, rng)
        primary = g == 1
        totals += float(np.sum(y[primary]))
        count += int(primary.sum())
    result = TrueBeta(
        value=totals / count,
        provenance=(
            f"monte_carlo(n_trials={_TRUE_BETA_TRIALS}, "
            f"n_per_trial={_TRUE_BETA_N}, seed={_TRUE_BETA_SEED})"
        ),
    )
    _TRUE_BETA_CACHE[key] = result
    return result


def write_truth_csv(sidecar: TruthSidecar, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["domain", "r", "m_latent", "y_latent"])
        for i in range(sidecar.g.size):
            y = sidecar.y_latent[i]
            writer.writerow(
                [
                    int(sidecar.g[i]),
                    int(sidecar.r[i]),
                    repr(float(sidecar.m_latent[i])),
                    "" if np.isnan(y) else repr(float(y)),
                ]
            )

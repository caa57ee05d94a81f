"""Exact identification checks on finite-support full laws.

A full law is a probability table over (G, X, M, Y, R).  From it one can
compute the observed-data law (masking M and Y where R = 0, and Y everywhere
in the auxiliary domain), evaluate both identification functionals exactly,
recover the odds-ratio function from observed data alone, and verify the
odds-ratio identities cell by cell.  Everything here is deterministic
arithmetic on small tables; tolerances in the battery are near machine
precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import DomainTag, PooledDataset, UnitRecord, VariableSchema

_CI_TOL = 1e-12  # conditional-independence cell tolerance
_RANK_TOL = 1e-10  # singular-value threshold for the completeness condition


class OracleError(ValueError):
    pass


class RankConditionError(OracleError):
    """Raised when the completeness (full-rank) condition fails."""


@dataclass(frozen=True)
class DiscreteFullLaw:
    """Joint probability table p(g, x, m, y, r) over finite supports.

    table has shape (2, nx, nm, ny, 2) indexed by (g-1, x, m, y, r).
    """

    x_support: tuple[float, ...]
    m_support: tuple[float, ...]
    y_support: tuple[float, ...]
    table: np.ndarray

    def __post_init__(self):
        expected = (2, len(self.x_support), len(self.m_support), len(self.y_support), 2)
        if self.table.shape != expected:
            raise OracleError(f"table shape {self.table.shape} != {expected}")
        if np.any(self.table < 0):
            raise OracleError("negative cell probability")
        if abs(self.table.sum() - 1.0) > 1e-9:
            raise OracleError(f"table mass {self.table.sum()} != 1")
        for g in range(2):
            if self.table[g].sum() <= 0:
                raise OracleError(f"domain {g + 1} has zero mass")
            p_x = self.table[g].sum(axis=(1, 2, 3))
            p_x_r1 = self.table[g, :, :, :, 1].sum(axis=(1, 2))
            if np.any((p_x > 0) & (p_x_r1 <= 0)):
                raise OracleError(f"positivity fails: p(R=1|x, g={g + 1}) = 0 somewhere")

    @property
    def shape(self) -> tuple[int, int, int]:
        return len(self.x_support), len(self.m_support), len(self.y_support)

    def reference_y_index(self) -> int:
        """Odds-ratio anchor: the index of y = 0, else the smallest support point."""
        ys = np.asarray(self.y_support)
        zeros = np.where(ys == 0.0)[0]
        if zeros.size:
            return int(zeros[0])
        return int(np.argmin(ys))


def brute_force_beta(law: DiscreteFullLaw) -> float:
    """Ground truth E[Y | G=1] straight from the full table."""
    p1 = law.table[0]
    p_y = p1.sum(axis=(0, 1, 3))
    return float(np.dot(law.y_support, p_y) / p1.sum())


@dataclass(frozen=True)
class ObservedLaw:
    """Observed-data probability masses, masked per the missingness pattern.

    primary_r1[x, m, y] = p(x, m, y, R=1, G=1); primary_r0[x] = p(x, R=0, G=1)
    with (m, y) pooled; aux_r1[x, m] = p(x, m, R=1, G=2) with y pooled always;
    aux_r0[x] = p(x, R=0, G=2).
    """

    x_support: tuple[float, ...]
    m_support: tuple[float, ...]
    y_support: tuple[float, ...]
    primary_r1: np.ndarray
    primary_r0: np.ndarray
    aux_r1: np.ndarray
    aux_r0: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(
            self.primary_r1.sum()
            + self.primary_r0.sum()
            + self.aux_r1.sum()
            + self.aux_r0.sum()
        )

    @property
    def p_g1(self) -> float:
        return float(self.primary_r1.sum() + self.primary_r0.sum())

    def p_x_g1(self) -> np.ndarray:
        return self.primary_r1.sum(axis=(1, 2)) + self.primary_r0

    def reference_y_index(self) -> int:
        ys = np.asarray(self.y_support)
        zeros = np.where(ys == 0.0)[0]
        if zeros.size:
            return int(zeros[0])
        return int(np.argmin(ys))


def observed_law(law: DiscreteFullLaw) -> ObservedLaw:
    t = law.table
    return ObservedLaw(
        x_support=law.x_support,
        m_support=law.m_support,
        y_support=law.y_support,
        primary_r1=t[0, :, :, :, 1].copy(),
        primary_r0=t[0, :, :, :, 0].sum(axis=(1, 2)),
        aux_r1=t[1, :, :, :, 1].sum(axis=2),
        aux_r0=t[1, :, :, :, 0].sum(axis=(1, 2)),
    )


# ---------------------------------------------------------------------------
# assumption checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AssumptionCheckResult:
    """Per-assumption verdicts with the maximal violation magnitude."""

    holds: dict
    violation: dict

    def all_hold(self, which=None) -> bool:
        keys = which if which is not None else self.holds.keys()
        return all(self.holds[k] for k in keys)


def _max_conditional_dev(joint: np.ndarray, cond_axis: int) -> float:
    """Max deviation of p(target | ..., cond) from p(target | ...) where the
    conditioning variable sits on cond_axis and the target on the last axis."""
    joint = np.moveaxis(joint, cond_axis, -2)
    # joint now indexed (..., cond, target)
    dev = 0.0
    base_mass = joint.sum(axis=(-2, -1))
    base = joint.sum(axis=-2)
    it = np.ndindex(base_mass.shape)
    for idx in it:
        if base_mass[idx] <= 0:
            continue
        p_base = base[idx] / base_mass[idx]
        for c in range(joint.shape[-2]):
            mass = joint[idx][c].sum()
            if mass <= 0:
                continue
            dev = max(dev, float(np.max(np.abs(joint[idx][c] / mass - p_base))))
    return dev


def check_assumptions(law: DiscreteFullLaw, which=None) -> AssumptionCheckResult:
    """Verify the identifying conditional-independence statements cell by cell.

    aux_mar:       M independent of R given X in the auxiliary domain.
    selection:     M independent of G given X.
    m_driven:      Y independent of R given (X, M) in the primary domain.
    y_driven:      M independent of R given (X, Y) in the primary domain.
    shadow_dep:    M is NOT independent of Y given X among primary complete
                   cases (the association that makes M informative).
    completeness:  p(y | R=1, x, m) has full column rank for every x.
    """
    t = law.table
    nx, nm, ny = law.shape
    holds, violation = {}, {}

    def record(name, dev, tol=_CI_TOL):
        violation[name] = dev
        holds[name] = dev <= tol

    # aux_mar: joint over (x, r, m) in domain 2
    joint = t[1].sum(axis=2)  # (x, m, r)
    record("aux_mar", _max_conditional_dev(np.swapaxes(joint, 1, 2), cond_axis=1))

    # selection: joint over (x, g, m)
    joint = t.sum(axis=(3, 4))  # (g, x, m)
    record("selection", _max_conditional_dev(np.moveaxis(joint, 0, 1), cond_axis=1))

    # m_driven: joint over (x, m, r, y) in domain 1
    joint = np.moveaxis(t[0], 3, 2)  # (x, m, r, y)
    record("m_driven", _max_conditional_dev(joint, cond_axis=2))

    # y_driven: joint over (x, y, r, m) in domain 1
    joint = np.transpose(t[0], (0, 2, 3, 1))  # (x, y, r, m)
    record("y_driven", _max_conditional_dev(joint, cond_axis=2))

    # shadow_dep: association of M and Y among primary complete cases
    joint = t[0, :, :, :, 1]  # (x, m, y)
    dep = _max_conditional_dev(np.swapaxes(joint, 1, 2), cond_axis=1)
    violation["shadow_dep"] = dep
    holds["shadow_dep"] = dep > 1e-6

    # completeness: rank of p(y | R=1, x, m) per x
    min_sigma = np.inf
    for xi in range(nx):
        mat = t[0, xi, :, :, 1]
        row_mass = mat.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = np.where(row_mass > 0, mat / row_mass, 0.0)
        if nm < ny:
            min_sigma = 0.0
            break
        sigma = np.linalg.svd(cond, compute_uv=False)
        min_sigma = min(min_sigma, float(sigma[ny - 1]))
    violation["completeness"] = max(0.0, _RANK_TOL - min_sigma)
    holds["completeness"] = min_sigma > _RANK_TOL

    if which is not None:
        holds = {k: holds[k] for k in which}
        violation = {k: violation[k] for k in which}
    return AssumptionCheckResult(holds=holds, violation=violation)


# ---------------------------------------------------------------------------
# identification functionals
# ---------------------------------------------------------------------------

def identify_model1(obs: ObservedLaw) -> float:
    """Exact M-driven identification functional from observed data:
    average over primary X of the auxiliary-complete-case M law composed with
    the primary-complete-case outcome regression."""
    nx, nm, ny = obs.primary_r1.shape
    ys = np.asarray(obs.y_support)
    p_x = obs.p_x_g1() / obs.p_g1
    total = 0.0
    for xi in range(nx):
        if p_x[xi] <= 0:
            continue
        aux_mass = obs.aux_r1[xi].sum()
        if aux_mass <= 0:
            raise OracleError(f"p(R=1 | x={obs.x_support[xi]}, G=2) is zero")
        p_m = obs.aux_r1[xi] / aux_mass
        inner = 0.0
        for mi in range(nm):
            if p_m[mi] <= 0:
                continue
            cell = obs.primary_r1[xi, mi]
            mass = cell.sum()
            if mass <= 0:
                raise OracleError(
                    f"p(m={obs.m_support[mi]}, R=1 | x={obs.x_support[xi]}, G=1) is zero"
                )
            inner += p_m[mi] * float(np.dot(ys, cell) / mass)
        total += p_x[xi] * inner
    return total


@dataclass(frozen=True)
class ORRecovery:
    """Odds-ratio function recovered from observed data, per (x, y)."""

    or_table: np.ndarray  # (nx, ny), anchored at the reference y
    or_tilde: np.ndarray  # (nx, ny), the normalized tilt solving the linear system
    reference_index: int
    reference_value: float


def recover_odds_ratio(obs: ObservedLaw) -> ORRecovery:
    """Invert the finite linear system linking the normalized odds-ratio tilt
    to the ratio of missing- and observed-case M laws, using the auxiliary
    domain as the bridge to the unobservable missing-case M law."""
    nx, nm, ny = obs.primary_r1.shape
    if nm < ny:
        raise RankConditionError(
            f"completeness impossible: |M support| = {nm} < |Y support| = {ny}"
        )
    y_ref = obs.reference_y_index()
    p_x_g1 = obs.p_x_g1()
    or_tilde = np.zeros((nx, ny))
    or_table = np.zeros((nx, ny))
    for xi in range(nx):
        if p_x_g1[xi] <= 0:
            raise OracleError(f"p(x={obs.x_support[xi]} | G=1) is zero")
        cc_mass = obs.primary_r1[xi].sum()
        p_r0 = obs.primary_r0[xi] / p_x_g1[xi]
        if p_r0 <= 0:
            # no missing stratum: the tilt is unconstrained there; identity OR
            or_tilde[xi] = 1.0
            or_table[xi] = 1.0
            continue
        aux_mass = obs.aux_r1[xi].sum()
        if aux_mass <= 0 or cc_mass <= 0:
            raise OracleError(f"zero complete-case mass at x={obs.x_support[xi]}")
        p_m_aux = obs.aux_r1[xi] / aux_mass
        p_m_r1_joint = obs.primary_r1[xi].sum(axis=1) / p_x_g1[xi]
        p_m_r1 = obs.primary_r1[xi].sum(axis=1) / cc_mass
        # bridge: p(m | x, R=0, G=1) from the auxiliary domain
        p_m_r0 = (p_m_aux - p_m_r1_joint) / p_r0
        if np.any(p_m_r1 <= 0):
            raise OracleError(
                f"p(m | x={obs.x_support[xi]}, R=1, G=1) has a zero cell"
            )
        rhs = p_m_r0 / p_m_r1
        design = obs.primary_r1[xi] / obs.primary_r1[xi].sum(axis=1, keepdims=True)
        sigma = np.linalg.svd(design, compute_uv=False)
        if sigma[ny - 1] <= _RANK_TOL:
            raise RankConditionError(
                f"completeness fails at x={obs.x_support[xi]}: "
                f"min singular value {sigma[ny - 1]:.3e}"
            )
        sol, *_ = np.linalg.lstsq(design, rhs, rcond=None)
        or_tilde[xi] = sol
        if sol[y_ref] <= 0:
            raise OracleError(
                f"recovered tilt non-positive at the reference level (x={obs.x_support[xi]})"
            )
        or_table[xi] = sol / sol[y_ref]
    return ORRecovery(
        or_table=or_table,
        or_tilde=or_tilde,
        reference_index=y_ref,
        reference_value=float(obs.y_support[y_ref]),
    )


def identify_model2(obs: ObservedLaw, recovery: Optional[ORRecovery] = None) -> float:
    """Exact Y-driven identification functional: the complete-case stratum
    plus the odds-ratio-tilted missing stratum, with the missing-case M law
    bridged from the auxiliary domain.  Strata with zero missingness mass
    contribute only their complete-case term."""
    if recovery is None:
        recovery = recover_odds_ratio(obs)
    nx, nm, ny = obs.primary_r1.shape
    ys = np.asarray(obs.y_support)
    p_g1 = obs.p_g1
    p_x_g1 = obs.p_x_g1()
    total = 0.0
    for xi in range(nx):
        if p_x_g1[xi] <= 0:
            continue
        p_r0_cond = obs.primary_r0[xi] / p_x_g1[xi]
        aux_mass = obs.aux_r1[xi].sum()
        if aux_mass <= 0:
            raise OracleError(f"p(R=1 | x={obs.x_support[xi]}, G=2) is zero")
        p_m_aux = obs.aux_r1[xi] / aux_mass
        for mi in range(nm):
            cell = obs.primary_r1[xi, mi]
            mass = cell.sum()
            if mass <= 0:
                raise OracleError(
                    f"p(m={obs.m_support[mi]}, R=1 | x={obs.x_support[xi]}, G=1) is zero"
                )
            p_y_cc = cell / mass
            # complete-case stratum: p(m, x, R=1 | G=1)
            total += float(np.dot(ys, p_y_cc)) * (mass / p_g1)
            if p_r0_cond <= 0:
                continue
            e_or = float(np.dot(recovery.or_table[xi], p_y_cc))
            bridge = (p_m_aux[mi] - mass / p_x_g1[xi]) / p_r0_cond
            weight = (obs.primary_r0[xi] / p_g1) * bridge
            tilt = float(np.dot(ys * recovery.or_table[xi], p_y_cc)) / e_or
            total += tilt * weight
    return total


# ---------------------------------------------------------------------------
# odds-ratio identity verification on the full law
# ---------------------------------------------------------------------------

def verify_or_identities(law: DiscreteFullLaw) -> dict:
    """Max absolute residual of each odds-ratio identity, from the full law.

    Keys: or_m_invariance (the odds ratio does not depend on m),
    or_propensity (outcome-law odds ratio equals the selection-odds form),
    missing_outcome_law (missing-case outcome law equals the tilted
    complete-case law), inverse_propensity (reciprocal selection probability
    from the baseline and tilt), baseline_propensity (baseline from the
    complete-case tilt mean and the marginal selection odds), and
    tilt_m_ratio (complete-case mean of the normalized tilt equals the
    missing/observed M-law ratio).
    """
    t1 = law.table[0] / law.table[0].sum()  # conditional on G=1: (x, m, y, r)
    nx, nm, ny = law.shape
    y_ref = law.reference_y_index()

    p_xmyr = t1
    p_xy_r = t1.sum(axis=1)  # (x, y, r)
    p_x = t1.sum(axis=(1, 2, 3))
    res = {k: 0.0 for k in (
        "or_m_invariance", "or_propensity", "missing_outcome_law",
        "inverse_propensity", "baseline_propensity", "tilt_m_ratio",
    )}

    for xi in range(nx):
        if p_x[xi] <= 0:
            continue
        # selection probabilities given (x, y)
        mass_xy = p_xy_r[xi].sum(axis=1)
        if np.any(mass_xy <= 0) or np.any(p_xy_r[xi] <= 0):
            raise OracleError("identity check requires positive mass in every (x, y, r) cell")
        p_r1_xy = p_xy_r[xi, :, 1] / mass_xy
        p_r0_xy = p_xy_r[xi, :, 0] / mass_xy
        or_prop = (p_r0_xy / p_r1_xy) * (p_r1_xy[y_ref] / p_r0_xy[y_ref])

        # outcome laws given (x, m, r)
        or_from_outcome = np.zeros((nm, ny))
        for mi in range(nm):
            cell = p_xmyr[xi, mi]  # (y, r)
            mass_r = cell.sum(axis=0)
            if np.any(mass_r <= 0) or np.any(cell <= 0):
                raise OracleError(
                    "identity check requires positive mass in every (x, m, y, r) cell"
                )
            p_y_r1 = cell[:, 1] / mass_r[1]
            p_y_r0 = cell[:, 0] / mass_r[0]
            ratio = p_y_r0 / p_y_r1
            or_from_outcome[mi] = ratio / ratio[y_ref]
            # missing-case outcome law from the tilted complete-case law
            e_or = float(np.dot(or_prop, p_y_r1))
            res["missing_outcome_law"] = max(
                res["missing_outcome_law"],
                float(np.max(np.abs(p_y_r0 - p_y_r1 * or_prop / e_or))),
            )
        res["or_m_invariance"] = max(
            res["or_m_invariance"],
            float(np.max(np.abs(or_from_outcome - or_from_outcome[0]))),
        )
        res["or_propensity"] = max(
            res["or_propensity"],
            float(np.max(np.abs(or_from_outcome - or_prop[None, :]))),
        )

        # reciprocal selection probability from baseline and tilt
        lhs = 1.0 / p_r1_xy
        rhs = 1.0 + or_prop * p_r0_xy[y_ref] / p_r1_xy[y_ref]
        res["inverse_propensity"] = max(
            res["inverse_propensity"], float(np.max(np.abs(lhs - rhs)))
        )

        # baseline propensity from the complete-case tilt mean
        p_y_r1_x = p_xy_r[xi, :, 1] / p_xy_r[xi, :, 1].sum()
        e_or_x = float(np.dot(or_prop, p_y_r1_x))
        odds_r0 = p_xy_r[xi, :, 0].sum() / p_xy_r[xi, :, 1].sum()
        res["baseline_propensity"] = max(
            res["baseline_propensity"],
            abs(p_r1_xy[y_ref] - e_or_x / (e_or_x + odds_r0)),
        )

        # complete-case mean of the normalized tilt vs the M-law ratio
        or_tilde = or_prop / e_or_x
        p_m_r1 = p_xmyr[xi, :, :, 1].sum(axis=1) / p_xmyr[xi, :, :, 1].sum()
        p_m_r0 = p_xmyr[xi, :, :, 0].sum(axis=1) / p_xmyr[xi, :, :, 0].sum()
        for mi in range(nm):
            cell = p_xmyr[xi, mi]
            p_y_r1_m = cell[:, 1] / cell[:, 1].sum()
            res["tilt_m_ratio"] = max(
                res["tilt_m_ratio"],
                abs(float(np.dot(or_tilde, p_y_r1_m)) - p_m_r0[mi] / p_m_r1[mi]),
            )
    return res


def bridge_residual(law: DiscreteFullLaw) -> float:
    """Max cell residual of the auxiliary-domain bridge identity
    p(m | x, R=1, G=2) - p(m, R=1 | x, G=1) = p(m | x, R=0, G=1) p(R=0 | x, G=1)."""
    t = law.table
    nx, nm, _ = law.shape
    worst = 0.0
    for xi in range(nx):
        mass1 = t[0, xi].sum()
        mass2_r1 = t[1, xi, :, :, 1].sum()
        if mass1 <= 0 or mass2_r1 <= 0:
            continue
        lhs = t[1, xi, :, :, 1].sum(axis=1) / mass2_r1 - t[0, xi, :, :, 1].sum(axis=1) / mass1
        r0_mass = t[0, xi, :, :, 0].sum()
        if r0_mass > 0:
            rhs = (t[0, xi, :, :, 0].sum(axis=1) / r0_mass) * (r0_mass / mass1)
        else:
            rhs = np.zeros(nm)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


# ---------------------------------------------------------------------------
# random assumption-satisfying laws
# ---------------------------------------------------------------------------

def _shared_target_components(rng, nx, nm, ny):
    p_g = rng.dirichlet(np.full(2, 8.0))
    p_x_g = rng.dirichlet(np.full(nx, 8.0), size=2)
    p_m_x = rng.dirichlet(np.full(nm, 4.0), size=nx)
    p_y_xm = rng.dirichlet(np.full(ny, 4.0), size=(nx, nm))
    return p_g, p_x_g, p_m_x, p_y_xm


def random_model1_law(rng: np.random.Generator, nx=2, nm=2, ny=2) -> DiscreteFullLaw:
    """Random law with M-driven primary missingness: built factor by factor so
    the M law is shared across domains, auxiliary selection depends on X only,
    and primary selection depends on (X, M) only."""
    p_g, p_x_g, p_m_x, p_y_xm = _shared_target_components(rng, nx, nm, ny)
    p_r1_xm = rng.uniform(0.25, 0.75, size=(nx, nm))
    p_r1_x_aux = rng.uniform(0.25, 0.75, size=nx)
    table = np.zeros((2, nx, nm, ny, 2))
    for xi in range(nx):
        for mi in range(nm):
            base1 = p_g[0] * p_x_g[0, xi] * p_m_x[xi, mi] * p_y_xm[xi, mi]
            table[0, xi, mi, :, 1] = base1 * p_r1_xm[xi, mi]
            table[0, xi, mi, :, 0] = base1 * (1.0 - p_r1_xm[xi, mi])
            base2 = p_g[1] * p_x_g[1, xi] * p_m_x[xi, mi] * p_y_xm[xi, mi]
            table[1, xi, mi, :, 1] = base2 * p_r1_x_aux[xi]
            table[1, xi, mi, :, 0] = base2 * (1.0 - p_r1_x_aux[xi])
    return DiscreteFullLaw(
        x_support=tuple(float(v) for v in range(nx)),
        m_support=tuple(float(v) for v in range(nm)),
        y_support=tuple(float(v) for v in range(ny)),
        table=table,
    )


def random_model2_law(
    rng: np.random.Generator, nx=2, nm=3, ny=2
) -> tuple[DiscreteFullLaw, np.ndarray]:
    """Random law with Y-driven primary missingness, constructed forward from
    a baseline selection probability and a known odds-ratio table anchored at
    the reference y.  Returns the law and the true OR table (nx, ny)."""
    p_g, p_x_g, p_m_x, p_y_xm = _shared_target_components(rng, nx, nm, ny)
    baseline = rng.uniform(0.3, 0.7, size=nx)
    or_table = rng.uniform(0.4, 2.5, size=(nx, ny))
    or_table[:, 0] = 1.0  # support starts at y=0: the anchor level
    p_r1_xy = 1.0 / (1.0 + or_table * ((1.0 - baseline) / baseline)[:, None])
    p_r1_x_aux = rng.uniform(0.25, 0.75, size=nx)
    table = np.zeros((2, nx, nm, ny, 2))
    for xi in range(nx):
        for mi in range(nm):
            base1 = p_g[0] * p_x_g[0, xi] * p_m_x[xi, mi] * p_y_xm[xi, mi]
            table[0, xi, mi, :, 1] = base1 * p_r1_xy[xi]
            table[0, xi, mi, :, 0] = base1 * (1.0 - p_r1_xy[xi])
            base2 = p_g[1] * p_x_g[1, xi] * p_m_x[xi, mi] * p_y_xm[xi, mi]
            table[1, xi, mi, :, 1] = base2 * p_r1_x_aux[xi]
            table[1, xi, mi, :, 0] = base2 * (1.0 - p_r1_x_aux[xi])
    return (
        DiscreteFullLaw(
            x_support=tuple(float(v) for v in range(nx)),
            m_support=tuple(float(v) for v in range(nm)),
            y_support=tuple(float(v) for v in range(ny)),
            table=table,
        ),
        or_table,
    )


# ---------------------------------------------------------------------------
# battery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BatteryFailure:
    law_seed: int
    check: str
    value: float
    tolerance: float


def run_battery(
    n_laws: int,
    seed: int,
    tol_identify: float = 1e-8,
    tol_identity: float = 1e-12,
    tol_or: float = 1e-10,
) -> list[BatteryFailure]:
    """Randomized oracle battery: identification exactness, odds-ratio
    identity residuals, bridge exactness, and OR recovery, over n_laws
    M-driven and n_laws Y-driven random laws."""
    failures = []

    def expect(law_seed, check, value, tolerance):
        if not value <= tolerance:
            failures.append(BatteryFailure(law_seed, check, value, tolerance))

    for i in range(n_laws):
        rng = np.random.Generator(np.random.Philox(seed=np.random.SeedSequence([seed, i])))
        law1 = random_model1_law(rng)
        truth = brute_force_beta(law1)
        expect(i, "identify_model1", abs(identify_model1(observed_law(law1)) - truth),
               tol_identify)
        expect(i, "bridge_model1_law", bridge_residual(law1), tol_identity)

        law2, or_true = random_model2_law(rng)
        obs2 = observed_law(law2)
        truth2 = brute_force_beta(law2)
        try:
            recovery = recover_odds_ratio(obs2)
        except OracleError as exc:
            failures.append(BatteryFailure(i, f"or_recovery_error:{exc}", np.inf, tol_or))
            continue
        expect(i, "or_recovery", float(np.max(np.abs(recovery.or_table - or_true))), tol_or)
        expect(i, "identify_model2", abs(identify_model2(obs2, recovery) - truth2),
               tol_identify)
        expect(i, "bridge_model2_law", bridge_residual(law2), tol_identity)
        for name, value in verify_or_identities(law2).items():
            expect(i, name, value, tol_identity)
    return failures


# ---------------------------------------------------------------------------
# sampling and serialization
# ---------------------------------------------------------------------------

def sample_law(
    law: DiscreteFullLaw, n: int, seed: int
) -> tuple[PooledDataset, np.ndarray]:
    """Draw n iid units from the law, masked per the drawn R pattern.

    Returns the dataset and the (n, 5) latent matrix of (g, x, m, y, r)
    values before masking.
    """
    rng = np.random.Generator(np.random.Philox(seed=np.random.SeedSequence([seed])))
    flat = law.table.ravel()
    counts = rng.multinomial(n, flat)
    cells = np.repeat(np.arange(flat.size), counts)
    rng.shuffle(cells)
    g_idx, x_idx, m_idx, y_idx, r_idx = np.unravel_index(cells, law.table.shape)
    xs = np.asarray(law.x_support)[x_idx]
    ms = np.asarray(law.m_support)[m_idx]
    ys = np.asarray(law.y_support)[y_idx]
    records = []
    for i in range(n):
        primary = g_idx[i] == 0
        observed = r_idx[i] == 1
        records.append(
            UnitRecord(
                g=DomainTag.PRIMARY if primary else DomainTag.AUXILIARY,
                x=(float(xs[i]),),
                m=float(ms[i]) if observed else None,
                y=float(ys[i]) if (primary and observed) else None,
                r=int(r_idx[i]),
            )
        )
    schema = VariableSchema(covariate_names=("x1",))
    latent = np.column_stack([g_idx + 1, xs, ms, ys, r_idx]).astype(float)
    return PooledDataset(records=tuple(records), schema=schema), latent


def write_law(law: DiscreteFullLaw, path: str) -> None:
    """Cell-list text form: one 'g,x,m,y,r,probability' line per cell."""
    with open(path, "w") as fh:
        fh.write("# g,x,m,y,r,probability\n")
        for g in range(2):
            for xi, x in enumerate(law.x_support):
                for mi, m in enumerate(law.m_support):
                    for yi, y in enumerate(law.y_support):
                        for r in range(2):
                            p = float(law.table[g, xi, mi, yi, r])
                            fh.write(f"{g + 1},{x!r},{m!r},{y!r},{r},{p!r}\n")


def read_law(path: str) -> DiscreteFullLaw:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            g, x, m, y, r, p = line.split(",")
            rows.append((int(g), float(x), float(m), float(y), int(r), float(p)))
    xs = tuple(sorted({row[1] for row in rows}))
    ms = tuple(sorted({row[2] for row in rows}))
    ys = tuple(sorted({row[3] for row in rows}))
    table = np.zeros((2, len(xs), len(ms), len(ys), 2))
    for g, x, m, y, r, p in rows:
        table[g - 1, xs.index(x), ms.index(m), ys.index(y), r] = p
    return DiscreteFullLaw(x_support=xs, m_support=ms, y_support=ys, table=table)

"""Root finder for stacked sample estimating equations r(theta) = 0.

Just-identified systems are solved by Newton iteration with a
forward-finite-difference Jacobian and a halving line search on ||r||;
overdetermined systems by damped Gauss-Newton on 0.5*||r||^2.  Failed
attempts restart from the initial point perturbed by centered uniform noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

_FD_STEP = 1e-6
_MAX_HALVINGS = 30


class ResidualError(ValueError):
    """Raised when the residual map produces non-finite values."""


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 100
    n_restarts: int = 5
    restart_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class SolverResult:
    theta_hat: np.ndarray
    status: str  # "converged" | "max_iter" | "singular"
    final_residual_norm: float
    iterations: int

    @property
    def converged(self) -> bool:
        return self.status == "converged"


@dataclass(frozen=True)
class MomentSystem:
    residual: Callable[[np.ndarray], np.ndarray]
    dim_theta: int
    init: np.ndarray
    config: SolverConfig = field(default_factory=SolverConfig)


def _eval_residual(fn, theta) -> np.ndarray:
    r = np.asarray(fn(theta), dtype=float)
    if not np.all(np.isfinite(r)):
        raise ResidualError(f"non-finite residual at theta={theta.tolist()}")
    return r


def _fd_jacobian(fn, theta, r0) -> np.ndarray:
    k, p = r0.size, theta.size
    jac = np.empty((k, p))
    for j in range(p):
        step = _FD_STEP * (1.0 + abs(theta[j]))
        bumped = theta.copy()
        bumped[j] += step
        jac[:, j] = (_eval_residual(fn, bumped) - r0) / step
    return jac


def _criterion(r, jac, just_identified) -> float:
    if just_identified:
        return float(np.max(np.abs(r)))
    return float(np.linalg.norm(jac.T @ r))


def _iterate(fn, theta0, config: SolverConfig, just_identified: bool):
    """One Newton / Gauss-Newton run from theta0.  Returns (theta, r, status, iters)."""
    theta = theta0.copy()
    r = _eval_residual(fn, theta)
    for it in range(1, config.max_iter + 1):
        jac = _fd_jacobian(fn, theta, r)
        if _criterion(r, jac, just_identified) < config.tol:
            return theta, r, "converged", it - 1
        try:
            if just_identified:
                step = np.linalg.solve(jac, -r)
            else:
                step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        except np.linalg.LinAlgError:
            return theta, r, "singular", it - 1
        if not np.all(np.isfinite(step)):
            return theta, r, "singular", it - 1

        # halving line search on the residual norm
        obj0 = float(r @ r)
        scale = 1.0
        for _ in range(_MAX_HALVINGS):
            candidate = theta + scale * step
            try:
                r_new = _eval_residual(fn, candidate)
            except ResidualError:
                scale *= 0.5
                continue
            if float(r_new @ r_new) < obj0:
                theta, r = candidate, r_new
                break
            scale *= 0.5
        else:
            # no decrease found: stalled
            jac = _fd_jacobian(fn, theta, r)
            status = (
                "converged"
                if _criterion(r, jac, just_identified) < config.tol
                else "max_iter"
            )
            return theta, r, status, it
    jac = _fd_jacobian(fn, theta, r)
    status = (
        "converged" if _criterion(r, jac, just_identified) < config.tol else "max_iter"
    )
    return theta, r, status, config.max_iter


def solve(system: MomentSystem) -> SolverResult:
    """Solve the moment system, restarting from perturbed inits on failure.

    The best attempt (converged preferred, then smallest residual norm) is
    returned.  Restart noise is drawn from a generator seeded by the config
    seed, so identical inputs give identical results.
    """
    config = system.config
    fn = system.residual
    init = np.asarray(system.init, dtype=float)
    if init.size != system.dim_theta:
        raise ValueError("init length does not match dim_theta")
    r0 = _eval_residual(fn, init)
    just_identified = r0.size == system.dim_theta
    if r0.size < system.dim_theta:
        raise ValueError(
            f"underdetermined system: {r0.size} residuals for {system.dim_theta} parameters"
        )

    rng = np.random.Generator(np.random.Philox(key=config.seed))
    best = None
    for attempt in range(config.n_restarts + 1):
        if attempt == 0:
            start = init
        else:
            noise = rng.uniform(-1.0, 1.0, size=init.size) * config.restart_scale * (
                1.0 + np.abs(init)
            )
            start = init + noise
        try:
            theta, r, status, iters = _iterate(fn, start, config, just_identified)
        except ResidualError:
            if attempt == 0:
                raise
            continue
        result = SolverResult(
            theta_hat=theta,
            status=status,
            final_residual_norm=float(np.linalg.norm(r)),
            iterations=iters,
        )
        if result.converged:
            return result
        if best is None or result.final_residual_norm < best.final_residual_norm:
            best = result
    assert best is not None
    return best

"""IPW estimator for the outcome mean when missingness is driven by the
possibly-missing outcome itself.

The selection probability is parameterized through a baseline propensity
p(R=1 | X, Y=0) on an X-only basis together with an exponential-tilt odds
ratio exp(-gamma * Y); the implied reciprocal propensity
w = 1 + exp(-gamma*y) * exp(-alpha . b(x)) enters the same h-moment
calibration against the auxiliary domain as the M-driven estimator.  Every
term in the estimating equations carries the observed-case factor R, so rows
with missing Y contribute zero and the weight is always computable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import DomainTag, PooledDataset, VariableSchema
from .models import (
    W_MAX,
    BasisSpec,
    CoefficientModel,
    OddsRatioModel,
    evaluate_basis_matrix,
    fit_logistic,
    model2_weight_vector,
)
from .model1 import (
    EstimationError,
    Model1Spec,
    _linear_xm_basis,
    _polynomial_x_basis,
    _require_domains,
    fit_aux_moment_targets,
)
from .report import EstimateReport
from .solver import MomentSystem, SolverConfig, solve


@dataclass(frozen=True)
class Model2Spec:
    baseline_basis: BasisSpec  # X-only basis for logit p(R=1 | X, Y=0)
    h_basis: BasisSpec
    aux_regression_basis: BasisSpec
    n_or_params: int = 1  # gamma, plus optional X-interaction tilts

    @classmethod
    def default(cls, schema: VariableSchema) -> "Model2Spec":
        d = schema.n_covariates
        baseline = BasisSpec.parse("1" + "".join(f",x{j}" for j in range(1, d + 1)))
        return cls(
            baseline_basis=baseline,
            h_basis=_linear_xm_basis(d),
            aux_regression_basis=_polynomial_x_basis(d),
        )


def _or_model_from(theta_or: np.ndarray) -> OddsRatioModel:
    return OddsRatioModel(gamma=float(theta_or[0]),
                          x_interactions=tuple(theta_or[1:]))


def estimate_model2(
    dataset: PooledDataset,
    spec: Optional[Model2Spec] = None,
    config: Optional[SolverConfig] = None,
    w_max: float = W_MAX,
    fix_gamma: Optional[float] = None,
) -> EstimateReport:
    """Solve the stacked (alpha, gamma) moment system, then average the
    w-weighted complete-case outcomes.

    With fix_gamma given (e.g. 0 for a MAR-in-X check) the odds-ratio
    coefficient is held fixed and only alpha is solved for.
    """
    if spec is None:
        spec = Model2Spec.default(dataset.schema)
    if config is None:
        config = SolverConfig()
    primary, auxiliary = _require_domains(dataset)
    cc = primary.complete
    n1 = primary.n
    n_cc = int(cc.sum())
    if n_cc == 0:
        raise EstimationError("no complete cases in the primary domain")

    preds, aux_coefs = fit_aux_moment_targets(
        dataset, spec.h_basis, spec.aux_regression_basis
    )
    target = preds.mean(axis=0)

    b_cc = evaluate_basis_matrix(spec.baseline_basis, primary.x[cc])
    h_cc = evaluate_basis_matrix(spec.h_basis, primary.x[cc], primary.m[cc])
    y_cc = primary.y[cc]
    x_cc = primary.x[cc]
    p_alpha = b_cc.shape[1]
    n_or = 0 if fix_gamma is not None else spec.n_or_params
    dim_theta = p_alpha + n_or
    if h_cc.shape[1] < dim_theta:
        raise EstimationError(
            f"h basis has {h_cc.shape[1]} components for {dim_theta} parameters"
        )

    def weights(theta: np.ndarray) -> tuple[np.ndarray, int]:
        alpha = theta[:p_alpha]
        if fix_gamma is not None:
            or_model = OddsRatioModel(gamma=fix_gamma)
        else:
            or_model = _or_model_from(theta[p_alpha:])
        log_excess = or_model.log_or(x_cc, y_cc) - b_cc @ alpha
        w = 1.0 + np.exp(np.minimum(log_excess, 700.0))
        n_capped = int(np.sum(w > w_max))
        return np.minimum(w, w_max), n_capped

    def residual(theta: np.ndarray) -> np.ndarray:
        w, _ = weights(theta)
        return h_cc.T @ w / n1 - target

    alpha_init = fit_logistic(
        evaluate_basis_matrix(spec.baseline_basis, primary.x),
        primary.r.astype(float),
    )
    init = np.concatenate([alpha_init, np.zeros(n_or)])
    result = solve(
        MomentSystem(residual=residual, dim_theta=dim_theta, init=init, config=config)
    )

    w_hat, n_capped = weights(result.theta_hat)
    beta_hat = float(w_hat @ y_cc / n1)
    alpha_hat = result.theta_hat[:p_alpha]
    gamma_hat = (
        fix_gamma if fix_gamma is not None else float(result.theta_hat[p_alpha])
    )

    warnings = []
    if not result.converged:
        warnings.append(f"moment solver did not converge (status={result.status})")
    if n_capped > 0.1 * n_cc:
        warnings.append(
            f"degenerate overlap: {n_capped} of {n_cc} complete-case weights capped"
        )
    return EstimateReport(
        beta_hat=beta_hat,
        estimator="ipw-model2",
        nuisance={
            "alpha": alpha_hat.tolist(),
            "gamma": gamma_hat,
            "aux_regression": aux_coefs.ravel().tolist(),
        },
        solver=result,
        diagnostics={
            "n_primary": n1,
            "n_auxiliary": auxiliary.n,
            "n_complete_primary": n_cc,
            "n_complete_auxiliary": int(auxiliary.complete.sum()),
            "weight_cap_count": n_capped,
            "min_weight": float(w_hat.min()),
            "max_weight": float(w_hat.max()),
        },
        warnings=warnings,
    )


def recovered_propensity(
    x_row,
    y: float,
    alpha: CoefficientModel,
    or_model: OddsRatioModel,
    w_max: float = W_MAX,
) -> float:
    """Selection probability implied by (baseline propensity, odds ratio).

    Equals the baseline working model exactly at y = 0.
    """
    x = np.atleast_2d(np.asarray(x_row, dtype=float))
    w, _ = model2_weight_vector(x, np.array([float(y)]), alpha, or_model, w_max)
    return float(1.0 / w[0])

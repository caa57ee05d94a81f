"""IPW estimator for the outcome mean when missingness is driven by the
possibly-missing auxiliary variable M (conditional on covariates).

The reciprocal propensity q(x, m; alpha) = 1 / logistic(alpha . b(x, m)) is
calibrated so that the weighted complete-case average of a user-chosen
h(x, m) in the primary domain matches the auxiliary-domain regression
prediction of the same h, then the outcome mean is the q-weighted
complete-case average of Y over all primary rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import DomainTag, PooledDataset, VariableSchema
from .models import (
    W_MAX,
    BasisSpec,
    CoefficientModel,
    evaluate_basis_matrix,
    fit_logistic,
    solve_least_squares,
)
from .report import ConfidenceInterval, DomainArrays, EstimateReport, domain_arrays
from .solver import MomentSystem, SolverConfig, SolverResult, solve


class EstimationError(ValueError):
    pass


def _polynomial_x_basis(d: int, degree: int = 2) -> BasisSpec:
    text = "1"
    for j in range(1, d + 1):
        for p in range(1, degree + 1):
            text += f",x{j}" if p == 1 else f",x{j}^{p}"
    return BasisSpec.parse(text)


def _linear_xm_basis(d: int) -> BasisSpec:
    text = "1" + "".join(f",x{j}" for j in range(1, d + 1)) + ",m"
    return BasisSpec.parse(text)


@dataclass(frozen=True)
class Model1Spec:
    propensity_basis: BasisSpec
    h_basis: BasisSpec
    aux_regression_basis: BasisSpec
    outcome_basis: BasisSpec

    @classmethod
    def default(cls, schema: VariableSchema) -> "Model1Spec":
        d = schema.n_covariates
        xm = _linear_xm_basis(d)
        quad = _polynomial_x_basis(d)
        outcome = BasisSpec.parse(
            "1"
            + "".join(f",x{j},x{j}^2" for j in range(1, d + 1))
            + ",m"
        )
        return cls(
            propensity_basis=xm,
            h_basis=xm,
            aux_regression_basis=quad,
            outcome_basis=outcome,
        )


def _require_domains(dataset: PooledDataset) -> tuple[DomainArrays, DomainArrays]:
    primary = domain_arrays(dataset, DomainTag.PRIMARY)
    auxiliary = domain_arrays(dataset, DomainTag.AUXILIARY)
    if primary.n == 0 or auxiliary.n == 0:
        raise EstimationError("estimation requires records in both domains")
    return primary, auxiliary


def fit_aux_moment_targets(
    dataset: PooledDataset,
    h_basis: BasisSpec,
    aux_regression_basis: BasisSpec,
) -> tuple[np.ndarray, np.ndarray]:
    """Auxiliary-domain regression predictions of each h-component.

    Each column of h(X, M) is regressed on the X-only basis over auxiliary
    complete cases, and the fitted regressions are evaluated at every
    primary-domain X.  Returns (predictions with shape (n_primary, dim_h),
    coefficient matrix with shape (dim_aux_basis, dim_h)).
    """
    primary, auxiliary = _require_domains(dataset)
    cc = auxiliary.complete
    n_cc = int(cc.sum())
    if n_cc == 0:
        raise EstimationError("no complete cases in the auxiliary domain")
    if n_cc < len(aux_regression_basis.terms):
        raise EstimationError(
            f"only {n_cc} auxiliary complete cases for "
            f"{len(aux_regression_basis.terms)} regression terms"
        )
    h_cc = evaluate_basis_matrix(h_basis, auxiliary.x[cc], auxiliary.m[cc])
    design = evaluate_basis_matrix(aux_regression_basis, auxiliary.x[cc])
    names = aux_regression_basis.column_names()
    coefs = np.column_stack(
        [solve_least_squares(design, h_cc[:, j], names) for j in range(h_cc.shape[1])]
    )
    design_primary = evaluate_basis_matrix(aux_regression_basis, primary.x)
    return design_primary @ coefs, coefs


def _split_m_columns(basis: BasisSpec, m_dim: int) -> np.ndarray:
    """Boolean mask over output columns marking the ones that reference M."""
    mask = []
    for term in basis.terms:
        width = m_dim if (m_dim > 1 and term.uses_m) else 1
        mask.extend([term.uses_m] * width)
    return np.array(mask)


def _init_alpha(primary: DomainArrays, basis: BasisSpec, m_dim: int) -> np.ndarray:
    """Initial propensity coefficients: logistic fit of R on the X-only part
    of the basis over all primary rows; M-referencing coefficients start at 0."""
    m_mask = _split_m_columns(basis, m_dim)
    x_terms = BasisSpec(tuple(t for t in basis.terms if not t.uses_m))
    design = evaluate_basis_matrix(x_terms, primary.x)
    coef_x = fit_logistic(design, primary.r.astype(float))
    init = np.zeros(m_mask.size)
    init[~m_mask] = coef_x
    return init


def estimate_model1(
    dataset: PooledDataset,
    spec: Optional[Model1Spec] = None,
    config: Optional[SolverConfig] = None,
    w_max: float = W_MAX,
) -> EstimateReport:
    """Two-step IPW estimate: solve the h-moment system for the propensity
    coefficients, then average the reweighted complete-case outcomes."""
    if spec is None:
        spec = Model1Spec.default(dataset.schema)
    if config is None:
        config = SolverConfig()
    primary, auxiliary = _require_domains(dataset)
    m_dim = dataset.schema.m_dim
    cc = primary.complete
    n1 = primary.n
    n_cc = int(cc.sum())
    if n_cc == 0:
        raise EstimationError("no complete cases in the primary domain")

    preds, aux_coefs = fit_aux_moment_targets(
        dataset, spec.h_basis, spec.aux_regression_basis
    )
    target = preds.mean(axis=0)

    b_cc = evaluate_basis_matrix(spec.propensity_basis, primary.x[cc], primary.m[cc])
    h_cc = evaluate_basis_matrix(spec.h_basis, primary.x[cc], primary.m[cc])
    if h_cc.shape[1] < b_cc.shape[1]:
        raise EstimationError(
            f"h basis has {h_cc.shape[1]} components for {b_cc.shape[1]} "
            "propensity parameters"
        )

    def q_of(alpha: np.ndarray) -> np.ndarray:
        # q = 1 / logistic(eta) = 1 + exp(-eta), capped at w_max
        eta = b_cc @ alpha
        q = 1.0 + np.exp(np.minimum(-eta, 700.0))
        return np.minimum(q, w_max)

    def residual(alpha: np.ndarray) -> np.ndarray:
        return h_cc.T @ q_of(alpha) / n1 - target

    init = _init_alpha(primary, spec.propensity_basis, m_dim)
    result = solve(
        MomentSystem(
            residual=residual,
            dim_theta=b_cc.shape[1],
            init=init,
            config=config,
        )
    )

    q_hat = q_of(result.theta_hat)
    n_capped = int(np.sum(1.0 + np.exp(np.minimum(-(b_cc @ result.theta_hat), 700.0)) > w_max))
    beta_hat = float(q_hat @ primary.y[cc] / n1)

    warnings = []
    if not result.converged:
        warnings.append(f"moment solver did not converge (status={result.status})")
    report = EstimateReport(
        beta_hat=beta_hat,
        estimator="ipw-model1",
        nuisance={
            "alpha": result.theta_hat.tolist(),
            "aux_regression": aux_coefs.ravel().tolist(),
        },
        solver=result,
        diagnostics={
            "n_primary": n1,
            "n_auxiliary": auxiliary.n,
            "n_complete_primary": n_cc,
            "n_complete_auxiliary": int(auxiliary.complete.sum()),
            "weight_cap_count": n_capped,
            "min_weight": float(q_hat.min()),
            "max_weight": float(q_hat.max()),
        },
        warnings=warnings,
    )
    return report


def identify_beta_model1_plugin(
    dataset: PooledDataset,
    spec: Optional[Model1Spec] = None,
) -> float:
    """Outcome-regression plug-in of the identification functional.

    Fits E[Y | X, M] on primary complete cases, projects those fitted values
    onto the X-only basis over auxiliary complete cases, and averages the
    resulting predictions over all primary-domain X.
    """
    if spec is None:
        spec = Model1Spec.default(dataset.schema)
    primary, auxiliary = _require_domains(dataset)
    cc1 = primary.complete
    if int(cc1.sum()) == 0:
        raise EstimationError("no complete cases in the primary domain")
    design1 = evaluate_basis_matrix(spec.outcome_basis, primary.x[cc1], primary.m[cc1])
    g1_coef = solve_least_squares(
        design1, primary.y[cc1], spec.outcome_basis.column_names(dataset.schema.m_dim)
    )

    cc2 = auxiliary.complete
    if int(cc2.sum()) == 0:
        raise EstimationError("no complete cases in the auxiliary domain")
    g1_aux = (
        evaluate_basis_matrix(spec.outcome_basis, auxiliary.x[cc2], auxiliary.m[cc2])
        @ g1_coef
    )
    design2 = evaluate_basis_matrix(spec.aux_regression_basis, auxiliary.x[cc2])
    outer_coef = solve_least_squares(
        design2, g1_aux, spec.aux_regression_basis.column_names()
    )
    preds = evaluate_basis_matrix(spec.aux_regression_basis, primary.x) @ outer_coef
    return float(preds.mean())

"""MCAR and MAR reference estimators for the primary-domain outcome mean."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .data import DomainTag, PooledDataset, VariableSchema
from .models import BasisSpec, evaluate_basis_matrix, solve_least_squares
from .model1 import EstimationError
from .report import EstimateReport, domain_arrays


def default_mar_basis(schema: VariableSchema) -> BasisSpec:
    d = schema.n_covariates
    return BasisSpec.parse("1" + "".join(f",x{j}" for j in range(1, d + 1)))


def mcar_estimate(dataset: PooledDataset) -> EstimateReport:
    """Complete-case mean of Y in the primary domain."""
    primary = domain_arrays(dataset, DomainTag.PRIMARY)
    cc = primary.complete
    if int(cc.sum()) == 0:
        raise EstimationError("no complete cases in the primary domain")
    return EstimateReport(
        beta_hat=float(primary.y[cc].mean()),
        estimator="mcar",
        diagnostics={
            "n_primary": primary.n,
            "n_complete_primary": int(cc.sum()),
        },
    )


def mar_estimate(
    dataset: PooledDataset, x_basis: Optional[BasisSpec] = None
) -> EstimateReport:
    """Regression of Y on X over primary complete cases, averaged over all
    primary-domain X (targets the whole-domain outcome mean)."""
    if x_basis is None:
        x_basis = default_mar_basis(dataset.schema)
    primary = domain_arrays(dataset, DomainTag.PRIMARY)
    cc = primary.complete
    if int(cc.sum()) == 0:
        raise EstimationError("no complete cases in the primary domain")
    design = evaluate_basis_matrix(x_basis, primary.x[cc])
    coef = solve_least_squares(design, primary.y[cc], x_basis.column_names())
    preds = evaluate_basis_matrix(x_basis, primary.x) @ coef
    return EstimateReport(
        beta_hat=float(preds.mean()),
        estimator="mar",
        nuisance={"outcome_regression": coef.tolist()},
        diagnostics={
            "n_primary": primary.n,
            "n_complete_primary": int(cc.sum()),
        },
    )

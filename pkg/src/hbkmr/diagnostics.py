"""Residual-based heteroscedasticity diagnostics and WAIC model comparison.

Two residual routes. The model-based route subtracts the posterior-mean fit,
using the closed-form conditional mean of h at the plug-in posterior means of
(beta, gamma, tau, r). The model-free route fits an ordinary least-squares
approximation with exposure main effects, all pairwise exposure products, and
the covariates; it needs no MCMC and is the quick first look. Both feed the
same association table: Spearman correlation between absolute residuals and
each continuous predictor, largest-to-smallest group variance ratio for each
categorical one. Flags are advisory screens, not tests.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr

from .data import Dataset, VarianceDesign
from .kernel import factor_cov, kernel_matrix
from .model import LOG_2PI
from .sampler import PosteriorSamples

__all__ = [
    "SPEARMAN_FLAG",
    "VARIANCE_RATIO_FLAG",
    "AssociationRow",
    "ResidualReport",
    "bayesian_residuals",
    "linear_approx_residuals",
    "WaicResult",
    "waic",
    "compare",
]

SPEARMAN_FLAG = 0.2
VARIANCE_RATIO_FLAG = 2.0


@dataclass(frozen=True)
class AssociationRow:
    """Association between absolute residuals and one candidate predictor."""

    name: str
    kind: str  # "continuous" or "categorical"
    statistic: float
    flagged: bool


@dataclass
class ResidualReport:
    """Residuals, fitted values, and the residual-association screen."""

    residuals: np.ndarray
    fitted: np.ndarray
    method: str
    associations: list[AssociationRow]

    def frame(self):
        import pandas as pd

        return pd.DataFrame(
            [
                {
                    "name": a.name,
                    "kind": a.kind,
                    "statistic": a.statistic,
                    "flagged": a.flagged,
                }
                for a in self.associations
            ]
        )

    def flagged_names(self) -> list[str]:
        return [a.name for a in self.associations if a.flagged]


def bayesian_residuals(
    samples: PosteriorSamples,
    dataset: Dataset,
    W: VarianceDesign,
    predictors: list[str] | None = None,
) -> ResidualReport:
    """Residuals after removing the posterior-mean fit.

    ``e = y - E(h | y) - X E(beta | y)`` with E(h | y) evaluated in closed
    form at the posterior means of beta, gamma, tau, and r (single plug-in
    point, one factorization).
    """
    beta = samples.beta_draws.mean(axis=0)
    gamma = samples.gamma_draws.mean(axis=0)
    tau = float(samples.tau_draws.mean())
    r = samples.r_draws.mean(axis=0)
    K = kernel_matrix(dataset.Z, dataset.Z, r)
    s = np.exp(W.W @ gamma)
    fac = factor_cov(K, tau, s)
    resid0 = dataset.y - dataset.X @ beta if dataset.n_covariates else dataset.y.copy()
    e_h = tau * (K @ fac.solve(resid0))
    fitted = e_h + (dataset.X @ beta if dataset.n_covariates else 0.0)
    residuals = dataset.y - fitted
    return ResidualReport(
        residuals=residuals,
        fitted=fitted,
        method="posterior-mean-h",
        associations=_associations(residuals, dataset, predictors),
    )


def linear_approx_residuals(
    dataset: Dataset, predictors: list[str] | None = None
) -> ResidualReport:
    """Residuals from an OLS stand-in for the kernel fit.

    Regressors: intercept, exposure main effects, all pairwise exposure
    products, and the covariate columns. Collinear columns are tolerated
    (minimum-norm solution) with a warning.
    """
    Z, X, y = dataset.Z, dataset.X, dataset.y
    m = dataset.n_exposures
    blocks = [np.ones((dataset.n, 1)), Z]
    for a in range(m):
        for b in range(a + 1, m):
            blocks.append((Z[:, a] * Z[:, b])[:, None])
    if dataset.n_covariates:
        blocks.append(X)
    design = np.hstack(blocks)
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        warnings.warn(
            f"approximation design is collinear ({design.shape[1] - rank} redundant "
            "column(s) dropped)"
        )
    fitted = design @ coef
    residuals = y - fitted
    return ResidualReport(
        residuals=residuals,
        fitted=fitted,
        method="linear-approximation",
        associations=_associations(residuals, dataset, predictors),
    )


def _associations(
    residuals: np.ndarray, dataset: Dataset, predictors: list[str] | None
) -> list[AssociationRow]:
    dummy_cols = {n for names in dataset.categorical_groups.values() for n in names}
    if predictors is None:
        predictors = (
            list(dataset.z_names)
            + [n for n in dataset.x_names if n not in dummy_cols]
            + list(dataset.categorical_groups)
        )
    abs_resid = np.abs(residuals)
    rows = []
    for name in predictors:
        if name in dataset.categorical_groups:
            ratio = _group_variance_ratio(residuals, dataset, name)
            rows.append(
                AssociationRow(
                    name=name,
                    kind="categorical",
                    statistic=ratio,
                    flagged=bool(np.isfinite(ratio) and ratio > VARIANCE_RATIO_FLAG),
                )
            )
            continue
        if name in dataset.z_names:
            col = dataset.Z[:, dataset.z_names.index(name)]
        elif name in dataset.x_names:
            col = dataset.X[:, dataset.x_names.index(name)]
        else:
            raise ValueError(f"unknown predictor '{name}'")
        rho = spearmanr(abs_resid, col).statistic
        rho = float(rho) if np.isfinite(rho) else 0.0
        rows.append(
            AssociationRow(
                name=name,
                kind="continuous",
                statistic=rho,
                flagged=bool(abs(rho) > SPEARMAN_FLAG),
            )
        )
    return rows


def _group_variance_ratio(residuals: np.ndarray, dataset: Dataset, name: str) -> float:
    dummies = dataset.categorical_groups[name]
    cols = np.column_stack(
        [dataset.X[:, dataset.x_names.index(d)] for d in dummies]
    )
    level_of_row = np.where(cols.sum(axis=1) > 0, cols.argmax(axis=1) + 1, 0)
    variances = []
    for level in np.unique(level_of_row):
        grp = residuals[level_of_row == level]
        if grp.size >= 2:
            variances.append(float(np.var(grp, ddof=1)))
    if len(variances) < 2 or min(variances) <= 0:
        return math.nan
    return max(variances) / min(variances)


@dataclass
class WaicResult:
    """WAIC decomposition with its pointwise pieces."""

    waic: float
    lppd: float
    p_waic: float
    n_draws: int
    pointwise_lppd: np.ndarray
    pointwise_p: np.ndarray

    @property
    def n_points(self) -> int:
        return self.pointwise_lppd.shape[0]


def waic(
    samples: PosteriorSamples,
    dataset: Dataset,
    W: VarianceDesign,
    chunk: int = 2048,
) -> WaicResult:
    """Widely applicable information criterion from the retained draws.

    The pointwise likelihood is the coordinate marginal of the h-integrated
    model, ``N(y_i; x_i' beta, tau + exp(w_i' gamma))`` (the kernel diagonal
    is exactly one). lppd uses a running log-sum-exp over draws; the
    effective-parameter penalty is the per-point variance of the log density
    over draws. Needs at least 100 retained draws.
    """
    n_draws = samples.n_draws
    if n_draws < 100:
        raise ValueError(f"WAIC needs at least 100 retained draws, got {n_draws}")
    y = dataset.y
    n = dataset.n
    run_max = np.full(n, -np.inf)
    run_sum = np.zeros(n)
    mean = np.zeros(n)
    m2 = np.zeros(n)
    count = 0
    for start in range(0, n_draws, chunk):
        stop = min(start + chunk, n_draws)
        beta = samples.beta_draws[start:stop]
        gamma = samples.gamma_draws[start:stop]
        tau = samples.tau_draws[start:stop]
        mu = beta @ dataset.X.T if dataset.n_covariates else np.zeros((stop - start, n))
        var = tau[:, None] + np.exp(gamma @ W.W.T)
        logp = -0.5 * (LOG_2PI + np.log(var) + (y[None, :] - mu) ** 2 / var)
        # Running log-sum-exp per observation.
        chunk_max = logp.max(axis=0)
        new_max = np.maximum(run_max, chunk_max)
        run_sum = run_sum * np.exp(run_max - new_max) + np.exp(
            logp - new_max[None, :]
        ).sum(axis=0)
        run_max = new_max
        # Pairwise mean/variance combination for the per-observation
        # log-density variance over draws.
        c_n = logp.shape[0]
        c_mean = logp.mean(axis=0)
        c_m2 = ((logp - c_mean) ** 2).sum(axis=0)
        total = count + c_n
        delta = c_mean - mean
        m2 += c_m2 + delta * delta * (count * c_n / total)
        mean += delta * (c_n / total)
        count = total
    pointwise_lppd = run_max + np.log(run_sum) - math.log(n_draws)
    pointwise_p = m2 / (n_draws - 1) if n_draws > 1 else np.zeros(n)
    lppd = float(pointwise_lppd.sum())
    p_waic = float(pointwise_p.sum())
    return WaicResult(
        waic=-2.0 * (lppd - p_waic),
        lppd=lppd,
        p_waic=p_waic,
        n_draws=n_draws,
        pointwise_lppd=pointwise_lppd,
        pointwise_p=pointwise_p,
    )


def compare(results: list[WaicResult], labels: list[str]):
    """Rank models by WAIC (ascending; smaller is better).

    Returns a DataFrame with the WAIC decomposition and each model's
    difference from the best. Models must score the same observations.
    """
    import pandas as pd

    if len(results) != len(labels):
        raise ValueError("labels length does not match results")
    if not results:
        raise ValueError("nothing to compare")
    n_points = {res.n_points for res in results}
    if len(n_points) != 1:
        raise ValueError("models were scored on different numbers of observations")
    order = np.argsort([res.waic for res in results], kind="stable")
    best = results[order[0]].waic
    rows = [
        {
            "label": labels[i],
            "waic": results[i].waic,
            "delta_waic": results[i].waic - best,
            "lppd": results[i].lppd,
            "p_waic": results[i].p_waic,
        }
        for i in order
    ]
    return pd.DataFrame(rows)

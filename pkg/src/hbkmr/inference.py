"""Closed-form conditional inference on the exposure-response surface.

Given a retained posterior draw (beta, gamma, sqrt_tau, r), the surface
values at new exposure rows are jointly Gaussian with the data:

    mu     = tau * K(Znew, Z) V^{-1} (y - X beta)
    Sigma  = tau * K(Znew, Znew) - tau^2 K(Znew, Z) V^{-1} K(Z, Znew)

with ``V = tau * K(Z, Z) + diag(exp(W gamma))``. Predictions for new
observations add ``Xnew beta`` to the mean and ``diag(exp(Wnew gamma))`` to
the covariance. Draw-level moments are aggregated by the usual mixture rule:
the estimate is the average of the means, the covariance is the average
conditional covariance plus the between-draw covariance of the means, and
95% intervals use the normal approximation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, VarianceDesign, quantile
from .kernel import factor_cov, kernel_matrix
from .sampler import PosteriorSamples

__all__ = [
    "Z95",
    "EffectEstimate",
    "ConditionalSummary",
    "conditional_moments",
    "h_conditional",
    "univariate_curve",
    "exposure_quantile_row",
    "joint_effect",
    "joint_effect_table",
    "single_variable_effects",
    "predict",
]

Z95 = 1.959964


@dataclass(frozen=True)
class EffectEstimate:
    """Point estimate with normal-approximation 95% bounds."""

    label: str
    estimate: float
    sd: float
    lower95: float
    upper95: float
    x: float | None = None

    @classmethod
    def from_moments(
        cls, label: str, estimate: float, variance: float, x: float | None = None
    ) -> "EffectEstimate":
        sd = float(np.sqrt(max(variance, 0.0)))
        return cls(
            label=label,
            estimate=float(estimate),
            sd=sd,
            lower95=float(estimate - Z95 * sd),
            upper95=float(estimate + Z95 * sd),
            x=x,
        )

    @property
    def width(self) -> float:
        return self.upper95 - self.lower95


@dataclass
class ConditionalSummary:
    """Aggregated conditional moments over posterior draws.

    ``cov`` is ``e_cov + var_mean``: the posterior-average conditional
    covariance plus the between-draw covariance of the conditional means.
    """

    mean: np.ndarray
    cov: np.ndarray
    e_cov: np.ndarray
    var_mean: np.ndarray
    n_draws_used: int

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.cov), 0.0))

    def contrast(self, weights: np.ndarray, label: str) -> EffectEstimate:
        """Linear contrast ``weights' mean`` with variance ``w' cov w``."""
        weights = np.asarray(weights, dtype=float)
        est = float(weights @ self.mean)
        var = float(weights @ self.cov @ weights)
        return EffectEstimate.from_moments(label, est, var)


def conditional_moments(
    beta: np.ndarray,
    gamma: np.ndarray,
    sqrt_tau: float,
    r: np.ndarray,
    dataset: Dataset,
    W: VarianceDesign,
    Znew: np.ndarray,
    Xnew: np.ndarray | None = None,
    Wnew: np.ndarray | None = None,
    include_noise: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Conditional mean and covariance at ``Znew`` for one parameter draw.

    Without ``Xnew``/``include_noise`` this is the surface value h at the new
    rows; with both it is the predictive distribution of new outcomes.
    """
    beta = np.asarray(beta, dtype=float).ravel()
    Znew = np.atleast_2d(np.asarray(Znew, dtype=float))
    if Znew.shape[1] != dataset.n_exposures:
        raise ValueError("Znew column count does not match the exposures")
    tau = float(sqrt_tau) ** 2
    K = kernel_matrix(dataset.Z, dataset.Z, r)
    s = np.exp(W.W @ np.asarray(gamma, dtype=float))
    fac = factor_cov(K, tau, s)
    resid = dataset.y - dataset.X @ beta if dataset.n_covariates else dataset.y
    Kc = kernel_matrix(Znew, dataset.Z, r)
    B = fac.solve_lower(Kc.T)
    u = fac.solve_lower(resid)
    mu = tau * (B.T @ u)
    cov = tau * kernel_matrix(Znew, Znew, r) - (tau * tau) * (B.T @ B)
    cov = 0.5 * (cov + cov.T)
    if Xnew is not None:
        Xnew = np.atleast_2d(np.asarray(Xnew, dtype=float))
        if Xnew.shape[1] != dataset.n_covariates:
            raise ValueError("Xnew column count does not match the covariates")
        if dataset.n_covariates:
            mu = mu + Xnew @ beta
    if include_noise:
        if Wnew is None:
            raise ValueError("predictive moments need Wnew for the noise variances")
        Wnew = np.atleast_2d(np.asarray(Wnew, dtype=float))
        if Wnew.shape[1] != W.W.shape[1]:
            raise ValueError("Wnew column count does not match the variance design")
        if not np.all(Wnew[:, 0] == 1.0):
            raise ValueError("first column of Wnew must be all ones")
        cov = cov + np.diag(np.exp(Wnew @ np.asarray(gamma, dtype=float)))
    return mu, cov


def h_conditional(
    samples: PosteriorSamples,
    dataset: Dataset,
    W: VarianceDesign,
    Znew: np.ndarray,
    stride: int = 10,
) -> ConditionalSummary:
    """Aggregate the surface posterior at ``Znew`` over retained draws.

    ``stride`` thins the retained draws (default every 10th); pass 1 to use
    all of them. Aggregation is streamed, so memory stays at one covariance
    matrix regardless of the draw count.
    """
    return _aggregate(samples, dataset, W, Znew, stride, None, None, False)


def _aggregate(
    samples: PosteriorSamples,
    dataset: Dataset,
    W: VarianceDesign,
    Znew: np.ndarray,
    stride: int,
    Xnew: np.ndarray | None,
    Wnew: np.ndarray | None,
    include_noise: bool,
) -> ConditionalSummary:
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if samples.n_draws < 1:
        raise ValueError("no retained draws")
    Znew = np.atleast_2d(np.asarray(Znew, dtype=float))
    n_new = Znew.shape[0]
    count = 0
    mean = np.zeros(n_new)
    m2 = np.zeros((n_new, n_new))
    sum_ecov = np.zeros((n_new, n_new))
    for i in range(0, samples.n_draws, stride):
        mu, cov = conditional_moments(
            samples.beta_draws[i],
            samples.gamma_draws[i],
            float(samples.sqrt_tau_draws[i]),
            samples.r_draws[i],
            dataset,
            W,
            Znew,
            Xnew=Xnew,
            Wnew=Wnew,
            include_noise=include_noise,
        )
        count += 1
        delta = mu - mean
        mean += delta / count
        m2 += np.outer(delta, mu - mean)
        sum_ecov += cov
    e_cov = sum_ecov / count
    var_mean = m2 / (count - 1) if count > 1 else np.zeros((n_new, n_new))
    # The rank-one updates above are not individually symmetric, so restore
    # exact symmetry before handing the covariance out.
    var_mean = 0.5 * (var_mean + var_mean.T)
    return ConditionalSummary(
        mean=mean,
        cov=e_cov + var_mean,
        e_cov=e_cov,
        var_mean=var_mean,
        n_draws_used=count,
    )


def exposure_quantile_row(dataset: Dataset, p: float) -> np.ndarray:
    """Row with every exposure at its own empirical quantile ``p``."""
    return np.array([quantile(dataset.Z[:, j], p) for j in range(dataset.n_exposures)])


def univariate_curve(
    samples: PosteriorSamples,
    dataset: Dataset,
    W: VarianceDesign,
    exposure: str,
    grid_size: int = 50,
    fixed_quantile: float = 0.5,
    stride: int = 10,
) -> list[EffectEstimate]:
    """Cross-section of h along one exposure, others at a fixed quantile.

    The grid spans the exposure's 1st to 99th percentile. When the dataset
    carries transform records, each point's ``x`` and label report the
    original measurement units.
    """
    if exposure not in dataset.z_names:
        raise ValueError(f"unknown exposure '{exposure}'")
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    j = dataset.z_names.index(exposure)
    col = dataset.Z[:, j]
    grid = np.linspace(quantile(col, 0.01), quantile(col, 0.99), grid_size)
    base = exposure_quantile_row(dataset, fixed_quantile)
    Znew = np.tile(base, (grid_size, 1))
    Znew[:, j] = grid
    summary = h_conditional(samples, dataset, W, Znew, stride=stride)
    if dataset.transforms is not None:
        x_vals = dataset.transforms[j].inverse(grid)
    else:
        x_vals = grid
    sds = summary.sd
    return [
        EffectEstimate.from_moments(
            f"{exposure}={x_vals[g]:.6g}", summary.mean[g], sds[g] ** 2, x=float(x_vals[g])
        )
        for g in range(grid_size)
    ]


def joint_effect(
    samples: PosteriorSamples,
    dataset: Dataset,
    W: VarianceDesign,
    q: float,
    base_quantile: float = 0.25,
    stride: int = 10,
) -> EffectEstimate:
    """Contrast of h with all exposures at quantile ``q`` versus the base."""
    table = joint_effect_table(
        samples, dataset, W, [q], base_quantile=base_quantile, stride=stride
    )
    return table[0]


def joint_effect_table(
    samples: PosteriorSamples,
    dataset: Dataset,
    W: VarianceDesign,
    quantiles: list[float],
    base_quantile: float = 0.25,
    stride: int = 10,
) -> list[EffectEstimate]:
    """Joint-effect contrasts for several quantiles in one aggregation pass."""
    if not quantiles:
        raise ValueError("need at least one quantile")
    rows = [exposure_quantile_row(dataset, q) for q in quantiles]
    rows.append(exposure_quantile_row(dataset, base_quantile))
    summary = h_conditional(samples, dataset, W, np.vstack(rows), stride=stride)
    n_q = len(quantiles)
    out = []
    for i, q in enumerate(quantiles):
        w = np.zeros(n_q + 1)
        w[i] = 1.0
        w[n_q] = -1.0
        out.append(
            summary.contrast(w, f"h(q={q:g}) - h(q={base_quantile:g})")
        )
    return out


def single_variable_effects(
    samples: PosteriorSamples,
    dataset: Dataset,
    W: VarianceDesign,
    fixed_quantiles: tuple[float, ...] = (0.25, 0.5, 0.75),
    hi: float = 0.75,
    lo: float = 0.25,
    stride: int = 10,
) -> list[EffectEstimate]:
    """Per-exposure 75th-vs-25th contrasts with the others held at quantiles.

    For every exposure and every fixed quantile, contrasts h with that
    exposure at ``hi`` versus ``lo`` while the remaining exposures sit at the
    fixed quantile. All rows are evaluated in a single aggregation pass.
    """
    m = dataset.n_exposures
    rows = []
    pairs: list[tuple[int, int, str]] = []
    for j, name in enumerate(dataset.z_names):
        hi_val = quantile(dataset.Z[:, j], hi)
        lo_val = quantile(dataset.Z[:, j], lo)
        for f in fixed_quantiles:
            base = exposure_quantile_row(dataset, f)
            row_hi = base.copy()
            row_hi[j] = hi_val
            row_lo = base.copy()
            row_lo[j] = lo_val
            pairs.append(
                (len(rows), len(rows) + 1, f"{name}: q{hi:g} - q{lo:g} | others at q{f:g}")
            )
            rows.append(row_hi)
            rows.append(row_lo)
    summary = h_conditional(samples, dataset, W, np.vstack(rows), stride=stride)
    out = []
    for i_hi, i_lo, label in pairs:
        w = np.zeros(len(rows))
        w[i_hi] = 1.0
        w[i_lo] = -1.0
        out.append(summary.contrast(w, label))
    return out


def predict(
    samples: PosteriorSamples,
    dataset: Dataset,
    W: VarianceDesign,
    Xnew: np.ndarray,
    Znew: np.ndarray,
    Wnew: np.ndarray,
    stride: int = 10,
    labels: list[str] | None = None,
) -> list[EffectEstimate]:
    """Predictive intervals for new observations.

    Each draw's predictive distribution is the conditional of the new
    outcomes given the data: mean ``Xnew beta + h`` conditional mean,
    covariance the h conditional covariance plus the new error variances
    ``exp(Wnew gamma)``. Aggregation and intervals as in h_conditional.
    """
    Znew = np.atleast_2d(np.asarray(Znew, dtype=float))
    summary = _aggregate(
        samples, dataset, W, Znew, stride, np.atleast_2d(Xnew), np.atleast_2d(Wnew), True
    )
    n_new = Znew.shape[0]
    if labels is None:
        labels = [f"row {i}" for i in range(n_new)]
    if len(labels) != n_new:
        raise ValueError("labels length does not match the prediction rows")
    sds = summary.sd
    return [
        EffectEstimate.from_moments(labels[i], summary.mean[i], sds[i] ** 2)
        for i in range(n_new)
    ]

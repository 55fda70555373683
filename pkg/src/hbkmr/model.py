"""Model parameters, priors, and the marginalized log posterior.

The regression is ``y_i = h(z_i) + x_i' beta + eps_i`` with independent
``eps_i ~ N(0, sigma_i^2)`` and ``log sigma_i^2 = w_i' gamma``. Giving h a
Gaussian-process prior with covariance ``tau * K_r`` and integrating it out
leaves

    y | beta, gamma, tau, r  ~  MVN(X beta, tau * K_r + S_gamma)

with ``S_gamma = diag(exp(W gamma))``. This module evaluates that density and
the log prior; the sampler and the inference routines both build on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, VarianceDesign
from .kernel import CovFactor, factor_cov, kernel_matrix

__all__ = [
    "PriorSpec",
    "ParamState",
    "s_diag",
    "log_marginal_likelihood",
    "log_prior",
    "log_posterior",
]

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PriorSpec:
    """Prior hyperparameters.

    - ``beta``, ``gamma``: independent N(0, sd^2) on every coefficient.
    - ``sqrt(tau)``: Uniform(0, sqrt_tau_upper).
    - ``r_m``: either ``1/r_m ~ Uniform(0, r_upper)`` (density
      ``1/(r_upper * r^2)`` on ``r > 1/r_upper``), or ``r_m ~ Uniform(0,
      r_upper)`` when ``r_prior`` is "uniform".
    """

    beta_sd: float = math.sqrt(1000.0)
    gamma_sd: float = math.sqrt(1000.0)
    sqrt_tau_upper: float = 100.0
    r_prior: str = "inverse-uniform"
    r_upper: float = 100.0

    def __post_init__(self) -> None:
        if self.r_prior not in ("inverse-uniform", "uniform"):
            raise ValueError(f"unknown r prior '{self.r_prior}'")
        for name in ("beta_sd", "gamma_sd", "sqrt_tau_upper", "r_upper"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def r_support(self) -> tuple[float, float]:
        """Open support interval of each kernel weight under this prior."""
        if self.r_prior == "inverse-uniform":
            return (1.0 / self.r_upper, math.inf)
        return (0.0, self.r_upper)

    def log_density_r(self, r: np.ndarray) -> float:
        r = np.asarray(r, dtype=float)
        lo, hi = self.r_support()
        if np.any(r <= lo) or np.any(r >= hi):
            return -math.inf
        if self.r_prior == "inverse-uniform":
            return float(-r.size * math.log(self.r_upper) - 2.0 * np.log(r).sum())
        return float(-r.size * math.log(self.r_upper))


@dataclass
class ParamState:
    """One point in the sampled parameter space."""

    beta: np.ndarray
    gamma: np.ndarray
    sqrt_tau: float
    r: np.ndarray

    def __post_init__(self) -> None:
        self.beta = np.asarray(self.beta, dtype=float).ravel()
        self.gamma = np.asarray(self.gamma, dtype=float).ravel()
        self.r = np.asarray(self.r, dtype=float).ravel()
        self.sqrt_tau = float(self.sqrt_tau)
        if self.gamma.size < 1:
            raise ValueError("gamma must include at least the intercept")
        if self.r.size < 1:
            raise ValueError("r must have at least one weight")

    @property
    def tau(self) -> float:
        return self.sqrt_tau * self.sqrt_tau


def s_diag(W: VarianceDesign, gamma: np.ndarray) -> np.ndarray:
    """Per-observation error variances ``exp(W gamma)``."""
    gamma = np.asarray(gamma, dtype=float).ravel()
    if gamma.shape[0] != W.W.shape[1]:
        raise ValueError(
            f"gamma has {gamma.shape[0]} entries but W has {W.W.shape[1]} columns"
        )
    return np.exp(W.W @ gamma)


def log_marginal_likelihood(
    state: ParamState,
    dataset: Dataset,
    W: VarianceDesign,
    return_factor: bool = False,
) -> float | tuple[float, CovFactor]:
    """Log density of y under the h-integrated model at ``state``.

    Evaluates ``MVN(y; X beta, tau * K_r + diag(exp(W gamma)))`` with a
    single Cholesky factorization. With ``return_factor`` the factor is
    handed back for reuse (conditional inference needs the same solve).
    """
    if state.beta.shape[0] != dataset.n_covariates:
        raise ValueError("beta length does not match X")
    if state.r.shape[0] != dataset.n_exposures:
        raise ValueError("r length does not match Z")
    K = kernel_matrix(dataset.Z, dataset.Z, state.r)
    s = s_diag(W, state.gamma)
    fac = factor_cov(K, state.tau, s)
    resid = dataset.y - dataset.X @ state.beta if dataset.n_covariates else dataset.y
    ll = -0.5 * (dataset.n * LOG_2PI + fac.log_det + fac.quad_form(resid))
    if return_factor:
        return ll, fac
    return ll


def log_prior(state: ParamState, prior: PriorSpec) -> float:
    """Joint log prior density at ``state`` (-inf outside support)."""
    if not (0.0 < state.sqrt_tau < prior.sqrt_tau_upper):
        return -math.inf
    lp = prior.log_density_r(state.r)
    if lp == -math.inf:
        return lp
    lp += -math.log(prior.sqrt_tau_upper)
    lp += _normal_logpdf_sum(state.beta, prior.beta_sd)
    lp += _normal_logpdf_sum(state.gamma, prior.gamma_sd)
    return lp


def log_posterior(
    state: ParamState, dataset: Dataset, W: VarianceDesign, prior: PriorSpec
) -> float:
    """Unnormalized log posterior; skips the likelihood outside prior support."""
    lp = log_prior(state, prior)
    if lp == -math.inf:
        return lp
    return lp + log_marginal_likelihood(state, dataset, W)


def _normal_logpdf_sum(x: np.ndarray, sd: float) -> float:
    if x.size == 0:
        return 0.0
    return float(-0.5 * x.size * (LOG_2PI + 2.0 * math.log(sd)) - 0.5 * (x @ x) / (sd * sd))

"""Metropolis-within-Gibbs sampler for the marginalized posterior.

Each sweep updates, in order: the covariate coefficients ``beta`` by an exact
conjugate Gibbs draw, the log-variance coefficients ``gamma`` by a
random-walk block proposal, ``sqrt(tau)`` by a random walk on its log, and
each kernel weight ``r_m`` by a random walk on its log. Proposal step sizes
adapt toward target acceptance rates during burn-in (Robbins-Monro, frozen
afterwards).

Every proposal costs one Cholesky factorization of the N x N marginal
covariance, so the hot loop reuses preallocated Fortran-ordered buffers,
calls LAPACK directly, and updates the log-kernel incrementally when a
single ``r_m`` changes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import dpotrf, dtrtrs

from .data import Dataset, VarianceDesign
from .kernel import CovFactor, FactorizationError
from .model import LOG_2PI, ParamState, PriorSpec

__all__ = [
    "McmcConfig",
    "PosteriorSamples",
    "initialize",
    "fit",
    "gibbs_beta",
    "ess",
]

# Starting proposal scales; adaptation owns them after the first window.
_INIT_STEP_GAMMA = 0.1
_INIT_STEP_LOG_SQRT_TAU = 0.25
_INIT_STEP_LOG_R = 0.5
_STEP_LOG_BOUNDS = (-12.0, 6.0)
_EXP_OVERFLOW = 700.0


@dataclass(frozen=True)
class McmcConfig:
    """Chain length, thinning, seeding, and adaptation settings."""

    n_burn: int = 20_000
    n_keep: int = 80_000
    thin: int = 1
    seed: int = 0
    adapt_window: int = 50
    target_accept_scalar: float = 0.44
    target_accept_block: float = 0.234

    def __post_init__(self) -> None:
        if self.n_burn < 0 or self.n_keep < 1:
            raise ValueError("need n_burn >= 0 and n_keep >= 1")
        if self.thin < 1 or self.adapt_window < 1:
            raise ValueError("thin and adapt_window must be >= 1")
        for t in (self.target_accept_scalar, self.target_accept_block):
            if not 0.0 < t < 1.0:
                raise ValueError("target acceptance rates must be in (0, 1)")

    @property
    def n_sweeps(self) -> int:
        return self.n_burn + self.n_keep * self.thin


@dataclass
class PosteriorSamples:
    """Retained draws plus chain metadata.

    ``draws`` has one row per retained sweep with columns ordered
    ``beta as, gamma as, sqrt_tau, r as`` and labeled by ``columns``
    (``beta:<name>``, ``gamma:(intercept)``, ``gamma:<name>``, ``sqrt_tau``,
    ``r:<name>``).
    """

    draws: np.ndarray
    columns: list[str]
    n_beta: int
    n_gamma: int
    n_r: int
    acceptance: dict[str, float]
    ess: np.ndarray
    ess_degenerate: np.ndarray
    seed: int
    config: McmcConfig

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]

    @property
    def label(self) -> str:
        """"BKMR" for an intercept-only variance design, else "HBKMR"."""
        return "BKMR" if self.n_gamma == 1 else "HBKMR"

    @property
    def beta_draws(self) -> np.ndarray:
        return self.draws[:, : self.n_beta]

    @property
    def gamma_draws(self) -> np.ndarray:
        return self.draws[:, self.n_beta : self.n_beta + self.n_gamma]

    @property
    def sqrt_tau_draws(self) -> np.ndarray:
        return self.draws[:, self.n_beta + self.n_gamma]

    @property
    def tau_draws(self) -> np.ndarray:
        return self.sqrt_tau_draws**2

    @property
    def r_draws(self) -> np.ndarray:
        return self.draws[:, self.n_beta + self.n_gamma + 1 :]

    def state_at(self, index: int) -> ParamState:
        return ParamState(
            beta=self.beta_draws[index].copy(),
            gamma=self.gamma_draws[index].copy(),
            sqrt_tau=float(self.sqrt_tau_draws[index]),
            r=self.r_draws[index].copy(),
        )

    def to_frame(self):
        import pandas as pd

        return pd.DataFrame(self.draws, columns=self.columns)

    def summary(self):
        """Posterior mean/sd/quantiles and ESS per parameter."""
        import pandas as pd

        q = np.quantile(self.draws, [0.025, 0.5, 0.975], axis=0)
        return pd.DataFrame(
            {
                "parameter": self.columns,
                "mean": self.draws.mean(axis=0),
                "sd": self.draws.std(axis=0, ddof=1),
                "q2.5": q[0],
                "median": q[1],
                "q97.5": q[2],
                "ess": self.ess,
            }
        )


def initialize(dataset: Dataset, W: VarianceDesign, prior: PriorSpec) -> ParamState:
    """Deterministic starting point inside the prior support.

    beta from least squares (zeros if there are no covariates, with a warning
    on a rank-deficient design), the variance intercept from the log residual
    variance, ``sqrt(tau)`` at half the outcome sd, and every kernel weight
    at 0.1 (nudged inside the support if the prior excludes it).
    """
    X, y = dataset.X, dataset.y
    p = dataset.n_covariates
    if p:
        beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
        if rank < p:
            warnings.warn("covariate design is rank deficient; starting beta at 0")
            beta = np.zeros(p)
        resid = y - X @ beta
    else:
        beta = np.zeros(0)
        resid = y
    gamma = np.zeros(W.W.shape[1])
    gamma[0] = math.log(max(float(np.var(resid, ddof=1)), 1e-12))
    sqrt_tau = float(np.std(y, ddof=1)) / 2.0
    sqrt_tau = min(max(sqrt_tau, 1e-6), 0.5 * prior.sqrt_tau_upper)
    lo, hi = prior.r_support()
    r0 = 0.1
    if r0 >= hi:
        r0 = 0.5 * hi
    elif r0 <= lo:
        r0 = 2.0 * lo
    return ParamState(
        beta=beta, gamma=gamma, sqrt_tau=sqrt_tau, r=np.full(dataset.n_exposures, r0)
    )


def gibbs_beta(
    rng: np.random.Generator,
    fac: CovFactor,
    X: np.ndarray,
    y: np.ndarray,
    beta_sd: float,
) -> np.ndarray:
    """One exact draw of beta from its full conditional.

    The conditional is ``N(mu, Sigma)`` with
    ``Sigma = (X' V^{-1} X + I / beta_sd^2)^{-1}`` and
    ``mu = Sigma X' V^{-1} y``, where V is the factored marginal covariance.
    """
    B = fac.solve_lower(X)
    u = fac.solve_lower(y)
    p = X.shape[1]
    G = B.T @ B + np.eye(p) / (beta_sd * beta_sd)
    Lg = np.linalg.cholesky(G)
    mu = solve_triangular(
        Lg.T, solve_triangular(Lg, B.T @ u, lower=True, check_finite=False),
        lower=False, check_finite=False,
    )
    xi = rng.standard_normal(p)
    return mu + solve_triangular(Lg.T, xi, lower=False, check_finite=False)


def ess(chain: np.ndarray, return_degenerate: bool = False):
    """Effective sample size via the initial-positive-sequence estimator.

    Autocorrelations come from one FFT; sums of adjacent autocorrelation
    pairs are accumulated until the first nonpositive pair. The result is
    clipped to ``(0, n]``. A constant chain has no autocorrelation structure,
    so it reports ``n`` with the degeneracy flag set.
    """
    x = np.asarray(chain, dtype=float).ravel()
    n = x.size
    if n < 10:
        raise ValueError(f"need at least 10 samples to estimate ESS, got {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite values in chain")
    centered = x - x.mean()
    if np.all(centered == 0.0):
        return (float(n), True) if return_degenerate else float(n)
    nfft = next_fast_len(2 * n)
    f = np.fft.rfft(centered, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    rho = acov / acov[0]
    n_pairs = n // 2
    pair = rho[0 : 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    nonpos = np.flatnonzero(pair <= 0.0)
    cut = int(nonpos[0]) if nonpos.size else n_pairs
    tau_int = max(-1.0 + 2.0 * float(pair[:cut].sum()), 1e-12)
    value = float(np.clip(n / tau_int, 1e-12, n))
    return (value, False) if return_degenerate else value


class _Block:
    """Adaptation bookkeeping for one random-walk proposal block."""

    __slots__ = ("log_step", "target", "tries", "accepts", "windows", "kept_accepts")

    def __init__(self, step: float, target: float) -> None:
        self.log_step = math.log(step)
        self.target = target
        self.tries = 0
        self.accepts = 0
        self.windows = 0
        self.kept_accepts = 0

    @property
    def step(self) -> float:
        return math.exp(self.log_step)

    def adapt(self) -> None:
        if self.tries == 0:
            return
        self.windows += 1
        rate = self.accepts / self.tries
        self.log_step += (rate - self.target) / math.sqrt(self.windows)
        self.log_step = min(max(self.log_step, _STEP_LOG_BOUNDS[0]), _STEP_LOG_BOUNDS[1])
        self.tries = 0
        self.accepts = 0


class _Chain:
    """Mutable sampler state with preallocated factorization buffers."""

    def __init__(
        self,
        dataset: Dataset,
        W: VarianceDesign,
        prior: PriorSpec,
        config: McmcConfig,
        rng: np.random.Generator,
    ) -> None:
        self.rng = rng
        self.prior = prior
        self.config = config
        n = dataset.n
        self.n = n
        self.y = dataset.y
        self.X = np.asfortranarray(dataset.X) if dataset.n_covariates else dataset.X
        self.p = dataset.n_covariates
        self.Wmat = W.W
        self.q1 = W.W.shape[1]
        self.m = dataset.n_exposures
        self.c0 = n * LOG_2PI
        self.gamma_prec = 1.0 / (prior.gamma_sd * prior.gamma_sd)
        self.beta_prec = 1.0 / (prior.beta_sd * prior.beta_sd)
        # Per-coordinate squared distances, Fortran-ordered like the buffers
        # below so elementwise updates stream through memory in one order.
        Zt = dataset.Z.T
        self.D = [
            np.asfortranarray((Zt[j][:, None] - Zt[j][None, :]) ** 2)
            for j in range(self.m)
        ]
        f = lambda: np.empty((n, n), order="F")
        self.logK_cur, self.logK_prop = f(), f()
        self.K_cur, self.K_prop = f(), f()
        self.V_cur, self.V_prop = f(), f()
        self.s_cur = np.empty(n)
        self.s_prop = np.empty(n)
        self.lam_tau_bound = math.log(prior.sqrt_tau_upper)
        lo, hi = prior.r_support()
        self.log_r_lo = math.log(lo) if lo > 0 else -math.inf
        self.log_r_hi = math.log(hi) if math.isfinite(hi) else math.inf
        # Prior-plus-Jacobian slope for a log-scale walk on each r_m: the
        # inverse-uniform density 1/(u r^2) times Jacobian r gives exp(-rho),
        # the uniform density times Jacobian gives exp(+rho).
        self.rho_slope = -1.0 if prior.r_prior == "inverse-uniform" else 1.0

        state = initialize(dataset, W, prior)
        self.beta = state.beta.copy()
        self.gamma = state.gamma.copy()
        self.lam = math.log(state.sqrt_tau)
        self.rho = np.log(state.r)

        target_gamma = (
            config.target_accept_block if self.q1 > 1 else config.target_accept_scalar
        )
        self.block_gamma = _Block(_INIT_STEP_GAMMA, target_gamma)
        self.block_tau = _Block(_INIT_STEP_LOG_SQRT_TAU, config.target_accept_scalar)
        self.block_r = [
            _Block(_INIT_STEP_LOG_R, config.target_accept_scalar) for _ in range(self.m)
        ]

        self._rebuild_current()

    # -- state (re)construction ------------------------------------------

    def _rebuild_current(self) -> None:
        """Recompute every cached quantity from the raw parameters."""
        self.logK_cur[:] = 0.0
        for j in range(self.m):
            self.logK_cur -= math.exp(self.rho[j]) * self.D[j]
        np.exp(self.logK_cur, out=self.K_cur)
        np.exp(self.Wmat @ self.gamma, out=self.s_cur)
        self.resid = self.y - self.X @ self.beta if self.p else self.y.copy()
        L, logdet = self._factor_into(self.V_cur, self.K_cur, math.exp(2 * self.lam), self.s_cur)
        if L is None:
            raise FactorizationError(
                "marginal covariance is not positive definite at initialization"
            )
        self.logdet = logdet
        self.quad = self._quad(self.V_cur)
        self.ll = -0.5 * (self.c0 + self.logdet + self.quad)
        self.lp_gamma = -0.5 * self.gamma_prec * float(self.gamma @ self.gamma)

    def _factor_into(self, buf, K, tau, s):
        """Build tau*K + diag(s) in ``buf`` and factor it in place.

        Returns ``(buf, log_det)`` on success (the lower triangle of ``buf``
        is then the Cholesky factor) and ``(None, nan)`` on failure after one
        jitter retry.
        """
        n = self.n
        np.multiply(K, tau, out=buf)
        d = buf.flat[:: n + 1]
        trace = float(d.sum()) + float(s.sum())
        buf.flat[:: n + 1] += s
        _, info = dpotrf(buf, lower=1, clean=0, overwrite_a=1)
        if info != 0:
            np.multiply(K, tau, out=buf)
            buf.flat[:: n + 1] += s + 1e-10 * trace / n
            _, info = dpotrf(buf, lower=1, clean=0, overwrite_a=1)
            if info != 0:
                return None, math.nan
        logdet = 2.0 * float(np.log(buf.flat[:: n + 1]).sum())
        return buf, logdet

    def _quad(self, L) -> float:
        u, info = dtrtrs(L, self.resid, lower=1)
        if info != 0:
            raise FactorizationError("triangular solve failed")
        return float(u @ u)

    # -- sweep updates ----------------------------------------------------

    def update_beta(self) -> None:
        if not self.p:
            return
        L = self.V_cur
        B, _ = dtrtrs(L, self.X, lower=1)
        u, _ = dtrtrs(L, self.y, lower=1)
        G = B.T @ B
        G.flat[:: self.p + 1] += self.beta_prec
        Lg = np.linalg.cholesky(G)
        half = solve_triangular(Lg, B.T @ u, lower=True, check_finite=False)
        mu = solve_triangular(Lg.T, half, lower=False, check_finite=False)
        xi = self.rng.standard_normal(self.p)
        self.beta = mu + solve_triangular(Lg.T, xi, lower=False, check_finite=False)
        self.resid = self.y - self.X @ self.beta
        w = u - B @ self.beta
        self.quad = float(w @ w)
        self.ll = -0.5 * (self.c0 + self.logdet + self.quad)

    def update_gamma(self) -> None:
        blk = self.block_gamma
        blk.tries += 1
        prop = self.gamma + blk.step * self.rng.standard_normal(self.q1)
        log_u = math.log(1.0 - self.rng.uniform())
        eta = self.Wmat @ prop
        if float(eta.max()) > _EXP_OVERFLOW:
            return
        np.exp(eta, out=self.s_prop)
        lp_prop = -0.5 * self.gamma_prec * float(prop @ prop)
        L, logdet = self._factor_into(
            self.V_prop, self.K_cur, math.exp(2 * self.lam), self.s_prop
        )
        if L is None:
            return
        quad = self._quad(L)
        ll = -0.5 * (self.c0 + logdet + quad)
        if log_u < (ll + lp_prop) - (self.ll + self.lp_gamma):
            blk.accepts += 1
            blk.kept_accepts += 1
            self.gamma = prop
            self.lp_gamma = lp_prop
            self.s_cur, self.s_prop = self.s_prop, self.s_cur
            self.V_cur, self.V_prop = self.V_prop, self.V_cur
            self.ll, self.logdet, self.quad = ll, logdet, quad

    def update_sqrt_tau(self) -> None:
        blk = self.block_tau
        blk.tries += 1
        lam = self.lam + blk.step * self.rng.standard_normal()
        log_u = math.log(1.0 - self.rng.uniform())
        if lam >= self.lam_tau_bound:
            return
        L, logdet = self._factor_into(
            self.V_prop, self.K_cur, math.exp(2 * lam), self.s_cur
        )
        if L is None:
            return
        quad = self._quad(L)
        ll = -0.5 * (self.c0 + logdet + quad)
        # Uniform prior on sqrt(tau); the log-scale walk leaves the Jacobian
        # term exp(lam).
        if log_u < (ll + lam) - (self.ll + self.lam):
            blk.accepts += 1
            blk.kept_accepts += 1
            self.lam = lam
            self.V_cur, self.V_prop = self.V_prop, self.V_cur
            self.ll, self.logdet, self.quad = ll, logdet, quad

    def update_r(self, j: int) -> None:
        blk = self.block_r[j]
        blk.tries += 1
        rho = self.rho[j] + blk.step * self.rng.standard_normal()
        log_u = math.log(1.0 - self.rng.uniform())
        if not (self.log_r_lo < rho < self.log_r_hi):
            return
        delta = math.exp(rho) - math.exp(self.rho[j])
        np.multiply(self.D[j], -delta, out=self.logK_prop)
        self.logK_prop += self.logK_cur
        np.exp(self.logK_prop, out=self.K_prop)
        L, logdet = self._factor_into(
            self.V_prop, self.K_prop, math.exp(2 * self.lam), self.s_cur
        )
        if L is None:
            return
        quad = self._quad(L)
        ll = -0.5 * (self.c0 + logdet + quad)
        if log_u < (ll - self.ll) + self.rho_slope * (rho - self.rho[j]):
            blk.accepts += 1
            blk.kept_accepts += 1
            self.rho[j] = rho
            self.logK_cur, self.logK_prop = self.logK_prop, self.logK_cur
            self.K_cur, self.K_prop = self.K_prop, self.K_cur
            self.V_cur, self.V_prop = self.V_prop, self.V_cur
            self.ll, self.logdet, self.quad = ll, logdet, quad

    def sweep(self) -> None:
        self.update_beta()
        self.update_gamma()
        self.update_sqrt_tau()
        for j in range(self.m):
            self.update_r(j)

    def adapt(self) -> None:
        self.block_gamma.adapt()
        self.block_tau.adapt()
        for blk in self.block_r:
            blk.adapt()

    def reset_kept_counters(self) -> None:
        for blk in (self.block_gamma, self.block_tau, *self.block_r):
            blk.kept_accepts = 0

    def row(self, out: np.ndarray) -> None:
        out[: self.p] = self.beta
        out[self.p : self.p + self.q1] = self.gamma
        out[self.p + self.q1] = math.exp(self.lam)
        np.exp(self.rho, out=out[self.p + self.q1 + 1 :])

    def current_loglik(self) -> float:
        return self.ll


def fit(
    dataset: Dataset,
    W: VarianceDesign,
    prior: PriorSpec | None = None,
    config: McmcConfig | None = None,
) -> PosteriorSamples:
    """Sample the marginalized posterior and return the retained draws.

    Runs ``n_burn + n_keep * thin`` sweeps from the deterministic
    initialization, adapting proposal scales only during burn-in, and retains
    every ``thin``-th post-burn-in state. Identical inputs and seed give
    bit-identical draws.
    """
    prior = prior or PriorSpec()
    config = config or McmcConfig()
    if W.W.shape[0] != dataset.n:
        raise ValueError("variance design rows do not match dataset")
    rng = np.random.default_rng(config.seed)
    chain = _Chain(dataset, W, prior, config, rng)
    if not math.isfinite(chain.ll):
        raise FactorizationError("log posterior is not finite at initialization")

    n_cols = chain.p + chain.q1 + 1 + chain.m
    draws = np.empty((config.n_keep, n_cols))
    kept = 0
    for i in range(config.n_sweeps):
        chain.sweep()
        if i < config.n_burn:
            if (i + 1) % config.adapt_window == 0:
                chain.adapt()
            if i == config.n_burn - 1:
                chain.reset_kept_counters()
        else:
            k = i - config.n_burn
            if k % config.thin == config.thin - 1:
                chain.row(draws[kept])
                kept += 1

    columns = (
        [f"beta:{name}" for name in dataset.x_names]
        + ["gamma:(intercept)"]
        + [f"gamma:{name}" for name in W.names]
        + ["sqrt_tau"]
        + [f"r:{name}" for name in dataset.z_names]
    )
    n_post = config.n_keep * config.thin
    acceptance = {"gamma": chain.block_gamma.kept_accepts / n_post,
                  "sqrt_tau": chain.block_tau.kept_accepts / n_post}
    for j, name in enumerate(dataset.z_names):
        acceptance[f"r:{name}"] = chain.block_r[j].kept_accepts / n_post
    if chain.p:
        acceptance["beta"] = 1.0

    ess_vals = np.empty(n_cols)
    degenerate = np.zeros(n_cols, dtype=bool)
    for j in range(n_cols):
        if config.n_keep >= 10:
            ess_vals[j], degenerate[j] = ess(draws[:, j], return_degenerate=True)
        else:
            ess_vals[j] = config.n_keep

    return PosteriorSamples(
        draws=draws,
        columns=columns,
        n_beta=chain.p,
        n_gamma=chain.q1,
        n_r=chain.m,
        acceptance=acceptance,
        ess=ess_vals,
        ess_degenerate=degenerate,
        seed=config.seed,
        config=config,
    )

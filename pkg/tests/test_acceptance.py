"""Acceptance gate: ten end-to-end checks of the statistical engine.

Each test prints exactly one PASS/FAIL line (visible with ``pytest -s``) and
asserts the same condition, including its runtime budget. The heavy checks
fit batteries of seeded replicates; every seed below is frozen, so the gate
is deterministic. Expect the full module to take about 40 minutes.
"""

import math
import time

import numpy as np
from scipy.stats import kstest, multivariate_normal

from hbkmr.data import Dataset, VarianceDesign, build_variance_design
from hbkmr.diagnostics import bayesian_residuals, linear_approx_residuals, waic
from hbkmr.inference import conditional_moments, joint_effect_table, predict
from hbkmr.kernel import factor_cov, kernel_matrix
from hbkmr.model import ParamState, PriorSpec, log_marginal_likelihood
from hbkmr.sampler import McmcConfig, ess, fit, gibbs_beta
from hbkmr.simulate import CovariateSpec, SimConfig, generate

QS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]


def _line(idx: int, name: str, ok: bool, detail: str) -> None:
    msg = f"{'PASS' if ok else 'FAIL'} criterion {idx:2d} ({name}): {detail}"
    print(msg)
    assert ok, msg


def _mixture_config(seed, n, gamma, recipe, r=(0.5, 0.5), tau=0.5, m=2,
                    covariate=("w", "normal", {"sd": 1.0})):
    name, kind, params = covariate
    return SimConfig(
        n=n,
        exposure_names=[f"z{j}" for j in range(m)],
        r=r if len(r) == m else (r[0],) * m,
        tau=tau,
        gamma=gamma,
        beta=(0.4,),
        covariates=[CovariateSpec(name, kind, params)],
        variance_recipe=recipe,
        seed=seed,
    )


def test_01_homoscedastic_special_case():
    """Intercept-only variance design reproduces the constant-variance model."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(1001)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(4, 31))
        m = int(rng.integers(1, 4))
        p = int(rng.integers(0, 3))
        Z = rng.normal(size=(n, m))
        X = rng.normal(size=(n, p))
        y = rng.normal(size=n)
        beta = rng.normal(size=p)
        r = rng.uniform(0.05, 2.0, m)
        tau = rng.uniform(0.25, 4.0)
        sigma2 = rng.uniform(0.25, 4.0)
        dataset = Dataset(
            y=y, X=X, Z=Z,
            x_names=[f"x{i}" for i in range(p)],
            z_names=[f"z{i}" for i in range(m)],
        )
        W = VarianceDesign(W=np.ones((n, 1)), names=[])
        state = ParamState(
            beta=beta, gamma=np.array([math.log(sigma2)]),
            sqrt_tau=math.sqrt(tau), r=r,
        )
        ours = log_marginal_likelihood(state, dataset, W)
        K = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                K[i, j] = math.exp(-float(np.sum(r * (Z[i] - Z[j]) ** 2)))
        ref = multivariate_normal.logpdf(
            y, mean=X @ beta, cov=tau * K + sigma2 * np.eye(n)
        )
        worst = max(worst, abs(ours - float(ref)))
    el = time.perf_counter() - t0
    _line(
        1, "homoscedastic special case", worst < 1e-10 and el < 10.0,
        f"max |log-likelihood diff| {worst:.2e} over 100 instances, {el:.1f}s",
    )


def test_02_surface_integration_identities():
    """Woodbury collapse and brute-force Monte Carlo integration of h."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(1002)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(3, 21))
        m = int(rng.integers(1, 4))
        Z = rng.normal(size=(n, m))
        r = rng.uniform(0.3, 1.5, m)
        tau = rng.uniform(0.3, 3.0)
        s = np.exp(rng.uniform(-1.0, 1.0, n))
        K = kernel_matrix(Z, Z, r) + 1e-6 * np.eye(n)
        S = np.diag(s)
        TK = tau * K
        left = S - S @ np.linalg.solve(TK + S, S)
        right = np.linalg.inv(np.diag(1.0 / s) + np.linalg.inv(TK))
        worst = max(worst, float(np.max(np.abs(left - right))))

    sigmas = []
    for n, seed in ((3, 7), (5, 8), (7, 9)):
        rng = np.random.default_rng(seed)
        Z = rng.normal(size=(n, 2))
        X = rng.normal(size=(n, 1))
        beta = np.array([0.5])
        r = rng.uniform(0.2, 0.8, 2)
        tau = 0.6
        W = VarianceDesign(
            W=np.column_stack([np.ones(n), rng.normal(size=n)]),
            names=["w"],
        )
        gamma = np.array([-0.4, 0.5])
        s = np.exp(W.W @ gamma)
        y = X @ beta + rng.normal(size=n) * np.sqrt(s + tau)
        dataset = Dataset(y=y, X=X, Z=Z, x_names=["x0"], z_names=["z0", "z1"])
        state = ParamState(beta=beta, gamma=gamma, sqrt_tau=math.sqrt(tau), r=r)
        closed = math.exp(log_marginal_likelihood(state, dataset, W))
        L = np.linalg.cholesky(tau * kernel_matrix(Z, Z, r) + 1e-12 * np.eye(n))
        H = rng.standard_normal((1_000_000, n)) @ L.T
        resid = y - X @ beta
        log_dens = -0.5 * (
            np.sum((resid - H) ** 2 / s, axis=1)
            + float(np.sum(np.log(2.0 * np.pi * s)))
        )
        dens = np.exp(log_dens)
        se = float(dens.std(ddof=1)) / math.sqrt(dens.size)
        sigmas.append(abs(float(dens.mean()) - closed) / se)
    el = time.perf_counter() - t0
    _line(
        2, "surface integration identities",
        worst < 1e-8 and max(sigmas) < 3.0 and el < 120.0,
        f"Woodbury max |diff| {worst:.2e}; Monte Carlo gaps "
        f"{[f'{v:.2f}' for v in sigmas]} MC standard errors, {el:.0f}s",
    )


def _block_inversion(mu1, mu2, S11, S12, S22, y):
    """Condition a joint Gaussian on its first block via the precision matrix."""
    joint = np.block([[S11, S12], [S12.T, S22]])
    lam = np.linalg.inv(joint)
    n1 = S11.shape[0]
    cov = np.linalg.inv(lam[n1:, n1:])
    mean = mu2 - cov @ lam[n1:, :n1] @ (y - mu1)
    return mean, cov


def test_03_conditioning_oracle():
    """Surface and predictive moments match explicit joint-covariance conditioning."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(1003)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(5, 26))
        n_new = int(rng.integers(1, 5))
        m = int(rng.integers(1, 4))
        p = int(rng.integers(0, 3))
        Z = rng.normal(size=(n, m))
        Znew = rng.normal(size=(n_new, m))
        X = rng.normal(size=(n, p))
        Xnew = rng.normal(size=(n_new, p))
        y = rng.normal(size=n)
        beta = rng.normal(size=p)
        gamma = np.array([-0.3, 0.4])
        sqrt_tau = float(rng.uniform(0.4, 1.3))
        r = rng.uniform(0.1, 1.0, m)
        dataset = Dataset(
            y=y, X=X, Z=Z,
            x_names=[f"x{i}" for i in range(p)],
            z_names=[f"z{i}" for i in range(m)],
        )
        W = VarianceDesign(
            W=np.column_stack([np.ones(n), rng.normal(size=n)]),
            names=["w"],
        )
        Wnew = np.column_stack([np.ones(n_new), rng.normal(size=n_new)])
        tau = sqrt_tau**2
        S11 = tau * kernel_matrix(Z, Z, r) + np.diag(np.exp(W.W @ gamma))
        S12 = tau * kernel_matrix(Z, Znew, r)
        K_new = tau * kernel_matrix(Znew, Znew, r)
        mu1 = X @ beta

        mu_h, cov_h = conditional_moments(beta, gamma, sqrt_tau, r, dataset, W, Znew)
        ref_mu, ref_cov = _block_inversion(
            mu1, np.zeros(n_new), S11, S12, K_new, y
        )
        worst = max(
            worst,
            float(np.max(np.abs(mu_h - ref_mu))),
            float(np.max(np.abs(cov_h - ref_cov))),
        )

        mu_p, cov_p = conditional_moments(
            beta, gamma, sqrt_tau, r, dataset, W, Znew,
            Xnew=Xnew, Wnew=Wnew, include_noise=True,
        )
        ref_mu, ref_cov = _block_inversion(
            mu1, Xnew @ beta, S11, S12,
            K_new + np.diag(np.exp(Wnew @ gamma)), y,
        )
        worst = max(
            worst,
            float(np.max(np.abs(mu_p - ref_mu))),
            float(np.max(np.abs(cov_p - ref_cov))),
        )
    el = time.perf_counter() - t0
    _line(
        3, "conditioning oracle", worst < 1e-8 and el < 60.0,
        f"max |moment diff| {worst:.2e} over 50 instances, {el:.1f}s",
    )


def test_04_parameter_recovery():
    """The log-variance slope is recovered across 20 seeded replicates."""
    t0 = time.perf_counter()
    covered = 0
    errors = []
    for rep in range(20):
        seed = 2000 + rep
        dataset, W, _ = generate(
            _mixture_config(
                seed, 300, (-1.0, 0.8), [("w", "identity")],
                r=(0.3,), m=4,
            )
        )
        samples = fit(
            dataset, W, config=McmcConfig(n_burn=5000, n_keep=20000, seed=seed)
        )
        slope = samples.gamma_draws[:, 1]
        lo, hi = np.quantile(slope, [0.025, 0.975])
        covered += lo <= 0.8 <= hi
        errors.append(float(slope.mean()) - 0.8)
    bias = float(np.mean(errors))
    el = time.perf_counter() - t0
    _line(
        4, "parameter recovery",
        covered >= 17 and abs(bias) < 0.25 and el < 1800.0,
        f"slope coverage {covered}/20, mean bias {bias:+.3f}, {el:.0f}s",
    )


def test_05_waic_ordering():
    """WAIC prefers the true variance structure and stays neutral without one."""
    t0 = time.perf_counter()
    wins = 0
    for rep in range(20):
        seed = 2100 + rep
        dataset, W_het, _ = generate(
            _mixture_config(seed, 200, (-1.2, 1.5), [("w", "identity")])
        )
        W_hom = build_variance_design(dataset, [])
        mc = McmcConfig(n_burn=1500, n_keep=4000, seed=seed)
        f_het = fit(dataset, W_het, config=mc)
        f_hom = fit(dataset, W_hom, config=mc)
        wins += waic(f_het, dataset, W_het).waic < waic(f_hom, dataset, W_hom).waic

    null_gaps = []
    for rep in range(20):
        seed = 2200 + rep
        dataset, _, _ = generate(_mixture_config(seed, 250, (-0.6,), []))
        W_het = build_variance_design(dataset, [("w", "identity")])
        W_hom = build_variance_design(dataset, [])
        mc = McmcConfig(n_burn=1500, n_keep=4000, seed=seed)
        f_het = fit(dataset, W_het, config=mc)
        f_hom = fit(dataset, W_hom, config=mc)
        null_gaps.append(
            waic(f_het, dataset, W_het).waic - waic(f_hom, dataset, W_hom).waic
        )
    null_median = float(np.median(np.abs(null_gaps)))
    el = time.perf_counter() - t0
    _line(
        5, "WAIC ordering",
        wins >= 18 and null_median < 10.0 and el < 1800.0,
        f"heteroscedastic wins {wins}/20, null median |gap| {null_median:.1f}, "
        f"{el:.0f}s",
    )


def test_06_interval_width_direction():
    """Modeling the variance narrows joint-effect intervals by a moderate margin."""
    t0 = time.perf_counter()
    reductions = []
    widths_het, widths_hom = [], []
    for rep in range(20):
        seed = 2300 + rep
        dataset, W_het, _ = generate(
            _mixture_config(seed, 200, (-0.8, 1.0), [("w", "identity")])
        )
        W_hom = build_variance_design(dataset, [])
        mc = McmcConfig(n_burn=1500, n_keep=4000, seed=seed)
        f_het = fit(dataset, W_het, config=mc)
        f_hom = fit(dataset, W_hom, config=mc)
        table_het = joint_effect_table(f_het, dataset, W_het, QS)
        table_hom = joint_effect_table(f_hom, dataset, W_hom, QS)
        for a, b in zip(table_het, table_hom):
            reductions.append(100.0 * (b.width - a.width) / b.width)
            widths_het.append(a.width)
            widths_hom.append(b.width)
    med = float(np.median(reductions))
    narrower = float(np.median(widths_het)) < float(np.median(widths_hom))
    el = time.perf_counter() - t0
    _line(
        6, "interval width direction",
        narrower and 2.0 <= med <= 30.0 and el < 1200.0,
        f"median 95% width reduction {med:.1f}% over 20 replicates x 9 "
        f"quantiles, {el:.0f}s",
    )


def test_07_diagnostics_detection():
    """Residual screens detect an injected fan shape and stay quiet on null data."""
    t0 = time.perf_counter()

    def driver_stats(seed, gamma, recipe):
        dataset, _, _ = generate(
            _mixture_config(seed, 200, gamma, recipe, r=(0.3, 0.3), tau=0.4)
        )
        W_hom = build_variance_design(dataset, [])
        f_hom = fit(
            dataset, W_hom, config=McmcConfig(n_burn=600, n_keep=1000, seed=seed)
        )
        s_bayes = next(
            a.statistic
            for a in bayesian_residuals(f_hom, dataset, W_hom).associations
            if a.name == "w"
        )
        s_lin = next(
            a.statistic
            for a in linear_approx_residuals(dataset).associations
            if a.name == "w"
        )
        return s_bayes, s_lin

    fan_hits = concordant = 0
    for rep in range(20):
        s_bayes, s_lin = driver_stats(2400 + rep, (-0.8, 0.8), [("w", "identity")])
        fan_hits += s_bayes > 0.2
        concordant += (s_bayes > 0.2) and (s_lin > 0.2)
    null_ok = 0
    for rep in range(20):
        s_bayes, _ = driver_stats(2500 + rep, (-0.4,), [])
        null_ok += abs(s_bayes) < 0.15
    el = time.perf_counter() - t0
    _line(
        7, "diagnostics detection",
        fan_hits >= 18 and null_ok >= 18 and concordant >= 16 and el < 600.0,
        f"fan detected {fan_hits}/20, null quiet {null_ok}/20, methods "
        f"concordant {concordant}/20, {el:.0f}s",
    )


def test_08_predictive_coverage():
    """Held-out predictive intervals hit nominal coverage, wider in the noisy group."""
    t0 = time.perf_counter()
    covered = total = 0
    width_hi, width_lo = [], []
    for rep in range(20):
        seed = 2600 + rep
        full, W_full, _ = generate(
            _mixture_config(
                seed, 160, (-1.2, 1.6), [("g", "identity")],
                r=(0.3, 0.3), covariate=("g", "bernoulli", {"p": 0.5}),
            )
        )
        train = Dataset(
            y=full.y[:120], X=full.X[:120], Z=full.Z[:120],
            x_names=full.x_names, z_names=full.z_names,
        )
        W_train = VarianceDesign(W=W_full.W[:120], names=W_full.names)
        samples = fit(
            train, W_train, config=McmcConfig(n_burn=1000, n_keep=2000, seed=seed)
        )
        preds = predict(
            samples, train, W_train,
            Xnew=full.X[120:], Znew=full.Z[120:], Wnew=W_full.W[120:],
        )
        y_test = full.y[120:]
        group = full.X[120:, 0]
        for i, p in enumerate(preds):
            total += 1
            covered += p.lower95 <= y_test[i] <= p.upper95
            (width_hi if group[i] == 1.0 else width_lo).append(p.width)
    rate = covered / total
    hi, lo = float(np.mean(width_hi)), float(np.mean(width_lo))
    el = time.perf_counter() - t0
    _line(
        8, "predictive coverage",
        0.90 <= rate <= 0.98 and hi > lo and el < 900.0,
        f"coverage {rate:.3f} over {total} held-out rows, widths "
        f"{hi:.2f} (high-variance) vs {lo:.2f} (low), {el:.0f}s",
    )


def test_09_sampler_correctness():
    """The beta step samples its exact conditional; ESS tracks AR(1) theory."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(1010)
    n, p, m = 40, 3, 2
    Z = rng.normal(size=(n, m))
    X = rng.normal(size=(n, p))
    y = rng.normal(size=n)
    gamma = np.array([-0.3, 0.4])
    tau, r = 0.7, np.array([0.4, 0.6])
    W = VarianceDesign(
        W=np.column_stack([np.ones(n), rng.normal(size=n)]),
        names=["w"],
    )
    s = np.exp(W.W @ gamma)
    K = kernel_matrix(Z, Z, r)
    fac = factor_cov(K, tau, s)
    beta_sd = math.sqrt(1000.0)
    draws = np.array([gibbs_beta(rng, fac, X, y, beta_sd) for _ in range(4000)])
    Vi = np.linalg.inv(tau * K + np.diag(s))
    Sigma = np.linalg.inv(X.T @ Vi @ X + np.eye(p) / 1000.0)
    mu = Sigma @ X.T @ Vi @ y
    L = np.linalg.cholesky(Sigma)
    standardized = np.linalg.solve(L, (draws - mu).T).ravel()
    p_value = float(kstest(standardized, "norm").pvalue)

    ess_rel_errors = []
    for rho, seed in ((0.5, 31), (0.9, 32)):
        rng2 = np.random.default_rng(seed)
        nn = 40000
        innov = rng2.standard_normal(nn) * math.sqrt(1.0 - rho * rho)
        x = np.empty(nn)
        x[0] = rng2.standard_normal()
        for t in range(1, nn):
            x[t] = rho * x[t - 1] + innov[t]
        truth = nn * (1.0 - rho) / (1.0 + rho)
        ess_rel_errors.append(abs(ess(x) - truth) / truth)
    el = time.perf_counter() - t0
    _line(
        9, "sampler correctness",
        p_value > 0.01 and max(ess_rel_errors) <= 0.30 and el < 300.0,
        f"KS p-value {p_value:.3f} on 12000 standardized draws, ESS relative "
        f"errors {[f'{v:.2f}' for v in ess_rel_errors]}, {el:.0f}s",
    )


def test_10_prior_sensitivity():
    """Switching to a uniform kernel-weight prior flips no well-identified sign."""
    t0 = time.perf_counter()
    n_strong = n_flips = 0
    for rep in range(3):
        seed = 2700 + rep
        dataset, W, _ = generate(
            _mixture_config(
                seed, 150, (-0.7, 0.6), [("w", "identity")],
                r=(0.3,), tau=1.0, m=3,
            )
        )
        mc = McmcConfig(n_burn=1500, n_keep=3000, seed=seed)
        f_default = fit(dataset, W, config=mc)
        f_uniform = fit(
            dataset, W, prior=PriorSpec(r_prior="uniform", r_upper=5.0), config=mc
        )
        table_a = joint_effect_table(f_default, dataset, W, QS)
        table_b = joint_effect_table(f_uniform, dataset, W, QS)
        for a, b in zip(table_a, table_b):
            if abs(a.estimate) > 2.0 * a.sd:
                n_strong += 1
                n_flips += np.sign(a.estimate) != np.sign(b.estimate)
    el = time.perf_counter() - t0
    _line(
        10, "prior sensitivity",
        n_strong >= 3 and n_flips == 0 and el < 1200.0,
        f"{n_flips} sign flips among {n_strong} strongly identified joint "
        f"effects, {el:.0f}s",
    )

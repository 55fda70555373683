"""Command-line workflow: fit, diagnose, sections, predict, waic, simulate.

``fit`` reads a JSON run configuration, runs the chain, and writes a
self-contained artifact directory (draws, analysis arrays, metadata, and a
run manifest). The other commands load such artifacts and emit CSV tables
and SVG plots. Exit codes: 0 on success, 1 for user or data errors, 2 for
numerical failures.

Given the same configuration and seed, every output is byte-identical across
runs except the timestamp and timings in the manifest.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .data import (
    DataError,
    Dataset,
    ExposureTransform,
    VarianceDesign,
    apply_exposure_transforms,
    build_variance_design,
    load_csv,
    standardize_exposures,
)
from .diagnostics import bayesian_residuals, compare, linear_approx_residuals, waic
from .inference import (
    EffectEstimate,
    joint_effect_table,
    predict,
    single_variable_effects,
    univariate_curve,
)
from .kernel import FactorizationError
from .model import PriorSpec
from .plots import save_curve_svg, save_intervals_svg, save_residuals_svg
from .sampler import McmcConfig, PosteriorSamples, fit
from .simulate import EXAMPLE_EXPOSURE_QUANTILES, CovariateSpec, SimConfig, generate

FLOAT_FMT = "%.17g"

_FIT_KEYS = {
    "input",
    "outcome",
    "exposures",
    "covariates",
    "exposure_shift",
    "variance",
    "prior",
    "mcmc",
    "output_dir",
}
_SIM_KEYS = {
    "n",
    "exposures",
    "exposure_corr",
    "calibration",
    "covariates",
    "beta",
    "variance",
    "gamma",
    "tau",
    "r",
    "outcome",
    "seed",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise _UsageError(message)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            parser.print_help(sys.stderr)
            return 1
        args.func(args)
        return 0
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FactorizationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> _Parser:
    parser = _Parser(prog="hbkmr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hbkmr {__version__}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("fit", help="run the sampler and write a fit artifact")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--input", help="override the input CSV path")
    p.add_argument("--output-dir", help="override the artifact directory")
    p.add_argument("--seed", type=int, help="override the chain seed")
    p.add_argument("--n-burn", type=int, help="override burn-in sweeps")
    p.add_argument("--n-keep", type=int, help="override retained draws")
    p.add_argument("--thin", type=int, help="override thinning")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("diagnose", help="residual heteroscedasticity screen")
    p.add_argument("--artifact", required=True)
    p.add_argument(
        "--method",
        choices=["posterior-mean-h", "linear-approximation", "both"],
        default="both",
    )
    p.add_argument(
        "--predictors",
        help="comma-separated predictors to screen (default: all exposures,"
        " continuous covariates, and categorical groups)",
    )
    p.add_argument("--output-dir", default=".")
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("sections", help="exposure-response cross-sections")
    p.add_argument("--artifact", required=True)
    p.add_argument("--compare", help="second artifact for CI-width comparison")
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--base-quantile", type=float, default=0.25)
    p.add_argument(
        "--quantiles", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9",
        help="comma-separated joint-effect quantiles",
    )
    p.add_argument(
        "--fixed-quantiles", default="0.25,0.5,0.75",
        help="comma-separated quantiles at which the other exposures are held",
    )
    p.add_argument("--stride", type=int, default=10, help="use every stride-th draw")
    p.add_argument("--output-dir", default=".")
    p.set_defaults(func=_cmd_sections)

    p = sub.add_parser("predict", help="predictive intervals for observations")
    p.add_argument("--artifact", required=True)
    p.add_argument("--input", help="CSV of new observations (default: training rows)")
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--output-dir", default=".")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("waic", help="model comparison by WAIC")
    p.add_argument("--artifacts", nargs="+", required=True)
    p.add_argument("--labels", help="comma-separated labels (default: directory names)")
    p.add_argument("--output", help="optional CSV path for the comparison table")
    p.set_defaults(func=_cmd_waic)

    p = sub.add_parser("simulate", help="draw a synthetic dataset from the model")
    p.add_argument("--config", required=True, help="JSON simulation configuration")
    p.add_argument("--output", required=True, help="CSV path for the dataset")
    p.add_argument("--truth", help="optional JSON path for the generating truth")
    p.add_argument("--seed", type=int, help="override the simulation seed")
    p.set_defaults(func=_cmd_simulate)

    return parser


# -- fit ------------------------------------------------------------------


def _cmd_fit(args: argparse.Namespace) -> None:
    t_start = time.perf_counter()
    raw = _read_json(args.config)
    _check_keys(raw, _FIT_KEYS, "fit config")
    for key in ("input", "outcome", "exposures"):
        if key not in raw:
            raise DataError(f"fit config is missing '{key}'")
    if args.input:
        raw["input"] = args.input
    if args.output_dir:
        raw["output_dir"] = args.output_dir
    mcmc_dict = dict(raw.get("mcmc", {}))
    for flag in ("seed", "n_burn", "n_keep", "thin"):
        value = getattr(args, flag)
        if value is not None:
            mcmc_dict[flag] = value
    raw["mcmc"] = mcmc_dict
    out_dir = Path(raw.get("output_dir", "hbkmr_fit"))

    config = McmcConfig(**mcmc_dict)
    prior = PriorSpec(**raw.get("prior", {}))
    recipe = [tuple(pair) for pair in raw.get("variance", [])]

    dataset = load_csv(
        raw["input"], raw["outcome"], list(raw["exposures"]), list(raw.get("covariates", []))
    )
    dataset = standardize_exposures(dataset, shift=float(raw.get("exposure_shift", 0.0)))
    W = build_variance_design(dataset, recipe)

    t_fit = time.perf_counter()
    samples = fit(dataset, W, prior, config)
    fit_seconds = time.perf_counter() - t_fit

    out_dir.mkdir(parents=True, exist_ok=True)
    samples.to_frame().to_csv(out_dir / "samples.csv", index=False, float_format=FLOAT_FMT)
    _write_dataset_csv(out_dir / "dataset.csv", dataset, W)
    meta = {
        "version": __version__,
        "label": samples.label,
        "outcome_name": dataset.outcome_name,
        "x_names": dataset.x_names,
        "z_names": dataset.z_names,
        "w_names": W.names,
        "categorical_groups": dataset.categorical_groups,
        "categorical_levels": dataset.categorical_levels,
        "transforms": [
            {"name": t.name, "shift": t.shift, "mean": t.mean, "sd": t.sd}
            for t in (dataset.transforms or [])
        ],
        "variance_recipe": [list(pair) for pair in recipe],
        "prior": {
            "beta_sd": prior.beta_sd,
            "gamma_sd": prior.gamma_sd,
            "sqrt_tau_upper": prior.sqrt_tau_upper,
            "r_prior": prior.r_prior,
            "r_upper": prior.r_upper,
        },
        "mcmc": {
            "n_burn": config.n_burn,
            "n_keep": config.n_keep,
            "thin": config.thin,
            "seed": config.seed,
            "adapt_window": config.adapt_window,
            "target_accept_scalar": config.target_accept_scalar,
            "target_accept_block": config.target_accept_block,
        },
        "columns": samples.columns,
        "n_beta": samples.n_beta,
        "n_gamma": samples.n_gamma,
        "n_r": samples.n_r,
        "acceptance": samples.acceptance,
        "ess": samples.ess.tolist(),
        "ess_degenerate": samples.ess_degenerate.tolist(),
        "fit_config": {
            "outcome": raw["outcome"],
            "exposures": list(raw["exposures"]),
            "covariates": list(raw.get("covariates", [])),
            "exposure_shift": float(raw.get("exposure_shift", 0.0)),
        },
    }
    _write_json(out_dir / "meta.json", meta)
    manifest = {
        "version": __version__,
        "seed": config.seed,
        "config_hash": _sha256_json({k: raw[k] for k in sorted(raw) if k != "output_dir"}),
        "input_hash": _sha256_file(raw["input"]),
        "timings": {
            "fit_seconds": fit_seconds,
            "total_seconds": time.perf_counter() - t_start,
        },
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    _write_json(out_dir / "manifest.json", manifest)

    print(f"{samples.label} fit: {samples.n_draws} retained draws (seed {config.seed})")
    for name, rate in samples.acceptance.items():
        print(f"  acceptance {name}: {rate:.3f}")
    print(f"  min ESS: {samples.ess.min():.0f}")
    print(f"  artifact: {out_dir}")


def _write_dataset_csv(path: Path, dataset: Dataset, W: VarianceDesign) -> None:
    frame = pd.DataFrame({"y": dataset.y})
    for j, name in enumerate(dataset.x_names):
        frame[f"x:{name}"] = dataset.X[:, j]
    for j, name in enumerate(dataset.z_names):
        frame[f"z:{name}"] = dataset.Z[:, j]
    for j, name in enumerate(W.names):
        frame[f"w:{name}"] = W.W[:, j + 1]
    frame.to_csv(path, index=False, float_format=FLOAT_FMT)


def load_artifact(path: str) -> tuple[PosteriorSamples, Dataset, VarianceDesign, dict]:
    """Reload a fit artifact directory written by the fit command."""
    root = Path(path)
    meta_path = root / "meta.json"
    if not meta_path.exists():
        raise DataError(f"not a fit artifact (no meta.json): {path}")
    meta = json.loads(meta_path.read_text())
    draws = pd.read_csv(root / "samples.csv").to_numpy(dtype=float)
    config = McmcConfig(**meta["mcmc"])
    samples = PosteriorSamples(
        draws=draws,
        columns=list(meta["columns"]),
        n_beta=int(meta["n_beta"]),
        n_gamma=int(meta["n_gamma"]),
        n_r=int(meta["n_r"]),
        acceptance=dict(meta["acceptance"]),
        ess=np.asarray(meta["ess"], dtype=float),
        ess_degenerate=np.asarray(meta["ess_degenerate"], dtype=bool),
        seed=config.seed,
        config=config,
    )
    table = pd.read_csv(root / "dataset.csv")
    X = np.column_stack(
        [table[f"x:{n}"].to_numpy(dtype=float) for n in meta["x_names"]]
    ) if meta["x_names"] else np.empty((len(table), 0))
    Z = np.column_stack([table[f"z:{n}"].to_numpy(dtype=float) for n in meta["z_names"]])
    transforms = [ExposureTransform(**t) for t in meta["transforms"]] or None
    dataset = Dataset(
        y=table["y"].to_numpy(dtype=float),
        X=X,
        Z=Z,
        x_names=list(meta["x_names"]),
        z_names=list(meta["z_names"]),
        outcome_name=meta["outcome_name"],
        categorical_groups={k: list(v) for k, v in meta["categorical_groups"].items()},
        categorical_levels={k: list(v) for k, v in meta["categorical_levels"].items()},
        transforms=transforms,
    )
    w_cols = [np.ones(len(table))]
    for name in meta["w_names"]:
        w_cols.append(table[f"w:{name}"].to_numpy(dtype=float))
    W = VarianceDesign(W=np.column_stack(w_cols), names=list(meta["w_names"]))
    return samples, dataset, W, meta


# -- diagnose ---------------------------------------------------------------


def _cmd_diagnose(args: argparse.Namespace) -> None:
    samples, dataset, W, _ = load_artifact(args.artifact)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    predictors = None
    if args.predictors:
        predictors = [p.strip() for p in args.predictors.split(",") if p.strip()]
        if not predictors:
            raise DataError("empty predictor list")
    reports = []
    if args.method in ("posterior-mean-h", "both"):
        reports.append(bayesian_residuals(samples, dataset, W, predictors=predictors))
    if args.method in ("linear-approximation", "both"):
        reports.append(linear_approx_residuals(dataset, predictors=predictors))
    assoc_frames = []
    for report in reports:
        slug = report.method.replace("-", "_")
        pd.DataFrame(
            {"residual": report.residuals, "fitted": report.fitted}
        ).to_csv(out_dir / f"residuals_{slug}.csv", index=False, float_format=FLOAT_FMT)
        save_residuals_svg(str(out_dir / f"residuals_{slug}.svg"), report, dataset)
        frame = report.frame()
        frame.insert(0, "method", report.method)
        assoc_frames.append(frame)
        print(f"[{report.method}]")
        print(frame.to_string(index=False))
        flagged = report.flagged_names()
        print(f"  flagged: {', '.join(flagged) if flagged else 'none'}")
    pd.concat(assoc_frames, ignore_index=True).to_csv(
        out_dir / "associations.csv", index=False, float_format=FLOAT_FMT
    )


# -- sections ---------------------------------------------------------------


def _estimates_frame(estimates: list[EffectEstimate]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "label": [e.label for e in estimates],
            "estimate": [e.estimate for e in estimates],
            "sd": [e.sd for e in estimates],
            "lower95": [e.lower95 for e in estimates],
            "upper95": [e.upper95 for e in estimates],
        }
    )


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise DataError(f"could not parse {what} '{text}'") from None
    if not values:
        raise DataError(f"empty {what}")
    return values


def _cmd_sections(args: argparse.Namespace) -> None:
    samples, dataset, W, _ = load_artifact(args.artifact)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    quantiles = _parse_floats(args.quantiles, "quantile list")
    fixed = tuple(_parse_floats(args.fixed_quantiles, "fixed quantile list"))

    for name in dataset.z_names:
        curve = univariate_curve(
            samples, dataset, W, name, grid_size=args.grid_size, stride=args.stride
        )
        _estimates_frame(curve).to_csv(
            out_dir / f"univariate_{name}.csv", index=False, float_format=FLOAT_FMT
        )
        save_curve_svg(
            str(out_dir / f"univariate_{name}.svg"),
            curve,
            title=f"h cross-section: {name}",
            xlabel=name,
        )

    joint = joint_effect_table(
        samples, dataset, W, quantiles, base_quantile=args.base_quantile,
        stride=args.stride,
    )
    _estimates_frame(joint).to_csv(
        out_dir / "joint_effects.csv", index=False, float_format=FLOAT_FMT
    )

    single = single_variable_effects(
        samples, dataset, W, fixed_quantiles=fixed, stride=args.stride
    )
    _estimates_frame(single).to_csv(
        out_dir / "single_variable_effects.csv", index=False, float_format=FLOAT_FMT
    )
    save_intervals_svg(
        str(out_dir / "single_variable_effects.svg"),
        single,
        title="per-exposure contrasts",
        ylabel="h difference",
    )

    if args.compare:
        other_samples, other_dataset, other_W, other_meta = load_artifact(args.compare)
        if other_dataset.z_names != dataset.z_names:
            raise DataError("comparison artifact has different exposures")
        joint_other = joint_effect_table(
            other_samples, other_dataset, other_W, quantiles,
            base_quantile=args.base_quantile, stride=args.stride,
        )
        rows = []
        for a, b in zip(joint, joint_other):
            reduction = (
                round(100.0 * (b.width - a.width) / b.width, 1)
                if b.width > 0
                else float("nan")
            )
            rows.append(
                {
                    "label": a.label,
                    "estimate": a.estimate,
                    "width": a.width,
                    "estimate_compare": b.estimate,
                    "width_compare": b.width,
                    "width_reduction_pct": reduction,
                }
            )
        pd.DataFrame(rows).to_csv(
            out_dir / "ci_width.csv", index=False, float_format=FLOAT_FMT
        )
        save_intervals_svg(
            str(out_dir / "joint_effects.svg"),
            joint,
            title="joint effects",
            ylabel="h difference",
            overlay=joint_other,
            overlay_label=other_meta.get("label", "comparison"),
        )
        print(pd.DataFrame(rows).to_string(index=False))
    else:
        save_intervals_svg(
            str(out_dir / "joint_effects.svg"),
            joint,
            title="joint effects",
            ylabel="h difference",
        )
        print(_estimates_frame(joint).to_string(index=False))


# -- predict ----------------------------------------------------------------


def _cmd_predict(args: argparse.Namespace) -> None:
    samples, dataset, W, meta = load_artifact(args.artifact)
    observed = None
    if args.input:
        new_dataset, new_W, observed = _load_prediction_input(args.input, meta)
        Xnew, Znew, Wnew = new_dataset.X, new_dataset.Z, new_W.W
    else:
        Xnew, Znew, Wnew = dataset.X, dataset.Z, W.W
        observed = dataset.y
    estimates = predict(samples, dataset, W, Xnew, Znew, Wnew, stride=args.stride)
    frame = _estimates_frame(estimates)
    if observed is not None:
        frame["observed"] = observed
        inside = (frame["observed"] >= frame["lower95"]) & (
            frame["observed"] <= frame["upper95"]
        )
        print(f"interval coverage of observed outcomes: {inside.mean():.3f}")
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out_dir / "predictions.csv", index=False, float_format=FLOAT_FMT)
    save_intervals_svg(
        str(out_dir / "predictions.svg"),
        estimates,
        title="predictive intervals",
        ylabel=meta["outcome_name"],
    )


def _load_prediction_input(
    path: str, meta: dict
) -> tuple[Dataset, VarianceDesign, np.ndarray | None]:
    """Encode new observations exactly like the training data.

    Exposures are transformed with the stored training transforms and
    categoricals are dummy-coded against the training levels; unseen levels
    are an error. The outcome column is optional.
    """
    fit_cfg = meta["fit_config"]
    exposures = fit_cfg["exposures"]
    covariates = fit_cfg["covariates"]
    frame = pd.read_csv(path)
    required = exposures + covariates
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DataError(f"missing column(s) in {path}: {', '.join(missing)}")
    frame = frame.replace(r"^\s*$", np.nan, regex=True)
    n_before = len(frame)
    frame = frame.dropna(subset=required)
    if len(frame) < n_before:
        print(f"dropped {n_before - len(frame)} incomplete row(s) from {path}", file=sys.stderr)
    if not len(frame):
        raise DataError(f"no complete rows in {path}")

    def numeric(name: str) -> np.ndarray:
        converted = pd.to_numeric(frame[name], errors="coerce")
        if converted.isna().any():
            row = int(converted.isna().idxmax())
            raise DataError(f"non-numeric value in column '{name}' at row {row}")
        return converted.to_numpy(dtype=float)

    Z = np.column_stack([numeric(c) for c in exposures])
    levels_map = meta["categorical_levels"]
    x_cols = []
    for name in covariates:
        if name in levels_map:
            values = frame[name].astype(str)
            known = set(levels_map[name])
            unknown = sorted(set(values.unique()) - known)
            if unknown:
                raise DataError(
                    f"column '{name}' has level(s) unseen in training: {', '.join(unknown)}"
                )
            for lvl in levels_map[name][1:]:
                x_cols.append((values == lvl).to_numpy(dtype=float))
        else:
            x_cols.append(numeric(name))
    X = np.column_stack(x_cols) if x_cols else np.empty((len(frame), 0))

    observed = None
    outcome = fit_cfg["outcome"]
    if outcome in frame.columns:
        converted = pd.to_numeric(frame[outcome], errors="coerce")
        observed = converted.to_numpy(dtype=float)

    # The container requires two rows; pad a single-row input and slice the
    # padding back off after the variance design is built.
    n_real = len(frame)
    padded = n_real == 1
    if padded:
        X = np.vstack([X, X])
        Z = np.vstack([Z, Z])
    raw = Dataset(
        y=np.zeros(max(n_real, 2)),
        X=X,
        Z=Z,
        x_names=list(meta["x_names"]),
        z_names=list(exposures),
        outcome_name=outcome,
        categorical_groups={k: list(v) for k, v in meta["categorical_groups"].items()},
        categorical_levels={k: list(v) for k, v in levels_map.items()},
    )
    transforms = [ExposureTransform(**t) for t in meta["transforms"]]
    new_dataset = apply_exposure_transforms(raw, transforms)
    recipe = [tuple(pair) for pair in meta["variance_recipe"]]
    # Rank checks guard estimation; they are irrelevant when encoding new rows.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        new_W = build_variance_design(new_dataset, recipe)
    if padded:
        new_dataset.y = new_dataset.y[:1]
        new_dataset.X = new_dataset.X[:1]
        new_dataset.Z = new_dataset.Z[:1]
        new_W = VarianceDesign(W=new_W.W[:1], names=new_W.names)
    return new_dataset, new_W, observed


# -- waic -------------------------------------------------------------------


def _cmd_waic(args: argparse.Namespace) -> None:
    if args.labels:
        labels = [t.strip() for t in args.labels.split(",")]
        if len(labels) != len(args.artifacts):
            raise DataError("labels count does not match artifacts")
    else:
        labels = [Path(a).name for a in args.artifacts]
    results = []
    for artifact in args.artifacts:
        samples, dataset, W, _ = load_artifact(artifact)
        results.append(waic(samples, dataset, W))
    table = compare(results, labels)
    print(table.to_string(index=False))
    if args.output:
        table.to_csv(args.output, index=False, float_format=FLOAT_FMT)


# -- simulate -----------------------------------------------------------------


def _cmd_simulate(args: argparse.Namespace) -> None:
    raw = _read_json(args.config)
    _check_keys(raw, _SIM_KEYS, "simulation config")
    for key in ("n", "exposures", "r", "tau", "gamma"):
        if key not in raw:
            raise DataError(f"simulation config is missing '{key}'")
    calibration = raw.get("calibration")
    if calibration == "example":
        calibration = EXAMPLE_EXPOSURE_QUANTILES
    elif isinstance(calibration, dict):
        calibration = {
            name: {float(p): float(v) for p, v in table.items()}
            for name, table in calibration.items()
        }
    covariates = []
    for spec in raw.get("covariates", []):
        spec = dict(spec)
        name = spec.pop("name")
        kind = spec.pop("kind")
        covariates.append(CovariateSpec(name=name, kind=kind, params=spec))
    corr = raw.get("exposure_corr")
    config = SimConfig(
        n=int(raw["n"]),
        exposure_names=list(raw["exposures"]),
        r=np.asarray(raw["r"], dtype=float),
        tau=float(raw["tau"]),
        gamma=np.asarray(raw["gamma"], dtype=float),
        beta=np.asarray(raw.get("beta", []), dtype=float),
        exposure_corr=np.asarray(corr, dtype=float) if corr is not None else None,
        calibration=calibration,
        covariates=covariates,
        variance_recipe=[tuple(pair) for pair in raw.get("variance", [])],
        outcome_name=raw.get("outcome", "y"),
        seed=int(args.seed if args.seed is not None else raw.get("seed", 0)),
    )
    dataset, W, truth = generate(config)
    truth.raw_frame.to_csv(args.output, index=False, float_format=FLOAT_FMT)
    print(
        f"wrote {dataset.n} rows, {dataset.n_exposures} exposures, "
        f"{len(config.covariates)} covariates to {args.output}"
    )
    if args.truth:
        _write_json(
            args.truth,
            {
                "seed": config.seed,
                "beta": truth.beta.tolist(),
                "gamma": truth.gamma.tolist(),
                "sqrt_tau": truth.sqrt_tau,
                "r": truth.r.tolist(),
                "h": truth.h.tolist(),
                "sigma2": truth.sigma2.tolist(),
            },
        )


# -- shared helpers -----------------------------------------------------------


def _read_json(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise DataError(f"config file not found: {path}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise DataError(f"config must be a JSON object: {path}")
    return data


def _check_keys(raw: dict, allowed: set[str], what: str) -> None:
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise DataError(f"unknown {what} key(s): {', '.join(unknown)}")


def _write_json(path, obj: dict) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _sha256_file(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _sha256_json(obj) -> str:
    canon = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


if __name__ == "__main__":
    sys.exit(main())

"""Dataset loading, validation, exposure transforms, and variance designs.

The analysis model works on a :class:`Dataset` holding the outcome ``y``,
covariate matrix ``X``, and standardized exposure matrix ``Z``, plus a
:class:`VarianceDesign` ``W`` whose columns drive the log error variance.
Everything downstream (likelihood, sampler, inference) consumes these two
containers, so all schema validation and encoding happens here.
"""

from __future__ import annotations

import sys
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

__all__ = [
    "DataError",
    "ExposureTransform",
    "Dataset",
    "VarianceDesign",
    "load_csv",
    "standardize_exposures",
    "apply_exposure_transforms",
    "quantile",
    "build_variance_design",
]


class DataError(ValueError):
    """Raised for malformed input data or an invalid column specification."""


@dataclass(frozen=True)
class ExposureTransform:
    """Record of the log-standardize transform applied to one exposure column.

    Transformed value is ``(log(raw + shift) - mean) / sd`` with ``sd`` the
    sample standard deviation (ddof=1) of the logged column.
    """

    name: str
    shift: float
    mean: float
    sd: float

    def forward(self, raw: np.ndarray) -> np.ndarray:
        return (np.log(np.asarray(raw, dtype=float) + self.shift) - self.mean) / self.sd

    def inverse(self, transformed: np.ndarray) -> np.ndarray:
        """Map standardized values back to the original measurement units."""
        return np.exp(np.asarray(transformed, dtype=float) * self.sd + self.mean) - self.shift


@dataclass
class Dataset:
    """Aligned outcome, covariate, and exposure arrays for one analysis.

    Attributes
    ----------
    y : ndarray, shape (N,)
        Outcome.
    X : ndarray, shape (N, P)
        Covariates (numeric columns as-is, categoricals dummy-coded). P may
        be zero.
    Z : ndarray, shape (N, M)
        Exposures, standardized when ``transforms`` is set.
    x_names, z_names : list of str
        Column labels for X and Z.
    outcome_name : str
    categorical_groups : dict
        Maps an original categorical covariate name to the list of dummy
        column names it expanded to (reference level dropped).
    categorical_levels : dict
        Maps each categorical covariate to all its observed levels, sorted;
        the first is the reference. Needed to encode new data consistently.
    transforms : list of ExposureTransform or None
        Per-exposure transform records; None when Z is raw.
    n_dropped : int
        Rows removed because of missing values in the selected columns.
    """

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    x_names: list[str]
    z_names: list[str]
    outcome_name: str = "y"
    categorical_groups: dict[str, list[str]] = field(default_factory=dict)
    categorical_levels: dict[str, list[str]] = field(default_factory=dict)
    transforms: list[ExposureTransform] | None = None
    n_dropped: int = 0

    def __post_init__(self) -> None:
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.X = np.asarray(self.X, dtype=float)
        self.Z = np.asarray(self.Z, dtype=float)
        n = self.y.shape[0]
        if self.X.ndim != 2 or self.Z.ndim != 2:
            raise DataError("X and Z must be 2-d arrays")
        if self.X.shape[0] != n or self.Z.shape[0] != n:
            raise DataError(
                f"row mismatch: y has {n} rows, X has {self.X.shape[0]}, Z has {self.Z.shape[0]}"
            )
        if n < 2:
            raise DataError(f"need at least 2 complete rows, got {n}")
        if self.Z.shape[1] < 1:
            raise DataError("need at least one exposure column")
        if len(self.x_names) != self.X.shape[1]:
            raise DataError("x_names length does not match X")
        if len(self.z_names) != self.Z.shape[1]:
            raise DataError("z_names length does not match Z")
        for arr, tag in ((self.y, "y"), (self.X, "X"), (self.Z, "Z")):
            if arr.size and not np.all(np.isfinite(arr)):
                raise DataError(f"non-finite values in {tag}")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.X.shape[1]

    @property
    def n_exposures(self) -> int:
        return self.Z.shape[1]


@dataclass
class VarianceDesign:
    """Design matrix for the log error-variance regression.

    ``W`` always carries a leading intercept column of ones; ``names`` labels
    the remaining columns. An intercept-only design (no extra columns) is the
    homoscedastic model.
    """

    W: np.ndarray
    names: list[str]

    def __post_init__(self) -> None:
        self.W = np.asarray(self.W, dtype=float)
        if self.W.ndim != 2 or self.W.shape[1] < 1:
            raise DataError("W must be 2-d with at least the intercept column")
        if not np.all(self.W[:, 0] == 1.0):
            raise DataError("first column of W must be all ones")
        if len(self.names) != self.W.shape[1] - 1:
            raise DataError("names must label the non-intercept columns of W")
        if not np.all(np.isfinite(self.W)):
            raise DataError("non-finite values in W")

    @property
    def n_terms(self) -> int:
        """Number of non-intercept variance columns (0 = homoscedastic)."""
        return self.W.shape[1] - 1

    @classmethod
    def intercept_only(cls, n: int) -> "VarianceDesign":
        return cls(W=np.ones((n, 1)), names=[])


def load_csv(
    path: str,
    outcome: str,
    exposures: list[str],
    covariates: list[str] | None = None,
) -> Dataset:
    """Read a headered CSV into a :class:`Dataset` of complete cases.

    Rows with a missing value in any selected column are dropped and the
    count reported on stderr. Outcome and exposure columns must be numeric;
    covariate columns may be numeric or categorical strings. Categorical
    covariates are dummy-coded against the lexicographically first level.

    Raises
    ------
    DataError
        For a missing column, a non-numeric outcome/exposure cell (reported
        with its row index), duplicate column selections, or fewer than two
        complete rows.
    """
    covariates = list(covariates or [])
    exposures = list(exposures)
    if not exposures:
        raise DataError("at least one exposure column is required")
    selected = [outcome] + exposures + covariates
    if len(set(selected)) != len(selected):
        raise DataError("outcome, exposure, and covariate selections overlap")

    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise DataError(f"input file not found: {path}") from None
    except pd.errors.ParserError as exc:
        raise DataError(f"could not parse {path}: {exc}") from None

    missing_cols = [c for c in selected if c not in frame.columns]
    if missing_cols:
        raise DataError(f"missing column(s) in {path}: {', '.join(missing_cols)}")
    frame = frame[selected]

    # Treat empty strings as missing, then keep complete cases only.
    frame = frame.replace(r"^\s*$", np.nan, regex=True)
    complete = frame.dropna()
    n_dropped = len(frame) - len(complete)
    if n_dropped:
        print(f"dropped {n_dropped} incomplete row(s) from {path}", file=sys.stderr)
    frame = complete

    def numeric_column(name: str) -> np.ndarray:
        col = frame[name]
        converted = pd.to_numeric(col, errors="coerce")
        bad = converted.isna()
        if bad.any():
            row = int(bad.idxmax())
            raise DataError(f"non-numeric value in column '{name}' at row {row}")
        return converted.to_numpy(dtype=float)

    y = numeric_column(outcome)
    Z = np.column_stack([numeric_column(c) for c in exposures])

    x_cols: list[np.ndarray] = []
    x_names: list[str] = []
    categorical_groups: dict[str, list[str]] = {}
    categorical_levels: dict[str, list[str]] = {}
    for name in covariates:
        col = frame[name]
        converted = pd.to_numeric(col, errors="coerce")
        if not converted.isna().any():
            x_cols.append(converted.to_numpy(dtype=float))
            x_names.append(name)
            continue
        levels = sorted(col.astype(str).unique())
        if len(levels) < 2:
            raise DataError(f"categorical covariate '{name}' has a single level")
        dummy_names = [f"{name}={lvl}" for lvl in levels[1:]]
        for lvl, dname in zip(levels[1:], dummy_names):
            x_cols.append((col.astype(str) == lvl).to_numpy(dtype=float))
            x_names.append(dname)
        categorical_groups[name] = dummy_names
        categorical_levels[name] = levels

    X = np.column_stack(x_cols) if x_cols else np.empty((len(frame), 0))
    return Dataset(
        y=y,
        X=X,
        Z=Z,
        x_names=x_names,
        z_names=exposures,
        outcome_name=outcome,
        categorical_groups=categorical_groups,
        categorical_levels=categorical_levels,
        n_dropped=n_dropped,
    )


def standardize_exposures(dataset: Dataset, shift: float = 0.0) -> Dataset:
    """Return a copy of ``dataset`` with log-standardized exposure columns.

    Each column becomes ``(log(z + shift) - mean) / sd`` using the sample
    standard deviation (ddof=1) of the logged column, and the per-column
    :class:`ExposureTransform` records are stored for later inversion.

    Raises
    ------
    DataError
        If a column has ``z + shift <= 0`` anywhere (reported with column and
        row) or zero variance on the log scale.
    """
    if dataset.transforms is not None:
        raise DataError("exposures are already standardized")
    Z = dataset.Z
    shifted = Z + shift
    if np.any(shifted <= 0):
        col, row = _first_bad_cell(shifted <= 0)
        raise DataError(
            f"exposure '{dataset.z_names[col]}' is not positive after shift "
            f"{shift} at row {row}; cannot take logs"
        )
    logged = np.log(shifted)
    means = logged.mean(axis=0)
    sds = logged.std(axis=0, ddof=1)
    if np.any(sds == 0):
        col = int(np.flatnonzero(sds == 0)[0])
        raise DataError(f"exposure '{dataset.z_names[col]}' is constant on the log scale")
    transforms = [
        ExposureTransform(name=n, shift=shift, mean=float(m), sd=float(s))
        for n, m, s in zip(dataset.z_names, means, sds)
    ]
    return replace(dataset, Z=(logged - means) / sds, transforms=transforms)


def apply_exposure_transforms(
    dataset: Dataset, transforms: list[ExposureTransform]
) -> Dataset:
    """Standardize a raw dataset with transforms fitted on earlier data.

    Used when scoring new observations: the new exposures must be mapped with
    the training-set means and sds, not their own.
    """
    if dataset.transforms is not None:
        raise DataError("exposures are already standardized")
    if len(transforms) != dataset.n_exposures:
        raise DataError("transform count does not match exposure count")
    for t, name in zip(transforms, dataset.z_names):
        if t.name != name:
            raise DataError(f"transform for '{t.name}' does not match column '{name}'")
    cols = []
    for j, t in enumerate(transforms):
        shifted = dataset.Z[:, j] + t.shift
        if np.any(shifted <= 0):
            row = int(np.flatnonzero(shifted <= 0)[0])
            raise DataError(
                f"exposure '{t.name}' is not positive after shift {t.shift} at row {row}"
            )
        cols.append(t.forward(dataset.Z[:, j]))
    return replace(dataset, Z=np.column_stack(cols), transforms=list(transforms))


def quantile(values: np.ndarray, p: float | np.ndarray) -> float | np.ndarray:
    """Empirical quantile with linear interpolation of order statistics.

    Uses the estimator with plotting position ``h = (n - 1) p + 1`` on the
    sorted sample (np.quantile's default), so ``p = 0`` and ``p = 1`` return
    the min and max exactly.
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise DataError("cannot take a quantile of an empty vector")
    if not np.all(np.isfinite(values)):
        raise DataError("non-finite values in quantile input")
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr < 0) | (p_arr > 1)):
        raise DataError(f"quantile probability out of [0, 1]: {p}")
    out = np.quantile(values, p_arr)
    return float(out) if np.isscalar(p) or p_arr.ndim == 0 else out


def build_variance_design(
    dataset: Dataset, recipe: list[tuple[str, str]]
) -> VarianceDesign:
    """Assemble the log-variance design W from named dataset columns.

    ``recipe`` is a list of ``(column, encoding)`` pairs. Encodings:

    - ``"identity"``: the named numeric column (covariate or standardized
      exposure) enters as-is.
    - ``"absolute-value"``: absolute value of the named numeric column.
    - ``"dummy-set"``: the full dummy block of a categorical covariate.

    An empty recipe yields the intercept-only (homoscedastic) design. A
    rank-deficient result triggers a warning, not an error.
    """
    n = dataset.n
    cols: list[np.ndarray] = [np.ones(n)]
    names: list[str] = []
    lookup: dict[str, np.ndarray] = {}
    for j, name in enumerate(dataset.x_names):
        lookup[name] = dataset.X[:, j]
    for j, name in enumerate(dataset.z_names):
        lookup.setdefault(name, dataset.Z[:, j])

    for column, encoding in recipe:
        if encoding == "dummy-set":
            if column not in dataset.categorical_groups:
                raise DataError(
                    f"'{column}' is not a categorical covariate; dummy-set needs one"
                )
            for dname in dataset.categorical_groups[column]:
                cols.append(lookup[dname])
                names.append(dname)
        elif encoding in ("identity", "absolute-value"):
            if column in dataset.categorical_groups:
                raise DataError(
                    f"'{column}' is categorical; use the dummy-set encoding"
                )
            if column not in lookup:
                raise DataError(f"unknown variance design column '{column}'")
            col = lookup[column]
            if encoding == "absolute-value":
                cols.append(np.abs(col))
                names.append(f"|{column}|")
            else:
                cols.append(col)
                names.append(column)
        else:
            raise DataError(f"unknown variance design encoding '{encoding}'")

    W = np.column_stack(cols)
    if np.linalg.matrix_rank(W) < W.shape[1]:
        warnings.warn(
            "variance design is rank deficient; gamma is not fully identified",
            stacklevel=2,
        )
    return VarianceDesign(W=W, names=names)


def _first_bad_cell(mask: np.ndarray) -> tuple[int, int]:
    rows, cols = np.nonzero(mask)
    order = np.lexsort((rows, cols))
    return int(cols[order[0]]), int(rows[order[0]])

"""Observation matrices, column standardization, and sufficient statistics.

Everything downstream consumes either a :class:`DataSet` (paired predictor
and response matrices together with the column transform that produced them)
or the second-moment blocks in :class:`SufficientStats`:

    S_X  = X'X / n    (p, p)
    S_Y  = Y'Y / n    (r, r)
    S_YX = Y'X / n    (r, p)

Regularization replaces S_X by S_X + lam*I and the conditional covariance by
S_Y - S_YX (S_X + lam*I)^-1 S_XY, which stays well defined for every lam > 0
regardless of how p compares to n.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from .errors import NumericalError, ValidationError

_REL_EIG_TOL = 1e-12


def symmetrize(a: np.ndarray) -> np.ndarray:
    """(A + A') / 2, guarding eigen-routines against round-off asymmetry."""
    return 0.5 * (a + a.T)


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValidationError(f"{name} must be a nonempty 2-D matrix")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def standardize_columns(X):
    """Center columns to mean 0 and scale to sample sd 1 (ddof = 1).

    Parameters
    ----------
    X : (n, p) array_like, n >= 2.

    Returns
    -------
    Xstd : (n, p) ndarray
    means, sds : (p,) ndarrays, the applied transform.
    constant : (p,) bool ndarray
        Columns with zero sample variance; those are centered only and their
        sd is recorded as 1 so rescaling is a no-op.
    """
    X = _as_matrix(X, "X")
    if X.shape[0] < 2:
        raise ValidationError("standardization needs at least 2 rows")
    means = X.mean(axis=0)
    sds = X.std(axis=0, ddof=1)
    constant = sds <= 1e-12 * np.maximum(1.0, np.abs(means))
    sds = np.where(constant, 1.0, sds)
    return (X - means) / sds, means, sds, constant


@dataclasses.dataclass(frozen=True)
class DataSet:
    """Paired observation matrices plus the transform applied to them.

    X, Y : (n, p) predictors and (n, r) responses as the estimators see them
        (standardized / centered when the flags say so).
    column_means, column_sds : the predictor transform; identity vectors when
        `standardized` is False.
    standardized : whether X went through column standardization.
    y_means : column means removed from Y (zeros when centering was off).
    constant_columns : predictor columns that had zero training variance.
    """

    X: np.ndarray
    Y: np.ndarray
    column_means: np.ndarray
    column_sds: np.ndarray
    standardized: bool
    y_means: np.ndarray
    constant_columns: np.ndarray

    def __post_init__(self):
        X = _as_matrix(self.X, "X")
        Y = _as_matrix(self.Y, "Y")
        if X.shape[0] != Y.shape[0]:
            raise ValidationError(
                f"X and Y row counts differ: {X.shape[0]} vs {Y.shape[0]}"
            )
        p = X.shape[1]
        means = np.asarray(self.column_means, dtype=np.float64).reshape(p)
        sds = np.asarray(self.column_sds, dtype=np.float64).reshape(p)
        y_means = np.asarray(self.y_means, dtype=np.float64).reshape(Y.shape[1])
        constant = np.asarray(self.constant_columns, dtype=bool).reshape(p)
        if np.any(sds <= 0):
            raise ValidationError("column sds must be positive")
        if self.standardized:
            live = ~constant
            col_means = X.mean(axis=0)
            col_sds = X.std(axis=0, ddof=1)
            if np.any(np.abs(col_means) > 1e-10) or (
                live.any() and np.any(np.abs(col_sds[live] - 1.0) > 1e-10)
            ):
                raise ValidationError(
                    "standardized flag set but X columns are not standardized"
                )
        for name, value in (
            ("X", X), ("Y", Y), ("column_means", means), ("column_sds", sds),
            ("y_means", y_means), ("constant_columns", constant),
        ):
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def r(self) -> int:
        return self.Y.shape[1]

    def raw_X(self) -> np.ndarray:
        """Predictors on the original scale (inverts standardization)."""
        if not self.standardized:
            return self.X
        return self.X * self.column_sds + self.column_means

    def raw_Y(self) -> np.ndarray:
        """Responses on the original scale (restores the removed means)."""
        return self.Y + self.y_means


def dataset_from_arrays(X, Y) -> DataSet:
    """Wrap raw matrices with an identity transform."""
    X = _as_matrix(X, "X")
    Y = _as_matrix(Y, "Y")
    return DataSet(
        X=X,
        Y=Y,
        column_means=np.zeros(X.shape[1]),
        column_sds=np.ones(X.shape[1]),
        standardized=False,
        y_means=np.zeros(Y.shape[1]),
        constant_columns=np.zeros(X.shape[1], dtype=bool),
    )


def prepare_dataset(X, Y, *, standardize_x: bool = True, center_y: bool = True) -> DataSet:
    """Build a modeling-ready DataSet from raw matrices.

    Predictor columns are standardized (mean 0, sd 1) and response columns
    centered by default; both transforms are recorded so predictions can be
    mapped back to the original scale.
    """
    X = _as_matrix(X, "X")
    Y = _as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ValidationError(
            f"X and Y row counts differ: {X.shape[0]} vs {Y.shape[0]}"
        )
    if standardize_x:
        Xs, means, sds, constant = standardize_columns(X)
    else:
        Xs = X
        means = np.zeros(X.shape[1])
        sds = np.ones(X.shape[1])
        constant = np.zeros(X.shape[1], dtype=bool)
    if center_y:
        y_means = Y.mean(axis=0)
        Yc = Y - y_means
    else:
        y_means = np.zeros(Y.shape[1])
        Yc = Y
    return DataSet(
        X=Xs,
        Y=Yc,
        column_means=means,
        column_sds=sds,
        standardized=standardize_x,
        y_means=y_means,
        constant_columns=constant,
    )


@dataclasses.dataclass(frozen=True)
class SufficientStats:
    """Second-moment blocks of a training set, plus dimensions.

    s_y_min_eigenvalue records the smallest eigenvalue of S_Y; envelope
    fitting requires S_Y positive definite (in particular r <= n) and fails
    fast when `s_y_invertible` is False.
    """

    S_X: np.ndarray
    S_Y: np.ndarray
    S_YX: np.ndarray
    n: int
    p: int
    r: int
    s_y_min_eigenvalue: float

    @property
    def s_y_invertible(self) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.S_Y))))
        return self.r <= self.n and self.s_y_min_eigenvalue > _REL_EIG_TOL * scale


def compute_sufficient_stats(data) -> SufficientStats:
    """Second-moment blocks from a DataSet or an (X, Y) pair."""
    if isinstance(data, DataSet):
        X, Y = data.X, data.Y
    else:
        X, Y = data
        X = _as_matrix(X, "X")
        Y = _as_matrix(Y, "Y")
        if X.shape[0] != Y.shape[0]:
            raise ValidationError(
                f"X and Y row counts differ: {X.shape[0]} vs {Y.shape[0]}"
            )
    n, p = X.shape
    r = Y.shape[1]
    S_X = symmetrize(X.T @ X / n)
    S_Y = symmetrize(Y.T @ Y / n)
    S_YX = Y.T @ X / n
    min_eig = float(np.linalg.eigvalsh(S_Y)[0])
    stats = SufficientStats(S_X=S_X, S_Y=S_Y, S_YX=S_YX, n=n, p=p, r=r,
                            s_y_min_eigenvalue=min_eig)
    if not stats.s_y_invertible:
        warnings.warn(
            "S_Y is numerically singular (r > n or degenerate responses); "
            "envelope fitting on these stats will fail",
            stacklevel=2,
        )
    return stats


@dataclasses.dataclass(frozen=True)
class RegularizedStats:
    """Ridge-shifted second moments at a fixed regularization level."""

    base: SufficientStats
    lam: float
    S_X_lambda: np.ndarray
    S_YgX_lambda: np.ndarray


def regularize_stats(stats: SufficientStats, lam) -> RegularizedStats:
    """S_X + lam*I and the regularized conditional covariance of Y given X.

    lam = 0 is allowed only when S_X is invertible; otherwise a
    NumericalError points at the ridgeless path (lam = 1e-8).
    """
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise ValidationError(f"lam must be a finite nonnegative real, got {lam!r}")
    S_X_lambda = stats.S_X + lam * np.eye(stats.p)
    if lam == 0.0:
        try:
            np.linalg.cholesky(S_X_lambda)
        except np.linalg.LinAlgError:
            raise NumericalError(
                "S_X is singular at lam=0; use the ridgeless path (lam=1e-8)"
            ) from None
    solved = np.linalg.solve(S_X_lambda, stats.S_YX.T)
    S_YgX = symmetrize(stats.S_Y - stats.S_YX @ solved)
    return RegularizedStats(base=stats, lam=lam, S_X_lambda=S_X_lambda,
                            S_YgX_lambda=S_YgX)


def load_matrix_csv(path, header: bool = False) -> np.ndarray:
    """Read a comma-delimited numeric matrix; `header` skips the first row."""
    try:
        arr = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0,
                         ndmin=2, dtype=np.float64)
    except FileNotFoundError:
        raise ValidationError(f"file not found: {path}") from None
    except ValueError as exc:
        raise ValidationError(f"could not parse {path}: {exc}") from None
    if arr.size == 0:
        raise ValidationError(f"{path} holds no rows")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{path} contains non-finite entries")
    return arr

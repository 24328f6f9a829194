"""Envelope, ridge, and least-squares estimators of a multivariate slope.

The model is y = B x + e with e ~ N(0, Sigma); the envelope structure splits
response space into a u-dimensional material part Gamma that carries all of
the x-dependence and its orthogonal complement Gamma0 that carries none, so

    B = Gamma eta,   Sigma = Gamma Omega Gamma' + Gamma0 Omega0 Gamma0'.

Fitting at regularization level lam > 0 minimizes the subspace score built
from the ridge-regularized conditional covariance and the inverse marginal
covariance of Y; the slope estimate is the ridge slope projected onto the
fitted subspace:

    B_hat = Gamma_hat Gamma_hat' S_YX (S_X + lam I)^-1.

lam = 1e-8 (RIDGELESS_LAMBDA) recovers the plain envelope estimator for any
p, including p > n. u = r reproduces ridge regression exactly and u = 0 the
zero slope.

:class:`EnvelopeDesign` factors the training moments once (eigendecomposing
S_X when p <= n, or the Gram matrix XX'/n when p > n, where the push-through
identity S_YX (S_X + lam I)^-1 = Y'(XX'/n + lam I)^-1 X / n applies) and then
serves every lam from the same factorization, which is what makes dense
lambda grids and cross-validation affordable.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from . import __version__
from .data import (
    DataSet,
    SufficientStats,
    compute_sufficient_stats,
    symmetrize,
)
from .errors import NumericalError, ValidationError
from .grassmann import (
    ObjectiveSpec,
    SubspaceResult,
    optimize_envelope_subspace,
    orthonormal_complement,
)

RIDGELESS_LAMBDA = 1e-8
_PINV_REL_TOL = 1e-10


@dataclasses.dataclass
class EnvelopeFit:
    """A fitted envelope model at one (u, lam).

    Matrices are expressed in the coordinates of the training data (so in
    standardized coordinates when the training X was standardized; the
    x_means / x_sds / y_means fields carry the transform when known, and
    :func:`predict` applies it).
    """

    Gamma_hat: np.ndarray
    Gamma0_hat: np.ndarray
    beta_hat: np.ndarray
    Omega_hat: np.ndarray
    Omega0_hat: np.ndarray
    Sigma_hat: np.ndarray
    u: int
    lam: float
    diagnostics: SubspaceResult
    x_means: np.ndarray | None = None
    x_sds: np.ndarray | None = None
    y_means: np.ndarray | None = None


class EnvelopeDesign:
    """Eigendecomposition-backed fitting engine for one training set."""

    def __init__(self, S_Y, S_YX, n, evals, mode, primal_V=None, primal_A=None,
                 dual_AU=None, dual_W=None, x_means=None, x_sds=None,
                 y_means=None):
        self.S_Y = S_Y
        self.S_YX = S_YX
        self.n = int(n)
        self.r = S_Y.shape[0]
        self.p = S_YX.shape[1]
        self._d = np.maximum(evals, 0.0)  # round-off can dip below zero
        self._mode = mode
        self._V = primal_V
        self._A = primal_A
        self._AU = dual_AU
        self._W = dual_W
        self.x_means = x_means
        self.x_sds = x_sds
        self.y_means = y_means
        self._n_inv = None
        w = np.linalg.eigvalsh(S_Y)
        self._s_y_min_eig = float(w[0])
        self._s_y_max_eig = float(w[-1])

    # -- construction -----------------------------------------------------

    @classmethod
    def from_stats(cls, stats: SufficientStats) -> "EnvelopeDesign":
        d, V = np.linalg.eigh(stats.S_X)
        return cls(S_Y=stats.S_Y, S_YX=stats.S_YX, n=stats.n, evals=d,
                   mode="primal", primal_V=V, primal_A=stats.S_YX @ V)

    @classmethod
    def from_arrays(cls, X, Y, *, x_means=None, x_sds=None, y_means=None) -> "EnvelopeDesign":
        X = np.ascontiguousarray(X, dtype=np.float64)
        Y = np.ascontiguousarray(Y, dtype=np.float64)
        n, p = X.shape
        S_Y = symmetrize(Y.T @ Y / n)
        S_YX = Y.T @ X / n
        meta = dict(x_means=x_means, x_sds=x_sds, y_means=y_means)
        if p <= n:
            d, V = np.linalg.eigh(symmetrize(X.T @ X / n))
            return cls(S_Y=S_Y, S_YX=S_YX, n=n, evals=d, mode="primal",
                       primal_V=V, primal_A=S_YX @ V, **meta)
        d, U = np.linalg.eigh(symmetrize(X @ X.T / n))
        return cls(S_Y=S_Y, S_YX=S_YX, n=n, evals=d, mode="dual",
                   dual_AU=U.T @ Y, dual_W=U.T @ X, **meta)

    @classmethod
    def from_dataset(cls, data: DataSet) -> "EnvelopeDesign":
        return cls.from_arrays(
            data.X, data.Y,
            x_means=data.column_means if data.standardized else None,
            x_sds=data.column_sds if data.standardized else None,
            y_means=data.y_means,
        )

    # -- lambda-profiled pieces -------------------------------------------

    @property
    def lambda_scale(self) -> float:
        return float(np.trace(self.S_Y)) / self.r

    def _check_s_y(self):
        scale = max(1.0, self._s_y_max_eig)
        if self.r > self.n or self._s_y_min_eig <= 1e-12 * scale:
            raise NumericalError(
                "S_Y is numerically singular (r > n or degenerate responses); "
                "the envelope objective is undefined"
            )

    def n_inv(self) -> np.ndarray:
        """Inverse of S_Y, the second objective factor."""
        if self._n_inv is None:
            self._check_s_y()
            self._n_inv = np.ascontiguousarray(
                symmetrize(np.linalg.inv(self.S_Y))
            )
        return self._n_inv

    def _check_lam(self, lam) -> float:
        lam = float(lam)
        if not np.isfinite(lam) or lam < 0:
            raise ValidationError(
                f"lam must be a finite nonnegative real, got {lam!r}"
            )
        if lam == 0.0:
            d = self._d
            if self._mode == "dual" or d[0] <= _PINV_REL_TOL * max(d[-1], 1.0):
                raise NumericalError(
                    "S_X is singular at lam=0; use the ridgeless path (lam=1e-8)"
                )
        return lam

    def conditional_cov(self, lam) -> np.ndarray:
        """S_Y - S_YX (S_X + lam I)^-1 S_XY, symmetrized."""
        lam = self._check_lam(lam)
        if self._mode == "primal":
            cross = (self._A / (self._d + lam)) @ self._A.T
        else:
            cross = (self._AU.T * (self._d / (self._d + lam))) @ self._AU / self.n
        return np.ascontiguousarray(symmetrize(self.S_Y - cross))

    def ridge_beta(self, lam) -> np.ndarray:
        """S_YX (S_X + lam I)^-1, the ridge slope at level lam."""
        lam = self._check_lam(lam)
        if self._mode == "primal":
            return (self._A / (self._d + lam)) @ self._V.T
        return (self._AU.T / (self._d + lam)) @ self._W / self.n

    def ols_beta(self) -> np.ndarray:
        """S_YX S_X^-1 when S_X is invertible, else the lam=1e-8 slope."""
        d = self._d
        if self._mode == "primal" and d[0] > _PINV_REL_TOL * max(d[-1], 1.0):
            return self.ridge_beta(0.0)
        return self.ridge_beta(RIDGELESS_LAMBDA)

    def test_predictor(self, X_new) -> "_RidgePredictor":
        return _RidgePredictor(self, np.asarray(X_new, dtype=np.float64))

    # -- fitting -----------------------------------------------------------

    def objective_spec(self, u, lam) -> ObjectiveSpec:
        return ObjectiveSpec(M=self.conditional_cov(lam), N_inv=self.n_inv(), u=u)

    def fit(self, u, lam, **options) -> EnvelopeFit:
        if not isinstance(u, (int, np.integer)) or not 0 <= u <= self.r:
            raise ValidationError(f"u must lie in [0, {self.r}], got {u!r}")
        u = int(u)
        self._check_s_y()
        lam = self._check_lam(lam)
        meta = dict(x_means=self.x_means, x_sds=self.x_sds, y_means=self.y_means)
        r = self.r
        if u == 0:
            empty = np.zeros((r, 0))
            diag = SubspaceResult(empty, 0.0, 0, 0.0, True, np.zeros(1), 0.0)
            return EnvelopeFit(
                Gamma_hat=empty, Gamma0_hat=np.eye(r),
                beta_hat=np.zeros((r, self.p)), Omega_hat=np.zeros((0, 0)),
                Omega0_hat=self.S_Y.copy(), Sigma_hat=self.S_Y.copy(),
                u=0, lam=lam, diagnostics=diag, **meta,
            )
        spec = self.objective_spec(u, lam)
        result = optimize_envelope_subspace(spec, **options)
        Gamma = result.G
        Gamma0 = orthonormal_complement(Gamma)
        M = spec.M
        Omega = symmetrize(Gamma.T @ M @ Gamma)
        Omega0 = symmetrize(Gamma0.T @ self.S_Y @ Gamma0)
        beta = Gamma @ (Gamma.T @ self.ridge_beta(lam))
        Sigma = symmetrize(Gamma @ Omega @ Gamma.T + Gamma0 @ Omega0 @ Gamma0.T)
        return EnvelopeFit(
            Gamma_hat=Gamma, Gamma0_hat=Gamma0, beta_hat=beta,
            Omega_hat=Omega, Omega0_hat=Omega0, Sigma_hat=Sigma,
            u=u, lam=lam, diagnostics=result, **meta,
        )


class _RidgePredictor:
    """Per-lambda ridge predictions for a fixed test block, O(m(k+r)) each."""

    def __init__(self, design: EnvelopeDesign, X_new):
        if X_new.ndim != 2 or X_new.shape[1] != design.p:
            raise ValidationError(
                f"X_new must have {design.p} columns, got shape {X_new.shape}"
            )
        self._design = design
        if design._mode == "primal":
            self._T = X_new @ design._V     # (m, p)
            self._R = design._A.T           # (p, r)
        else:
            self._T = X_new @ design._W.T / design.n  # (m, n)
            self._R = design._AU                       # (n, r)

    def predict(self, lam) -> np.ndarray:
        lam = self._design._check_lam(lam)
        return (self._T / (self._d + lam)) @ self._R

    @property
    def _d(self):
        return self._design._d


def as_design(source) -> EnvelopeDesign:
    """Coerce a DataSet, SufficientStats, or EnvelopeDesign to a design."""
    if isinstance(source, EnvelopeDesign):
        return source
    if isinstance(source, DataSet):
        return EnvelopeDesign.from_dataset(source)
    if isinstance(source, SufficientStats):
        return EnvelopeDesign.from_stats(source)
    raise ValidationError(
        f"expected DataSet, SufficientStats, or EnvelopeDesign, got {type(source)!r}"
    )


def fit_envelope(source, u, lam, **options) -> EnvelopeFit:
    """Envelope fit at subspace dimension u and regularization lam > 0.

    `source` may be a DataSet, SufficientStats, or EnvelopeDesign. Optimizer
    options (max_iter, ftol, gtol, n_starts, seed) pass through.
    """
    return as_design(source).fit(u, lam, **options)


def fit_envelope_ridgeless(source, u, **options) -> EnvelopeFit:
    """Envelope fit in the vanishing-regularization limit (lam = 1e-8)."""
    return as_design(source).fit(u, RIDGELESS_LAMBDA, **options)


def fit_ols(source) -> np.ndarray:
    """Least-squares slope S_YX S_X^-1; minimum-norm (lam = 1e-8) if singular."""
    return as_design(source).ols_beta()


def fit_ridge(source, lam) -> np.ndarray:
    """Ridge slope S_YX (S_X + lam I)^-1."""
    return as_design(source).ridge_beta(lam)


def predict(fit, X_new, *, x_means=None, x_sds=None, y_center=None) -> np.ndarray:
    """Predicted responses for new predictor rows.

    `fit` is an EnvelopeFit or a bare (r, p) slope matrix. The training
    transform (x_means, x_sds, y_center) defaults to what the fit recorded;
    pass explicit vectors to override, or leave everything unset for slopes
    fitted on raw coordinates.
    """
    if isinstance(fit, EnvelopeFit):
        beta = fit.beta_hat
        x_means = fit.x_means if x_means is None else x_means
        x_sds = fit.x_sds if x_sds is None else x_sds
        y_center = fit.y_means if y_center is None else y_center
    else:
        beta = np.asarray(fit, dtype=np.float64)
    X_new = np.asarray(X_new, dtype=np.float64)
    if X_new.ndim == 1:
        X_new = X_new[None, :]
    if X_new.ndim != 2 or X_new.shape[1] != beta.shape[1]:
        raise ValidationError(
            f"X_new must have {beta.shape[1]} columns, got shape {X_new.shape}"
        )
    if x_means is not None:
        X_new = X_new - np.asarray(x_means, dtype=np.float64)
    if x_sds is not None:
        X_new = X_new / np.asarray(x_sds, dtype=np.float64)
    Y_hat = X_new @ beta.T
    if y_center is not None:
        Y_hat = Y_hat + np.asarray(y_center, dtype=np.float64)
    return Y_hat


# -- persistence ------------------------------------------------------------

def _tolist(a):
    return None if a is None else np.asarray(a, dtype=np.float64).tolist()


def save_model(fit: EnvelopeFit, path, *, provenance=None) -> None:
    """Serialize a fit to JSON; floats round-trip exactly."""
    diag = fit.diagnostics
    doc = {
        "format": "respenv-model",
        "version": __version__,
        "u": fit.u,
        "lambda": fit.lam,
        "beta_hat": _tolist(fit.beta_hat),
        "Gamma_hat": _tolist(fit.Gamma_hat),
        "Gamma0_hat": _tolist(fit.Gamma0_hat),
        "Omega_hat": _tolist(fit.Omega_hat),
        "Omega0_hat": _tolist(fit.Omega0_hat),
        "Sigma_hat": _tolist(fit.Sigma_hat),
        "x_means": _tolist(fit.x_means),
        "x_sds": _tolist(fit.x_sds),
        "y_means": _tolist(fit.y_means),
        "diagnostics": {
            "objective_value": diag.objective_value,
            "iterations": diag.iterations,
            "projected_gradient_norm": diag.projected_gradient_norm,
            "converged": diag.converged,
            "max_orthogonality_error": diag.max_orthogonality_error,
        },
        "provenance": provenance or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _fromlist(v, shape=None):
    if v is None:
        return None
    arr = np.asarray(v, dtype=np.float64)
    if shape is not None:
        arr = arr.reshape(shape)
    return arr


def load_model(path) -> EnvelopeFit:
    """Inverse of :func:`save_model`."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"could not parse {path}: {exc}") from None
    if doc.get("format") != "respenv-model":
        raise ValidationError(f"{path} is not a respenv model file")
    u = int(doc["u"])
    beta = _fromlist(doc["beta_hat"])
    r, p = beta.shape
    d = doc["diagnostics"]
    diag = SubspaceResult(
        G=_fromlist(doc["Gamma_hat"], (r, u)),
        objective_value=float(d["objective_value"]),
        iterations=int(d["iterations"]),
        projected_gradient_norm=float(d["projected_gradient_norm"]),
        converged=bool(d["converged"]),
        objective_trace=np.zeros(0),
        max_orthogonality_error=float(d["max_orthogonality_error"]),
    )
    return EnvelopeFit(
        Gamma_hat=_fromlist(doc["Gamma_hat"], (r, u)),
        Gamma0_hat=_fromlist(doc["Gamma0_hat"], (r, r - u)),
        beta_hat=beta,
        Omega_hat=_fromlist(doc["Omega_hat"], (u, u)),
        Omega0_hat=_fromlist(doc["Omega0_hat"], (r - u, r - u)),
        Sigma_hat=_fromlist(doc["Sigma_hat"], (r, r)),
        u=u,
        lam=float(doc["lambda"]),
        diagnostics=diag,
        x_means=_fromlist(doc["x_means"]),
        x_sds=_fromlist(doc["x_sds"]),
        y_means=_fromlist(doc["y_means"]),
    )

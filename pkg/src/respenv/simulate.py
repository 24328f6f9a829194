"""Monte Carlo harness: ground-truth models, data, and risk experiments.

The simulated truth has r = 3 responses and a u = 2 material subspace. Noise
covariance Sigma has eigenvalues (10, 8, 2) in an orthonormal basis that is
either random (Haar, the default) or the identity; the material basis Gamma
spans the eigenvectors with eigenvalues (8, 2), so the material noise trace
is 10. The slope is B = Gamma eta with eta a normalized Gaussian draw scaled
to tr(eta eta') = 10, and predictors follow an AR(1) covariance
(Sigma_x)_ij = rho^|i-j|.

Replication risk is the excess prediction error tr((B_hat - B) Sigma_x
(B_hat - B)'). Each replication draws a fresh model (in particular a fresh
eta) and data from streams keyed by (seed, replication), so runs are
reproducible and independent of thread count.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .data import DataSet, dataset_from_arrays, prepare_dataset
from .errors import ValidationError
from .estimators import RIDGELESS_LAMBDA, EnvelopeDesign
from .selection import ESTIMATOR_KINDS, kfold_cv, scaled_lambda_grid

SIM_R = 3
SIM_U = 2
SIM_EIGENVALUES = (10.0, 8.0, 2.0)
SIM_SIGNAL_TRACE = 10.0


@dataclasses.dataclass(frozen=True)
class TrueModel:
    """Ground truth for one simulated problem.

    Sigma = Gamma Omega Gamma' + Gamma0 Omega0 Gamma0' exactly by
    construction; beta = Gamma eta with tr(eta eta') = 10. The predictor
    covariance is AR(1) with parameter rho and is materialized on demand by
    :meth:`sigma_x` (it is p-by-p, which gets large in wide sweeps).
    """

    Sigma: np.ndarray
    Gamma: np.ndarray
    Gamma0: np.ndarray
    eta: np.ndarray
    beta: np.ndarray
    Omega: np.ndarray
    Omega0: np.ndarray
    rho: float
    p: int
    seed: object
    basis_mode: str

    @property
    def r(self) -> int:
        return self.Sigma.shape[0]

    @property
    def u(self) -> int:
        return self.Gamma.shape[1]

    def sigma_x(self) -> np.ndarray:
        return ar1_covariance(self.p, self.rho)


def ar1_covariance(p: int, rho: float) -> np.ndarray:
    """(p, p) matrix with entries rho^|i-j|."""
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :]) if rho != 0.0 else np.eye(p)


def generate_model(p: int, rho: float = 0.0, basis_mode: str = "haar",
                   seed=0) -> TrueModel:
    """Draw one ground-truth model at predictor dimension p."""
    if not isinstance(p, (int, np.integer)) or p < 1:
        raise ValidationError(f"p must be a positive integer, got {p!r}")
    if not 0.0 <= rho < 1.0:
        raise ValidationError(f"rho must lie in [0, 1), got {rho!r}")
    if basis_mode not in ("haar", "identity"):
        raise ValidationError(
            f"basis_mode must be 'haar' or 'identity', got {basis_mode!r}"
        )
    rng = np.random.default_rng(seed)
    if basis_mode == "haar":
        Z = rng.standard_normal((SIM_R, SIM_R))
        O, R = np.linalg.qr(Z)
        O = O * np.sign(np.diag(R))
    else:
        O = np.eye(SIM_R)
    Gamma0 = O[:, :1]
    Gamma = O[:, 1:]
    Omega = np.diag(np.array(SIM_EIGENVALUES[1:]))
    Omega0 = np.array([[SIM_EIGENVALUES[0]]])
    Sigma = Gamma @ Omega @ Gamma.T + Gamma0 @ Omega0 @ Gamma0.T
    Sigma = 0.5 * (Sigma + Sigma.T)
    eta = rng.standard_normal((SIM_U, int(p)))
    eta = eta * np.sqrt(SIM_SIGNAL_TRACE) / np.linalg.norm(eta)
    beta = Gamma @ eta
    return TrueModel(Sigma=Sigma, Gamma=Gamma, Gamma0=Gamma0, eta=eta,
                     beta=beta, Omega=Omega, Omega0=Omega0, rho=float(rho),
                     p=int(p), seed=seed, basis_mode=basis_mode)


def _psd_sqrt(S):
    # eigh-based square root; tolerates PSD (including exactly singular) input
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return (V * np.sqrt(np.maximum(w, 0.0))) @ V.T


_chol_cache: dict = {}


def _ar1_factor(p, rho):
    key = (int(p), float(rho))
    if key not in _chol_cache:
        if len(_chol_cache) > 8:
            _chol_cache.clear()
        _chol_cache[key] = np.linalg.cholesky(ar1_covariance(p, rho))
    return _chol_cache[key]


def generate_data(model: TrueModel, n: int, seed) -> DataSet:
    """n rows of x ~ N(0, Sigma_x), y = B x + e, e ~ N(0, Sigma), unscaled."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((int(n), model.p))
    if model.rho != 0.0:
        X = X @ _ar1_factor(model.p, model.rho).T
    E = rng.standard_normal((int(n), model.r)) @ _psd_sqrt(model.Sigma).T
    Y = X @ model.beta.T + E
    return dataset_from_arrays(X, Y)


def prediction_risk(beta_hat, model: TrueModel) -> float:
    """Excess risk tr((B_hat - B) Sigma_x (B_hat - B)') on original scale."""
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    if beta_hat.shape != model.beta.shape:
        raise ValidationError(
            f"beta_hat must have shape {model.beta.shape}, got {beta_hat.shape}"
        )
    delta = beta_hat - model.beta
    if model.rho == 0.0:
        return float(np.sum(delta * delta))
    S = delta @ model.sigma_x()
    return float(np.sum(S * delta))


@dataclasses.dataclass(frozen=True)
class RiskRow:
    """One aggregated experiment cell."""

    n: int
    p: int
    gamma: float
    rho: float
    estimator: str
    mean_risk: float
    se: float
    replications: int
    seed: object


@dataclasses.dataclass
class RiskTable:
    """Aggregated risks with provenance; one row per (config, estimator)."""

    rows: list
    config: dict

    def row(self, estimator: str, **match) -> RiskRow:
        for row in self.rows:
            if row.estimator == estimator and all(
                getattr(row, k) == v for k, v in match.items()
            ):
                return row
        raise KeyError(f"no row for estimator={estimator!r}, {match!r}")

    def to_csv(self, path, provenance: str | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if provenance:
                fh.write(f"# {provenance}\n")
            fh.write("n,p,gamma,rho,estimator,mean_risk,se,replications,seed\n")
            for w in self.rows:
                fh.write(
                    f"{w.n},{w.p},{w.gamma:.17g},{w.rho:.17g},{w.estimator},"
                    f"{w.mean_risk:.17g},{w.se:.17g},{w.replications},{w.seed}\n"
                )


def _aggregate(risks: np.ndarray) -> tuple:
    reps = len(risks)
    mean = float(np.mean(risks))
    se = float(np.std(risks, ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0
    return mean, se


def _parallel_map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def run_risk_table(n: int, p: int, rho: float = 0.0, reps: int = 100,
                   estimators=ESTIMATOR_KINDS, u: int = SIM_U,
                   lambda_count: int = 100, folds: int = 10, seed: int = 0,
                   regenerate_eta: bool = True, basis_mode: str = "haar",
                   threads: int = 1, **opt_options) -> RiskTable:
    """Monte Carlo risk comparison at one (n, p, rho) configuration.

    Per replication: draw a model and data, standardize X and center Y, tune
    lambda by `folds`-fold CV on a `lambda_count`-point scaled grid (for the
    estimators that take lambda; u stays fixed), fit everything, and record
    the excess risk on the original predictor scale.
    """
    estimators = tuple(estimators)
    for name in estimators:
        if name not in ESTIMATOR_KINDS:
            raise ValidationError(
                f"estimator must be one of {ESTIMATOR_KINDS}, got {name!r}"
            )
    if reps < 1:
        raise ValidationError("reps must be >= 1")

    def one_rep(rep):
        model_seed = [seed, rep, 0] if regenerate_eta else [seed, 0]
        model = generate_model(p, rho, basis_mode, seed=model_seed)
        raw = generate_data(model, n, seed=[seed, rep, 1])
        prep = prepare_dataset(raw.X, raw.Y)
        design = EnvelopeDesign.from_dataset(prep)
        back = 1.0 / prep.column_sds
        lam_grid = None
        out = {}
        for name in estimators:
            if name in ("enhanced", "ridge") and lam_grid is None:
                lam_grid = scaled_lambda_grid(design, count=lambda_count)
            if name == "enhanced":
                cv = kfold_cv(raw, [u], lam_grid, folds, seed=[seed, rep, 2],
                              **opt_options)
                beta = design.fit(u, cv.best_lambda, **opt_options).beta_hat
            elif name == "envelope":
                beta = design.fit(u, RIDGELESS_LAMBDA, **opt_options).beta_hat
            elif name == "ridge":
                cv = kfold_cv(raw, [prep.r], lam_grid, folds,
                              seed=[seed, rep, 3], **opt_options)
                beta = design.ridge_beta(cv.best_lambda)
            else:
                beta = design.ols_beta()
            out[name] = prediction_risk(beta * back, model)
        return out

    results = _parallel_map(one_rep, range(int(reps)), threads)
    rows = []
    for name in estimators:
        risks = np.array([res[name] for res in results])
        mean, se = _aggregate(risks)
        rows.append(RiskRow(n=int(n), p=int(p), gamma=p / n, rho=float(rho),
                            estimator=name, mean_risk=mean, se=se,
                            replications=int(reps), seed=seed))
    config = dict(n=n, p=p, rho=rho, reps=reps, estimators=estimators, u=u,
                  lambda_count=lambda_count, folds=folds, seed=seed,
                  regenerate_eta=regenerate_eta, basis_mode=basis_mode)
    return RiskTable(rows=rows, config=config)


def run_double_descent_sweep(n: int, gamma_grid, rho: float = 0.0,
                             reps: int = 100, seed: int = 0, u: int = SIM_U,
                             basis_mode: str = "haar", threads: int = 1,
                             **opt_options) -> RiskTable:
    """Risk versus p/n for the ridgeless fit and the fixed-level fit.

    At each gamma in the grid, p = round(gamma * n); the "envelope" column is
    the ridgeless fit and the "enhanced" column uses lam = p/n with no CV
    (the limit-optimal level for the simulated truth, whose signal and noise
    traces are both 10).
    """
    gamma_grid = np.atleast_1d(np.asarray(gamma_grid, dtype=np.float64))
    if gamma_grid.size == 0 or np.any(gamma_grid <= 0):
        raise ValidationError("gamma grid must hold positive reals")
    if reps < 1:
        raise ValidationError("reps must be >= 1")

    def one_cell(args):
        gi, rep = args
        p = max(1, int(round(gamma_grid[gi] * n)))
        model = generate_model(p, rho, basis_mode, seed=[seed, gi, rep, 0])
        raw = generate_data(model, n, seed=[seed, gi, rep, 1])
        prep = prepare_dataset(raw.X, raw.Y)
        design = EnvelopeDesign.from_dataset(prep)
        back = 1.0 / prep.column_sds
        env = design.fit(u, RIDGELESS_LAMBDA, **opt_options).beta_hat
        enh = design.fit(u, p / n, **opt_options).beta_hat
        return (prediction_risk(env * back, model),
                prediction_risk(enh * back, model))

    cells = [(gi, rep) for gi in range(gamma_grid.size) for rep in range(int(reps))]
    results = _parallel_map(one_cell, cells, threads)
    rows = []
    for gi, gamma in enumerate(gamma_grid):
        p = max(1, int(round(gamma * n)))
        block = [results[k] for k, (g, _) in enumerate(cells) if g == gi]
        for col, name in ((0, "envelope"), (1, "enhanced")):
            mean, se = _aggregate(np.array([b[col] for b in block]))
            rows.append(RiskRow(n=int(n), p=p, gamma=float(gamma),
                                rho=float(rho), estimator=name, mean_risk=mean,
                                se=se, replications=int(reps), seed=seed))
    config = dict(n=n, gamma_grid=list(map(float, gamma_grid)), rho=rho,
                  reps=reps, seed=seed, u=u, basis_mode=basis_mode)
    return RiskTable(rows=rows, config=config)

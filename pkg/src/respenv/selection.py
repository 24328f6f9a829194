"""Tuning-parameter selection by cross-validation.

kfold_cv scores every (u, lam) candidate by K-fold prediction error with the
predictor standardization and response centering recomputed on each fold's
training part only (no test-row leakage). nested_loocv wraps the same inner
CV in an outer leave-one-out loop and reports the per-coordinate squared
prediction error sum_i ||y_i - y_hat_i||^2 / (n r), the protocol used for
held-out comparisons on real data.

The four selectable estimator kinds are grid degenerations of one fit:
"enhanced" tunes (u, lam) jointly, "envelope" tunes u at lam = 1e-8,
"ridge" tunes lam at u = r, and "ols" has nothing to tune.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .data import DataSet, dataset_from_arrays, prepare_dataset, standardize_columns
from .errors import ValidationError
from .estimators import (
    RIDGELESS_LAMBDA,
    EnvelopeDesign,
    optimize_envelope_subspace,
)
from .grassmann import ObjectiveSpec

ESTIMATOR_KINDS = ("enhanced", "envelope", "ols", "ridge")


def default_lambda_grid(count: int, log10_min: float, log10_max: float) -> np.ndarray:
    """`count` log10-equispaced values spanning [10^log10_min, 10^log10_max]."""
    if not isinstance(count, (int, np.integer)) or count < 2:
        raise ValidationError(f"grid needs at least 2 points, got {count!r}")
    log10_min = float(log10_min)
    log10_max = float(log10_max)
    if not (np.isfinite(log10_min) and np.isfinite(log10_max)) or log10_min >= log10_max:
        raise ValidationError(
            f"degenerate lambda grid range [{log10_min}, {log10_max}]"
        )
    return 10.0 ** np.linspace(log10_min, log10_max, int(count))


def scaled_lambda_grid(source, count: int = 100, log10_min: float = -4.0,
                       log10_max: float = 4.0) -> np.ndarray:
    """Default grid scaled by tr(S_Y)/r so it tracks the response magnitude.

    `source` is a DataSet, SufficientStats, or EnvelopeDesign.
    """
    if isinstance(source, DataSet):
        Y = source.Y
        scale = float(np.sum(Y * Y)) / (Y.shape[0] * Y.shape[1])
    elif isinstance(source, EnvelopeDesign):
        scale = source.lambda_scale
    else:
        scale = float(np.trace(source.S_Y)) / source.r
    if scale <= 0:
        scale = 1.0
    return scale * default_lambda_grid(count, log10_min, log10_max)


def fold_indices(n: int, K: int, seed) -> list:
    """Deterministic K-way split of range(n): shuffle by seed, then chop."""
    rng = np.random.default_rng(seed)
    return [np.sort(part) for part in np.array_split(rng.permutation(n), K)]


@dataclasses.dataclass
class CVResult:
    """Cross-validation outcome over a (u, lambda) grid.

    mean_errors is (len(u_grid), len(lambda_grid)); fold_errors adds a
    trailing fold axis. Ties in mean error resolve to the smallest u, then
    the largest lambda.
    """

    best_u: int
    best_lambda: float
    u_grid: np.ndarray
    lambda_grid: np.ndarray
    mean_errors: np.ndarray
    fold_errors: np.ndarray
    folds: int
    seed: object


def _validate_grids(data, u_grid, lambda_grid, K):
    n, r = data.n, data.r
    u_grid = np.array(sorted({int(u) for u in np.atleast_1d(u_grid)}), dtype=int)
    if u_grid.size == 0 or u_grid[0] < 0 or u_grid[-1] > r:
        raise ValidationError(f"u grid must lie within [0, {r}]")
    lambda_grid = np.asarray(lambda_grid, dtype=np.float64).ravel()
    if lambda_grid.size == 0 or np.any(~np.isfinite(lambda_grid)) or np.any(lambda_grid < 0):
        raise ValidationError("lambda grid must hold finite nonnegative reals")
    lambda_grid = np.sort(lambda_grid)
    if not isinstance(K, (int, np.integer)) or not 2 <= K <= n:
        raise ValidationError(f"K must be an integer in [2, {n}], got {K!r}")
    return u_grid, lambda_grid, int(K)


def _fold_error_block(X_raw, Y_raw, train_idx, test_idx, u_grid, lambda_grid,
                      r, center_y, opt_options):
    """Per-(u, lambda) mean squared error on one held-out block."""
    X_tr, means, sds, _ = standardize_columns(X_raw[train_idx])
    Y_tr = Y_raw[train_idx]
    y_mean = Y_tr.mean(axis=0) if center_y else np.zeros(r)
    design = EnvelopeDesign.from_arrays(X_tr, Y_tr - y_mean)
    predictor = design.test_predictor((X_raw[test_idx] - means) / sds)
    Y_te = Y_raw[test_idx]
    m = len(test_idx)
    n_inv = design.n_inv()
    block = np.empty((len(u_grid), len(lambda_grid)))
    for j, lam in enumerate(lambda_grid):
        ridge_pred = predictor.predict(lam)
        M = None
        for i, u in enumerate(u_grid):
            if u == r:
                Y_hat = ridge_pred
            elif u == 0:
                Y_hat = np.zeros_like(ridge_pred)
            else:
                if M is None:
                    M = design.conditional_cov(lam)
                res = optimize_envelope_subspace(
                    ObjectiveSpec(M=M, N_inv=n_inv, u=int(u)), **opt_options
                )
                Y_hat = (ridge_pred @ res.G) @ res.G.T
            resid = Y_te - (Y_hat + y_mean)
            block[i, j] = float(np.sum(resid * resid)) / (m * r)
    return block


def kfold_cv(data: DataSet, u_grid, lambda_grid, K: int = 10, seed=0, *,
             center_y: bool = True, threads: int = 1, **opt_options) -> CVResult:
    """K-fold CV over a (u, lambda) grid; folds restandardize from raw rows.

    Fold assignment is a deterministic function of (n, K, seed), so results
    are reproducible and independent of `threads`.
    """
    u_grid, lambda_grid, K = _validate_grids(data, u_grid, lambda_grid, K)
    X_raw, Y_raw = data.raw_X(), data.raw_Y()
    n, r = data.n, data.r
    folds = fold_indices(n, K, seed)
    min_train = n - max(len(f) for f in folds)
    if min_train < max(r, 2):
        raise ValidationError(
            f"a fold leaves only {min_train} training rows (need at least "
            f"{max(r, 2)}); adjust K"
        )
    all_idx = np.arange(n)

    def run(f):
        test_idx = folds[f]
        mask = np.ones(n, dtype=bool)
        mask[test_idx] = False
        return _fold_error_block(X_raw, Y_raw, all_idx[mask], test_idx,
                                 u_grid, lambda_grid, r, center_y, opt_options)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            blocks = list(pool.map(run, range(K)))
    else:
        blocks = [run(f) for f in range(K)]
    fold_errors = np.stack(blocks, axis=2)
    mean_errors = fold_errors.mean(axis=2)

    best = (np.inf, None, None)
    for i, u in enumerate(u_grid):
        for j in range(len(lambda_grid) - 1, -1, -1):
            if mean_errors[i, j] < best[0]:
                best = (mean_errors[i, j], int(u), float(lambda_grid[j]))
    return CVResult(
        best_u=best[1], best_lambda=best[2], u_grid=u_grid,
        lambda_grid=lambda_grid, mean_errors=mean_errors,
        fold_errors=fold_errors, folds=K, seed=seed,
    )


def write_cv_table(result: CVResult, path, provenance: str | None = None) -> None:
    """CSV export: one row per (u, lambda) with mean and per-fold errors."""
    K = result.folds
    with open(path, "w", encoding="utf-8") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        cols = ",".join(f"fold_{k + 1}" for k in range(K))
        fh.write(f"u,lambda,mean_error,{cols}\n")
        for i, u in enumerate(result.u_grid):
            for j, lam in enumerate(result.lambda_grid):
                folds = ",".join(
                    format(result.fold_errors[i, j, k], ".17g") for k in range(K)
                )
                fh.write(
                    f"{int(u)},{lam:.17g},{result.mean_errors[i, j]:.17g},{folds}\n"
                )


def _tune_and_fit(train_data: DataSet, kind, u_grid, lambda_grid, K_inner,
                  seed, center_y, lambda_count, opt_options):
    """Inner-CV tune (when the kind needs it) and refit on all training rows."""
    prep = prepare_dataset(train_data.raw_X(), train_data.raw_Y(),
                           standardize_x=True, center_y=center_y)
    design = EnvelopeDesign.from_dataset(prep)
    r = prep.r
    if lambda_grid is None and kind in ("enhanced", "ridge"):
        lambda_grid = scaled_lambda_grid(design, count=lambda_count)
    if u_grid is None:
        u_grid = np.arange(r + 1)
    if kind == "enhanced":
        cv = kfold_cv(train_data, u_grid, lambda_grid, K_inner, seed,
                      center_y=center_y, **opt_options)
        u_star, lam_star = cv.best_u, cv.best_lambda
        beta = design.fit(u_star, lam_star, **opt_options).beta_hat
    elif kind == "envelope":
        cv = kfold_cv(train_data, u_grid, [RIDGELESS_LAMBDA], K_inner, seed,
                      center_y=center_y, **opt_options)
        u_star, lam_star = cv.best_u, RIDGELESS_LAMBDA
        beta = design.fit(u_star, lam_star, **opt_options).beta_hat
    elif kind == "ridge":
        cv = kfold_cv(train_data, [r], lambda_grid, K_inner, seed,
                      center_y=center_y, **opt_options)
        u_star, lam_star = r, cv.best_lambda
        beta = design.ridge_beta(lam_star)
    elif kind == "ols":
        u_star, lam_star = r, 0.0
        beta = design.ols_beta()
    else:
        raise ValidationError(
            f"estimator must be one of {ESTIMATOR_KINDS}, got {kind!r}"
        )
    return beta, prep, (u_star, lam_star)


def nested_loocv(data: DataSet, u_grid=None, lambda_grid=None, K_inner: int = 10,
                 estimator: str = "enhanced", seed=0, *, center_y: bool = True,
                 lambda_count: int = 20, threads: int = 1,
                 return_details: bool = False, **opt_options):
    """Leave-one-out error with all tuning nested inside each training split.

    For each held-out row i the remaining rows are standardized, the tuning
    parameters of `estimator` are chosen by K_inner-fold CV on those rows
    alone, the model is refit, and row i is predicted. Returns
    sum_i ||y_i - y_hat_i||^2 / (n r); with return_details=True also the
    per-observation errors ||y_i - y_hat_i||^2 / r.
    """
    if estimator not in ESTIMATOR_KINDS:
        raise ValidationError(
            f"estimator must be one of {ESTIMATOR_KINDS}, got {estimator!r}"
        )
    n, r = data.n, data.r
    if n < 3:
        raise ValidationError("nested LOOCV needs at least 3 rows")
    X_raw, Y_raw = data.raw_X(), data.raw_Y()

    base_seed = list(seed) if isinstance(seed, (list, tuple)) else [seed]

    def run(i):
        mask = np.ones(n, dtype=bool)
        mask[i] = False
        train = dataset_from_arrays(X_raw[mask], Y_raw[mask])
        beta, prep, _ = _tune_and_fit(
            train, estimator, u_grid, lambda_grid, K_inner, base_seed + [i],
            center_y, lambda_count, opt_options,
        )
        x_std = (X_raw[i] - prep.column_means) / prep.column_sds
        y_hat = x_std @ beta.T + prep.y_means
        diff = Y_raw[i] - y_hat
        return float(diff @ diff) / r

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            per_obs = np.array(list(pool.map(run, range(n))))
    else:
        per_obs = np.array([run(i) for i in range(n)])
    error = float(per_obs.mean())
    if return_details:
        return error, per_obs
    return error

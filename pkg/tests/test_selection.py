"""Lambda grids, K-fold cross-validation, and nested leave-one-out scoring."""

import numpy as np
import pytest

from respenv import (
    ValidationError,
    dataset_from_arrays,
    default_lambda_grid,
    fit_envelope,
    fit_ols,
    fold_indices,
    generate_data,
    generate_model,
    kfold_cv,
    nested_loocv,
    predict,
    prepare_dataset,
    scaled_lambda_grid,
    write_cv_table,
)


def make_dataset(n, p, r, seed, noise=1.0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    B = rng.normal(size=(r, p))
    Y = X @ B.T + noise * rng.normal(size=(n, r))
    return dataset_from_arrays(X, Y)


def naive_cv_errors(data, u_grid, lambda_grid, K, seed, center_y=True):
    """From-scratch double loop: refit every (fold, u, lambda) independently.

    Standardization and centering are recomputed from each fold's training
    rows only, so matching this oracle certifies the fast path leaks nothing
    from held-out rows.
    """
    X_raw, Y_raw = data.raw_X(), data.raw_Y()
    errs = np.zeros((len(u_grid), len(lambda_grid), K))
    for k, test_idx in enumerate(fold_indices(data.n, K, seed)):
        mask = np.ones(data.n, dtype=bool)
        mask[test_idx] = False
        prep = prepare_dataset(X_raw[mask], Y_raw[mask], center_y=center_y)
        for j, lam in enumerate(lambda_grid):
            for i, u in enumerate(u_grid):
                fit = fit_envelope(prep, int(u), float(lam))
                resid = Y_raw[test_idx] - predict(fit, X_raw[test_idx])
                errs[i, j, k] = (resid * resid).sum() / (len(test_idx) * data.r)
    return errs


def test_default_lambda_grid():
    grid = default_lambda_grid(7, -3.0, 3.0)
    assert grid.shape == (7,)
    assert grid[0] == pytest.approx(1e-3)
    assert grid[-1] == pytest.approx(1e3)
    steps = np.diff(np.log10(grid))
    assert np.allclose(steps, steps[0])
    with pytest.raises(ValidationError):
        default_lambda_grid(1, -1.0, 1.0)
    with pytest.raises(ValidationError):
        default_lambda_grid(5, 2.0, 2.0)


def test_scaled_lambda_grid_sources_agree():
    from respenv import EnvelopeDesign, compute_sufficient_stats

    data = make_dataset(30, 4, 3, seed=0)
    g_data = scaled_lambda_grid(data, count=9)
    g_stats = scaled_lambda_grid(compute_sufficient_stats(data), count=9)
    g_design = scaled_lambda_grid(EnvelopeDesign.from_dataset(data), count=9)
    assert np.allclose(g_data, g_stats, rtol=1e-12)
    assert np.allclose(g_data, g_design, rtol=1e-12)
    scale = np.trace(data.Y.T @ data.Y / 30) / 3
    assert g_data[0] == pytest.approx(scale * 1e-4)
    assert g_data[-1] == pytest.approx(scale * 1e4)


def test_fold_indices_partition():
    folds = fold_indices(23, 5, seed=0)
    assert len(folds) == 5
    joined = np.sort(np.concatenate(folds))
    assert np.array_equal(joined, np.arange(23))
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    again = fold_indices(23, 5, seed=0)
    assert all(np.array_equal(a, b) for a, b in zip(folds, again))
    other = fold_indices(23, 5, seed=1)
    assert any(not np.array_equal(a, b) for a, b in zip(folds, other))


def test_kfold_cv_matches_naive_double_loop():
    data = make_dataset(36, 5, 3, seed=1)
    u_grid = [0, 1, 2, 3]
    lambda_grid = [0.05, 0.4, 2.0]
    cv = kfold_cv(data, u_grid, lambda_grid, K=3, seed=7)
    want = naive_cv_errors(data, u_grid, lambda_grid, K=3, seed=7)
    assert cv.fold_errors.shape == want.shape
    assert np.allclose(cv.fold_errors, want, rtol=1e-9, atol=1e-10)
    assert np.allclose(cv.mean_errors, want.mean(axis=2), rtol=1e-9, atol=1e-10)
    flat = np.argmin(cv.mean_errors)
    i, j = np.unravel_index(flat, cv.mean_errors.shape)
    assert cv.mean_errors[i, j] == cv.mean_errors.min()
    assert cv.best_u in u_grid
    assert cv.best_lambda in lambda_grid


def test_kfold_cv_without_centering_matches_naive():
    data = make_dataset(24, 4, 2, seed=2)
    cv = kfold_cv(data, [1, 2], [0.3, 3.0], K=4, seed=3, center_y=False)
    want = naive_cv_errors(data, [1, 2], [0.3, 3.0], K=4, seed=3, center_y=False)
    assert np.allclose(cv.fold_errors, want, rtol=1e-9, atol=1e-10)


def test_kfold_cv_tie_breaks_to_largest_lambda():
    # u = 0 predicts zero whatever lambda is, so every column ties exactly
    data = make_dataset(20, 3, 2, seed=4)
    cv = kfold_cv(data, [0], [0.1, 1.0, 10.0], K=4, seed=0)
    assert cv.best_u == 0
    assert cv.best_lambda == 10.0
    assert np.ptp(cv.mean_errors[0]) == 0.0


def test_kfold_cv_threads_deterministic():
    data = make_dataset(30, 4, 2, seed=5)
    a = kfold_cv(data, [0, 1, 2], [0.2, 2.0], K=5, seed=11, threads=1)
    b = kfold_cv(data, [0, 1, 2], [0.2, 2.0], K=5, seed=11, threads=3)
    assert np.array_equal(a.fold_errors, b.fold_errors)
    assert (a.best_u, a.best_lambda) == (b.best_u, b.best_lambda)


def test_kfold_cv_validation():
    data = make_dataset(20, 3, 2, seed=6)
    with pytest.raises(ValidationError):
        kfold_cv(data, [5], [0.1], K=4)  # u beyond r
    with pytest.raises(ValidationError):
        kfold_cv(data, [1], [], K=4)
    with pytest.raises(ValidationError):
        kfold_cv(data, [1], [-0.5], K=4)
    with pytest.raises(ValidationError):
        kfold_cv(data, [1], [0.1], K=1)
    with pytest.raises(ValidationError):
        kfold_cv(data, [1], [0.1], K=25)


def test_kfold_cv_training_rows_guard():
    rng = np.random.default_rng(7)
    data = dataset_from_arrays(rng.normal(size=(4, 2)), rng.normal(size=(4, 3)))
    with pytest.raises(ValidationError, match="adjust K"):
        kfold_cv(data, [1], [0.1], K=2)


def test_cv_selects_true_dimension():
    # the generating process has a 2-D material subspace; CV should find it
    # for most draws, with occasional over-selection
    hits = 0
    for seed in range(100):
        model = generate_model(p=6, rho=0.0, seed=[9000, seed])
        data = generate_data(model, n=250, seed=[9001, seed])
        grid = scaled_lambda_grid(data, count=8)
        cv = kfold_cv(data, [0, 1, 2, 3], grid, K=5, seed=[9002, seed])
        hits += cv.best_u == 2
    assert hits >= 85


def test_write_cv_table(tmp_path):
    data = make_dataset(20, 3, 2, seed=8)
    cv = kfold_cv(data, [0, 2], [0.1, 1.0], K=4, seed=0)
    path = tmp_path / "cv.csv"
    write_cv_table(cv, path, provenance="trial run")
    lines = path.read_text().splitlines()
    assert lines[0] == "# trial run"
    assert lines[1] == "u,lambda,mean_error," + ",".join(
        f"fold_{k}" for k in range(1, 5)
    )
    assert len(lines) == 2 + 4  # two u times two lambda
    row = lines[2].split(",")
    assert int(row[0]) == 0
    assert float(row[2]) == pytest.approx(cv.mean_errors[0, 0], rel=1e-15)


def test_nested_loocv_zero_on_noiseless_ols():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(15, 3))
    B = rng.normal(size=(2, 3))
    data = dataset_from_arrays(X, X @ B.T)
    err = nested_loocv(data, estimator="ols", K_inner=3)
    assert err < 1e-16


def test_nested_loocv_matches_manual_outer_loop():
    data = make_dataset(12, 3, 2, seed=10)
    X_raw, Y_raw = data.raw_X(), data.raw_Y()
    per = []
    for i in range(12):
        mask = np.ones(12, dtype=bool)
        mask[i] = False
        prep = prepare_dataset(X_raw[mask], Y_raw[mask])
        beta = fit_ols(prep)
        x_std = (X_raw[i] - prep.column_means) / prep.column_sds
        diff = Y_raw[i] - (x_std @ beta.T + prep.y_means)
        per.append(diff @ diff / 2)
    want = float(np.mean(per))
    err, per_obs = nested_loocv(data, estimator="ols", return_details=True)
    assert err == pytest.approx(want, rel=1e-12)
    assert np.allclose(per_obs, per, rtol=1e-12)


def test_nested_loocv_enhanced_smoke():
    data = make_dataset(14, 3, 3, seed=11)
    err1 = nested_loocv(data, u_grid=[0, 1, 3], lambda_grid=[0.1, 1.0],
                        K_inner=3, estimator="enhanced", seed=5)
    err2 = nested_loocv(data, u_grid=[0, 1, 3], lambda_grid=[0.1, 1.0],
                        K_inner=3, estimator="enhanced", seed=5, threads=3)
    assert err1 >= 0 and np.isfinite(err1)
    assert err1 == err2
    # list seeds compose with the per-observation index
    err3 = nested_loocv(data, u_grid=[0, 1, 3], lambda_grid=[0.1, 1.0],
                        K_inner=3, estimator="enhanced", seed=[5, 7])
    assert np.isfinite(err3)


def test_nested_loocv_validation():
    data = make_dataset(10, 3, 2, seed=12)
    with pytest.raises(ValidationError):
        nested_loocv(data, estimator="lasso")
    tiny = make_dataset(2, 2, 2, seed=13)
    with pytest.raises(ValidationError):
        nested_loocv(tiny, estimator="ols")

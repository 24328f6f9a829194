"""Subspace objective, gradient, and the two-stage Grassmann search."""

import numpy as np
import pytest

from respenv import (
    NumericalError,
    ObjectiveSpec,
    ValidationError,
    envelope_objective,
    envelope_objective_gradient,
    optimize_envelope_subspace,
    orthonormal_complement,
)
from respenv import _kernels


def random_pd(r, seed, spread=3.0):
    rng = np.random.default_rng(seed)
    Q = np.linalg.qr(rng.normal(size=(r, r)))[0]
    w = np.exp(rng.uniform(-spread / 2, spread / 2, size=r))
    return (Q * w) @ Q.T


def random_spec(r, u, seed):
    return ObjectiveSpec(M=random_pd(r, seed), N_inv=random_pd(r, seed + 1000), u=u)


def sphere_mesh(count):
    # Fibonacci lattice on S^2, a near-uniform brute-force grid
    i = np.arange(count) + 0.5
    phi = np.arccos(1 - 2 * i / count)
    theta = np.pi * (1 + 5**0.5) * i
    return np.column_stack(
        [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)]
    )


def mesh_objective(V, A, B):
    # log(v'Av) + log(v'Bv) for every row of V at once
    qa = np.einsum("ij,jk,ik->i", V, A, V)
    qb = np.einsum("ij,jk,ik->i", V, B, V)
    return np.log(qa) + np.log(qb)


def test_spec_validation():
    with pytest.raises(NumericalError):
        ObjectiveSpec(M=np.diag([1.0, -1.0]), N_inv=np.eye(2), u=1)
    with pytest.raises(ValidationError):
        ObjectiveSpec(M=np.eye(2), N_inv=np.eye(3), u=1)
    with pytest.raises(ValidationError):
        ObjectiveSpec(M=np.eye(2), N_inv=np.eye(2), u=3)
    with pytest.raises(ValidationError):
        ObjectiveSpec(M=np.eye(2), N_inv=np.eye(2), u=-1)


def test_objective_matches_direct_logdet():
    spec = random_spec(5, 2, seed=0)
    rng = np.random.default_rng(1)
    G = np.linalg.qr(rng.normal(size=(5, 2)))[0]
    want = np.linalg.slogdet(G.T @ spec.M @ G)[1] + np.linalg.slogdet(
        G.T @ spec.N_inv @ G
    )[1]
    assert envelope_objective(G, spec) == pytest.approx(want, abs=1e-12)


def test_objective_rotation_invariant():
    # J depends on span(G) only
    spec = random_spec(6, 3, seed=2)
    rng = np.random.default_rng(3)
    G = np.linalg.qr(rng.normal(size=(6, 3)))[0]
    R = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    assert envelope_objective(G @ R, spec) == pytest.approx(
        envelope_objective(G, spec), abs=1e-10
    )


def test_objective_rejects_bad_basis():
    spec = random_spec(4, 2, seed=4)
    with pytest.raises(ValidationError):
        envelope_objective(np.ones((4, 2)), spec)
    with pytest.raises(ValidationError):
        envelope_objective(np.eye(4)[:, :3], spec)


def test_gradient_matches_finite_differences():
    spec = random_spec(5, 2, seed=5)
    rng = np.random.default_rng(6)
    G = np.linalg.qr(rng.normal(size=(5, 2)))[0]
    grad = envelope_objective_gradient(G, spec)
    # gradient lies in the horizontal space
    assert np.allclose(G.T @ grad, 0.0, atol=1e-10)
    W = rng.normal(size=(5, 2))
    H = W - G @ (G.T @ W)
    t = 1e-6
    fp = envelope_objective(_kernels.orthonormalize(G + t * H), spec)
    fm = envelope_objective(_kernels.orthonormalize(G - t * H), spec)
    directional = (fp - fm) / (2 * t)
    assert directional == pytest.approx(np.sum(grad * H), rel=1e-5, abs=1e-7)


def test_orthonormal_complement():
    rng = np.random.default_rng(7)
    G = np.linalg.qr(rng.normal(size=(6, 2)))[0]
    Q = orthonormal_complement(G)
    assert Q.shape == (6, 4)
    full = np.column_stack([G, Q])
    assert np.allclose(full.T @ full, np.eye(6), atol=1e-12)
    # deterministic
    assert np.array_equal(Q, orthonormal_complement(G))
    assert orthonormal_complement(np.eye(3)).shape == (3, 0)


def test_trivial_dimensions():
    spec0 = random_spec(4, 0, seed=8)
    res0 = optimize_envelope_subspace(spec0)
    assert res0.G.shape == (4, 0)
    assert res0.objective_value == 0.0
    assert res0.converged

    spec4 = random_spec(4, 4, seed=9)
    res4 = optimize_envelope_subspace(spec4)
    assert np.array_equal(res4.G, np.eye(4))
    assert res4.objective_value == pytest.approx(
        envelope_objective(np.eye(4), spec4), abs=1e-12
    )


def test_descent_is_monotone_and_orthonormal():
    for seed in range(5):
        spec = random_spec(4, 2, seed=100 + seed)
        res = optimize_envelope_subspace(spec)
        assert res.max_orthogonality_error <= 1e-10
        assert _kernels.orthogonality_error(res.G) <= 1e-10
        for trace in res.start_traces:
            assert np.all(np.diff(trace) <= 1e-12)
        assert res.objective_trace[-1] == pytest.approx(res.objective_value, abs=1e-12)


def test_u1_r2_matches_angle_scan():
    for seed in range(5):
        spec = random_spec(2, 1, seed=200 + seed)
        res = optimize_envelope_subspace(spec)
        ang = np.linspace(0.0, np.pi, 10_000, endpoint=False)
        V = np.column_stack([np.cos(ang), np.sin(ang)])
        mesh_min = mesh_objective(V, spec.M, spec.N_inv).min()
        assert res.objective_value <= mesh_min + 1e-6


def test_u1_r3_matches_sphere_mesh():
    V = sphere_mesh(10_000)
    for seed in range(10):
        spec = random_spec(3, 1, seed=300 + seed)
        res = optimize_envelope_subspace(spec)
        mesh_min = mesh_objective(V, spec.M, spec.N_inv).min()
        assert res.objective_value <= mesh_min + 1e-6


def test_u2_r3_matches_complement_scan():
    # det(G'SG) = det(S) det(Q'S^-1 Q) for [G Q] orthogonal, so the u=2
    # problem in r=3 is a 1-D search over the complement direction
    V = sphere_mesh(10_000)
    for seed in range(10):
        spec = random_spec(3, 2, seed=400 + seed)
        res = optimize_envelope_subspace(spec)
        M_inv = np.linalg.inv(spec.M)
        N = np.linalg.inv(spec.N_inv)
        const = np.linalg.slogdet(spec.M)[1] + np.linalg.slogdet(spec.N_inv)[1]
        mesh_min = const + mesh_objective(V, M_inv, N).min()
        assert res.objective_value <= mesh_min + 1e-6


def test_deterministic_and_multistart_no_worse():
    spec = random_spec(6, 3, seed=500)
    a = optimize_envelope_subspace(spec)
    b = optimize_envelope_subspace(spec)
    assert np.array_equal(a.G, b.G)
    assert a.objective_value == b.objective_value
    wide = optimize_envelope_subspace(spec, n_starts=6, seed=0)
    assert wide.objective_value <= a.objective_value + 1e-12
    assert len(wide.start_traces) == 6


def test_result_reports_convergence():
    spec = random_spec(5, 2, seed=600)
    res = optimize_envelope_subspace(spec)
    assert res.converged
    assert res.iterations <= 500
    assert res.projected_gradient_norm < 1e-4
    capped = optimize_envelope_subspace(spec, max_iter=1)
    assert capped.iterations <= 1


def test_optimizer_option_validation():
    spec = random_spec(3, 1, seed=700)
    with pytest.raises(ValidationError):
        optimize_envelope_subspace(spec, max_iter=0)
    with pytest.raises(ValidationError):
        optimize_envelope_subspace(spec, ftol=0.0)
    with pytest.raises(ValidationError):
        optimize_envelope_subspace(spec, n_starts=0)

"""Inner-loop kernels for the log-determinant subspace objective.

Everything here operates on small dense float64 arrays (r-by-u bases with r
the response dimension, rarely above 10) and is called tens of thousands of
times per cross-validation run, so per-call overhead dominates. The functions
are written in the numpy subset numba supports and compiled through
:func:`respenv.backend.jit`; with the numba backend off they run unchanged
as plain numpy.
"""

import numpy as np

from .backend import jit

# Backtracking line-search constants: Armijo sufficient-decrease coefficient,
# contraction factor, and the floor below which a step is declared dead.
_ARMIJO = 1e-4
_SHRINK = 0.5
_MIN_STEP = 1e-20


@jit
def objective_value(G, M, N_inv):
    # log det(G'MG) + log det(G'N_inv G); +inf when either factor is not
    # numerically positive definite, so line searches reject the step.
    A = G.T @ (M @ G)
    B = G.T @ (N_inv @ G)
    sign_a, logdet_a = np.linalg.slogdet(A)
    sign_b, logdet_b = np.linalg.slogdet(B)
    if sign_a <= 0 or sign_b <= 0:
        return np.inf
    return logdet_a + logdet_b


@jit
def horizontal_gradient(G, M, N_inv):
    # Euclidean gradient 2MG(G'MG)^-1 + 2N_inv G(G'N_inv G)^-1 projected onto
    # the horizontal space (I - GG') of the orthonormal-basis manifold.
    MG = M @ G
    NG = N_inv @ G
    A = G.T @ MG
    B = G.T @ NG
    grad = 2.0 * np.linalg.solve(A, MG.T).T + 2.0 * np.linalg.solve(B, NG.T).T
    return grad - G @ (G.T @ grad)


@jit
def orthonormalize(G):
    # QR with the sign convention diag(R) >= 0, making the retraction
    # deterministic across backends.
    Q, R = np.linalg.qr(np.ascontiguousarray(G))
    for j in range(R.shape[0]):
        if R[j, j] < 0.0:
            Q[:, j] = -Q[:, j]
    return np.ascontiguousarray(Q)


@jit
def orthogonality_error(G):
    E = G.T @ G - np.eye(G.shape[1])
    return np.sqrt(np.sum(E * E))


@jit
def descend(G0, M, N_inv, max_iter, ftol, gtol):
    """Projected-gradient descent with backtracking and a QR retraction.

    Stops when the objective decrease falls below ftol, the projected
    gradient norm falls below gtol, or max_iter is hit (only the last case
    reports converged=False). Accepted steps never increase the objective.

    Returns (G, f, iterations, grad_norm, converged, trace, trace_len,
    max_orth_error); `trace[:trace_len]` is the objective after each accepted
    iterate, starting at the initial point.
    """
    G = orthonormalize(G0)
    f = objective_value(G, M, N_inv)
    trace = np.empty(max_iter + 1)
    trace[0] = f
    trace_len = 1
    max_orth = orthogonality_error(G)
    grad_norm = 0.0
    converged = False
    step = 1.0
    for _ in range(max_iter):
        D = horizontal_gradient(G, M, N_inv)
        grad_norm = np.sqrt(np.sum(D * D))
        if grad_norm < gtol:
            converged = True
            break
        t = step
        accepted = False
        f_new = f
        G_new = G
        while t > _MIN_STEP:
            cand = orthonormalize(G - t * D)
            f_cand = objective_value(cand, M, N_inv)
            if f_cand <= f - _ARMIJO * t * grad_norm * grad_norm:
                G_new = cand
                f_new = f_cand
                accepted = True
                break
            t = t * _SHRINK
        if not accepted:
            # No step of any length decreases the objective: numerically
            # stationary even though the gradient test has not fired.
            converged = True
            break
        decrease = f - f_new
        G = G_new
        f = f_new
        trace[trace_len] = f
        trace_len += 1
        err = orthogonality_error(G)
        if err > max_orth:
            max_orth = err
        step = min(t * 2.0, 1e6)
        if decrease < ftol:
            converged = True
            break
    return G, f, trace_len - 1, grad_norm, converged, trace, trace_len, max_orth

"""Search for the subspace minimizing a two-factor log-determinant score.

The estimation target is a u-dimensional subspace of response space,
represented by an r-by-u matrix G with orthonormal columns and scored by

    J(G) = log det(G' M G) + log det(G' N_inv G)

for positive definite M and N_inv. J depends on span(G) only, so the search
space is the Grassmann manifold. Minimization proceeds in two stages: columns
are built greedily one at a time (each new direction minimizes the score
increment over the orthogonal complement of the ones already chosen, via a
Schur-complement reduction), then the full basis is refined jointly by
projected-gradient descent with backtracking and a QR retraction. Several
eigenvector-based starting points are tried and the best run is returned.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import _kernels
from .errors import NumericalError, ValidationError

_PD_TOL = 1e-12
_ORTH_TOL = 1e-8


def _symmetrize(a):
    return 0.5 * (a + a.T)


def _validate_pd(name, a):
    a = np.ascontiguousarray(_symmetrize(np.asarray(a, dtype=np.float64)))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name} must be a square matrix")
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"{name} contains non-finite entries")
    w = np.linalg.eigvalsh(a)
    if w[0] <= _PD_TOL:
        raise NumericalError(
            f"{name} is not positive definite (min eigenvalue {w[0]:.3e}, "
            f"max {w[-1]:.3e})"
        )
    return a


@dataclasses.dataclass(frozen=True)
class ObjectiveSpec:
    """The two matrices defining the subspace score, plus the target dimension.

    M and N_inv are symmetrized and checked for positive definiteness
    (minimum eigenvalue above 1e-12) at construction.
    """

    M: np.ndarray
    N_inv: np.ndarray
    u: int

    def __post_init__(self):
        M = _validate_pd("M", self.M)
        N_inv = _validate_pd("N_inv", self.N_inv)
        if M.shape != N_inv.shape:
            raise ValidationError("M and N_inv must have matching shapes")
        if not isinstance(self.u, (int, np.integer)) or not 0 <= self.u <= M.shape[0]:
            raise ValidationError(
                f"u must be an integer in [0, {M.shape[0]}], got {self.u!r}"
            )
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "N_inv", N_inv)
        object.__setattr__(self, "u", int(self.u))

    @property
    def r(self) -> int:
        return self.M.shape[0]


@dataclasses.dataclass
class SubspaceResult:
    """Outcome of a subspace search.

    objective_trace holds the objective after every accepted iterate of the
    winning refinement run (monotonically nonincreasing); start_traces holds
    one such trace per starting point, for descent audits.
    """

    G: np.ndarray
    objective_value: float
    iterations: int
    projected_gradient_norm: float
    converged: bool
    objective_trace: np.ndarray
    max_orthogonality_error: float
    start_traces: list = dataclasses.field(default_factory=list)


def _check_basis(G, spec):
    G = np.ascontiguousarray(np.asarray(G, dtype=np.float64))
    if G.ndim != 2 or G.shape != (spec.r, spec.u):
        raise ValidationError(
            f"basis must have shape ({spec.r}, {spec.u}), got {G.shape}"
        )
    if G.shape[1] and _kernels.orthogonality_error(G) > _ORTH_TOL:
        raise ValidationError("basis columns are not orthonormal")
    return G


def envelope_objective(G, spec: ObjectiveSpec) -> float:
    """J(G) for an orthonormal basis G; 0.0 for the empty basis."""
    G = _check_basis(G, spec)
    if spec.u == 0:
        return 0.0
    value = _kernels.objective_value(G, spec.M, spec.N_inv)
    if not np.isfinite(value):
        raise NumericalError("objective is infinite: a projected factor is singular")
    return float(value)


def envelope_objective_gradient(G, spec: ObjectiveSpec) -> np.ndarray:
    """Gradient of J projected onto the horizontal space at G."""
    G = _check_basis(G, spec)
    if spec.u == 0:
        return np.zeros((spec.r, 0))
    return _kernels.horizontal_gradient(G, spec.M, spec.N_inv)


def orthonormal_complement(G) -> np.ndarray:
    """Orthonormal basis of span(G)-perp, r-by-(r-u), deterministic.

    Gram-Schmidt of the standard basis vectors, in index order, against G and
    the columns collected so far; two projection passes keep the result
    orthogonal to working precision.
    """
    G = np.asarray(G, dtype=np.float64)
    r, u = G.shape
    need = r - u
    if need == 0:
        return np.zeros((r, 0))
    cols = []
    for j in range(r):
        v = np.zeros(r)
        v[j] = 1.0
        for _ in range(2):
            v = v - G @ (G.T @ v)
            for c in cols:
                v = v - c * (c @ v)
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            cols.append(v / norm)
            if len(cols) == need:
                break
    if len(cols) < need:
        raise NumericalError("failed to complete an orthonormal basis")
    return np.column_stack(cols)


def _first_column_candidates(M, N_inv, n_starts, seed):
    # Candidate initial directions: eigenvectors of M, then of N_inv, scored
    # by the one-column objective; near-duplicates (up to sign) dropped.
    r = M.shape[0]
    _, VM = np.linalg.eigh(M)
    _, VN = np.linalg.eigh(N_inv)
    raw = [VM[:, j] for j in range(r)] + [VN[:, j] for j in range(r)]
    kept = []
    for v in raw:
        if all(abs(v @ w) < 1.0 - 1e-10 for w in kept):
            kept.append(v)
    scores = [
        float(np.log(v @ M @ v) + np.log(v @ N_inv @ v)) for v in kept
    ]
    order = sorted(range(len(kept)), key=lambda i: (scores[i], i))
    chosen = [kept[i] for i in order[:n_starts]]
    if len(chosen) < n_starts and seed is not None:
        rng = np.random.default_rng(seed)
        while len(chosen) < n_starts:
            v = rng.standard_normal(r)
            chosen.append(v / np.linalg.norm(v))
    return chosen


def _schur_reduction(S, G, Q):
    # Q' (S - SG (G'SG)^-1 G'S) Q: the score increment of adding a direction
    # Q v to G is log(v' A v) with A this reduction of S.
    SG = S @ G
    A = G.T @ SG
    R = S - SG @ np.linalg.solve(A, SG.T)
    return np.ascontiguousarray(_symmetrize(Q.T @ R @ Q))


def _minimize_direction(A, B, max_iter, ftol, gtol):
    # Best unit vector for log(v'Av) + log(v'Bv): eigenvector candidates of
    # both factors, the two best refined by projected-gradient descent.
    m = A.shape[0]
    if m == 1:
        return np.ones((1, 1))
    _, VA = np.linalg.eigh(A)
    _, VB = np.linalg.eigh(B)
    cands = [VA[:, j] for j in range(m)] + [VB[:, j] for j in range(m)]
    kept = []
    for v in cands:
        if all(abs(v @ w) < 1.0 - 1e-10 for w in kept):
            kept.append(v)
    scores = [float(np.log(v @ A @ v) + np.log(v @ B @ v)) for v in kept]
    order = sorted(range(len(kept)), key=lambda i: (scores[i], i))
    best_v, best_f = None, np.inf
    for i in order[:2]:
        v0 = np.ascontiguousarray(kept[i][:, None])
        v, f = _kernels.descend(v0, A, B, max_iter, ftol, gtol)[:2]
        if f < best_f - 1e-12:
            best_v, best_f = v, f
    return best_v


def _greedy_basis(v0, M, N_inv, u, max_iter, ftol, gtol):
    # Build u columns one at a time: refine the start on the sphere, then
    # repeatedly add the best direction from the orthogonal complement.
    G = _kernels.descend(
        np.ascontiguousarray(v0[:, None]), M, N_inv, max_iter, ftol, gtol
    )[0]
    for _ in range(1, u):
        Q = orthonormal_complement(G)
        A = _schur_reduction(M, G, Q)
        B = _schur_reduction(N_inv, G, Q)
        v = _minimize_direction(A, B, max_iter, ftol, gtol)
        G = _kernels.orthonormalize(np.column_stack([G, Q @ v[:, 0]]))
    return G


def optimize_envelope_subspace(
    spec: ObjectiveSpec,
    *,
    max_iter: int = 500,
    ftol: float = 1e-10,
    gtol: float = 1e-8,
    n_starts: int = 2,
    seed=None,
) -> SubspaceResult:
    """Minimize J over u-dimensional subspaces; best of n_starts runs.

    Ties between runs keep the first found under the deterministic candidate
    ordering, so repeated calls with the same inputs return the same span.
    u = 0 returns the empty basis, u = r the identity (J is constant there).
    """
    if max_iter < 1 or ftol <= 0 or gtol <= 0 or n_starts < 1:
        raise ValidationError("optimizer options out of range")
    M, N_inv, u, r = spec.M, spec.N_inv, spec.u, spec.r
    if u == 0:
        return SubspaceResult(
            np.zeros((r, 0)), 0.0, 0, 0.0, True, np.zeros(1), 0.0
        )
    if u == r:
        G = np.eye(r)
        value = float(_kernels.objective_value(G, M, N_inv))
        return SubspaceResult(G, value, 0, 0.0, True, np.full(1, value), 0.0)

    best = None
    traces = []
    for v0 in _first_column_candidates(M, N_inv, n_starts, seed):
        G0 = _greedy_basis(v0, M, N_inv, u, max_iter, ftol, gtol)
        G, f, iters, gnorm, conv, trace, tlen, orth = _kernels.descend(
            G0, M, N_inv, max_iter, ftol, gtol
        )
        if not np.isfinite(f):
            raise NumericalError("subspace search diverged to a singular factor")
        traces.append(trace[:tlen].copy())
        if best is None or f < best.objective_value - 1e-12:
            best = SubspaceResult(
                G=G,
                objective_value=float(f),
                iterations=int(iters),
                projected_gradient_norm=float(gnorm),
                converged=bool(conv),
                objective_trace=traces[-1],
                max_orthogonality_error=float(orth),
            )
    best.start_traces = traces
    return best

"""Exact and limiting prediction risk of the subspace-projected estimators.

Risk here means the conditional expected squared prediction error at a fresh
predictor draw, E ||B_hat x_new - B x_new||^2 given the training X, for an
estimator that projects onto the *true* material subspace (so the formulas
isolate the regularization trade-off from subspace estimation noise). With
tr_Omega the material noise trace and Pi_X the projector onto the null space
of S_X:

    subspace estimator (no ridge):
        tr(B Pi_X Sigma_x Pi_X B') + (tr_Omega / n) tr(S_X^+ Sigma_x)
    ridge-regularized at level lam:
        lam^2 tr(B (S_X+lam I)^-1 Sigma_x (S_X+lam I)^-1 B')
        + (tr_Omega / n) tr(Sigma_x S_X (S_X+lam I)^-2)

Both quadratic forms avoid the Kronecker lift vec(B)'(A (x) I)vec(B), which
equals tr(B A B') for symmetric A.

In the proportional regime p/n -> g with isotropic predictors, risks converge
to closed forms driven by the Stieltjes transform m(z) of the
Marchenko-Pastur law; `limiting_risk_enhanced` also reports the limit-optimal
regularization level tr_Omega * g / c^2.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .data import symmetrize
from .errors import NumericalError, ValidationError

_PINV_REL_TOL = 1e-10


@dataclasses.dataclass(frozen=True)
class RiskInputs:
    """Ingredients of the exact risk formulas.

    beta : (r, p) true slope.
    Sigma_x : (p, p) predictor covariance.
    S_X : (p, p) sample second-moment matrix of the training predictors.
    tr_Omega : trace of the material noise covariance.
    n : training sample size.
    """

    beta: np.ndarray
    Sigma_x: np.ndarray
    S_X: np.ndarray
    tr_Omega: float
    n: int

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.ndim != 2:
            raise ValidationError("beta must be a 2-D matrix")
        p = beta.shape[1]
        Sigma_x = symmetrize(np.asarray(self.Sigma_x, dtype=np.float64))
        S_X = symmetrize(np.asarray(self.S_X, dtype=np.float64))
        if Sigma_x.shape != (p, p) or S_X.shape != (p, p):
            raise ValidationError("Sigma_x and S_X must be p-by-p")
        if self.tr_Omega < 0 or self.n < 1:
            raise ValidationError("tr_Omega must be >= 0 and n >= 1")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "Sigma_x", Sigma_x)
        object.__setattr__(self, "S_X", S_X)


def envelope_prediction_risk(inputs: RiskInputs) -> float:
    """Exact risk of the unregularized subspace estimator given X.

    Singular values of S_X below 1e-10 of the largest are treated as zero
    when forming the pseudo-inverse and the null-space projector.
    """
    d, V = np.linalg.eigh(inputs.S_X)
    d = np.maximum(d, 0.0)
    cut = _PINV_REL_TOL * max(d[-1], 0.0)
    keep = d > cut
    beta_V = inputs.beta @ V
    # bias: beta restricted to the null space of S_X
    B_null = beta_V[:, ~keep] @ V[:, ~keep].T
    bias = float(np.trace(B_null @ inputs.Sigma_x @ B_null.T))
    Sig_V = V.T @ inputs.Sigma_x @ V
    var = float(np.sum(np.diag(Sig_V)[keep] / d[keep])) * inputs.tr_Omega / inputs.n
    return bias + var


def enhanced_prediction_risk(inputs: RiskInputs, lam) -> float:
    """Exact risk of the ridge-regularized subspace estimator given X."""
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise ValidationError(f"lam must be a finite nonnegative real, got {lam!r}")
    if lam == 0.0:
        return envelope_prediction_risk(inputs)
    d, V = np.linalg.eigh(inputs.S_X)
    d = np.maximum(d, 0.0)
    beta_V = inputs.beta @ V
    Sig_V = V.T @ inputs.Sigma_x @ V
    shrink = 1.0 / (d + lam)
    T = beta_V * shrink
    bias = lam * lam * float(np.trace(T @ Sig_V @ T.T))
    var = float(np.sum(np.diag(Sig_V) * d * shrink * shrink))
    var *= inputs.tr_Omega / inputs.n
    return bias + var


def lambda_improvement_bound(beta, tr_Omega, n) -> float:
    """Largest lam below which regularization provably lowers the risk.

    Equals tr_Omega / (n * s1(beta' beta)) with s1 the largest eigenvalue;
    +inf when beta = 0 (any regularization level helps).
    """
    beta = np.asarray(beta, dtype=np.float64)
    if beta.ndim != 2:
        raise ValidationError("beta must be a 2-D matrix")
    if tr_Omega < 0 or n < 1:
        raise ValidationError("tr_Omega must be >= 0 and n >= 1")
    s1 = float(np.linalg.norm(beta, 2)) ** 2
    if s1 == 0.0:
        return math.inf
    return float(tr_Omega) / (n * s1)


@dataclasses.dataclass(frozen=True)
class AsymptoticRegime:
    """Proportional-limit parameters: p/n ratio, noise trace, signal size."""

    gamma: float
    tr_Omega: float
    c_squared: float

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValidationError(f"gamma must be positive, got {self.gamma!r}")
        if self.tr_Omega < 0 or self.c_squared < 0:
            raise ValidationError("tr_Omega and c_squared must be >= 0")


def stieltjes_mp(z, gamma) -> float:
    """Stieltjes transform of the Marchenko-Pastur law at real z < 0.

    Closed form (1 - g - z - sqrt((1 - g - z)^2 - 4 g z)) / (2 g z); the
    square-root argument is clamped at zero when round-off drives it as low
    as -1e-12. Satisfies the fixed point m = 1 / (1 - g - z - g z m).
    """
    z = float(z)
    gamma = float(gamma)
    if not (gamma > 0 and math.isfinite(gamma)):
        raise ValidationError(f"gamma must be positive, got {gamma!r}")
    if not (z < 0 and math.isfinite(z)):
        raise ValidationError(f"z must be a negative real, got {z!r}")
    a = 1.0 - gamma - z
    disc = a * a - 4.0 * gamma * z
    if disc < 0.0:
        if disc < -1e-12:
            raise NumericalError(f"negative discriminant {disc:.3e} at z={z}, gamma={gamma}")
        disc = 0.0
    # rationalized: (a - sqrt(disc)) / (2 g z) without the z -> 0 cancellation
    return 2.0 / (a + math.sqrt(disc))


def limiting_risk_envelope(regime: AsymptoticRegime) -> float:
    """Limit risk of the unregularized subspace estimator as p/n -> gamma.

    tr_Omega * g / (1 - g) below the interpolation threshold;
    c^2 (1 - 1/g) + tr_Omega / (g - 1) above it. Diverges at gamma = 1.
    """
    g = regime.gamma
    if g == 1.0:
        raise ValidationError(
            "the limit risk diverges at gamma = 1; evaluate on either side"
        )
    if g < 1.0:
        return regime.tr_Omega * g / (1.0 - g)
    return regime.c_squared * (1.0 - 1.0 / g) + regime.tr_Omega / (g - 1.0)


def limiting_risk_enhanced(regime: AsymptoticRegime) -> tuple:
    """(limit risk, limit-optimal lambda) of the regularized estimator.

    The optimal level is lam* = tr_Omega * gamma / c^2 and the risk equals
    tr_Omega * gamma * m(-lam*); both are finite for every gamma > 0. When
    c^2 = 0 the signal is null, lam* is +inf, and the risk limit is 0.
    """
    g = regime.gamma
    if regime.c_squared == 0.0:
        return 0.0, math.inf
    lam_star = regime.tr_Omega * g / regime.c_squared
    if lam_star == 0.0:
        # no material noise: ridgeless interpolation is optimal
        return (0.0 if g <= 1.0 else regime.c_squared * (1.0 - 1.0 / g)), 0.0
    return regime.tr_Omega * g * stieltjes_mp(-lam_star, g), lam_star


def risk_curve_rows(gammas, tr_Omega, c_squared) -> list:
    """(gamma, envelope limit, enhanced limit, lambda*) for each gamma.

    The envelope column is +inf at gamma = 1, where that limit diverges.
    """
    rows = []
    for g in np.atleast_1d(np.asarray(gammas, dtype=np.float64)):
        regime = AsymptoticRegime(float(g), float(tr_Omega), float(c_squared))
        if g == 1.0:
            env = math.inf
        else:
            env = limiting_risk_envelope(regime)
        enh, lam_star = limiting_risk_enhanced(regime)
        rows.append((float(g), env, enh, lam_star))
    return rows


def write_risk_curve(rows, path, provenance: str | None = None) -> None:
    """CSV export of :func:`risk_curve_rows` output."""
    with open(path, "w", encoding="utf-8") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        fh.write("gamma,envelope_limit,enhanced_limit,lambda_star\n")
        for g, env, enh, lam_star in rows:
            fh.write(f"{g:.17g},{env:.17g},{enh:.17g},{lam_star:.17g}\n")

"""Gaussian expectations of log-probit terms and the log-Cholesky map.

The inference needs E[h(s)], E[h'(s)], E[h''(s)] for s ~ Normal(m, v) with
h(s) = log Phi(s), plus the same for log(1 - Phi(s)).  Projecting the
covariate inner product reduces every such multivariate expectation to one
dimension, evaluated here by Gauss-Hermite quadrature.  Covariances are
carried as log-Cholesky factors B (strict lower triangle of the Cholesky
factor, log-transformed diagonal) so gradient steps stay inside the SPD cone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from .errors import ValidationError

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def hermgauss(num_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite nodes and weights normalized for Gaussian expectations.

    E[f(s)] for s ~ Normal(m, v) is sum_q weights[q] * f(m + sqrt(2 v) nodes[q]).
    """
    nodes, weights = np.polynomial.hermite.hermgauss(num_points)
    return nodes, weights / np.sqrt(np.pi)


def log_phi_ratio(s):
    """phi(s) / Phi(s), the inverse Mills ratio, stable far into the left tail."""
    s = np.asarray(s, dtype=float)
    return np.exp(-0.5 * s * s - _LOG_SQRT_2PI - log_ndtr(s))


def _h_derivatives(s):
    """h, h', h'' at s for h = log Phi, sharing one log Phi evaluation."""
    h = log_ndtr(s)
    d1 = np.exp(-0.5 * s * s - _LOG_SQRT_2PI - h)
    d2 = -d1 * (s + d1)
    return h, d1, d2


def h_moments(means, variances, quad):
    """E[h], E[h'], E[h''] under Normal(means, variances), h = log Phi.

    ``means`` and ``variances`` may have any common shape; a zero variance
    degenerates to a point evaluation.  The second-derivative expectation is
    estimated as the exact variance-derivative of the quadratured E[h]
    (equal to E[h'']/2 by Stein's identity), which is both more accurate than
    quadrature of h'' itself and exactly consistent with gradients of any
    objective built from these values.
    """
    nodes, weights = quad
    m = np.asarray(means, dtype=float)
    v = np.asarray(variances, dtype=float)
    if (v < 0).any():
        raise ValidationError("variances must be nonnegative")
    root = np.sqrt(2.0 * v)
    s = m[..., None] + root[..., None] * nodes
    h, d1, d2 = _h_derivatives(s)
    e_h = h @ weights
    e_d1 = d1 @ weights
    safe_root = np.where(root > 0, root, 1.0)
    e_d2 = np.where(root > 0, 2.0 * (d1 @ (weights * nodes)) / safe_root,
                    d2 @ weights)
    return e_h, e_d1, e_d2


@dataclass
class GaussExpectations:
    """Quadrature values for one projected Gaussian s = x . phi."""

    e_log_phi: float      # E[log Phi(s)]
    e_log_1m_phi: float   # E[log(1 - Phi(s))]
    e_d1: float           # E[d/ds log Phi(s)]
    e_d1m: float          # E[d/ds log(1 - Phi(s))]
    e_d2: float           # E[d2/ds2 log Phi(s)]
    e_d2m: float          # E[d2/ds2 log(1 - Phi(s))]


def gauss_expectations(x, theta, sigma_factor, quad) -> GaussExpectations:
    """All six log-probit expectations for s = x . phi, phi ~ Normal(theta, LL').

    ``sigma_factor`` is the (lower-triangular) Cholesky factor L, so the
    projected law is Normal(x . theta, ||L' x||^2).  log(1 - Phi(s)) equals
    log Phi(-s), so the complementary moments reuse the same machinery with
    the mean negated and odd derivatives sign-flipped.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    sigma_factor = np.asarray(sigma_factor, dtype=float)
    if x.shape != theta.shape or sigma_factor.shape != (x.size, x.size):
        raise ValidationError("incompatible shapes for projected expectation")
    m = float(x @ theta)
    v = float(((sigma_factor.T @ x) ** 2).sum())
    eh, ed1, ed2 = h_moments(m, v, quad)
    eg, egd1, egd2 = h_moments(-m, v, quad)
    return GaussExpectations(
        e_log_phi=float(eh), e_log_1m_phi=float(eg),
        e_d1=float(ed1), e_d1m=float(-egd1),
        e_d2=float(ed2), e_d2m=float(egd2),
    )


# ---------------------------------------------------------------------------
# Log-Cholesky parameterization of SPD matrices
# ---------------------------------------------------------------------------

def chol_from_log(B: np.ndarray) -> np.ndarray:
    """Lower-triangular factor L from its log-Cholesky form B."""
    B = np.asarray(B, dtype=float)
    L = np.tril(B, -1)
    np.fill_diagonal(L, np.exp(np.diagonal(B)))
    return L


def log_from_chol(L: np.ndarray) -> np.ndarray:
    """Inverse map: strict lower triangle kept, diagonal log-transformed."""
    L = np.asarray(L, dtype=float)
    if (np.diagonal(L) <= 0).any():
        raise ValidationError("Cholesky factor must have positive diagonal")
    B = np.tril(L, -1)
    np.fill_diagonal(B, np.log(np.diagonal(L)))
    return B


def sigma_from_log_chol(B: np.ndarray) -> np.ndarray:
    """SPD matrix LL' from the log-Cholesky form B."""
    L = chol_from_log(B)
    return L @ L.T


def log_chol_from_sigma(sigma: np.ndarray) -> np.ndarray:
    """Log-Cholesky form of an SPD matrix (bijective up to this roundtrip)."""
    return log_from_chol(np.linalg.cholesky(np.asarray(sigma, dtype=float)))


def grad_log_chol(grad_sigma: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Chain-rule gradient through Sigma = L(B) L(B)'.

    For a symmetric upstream gradient G = dF/dSigma the entries are
    2 (G L)_{ij} below the diagonal and 2 L_{ii} (G L)_{ii} on it; entries
    above the diagonal are identically zero.
    """
    L = chol_from_log(B)
    GL = np.asarray(grad_sigma, dtype=float) @ L
    out = 2.0 * np.tril(GL)
    diag = np.diagonal(out) * np.diagonal(L)
    np.fill_diagonal(out, diag)
    return out

"""Specht ratio, reverse Young and inverse Jensen inequalities."""

from __future__ import annotations

import math

import numpy as np


def specht_ratio(h):
    """``S(h) = h**(1/(h-1)) / (e * log(h**(1/(h-1))))`` with ``S(1) = 1``.

    Evaluated as ``exp(r - 1)/r`` with ``r = log(h)/(h-1)`` computed through
    ``log1p`` so the removable singularity at ``h = 1`` is harmless.
    """
    h = np.asarray(h, dtype=float)
    if np.any(~(h > 0)):
        raise ValueError("Specht ratio is defined for h > 0 only")
    x = h - 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(x == 0.0, 1.0, np.log1p(x) / np.where(x == 0.0, 1.0, x))
    out = np.exp(r - 1.0) / r
    return out.item() if out.ndim == 0 else out


def reverse_young_check(a, b, nu, slack: float = 1e-12):
    """True where ``S(a/b) a^(1-nu) b^nu >= (1-nu) a + nu b`` within relative ``slack``."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    nu = np.asarray(nu, float)
    if np.any(~(a > 0)) or np.any(~(b > 0)) or np.any((nu < 0) | (nu > 1)):
        raise ValueError("need a, b > 0 and nu in [0, 1]")
    lhs = specht_ratio(a / b) * a ** (1 - nu) * b**nu
    rhs = (1 - nu) * a + nu * b
    ok = lhs >= rhs * (1 - slack)
    return bool(ok) if np.ndim(ok) == 0 else ok


def jensen_chord(p_exp: float, m: float, M: float) -> tuple[float, float]:
    """Chord of ``x**p`` over ``[m, M]``: ``x**p <= a*x + b``."""
    a = (M**p_exp - m**p_exp) / (M - m)
    b = (M * m**p_exp - m * M**p_exp) / (M - m)
    return a, b


def minimal_alpha(p_exp: float, m: float, M: float, x0: float, n_grid: int = 4001) -> float:
    """Smallest ``alpha`` valid on every two-point law supported on ``{m, M}``.

    For such laws ``E f^p = a E f + b``, so ``alpha`` must dominate
    ``(a*mu + b - beta)/mu**p`` over means ``mu`` in ``[m, M]``.  The search
    grid always contains ``mu = x0``.
    """
    a, b = jensen_chord(p_exp, m, M)
    beta = a * (1 - 1 / p_exp) * x0 + b
    mu = np.union1d(np.linspace(m, M, n_grid), [x0])
    return float(np.max((a * mu + b - beta) / mu**p_exp))


def inverse_jensen_bound(samples, weights, p_exp: float, m: float, M: float, x0: float,
                         alpha: float | None = None):
    """Return ``(lhs, rhs)`` of ``E f^p <= alpha (E f)^p + beta``."""
    f = np.asarray(samples, float)
    w = np.asarray(weights, float)
    if p_exp < 1:
        raise ValueError("p_exp must be >= 1")
    if not m < x0 < M:
        raise ValueError("need m < x0 < M")
    if np.any(f < m) or np.any(f > M):
        raise ValueError("samples must lie in [m, M]")
    if np.any(w < 0) or not math.isclose(float(np.sum(w)), 1.0, rel_tol=1e-12):
        raise ValueError("weights must be a probability vector")
    a, b = jensen_chord(p_exp, m, M)
    beta = a * (1 - 1 / p_exp) * x0 + b
    if alpha is None:
        alpha = minimal_alpha(p_exp, m, M, x0)
    lhs = float(np.sum(w * f**p_exp))
    rhs = float(alpha * np.sum(w * f) ** p_exp + beta)
    return lhs, rhs

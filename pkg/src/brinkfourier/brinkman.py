"""Quasi-static Brinkman momentum balance with no-slip walls.

Solves ``mu*Lap(u) - nu*rho*u = k2*grad(rho*theta)`` componentwise.  The
operator is assembled in its symmetric positive definite form

    A = nu*diag(rho) - mu*Lap_D,    b = -k2*grad(rho*theta),

and inverted matrix-free with Jacobi-preconditioned conjugate gradients.
Testing the equation with ``u`` itself gives the energy identity
``k2 <rho theta, div u> = mu |grad u|^2 + nu <rho u, u>``, which holds to the
linear-solver tolerance because ``div`` is the exact adjoint of ``grad``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .constitutive import ModelParams
from .grid import Grid


class SolverError(RuntimeError):
    """Linear solve failed to reach its tolerance."""

    def __init__(self, msg, residual=float("nan")):
        super().__init__(msg)
        self.residual = residual


class NotSPDError(SolverError):
    """Conjugate gradients met non-positive curvature."""


@dataclass
class CGInfo:
    iterations: int
    rel_residual: float


def pcg(apply: Callable[[np.ndarray], np.ndarray], b: np.ndarray, diag: np.ndarray,
        tol: float, max_iter: int, x0: Optional[np.ndarray] = None):
    """Jacobi-preconditioned conjugate gradients on an SPD operator.

    Stops when ``||b - A x|| <= tol * ||b||`` with the residual recomputed
    from scratch at exit.  Returns ``(x, CGInfo)``.
    """
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), CGInfo(0, 0.0)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - apply(x)
    rel = np.linalg.norm(r) / bnorm
    if rel <= tol:
        return x, CGInfo(0, rel)
    inv_d = 1.0 / diag
    z = inv_d * r
    pdir = z.copy()
    rz = np.vdot(r, z)
    for it in range(1, max_iter + 1):
        Ap = apply(pdir)
        curv = np.vdot(pdir, Ap)
        if not curv > 0:
            raise NotSPDError(f"non-positive curvature {curv:.3e} at iteration {it}", rel)
        alpha = rz / curv
        x += alpha * pdir
        r -= alpha * Ap
        rel = np.linalg.norm(r) / bnorm
        if rel <= tol:
            # guard against drift of the recursively updated residual
            rel = np.linalg.norm(b - apply(x)) / bnorm
            if rel <= tol:
                return x, CGInfo(it, rel)
            # restart from the true residual; keeping the stale direction stalls
            r = b - apply(x)
            z = inv_d * r
            pdir = z.copy()
            rz = np.vdot(r, z)
            continue
        z = inv_d * r
        rz_new = np.vdot(r, z)
        pdir = z + (rz_new / rz) * pdir
        rz = rz_new
    raise SolverError(f"CG did not converge in {max_iter} iterations (rel. residual {rel:.3e})", rel)


@dataclass
class BrinkmanSystem:
    grid: Grid
    rho: np.ndarray
    theta: np.ndarray
    params: ModelParams
    solver_tol: float = 1e-12
    max_iter: int = 20000

    def __post_init__(self):
        self.rho = np.asarray(self.rho, float)
        self.theta = np.asarray(self.theta, float)
        if self.rho.shape != self.grid.shape or self.theta.shape != self.grid.shape:
            raise ValueError("rho/theta do not match the grid")
        if not np.all(self.rho > 0):
            raise ValueError("Brinkman operator needs rho > 0 in every cell")
        if not 0 < self.solver_tol <= 1e-6:
            raise ValueError(f"solver_tol must lie in (0, 1e-6], got {self.solver_tol}")

    def apply(self, w: np.ndarray) -> np.ndarray:
        """Scalar operator ``nu*rho*w - mu*Lap_D(w)``."""
        p = self.params
        return p.nu * self.rho * w - p.mu * self.grid.laplacian_dirichlet_scalar(w)

    def diagonal(self) -> np.ndarray:
        g = self.grid
        d = np.zeros(g.shape)
        for a, (n, h) in enumerate(zip(g.n, g.h)):
            col = np.full(n, 2.0)
            col[0] += 1.0
            col[-1] += 1.0
            shape = [1] * g.dim
            shape[a] = n
            d = d + col.reshape(shape) / h**2
        return self.params.nu * self.rho + self.params.mu * d

    def pressure_forcing(self) -> np.ndarray:
        """``k2*grad(rho*theta)``, the right-hand side of the momentum balance."""
        return self.params.k2 * self.grid.gradient(self.rho * self.theta)


def solve_brinkman(sys: BrinkmanSystem, forcing: Optional[np.ndarray] = None,
                   x0: Optional[np.ndarray] = None, return_info: bool = False):
    """Solve ``mu*Lap(u) - nu*rho*u = f`` with ``f`` the pressure gradient by default.

    ``forcing`` overrides ``f`` (manufactured solutions).  ``x0`` is an
    optional warm start.  Raises :class:`SolverError` on non-convergence.
    """
    f = sys.pressure_forcing() if forcing is None else np.asarray(forcing, float)
    g = sys.grid
    u = g.vzeros()
    diag = sys.diagonal()
    its, rel = 0, 0.0
    for a in range(g.dim):
        guess = None if x0 is None else x0[a]
        u[a], info = pcg(sys.apply, -f[a], diag, sys.solver_tol, sys.max_iter, guess)
        its += info.iterations
        rel = max(rel, info.rel_residual)
    if return_info:
        return u, CGInfo(its, rel)
    return u


def relative_residual(u: np.ndarray, sys: BrinkmanSystem, forcing=None) -> float:
    f = sys.pressure_forcing() if forcing is None else np.asarray(forcing, float)
    fn = np.linalg.norm(f)
    r = np.stack([sys.apply(uc) for uc in u]) + f
    return float(np.linalg.norm(r) / fn) if fn > 0 else float(np.linalg.norm(r))


def dissipation_terms(u: np.ndarray, sys: BrinkmanSystem) -> tuple[float, float]:
    """``(mu*int |grad u|^2, nu*int rho |u|^2)``."""
    g, p = sys.grid, sys.params
    visc = p.mu * g.integrate(g.velocity_gradient_sq(u))
    drag = p.nu * g.integrate(sys.rho * np.sum(u * u, axis=0))
    return visc, drag


def energy_identity_residual(u: np.ndarray, sys: BrinkmanSystem) -> float:
    """Normalized defect of ``k2<rho theta, div u> = mu|grad u|^2 + nu<rho u,u>``."""
    g, p = sys.grid, sys.params
    work = p.k2 * g.inner(sys.rho * sys.theta, g.divergence(u))
    visc, drag = dissipation_terms(u, sys)
    return abs(work - visc - drag) / (1.0 + visc)

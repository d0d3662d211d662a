"""Cell-centered structured grids on intervals and rectangles.

Scalar fields are arrays of shape ``grid.shape``; vector fields carry a
leading component axis, shape ``(dim, *grid.shape)``.  Boundary conditions
are built into the operators:

* scalars (density, temperature) use even reflection, i.e. zero normal
  derivative;
* velocity components use odd reflection, so the ghost value cancels the
  boundary cell and the field vanishes on the wall face.

``divergence`` is defined as the negative transpose of ``gradient`` under the
volume-weighted cell inner product, so discrete integration by parts holds
to roundoff for every pair of fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

MIN_CELLS = 3


def _take(a, axis, sl):
    idx = [slice(None)] * a.ndim
    idx[axis] = sl
    return a[tuple(idx)]


def _pad(a, axis, odd=False):
    first = _take(a, axis, slice(0, 1))
    last = _take(a, axis, slice(-1, None))
    if odd:
        first, last = -first, -last
    return np.concatenate([first, a, last], axis=axis)


def _pad_zero(a, axis):
    z = np.zeros_like(_take(a, axis, slice(0, 1)))
    return np.concatenate([z, a, z], axis=axis)


@dataclass(frozen=True)
class Grid:
    n: tuple[int, ...]
    L: tuple[float, ...]

    def __post_init__(self):
        n = tuple(int(k) for k in np.atleast_1d(self.n))
        L = tuple(float(x) for x in np.atleast_1d(self.L))
        if len(L) == 1 and len(n) > 1:
            L = L * len(n)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "L", L)
        if len(n) not in (1, 2) or len(L) != len(n):
            raise ValueError(f"grid must be 1D or 2D with matching n and L, got n={n}, L={L}")
        if min(n) < MIN_CELLS:
            raise ValueError(f"need at least {MIN_CELLS} cells per axis, got {n}")
        if min(L) <= 0:
            raise ValueError("domain lengths must be positive")

    @classmethod
    def uniform(cls, dim: int, n: int, L: float) -> "Grid":
        return cls((n,) * dim, (L,) * dim)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def vshape(self) -> tuple[int, ...]:
        return (self.dim, *self.n)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.L, self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def volume(self) -> float:
        return float(np.prod(self.L))

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    def axes(self) -> list[np.ndarray]:
        return [(np.arange(n) + 0.5) * h for n, h in zip(self.n, self.h)]

    def coords(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinate arrays, each of shape ``grid.shape``."""
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def vzeros(self) -> np.ndarray:
        return np.zeros(self.vshape)

    # -- integrals -----------------------------------------------------
    def integrate(self, f) -> float:
        return float(np.sum(f) * self.cell_volume)

    def inner(self, a, b) -> float:
        return float(np.sum(np.asarray(a) * np.asarray(b)) * self.cell_volume)

    def norm(self, a) -> float:
        return float(np.sqrt(self.inner(a, a)))

    # -- first-order operators -----------------------------------------
    def gradient(self, f) -> np.ndarray:
        """Centered differences; boundary cells see an even (zero-flux) ghost."""
        f = np.asarray(f, float)
        out = np.empty((self.dim, *f.shape))
        for a, h in enumerate(self.h):
            fp = _pad(f, a)
            out[a] = (_take(fp, a, slice(2, None)) - _take(fp, a, slice(None, -2))) / (2 * h)
        return out

    def divergence(self, v) -> np.ndarray:
        """Exact negative adjoint of :meth:`gradient`."""
        v = np.asarray(v, float)
        out = np.zeros(v.shape[1:])
        for a, h in enumerate(self.h):
            vp = _pad(v[a], a, odd=True)
            out += (_take(vp, a, slice(2, None)) - _take(vp, a, slice(None, -2))) / (2 * h)
        return out

    def face_gradients(self, f, odd=False) -> list[np.ndarray]:
        """Normal differences on all faces (``n+1`` per axis), boundary included.

        With ``odd=False`` boundary faces carry zero (Neumann); with
        ``odd=True`` they see the no-slip ghost ``-f``.
        """
        f = np.asarray(f, float)
        return [np.diff(_pad(f, a, odd=odd), axis=a) / h for a, h in enumerate(self.h)]

    def face_energy_density(self, f, odd=False) -> np.ndarray:
        """Cell density of ``|grad f|^2`` built from face differences.

        Each face's squared gradient is split evenly between its two cells,
        so the cell sum reproduces the face sum exactly.
        """
        out = np.zeros(np.shape(f))
        for a, g in enumerate(self.face_gradients(f, odd=odd)):
            g2 = g * g
            out += 0.5 * (_take(g2, a, slice(None, -1)) + _take(g2, a, slice(1, None)))
        return out

    def velocity_gradient_sq(self, u) -> np.ndarray:
        """``|grad u|^2`` density consistent with :meth:`laplacian_dirichlet`."""
        return sum(self.face_energy_density(uc, odd=True) for uc in np.asarray(u))

    # -- second-order operators ----------------------------------------
    def laplacian_neumann(self, f) -> np.ndarray:
        f = np.asarray(f, float)
        out = np.zeros_like(f)
        for a, h in enumerate(self.h):
            flux = _pad_zero(np.diff(f, axis=a) / h, a)
            out += np.diff(flux, axis=a) / h
        return out

    def laplacian_dirichlet_scalar(self, f) -> np.ndarray:
        f = np.asarray(f, float)
        out = np.zeros_like(f)
        for a, h in enumerate(self.h):
            fp = _pad(f, a, odd=True)
            out += (_take(fp, a, slice(2, None)) - 2 * f + _take(fp, a, slice(None, -2))) / h**2
        return out

    def laplacian_dirichlet(self, v) -> np.ndarray:
        v = np.asarray(v, float)
        return np.stack([self.laplacian_dirichlet_scalar(vc) for vc in v])

    # -- transport ---------------------------------------------------------
    def face_velocity(self, u, axis: int) -> np.ndarray:
        """Average of the two adjacent cells; zero on the wall faces."""
        uc = np.asarray(u[axis], float)
        avg = 0.5 * (_take(uc, axis, slice(None, -1)) + _take(uc, axis, slice(1, None)))
        return _pad_zero(avg, axis)

    def advect_upwind(self, f, u) -> np.ndarray:
        """First-order upwind flux divergence of ``f*u``."""
        f = np.asarray(f, float)
        out = np.zeros_like(f)
        for a, h in enumerate(self.h):
            uf = self.face_velocity(u, a)
            fl = _pad(f, a)
            left = _take(fl, a, slice(None, -1))
            right = _take(fl, a, slice(1, None))
            flux = np.maximum(uf, 0.0) * left + np.minimum(uf, 0.0) * right
            out += np.diff(flux, axis=a) / h
        return out

    def max_transport_rate(self, u) -> float:
        """``max_cells sum_a |u_a|/h_a``; the advective CFL limit is ``1/rate``."""
        u = np.asarray(u, float)
        rate = sum(np.abs(u[a]) / h for a, h in enumerate(self.h))
        return float(np.max(rate))

    # -- sparse assembly -------------------------------------------------
    @cached_property
    def neumann_matrix(self) -> sp.csr_matrix:
        """Sparse matrix of :meth:`laplacian_neumann` in C (row-major) order."""
        mats = []
        for n, h in zip(self.n, self.h):
            main = -2.0 * np.ones(n)
            main[0] = main[-1] = -1.0
            off = np.ones(n - 1)
            mats.append(sp.diags([off, main, off], [-1, 0, 1]) / h**2)
        if self.dim == 1:
            return sp.csr_matrix(mats[0])
        ix, iy = sp.identity(self.n[0]), sp.identity(self.n[1])
        return sp.csr_matrix(sp.kron(mats[0], iy) + sp.kron(ix, mats[1]))

    def restrict(self, f, coarse: "Grid") -> np.ndarray:
        """Cell-average a fine field onto a nested coarser grid."""
        f = np.asarray(f, float)
        ratios = []
        for nf, nc in zip(self.n, coarse.n):
            if nf % nc:
                raise ValueError("grids are not nested")
            ratios.append(nf // nc)
        shape = []
        for nc, r in zip(coarse.n, ratios):
            shape += [nc, r]
        return f.reshape(shape).mean(axis=tuple(range(1, 2 * self.dim, 2)))

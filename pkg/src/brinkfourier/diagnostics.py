"""Run-time monitors for the balance laws and inequalities of the model.

A :class:`Monitor` turns each accepted state into a :class:`DiagnosticsRecord`.
Time integrals use the right-endpoint rectangle rule, which is the quadrature
implied by the backward-Euler treatment of the implicit terms.
:func:`weak_form_residual` tests step ``n`` with the weight of ``t_{n-1}``,
the discrete weak form of the same backward-Euler steps.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import legendre

from . import constitutive as cst
from .brinkman import BrinkmanSystem, energy_identity_residual
from .inequalities import (  # noqa: F401  (re-exported)
    inverse_jensen_bound,
    minimal_alpha,
    reverse_young_check,
    specht_ratio,
)


@dataclass
class DiagnosticsRecord:
    step: int
    t: float
    dt: float
    mass: float
    energy: float
    entropy: float
    entropy_production: float  # cumulative space-time integral of the production lower bound
    rho_min: float
    rho_max: float
    theta_min: float
    theta_max: float
    sigma_min: float  # pointwise minimum of the production density
    brinkman_residual: float
    energy_residual: float  # E - E0 - applied sources: the scheme's own bookkeeping
    barrier_balance_residual: float  # E - E0 - int int (delta/theta^2 - delta*theta^5)
    entropy_residual: float  # S - S0 - int int (regularized entropy production)
    regularization_gap: float  # int int eps*delta*[(rho^G+2) - (G rho^(G-2)+2)] |grad rho|^2
    dissipation_slack: float
    superlevel_fraction: float
    picard_iterations: int
    picard_warning: int
    cum_stiff: float
    cum_regularization: float
    cum_A: float
    cum_B: float
    cum_C: float
    cum_D: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_row(self) -> list:
        return [getattr(self, c) for c in self.columns()]

    def finite(self) -> bool:
        return all(math.isfinite(float(v)) for v in asdict(self).values())


def superlevel_measure(grid, theta, theta_lower: float) -> float:
    """Fraction of the domain where ``theta > theta_lower``."""
    theta = np.asarray(theta)
    return float(np.count_nonzero(theta > theta_lower) / theta.size)


def local_rates(state, p: cst.ModelParams) -> dict:
    """Cellwise integrands used by the monitors."""
    g = state.grid
    rho, theta, u = state.rho, state.theta, state.u
    gu2 = g.velocity_gradient_sq(u)
    u2 = np.sum(u * u, axis=0)
    gt2 = g.face_energy_density(theta)
    gr2 = g.face_energy_density(rho)
    sigma = cst.entropy_production_density(theta, gu2, u2, rho, gt2, p)
    d, eps, G = p.delta, p.eps, p.gamma_exp
    diss428 = (p.mu * gu2 + p.nu * rho * u2
               + (p.kappa / theta + d * theta ** (G - 1)) * gt2) / theta
    reg428 = eps * d * (G * rho ** (G - 2) + 2.0) * gr2
    reg48 = eps * d * (rho**G + 2.0) * gr2
    dsdrho_e = p.k1 * np.log(theta) - p.k2 * (np.log(rho) + 1.0)
    ent428 = (diss428 + d / theta**3 - d * theta**4 + reg428
              + eps * g.laplacian_neumann(rho) * dsdrho_e)
    grho = g.gradient(rho)
    gth = g.gradient(theta)
    return dict(
        sigma=sigma,
        ent428=ent428,
        gap=reg48 - reg428,
        A=diss428 + d / theta**3 + d * theta**5,
        B=reg428 + eps * gr2 / rho,
        C=d / theta**2 + d * theta**4,
        D=eps * np.sum(grho * gth, axis=0) / theta,
        stiff=d / theta**2 - d * theta**5,
    )


class Monitor:
    """Accumulates time integrals and emits one record per accepted step."""

    def __init__(self, initial, p: cst.ModelParams, theta_lower: Optional[float] = None,
                 theta_bar: float = 1.0):
        self.p = p
        self.grid = initial.grid
        self.theta_bar = theta_bar
        self.theta_lower = (0.5 * float(np.median(initial.theta))
                            if theta_lower is None else theta_lower)
        g = self.grid
        self.M0 = g.integrate(initial.rho)
        self.E0 = g.integrate(cst.internal_energy(initial.rho, initial.theta, p))
        self.S0 = g.integrate(cst.entropy(initial.rho, initial.theta, p))
        self.cum = dict(sigma=0.0, ent428=0.0, gap=0.0, A=0.0, B=0.0, C=0.0, D=0.0,
                        stiff=0.0, reg=0.0)
        self.initial = initial

    def _record(self, state, step, dt, brinkman_residual, picard_its, warn):
        g, p = self.grid, self.p
        rates = local_rates(state, p)
        E = g.integrate(cst.internal_energy(state.rho, state.theta, p))
        S = g.integrate(cst.entropy(state.rho, state.theta, p))
        c = self.cum
        tb = self.theta_bar
        lhs = E - tb * S + tb * c["A"] + c["B"]
        rhs = self.E0 - tb * self.S0 + c["C"] + tb * c["D"]
        return DiagnosticsRecord(
            step=step, t=state.t, dt=dt,
            mass=g.integrate(state.rho), energy=E, entropy=S,
            entropy_production=c["sigma"],
            rho_min=float(state.rho.min()), rho_max=float(state.rho.max()),
            theta_min=float(state.theta.min()), theta_max=float(state.theta.max()),
            sigma_min=float(np.min(rates["sigma"])),
            brinkman_residual=brinkman_residual,
            energy_residual=E - self.E0 - c["stiff"] - c["reg"],
            barrier_balance_residual=E - self.E0 - c["stiff"],
            entropy_residual=S - self.S0 - c["ent428"],
            regularization_gap=c["gap"],
            dissipation_slack=rhs - lhs,
            superlevel_fraction=superlevel_measure(g, state.theta, self.theta_lower),
            picard_iterations=picard_its, picard_warning=int(warn),
            cum_stiff=c["stiff"], cum_regularization=c["reg"],
            cum_A=c["A"], cum_B=c["B"], cum_C=c["C"], cum_D=c["D"],
        ), rates

    def initial_record(self) -> DiagnosticsRecord:
        s = self.initial
        sys = BrinkmanSystem(s.grid, s.rho, s.theta, self.p)
        res = energy_identity_residual(s.u, sys)
        return self._record(s, 0, 0.0, res, 0, False)[0]

    def record(self, state, info, step: int) -> DiagnosticsRecord:
        g = self.grid
        rates = local_rates(state, self.p)
        dt = info.dt
        for k in ("sigma", "ent428", "gap", "A", "B", "C", "D"):
            self.cum[k] += dt * g.integrate(rates[k])
        self.cum["stiff"] += info.stiff_source
        self.cum["reg"] += info.regularization_source
        rec, _ = self._record(state, step, dt, info.brinkman_residual,
                              info.picard_iterations, not info.picard_converged)
        return rec


def record(state, prev: Optional[Monitor], p: cst.ModelParams, info=None, step: int = 0):
    """Functional entry point: a record for ``state`` given the running monitor.

    With ``prev=None`` the state is treated as the initial one.
    """
    if prev is None:
        return Monitor(state, p).initial_record()
    return prev.record(state, info, step)


def dissipation_balance_slack(history: Sequence[DiagnosticsRecord], theta_bar: float,
                              p: cst.ModelParams | None = None) -> float:
    """``min_t [RHS(t) - LHS(t)]`` of the time-integrated dissipation balance.

    LHS = int H(t) + theta_bar*A(t) + B(t),  RHS = int H(0) + C(t) + theta_bar*D(t)
    with ``H = e - theta_bar*s`` and the cumulative integrals ``A..D`` stored
    on the records.  A nonnegative value certifies the balance inequality.
    """
    if len(history) < 2:
        raise ValueError("need at least two records")
    r0 = history[0]
    h0 = r0.energy - theta_bar * r0.entropy
    slack = math.inf
    for r in history[1:]:
        lhs = r.energy - theta_bar * r.entropy + theta_bar * r.cum_A + r.cum_B
        rhs = h0 + r.cum_C + theta_bar * r.cum_D
        slack = min(slack, rhs - lhs)
    return slack


# -- weak formulation ---------------------------------------------------------
def _legendre(deg, xi, der=0):
    c = np.zeros(deg + 1)
    c[deg] = 1.0
    if der:
        c = legendre.legder(c, der)
    return legendre.legval(xi, c)


def _multi_indices(dim, size):
    """First ``size`` degree tuples, ordered by total degree (max 3 per axis)."""
    if dim == 1:
        return [(k,) for k in range(min(size, 4))]
    pairs = sorted(((i, j) for i in range(4) for j in range(4)), key=lambda t: (sum(t), t))
    return pairs[:size]


class TestFunction:
    """Tensor-product Legendre polynomial on the box, with optional wall factor.

    ``wall=True`` multiplies each factor by ``1 - xi^2`` so the function
    vanishes on the boundary (velocity test functions); ``shift=True`` uses
    ``1 + P_k`` which is nonnegative (entropy inequality).
    """

    __test__ = False

    def __init__(self, grid, degrees, wall=False, shift=False):
        self.grid = grid
        self.degrees = tuple(degrees)
        self.wall = wall
        self.shift = shift

    def _factor(self, a, x, der):
        L = self.grid.L[a]
        xi = 2 * x / L - 1
        k = self.degrees[a]
        P = [_legendre(k, xi, d) * (2 / L) ** d for d in range(3)]
        if self.shift:
            P[0] = P[0] + 1.0
        if not self.wall:
            return P[der]
        w = [1 - xi**2, -2 * xi * (2 / L), -2 * (2 / L) ** 2 * np.ones_like(xi)]
        if der == 0:
            return w[0] * P[0]
        if der == 1:
            return w[1] * P[0] + w[0] * P[1]
        return w[2] * P[0] + 2 * w[1] * P[1] + w[0] * P[2]

    def value(self):
        X = self.grid.coords()
        out = np.ones(self.grid.shape)
        for a in range(self.grid.dim):
            out = out * self._factor(a, X[a], 0)
        return out

    def partial(self, axis, der=1):
        X = self.grid.coords()
        out = np.ones(self.grid.shape)
        for a in range(self.grid.dim):
            out = out * self._factor(a, X[a], der if a == axis else 0)
        return out

    def gradient(self):
        return np.stack([self.partial(a) for a in range(self.grid.dim)])

    def laplacian(self):
        return sum(self.partial(a, 2) for a in range(self.grid.dim))


@dataclass
class WeakFormResiduals:
    continuity: float
    brinkman: float
    energy: float
    entropy: float  # positive part: violation of the inequality
    entropy_gap: float = 0.0  # |defect|: numerical entropy production seen by the test family

    def as_dict(self):
        return asdict(self)


def weak_form_residual(states: Sequence, p: cst.ModelParams, test_family_size: Optional[int] = None,
                       constant_only: bool = False) -> WeakFormResiduals:
    """Max violation of each weak identity over a family of test functions.

    ``states`` must hold every time level of a run with uniform step,
    starting at ``t = 0``.  Test functions are ``X(x) * (1 - t/T)`` with
    ``X`` a tensor Legendre polynomial of degree <= 3 per axis.  The entropy
    entry is one-sided: only positive defects of the inequality count;
    ``entropy_gap`` keeps the magnitude, which vanishes for smooth limits.
    """
    if len(states) < 2:
        raise ValueError("weak-form residuals need every time level of the run")
    g = states[0].grid
    ts = np.array([s.t for s in states])
    dts = np.diff(ts)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=0):
        raise ValueError("snapshot cadence must be every step (uniform spacing)")
    dt = dts[0]
    T = ts[-1]
    size = test_family_size or 4**g.dim
    idx = [(0,) * g.dim] if constant_only else _multi_indices(g.dim, size)
    psi = 1.0 - ts / T
    dpsi = -1.0 / T

    later = states[1:]
    rho0, theta0 = states[0].rho, states[0].theta
    E0 = cst.internal_energy(rho0, theta0, p)
    s0 = cst.entropy(rho0, theta0, p)

    # Level n enters with the test weight of t_{n-1}: this is the scheme's
    # backward-Euler step tested with psi(t_{n-1}), so summation by parts
    # leaves no time-consistency error and only the spatial one remains.
    cont = 0.0
    ent = 0.0
    ent_gap = 0.0
    for deg in idx:
        X = TestFunction(g, deg)
        Xv, Xg = X.value(), X.gradient()
        acc = g.inner(rho0, Xv)
        for n, s in enumerate(later, start=1):
            transport = dpsi * Xv + psi[n - 1] * np.sum(s.u * Xg, axis=0)
            acc += dt * g.inner(s.rho, transport)
            if p.eps:
                acc -= dt * psi[n - 1] * p.eps * g.inner(g.gradient(s.rho), Xg)
        cont = max(cont, abs(acc))

        Y = TestFunction(g, deg, shift=True)
        Yv, Yg = Y.value(), Y.gradient()
        acc = g.inner(s0, Yv)
        for n, s in enumerate(later, start=1):
            sn = cst.entropy(s.rho, s.theta, p)
            rates = local_rates(s, p)
            acc += dt * g.inner(sn, dpsi * Yv + psi[n - 1] * np.sum(s.u * Yg, axis=0))
            acc -= dt * psi[n - 1] * p.kappa * g.inner(g.gradient(s.theta) / s.theta, Yg)
            acc += dt * psi[n - 1] * g.inner(rates["sigma"], Yv)
        ent = max(ent, acc)
        ent_gap = max(ent_gap, abs(acc))

    brink = 0.0
    bidx = [(0,) * g.dim] if constant_only else idx
    for deg in bidx:
        phi = TestFunction(g, deg, wall=True)
        pv, lap = phi.value(), phi.laplacian()
        # pressure term against the discrete derivative div_h(phi e_a), the adjoint of
        # the gradient: a constant pressure then leaves no quadrature residue
        dphi = []
        for a in range(g.dim):
            comp = g.vzeros()
            comp[a] = pv
            dphi.append(g.divergence(comp))
        for s in states:
            for a in range(g.dim):
                r = (p.k2 * g.inner(s.rho * s.theta, dphi[a])
                     + p.mu * g.inner(s.u[a], lap)
                     - p.nu * g.inner(s.rho * s.u[a], pv))
                brink = max(brink, abs(r))

    acc = g.integrate(E0)
    for n, s in enumerate(later, start=1):
        En = cst.internal_energy(s.rho, s.theta, p)
        src = local_rates(s, p)["stiff"]
        if p.eps and p.delta:
            src = src + p.eps * p.delta * (s.rho**p.gamma_exp + 2) * g.face_energy_density(s.rho)
        acc += dt * (dpsi * g.integrate(En) + psi[n - 1] * g.integrate(src))
    energy = abs(acc)
    return WeakFormResiduals(cont, brink, energy, max(ent, 0.0), ent_gap)

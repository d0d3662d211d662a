"""Time integration of the regularized Brinkman-Fourier system.

One step advances density, internal energy ``E = k1*rho*theta`` and the
quasi-static velocity.  Within a step a Picard loop alternates

1. velocity from the Brinkman solve on the current iterate ``(rho*, theta*)``;
2. density: explicit upwind transport, implicit artificial viscosity;
3. energy: explicit upwind transport and sources, implicit heat conduction,
   then a per-cell implicit solve for the stiff ``delta/theta^2 - delta*theta^5``
   pair,

until successive iterates agree.  The work and dissipation sources are
evaluated on the same ``(rho*, theta*)`` the velocity was solved with, so
their global sum vanishes up to the linear-solver tolerance and the discrete
energy balance telescopes.

Positivity is never enforced by clamping: a cell at or below the floor
aborts the run with a report.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Protocol

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import diagnostics as dg
from .brinkman import BrinkmanSystem, SolverError, energy_identity_residual, solve_brinkman
from .constitutive import ModelParams
from .grid import Grid

log = logging.getLogger(__name__)


class PositivityError(RuntimeError):
    """Density or temperature reached the positivity floor."""

    def __init__(self, field_name, index, value, t=None, step=None):
        self.field_name = field_name
        self.index = tuple(int(i) for i in np.atleast_1d(index))
        self.value = float(value)
        self.t = t
        self.step = step
        super().__init__(
            f"positivity lost in {field_name} at cell {self.index}: value {self.value:.6g}"
            + (f" (step {step}, t={t:.6g})" if step is not None else "")
        )


class CFLError(ValueError):
    """Requested step exceeds the advective CFL limit."""


@dataclass(frozen=True)
class State:
    grid: Grid
    rho: np.ndarray
    theta: np.ndarray
    u: np.ndarray
    t: float = 0.0

    def check(self, theta_floor: float = 0.0):
        for name, f, floor in (("rho", self.rho, 0.0), ("theta", self.theta, theta_floor)):
            if not np.all(np.isfinite(f)):
                raise FloatingPointError(f"non-finite values in {name}")
            bad = f <= floor
            if np.any(bad):
                idx = np.unravel_index(np.argmin(f), f.shape)
                raise PositivityError(name, idx, f[idx], self.t)
        return self


@dataclass(frozen=True)
class TimeStepConfig:
    dt: Optional[float] = None  # None: largest uniform step within the CFL limit
    t_end: Optional[float] = 1.0
    max_steps: Optional[int] = None
    cfl_safety: float = 0.5
    picard_tol: float = 1e-10
    picard_max: int = 30
    theta_floor: float = 1e-10
    solver_tol: float = 1e-12
    max_iter: int = 20000
    max_halvings: int = 12  # step retries after a CFL violation inside the Picard loop

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.t_end is None and self.max_steps is None:
            raise ValueError("need t_end or max_steps")
        if self.t_end is not None and not self.t_end > 0:
            raise ValueError("t_end must be > 0")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if not self.picard_tol > 0 or self.picard_max < 1:
            raise ValueError("picard_tol must be > 0 and picard_max >= 1")
        if not 0 < self.solver_tol <= 1e-6:
            raise ValueError("solver_tol must lie in (0, 1e-6]")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be >= 0")


class Forcing(Protocol):
    """Optional manufactured sources, evaluated at the new time level."""

    def density(self, t: float) -> Optional[np.ndarray]: ...
    def energy(self, t: float) -> Optional[np.ndarray]: ...
    def momentum(self, t: float) -> Optional[np.ndarray]: ...


@dataclass
class StepInfo:
    dt: float
    picard_iterations: int = 0
    picard_converged: bool = True
    picard_change: float = 0.0
    brinkman_residual: float = 0.0
    cg_iterations: int = 0
    stiff_source: float = 0.0  # integral over the step of delta/theta^2 - delta*theta^5
    regularization_source: float = 0.0  # integral of eps*delta*(rho^G+2)|grad rho|^2


@dataclass
class EnergyStep:
    theta: np.ndarray
    theta_pre: np.ndarray  # after transport/diffusion, before the stiff pair
    stiff_source: float
    regularization_source: float


# -- velocity --------------------------------------------------------------
def brinkman_velocity(grid, rho, theta, p: ModelParams, cfg: TimeStepConfig,
                      momentum=None, x0=None, return_info=False):
    sys = BrinkmanSystem(grid, rho, theta, p, cfg.solver_tol, cfg.max_iter)
    forcing = None
    if momentum is not None:
        forcing = sys.pressure_forcing() + momentum
    return solve_brinkman(sys, forcing=forcing, x0=x0, return_info=return_info)


def equilibrate(grid, rho, theta, p, cfg, t=0.0, forcing: Optional[Forcing] = None) -> State:
    """Build a :class:`State` whose velocity is the Brinkman response to ``(rho, theta)``."""
    rho = np.asarray(rho, float)
    theta = np.asarray(theta, float)
    State(grid, rho, theta, grid.vzeros(), t).check()
    mom = forcing.momentum(t) if forcing is not None else None
    u = brinkman_velocity(grid, rho, theta, p, cfg, momentum=mom)
    return State(grid, rho, theta, u, t)


def cfl_limit(state: State, cfg: TimeStepConfig) -> float:
    rate = state.grid.max_transport_rate(state.u)
    return math.inf if rate == 0 else cfg.cfl_safety / rate


def check_cfl(state: State, dt: float, cfg: TimeStepConfig):
    lim = cfl_limit(state, cfg)
    if dt > lim * (1 + 1e-12):
        raise CFLError(f"dt={dt:.6g} exceeds the advective limit {lim:.6g} "
                       f"(cfl_safety={cfg.cfl_safety})")


# -- sub-steps -------------------------------------------------------------
def _implicit_neumann(grid: Grid, diag: np.ndarray, coef: float, rhs: np.ndarray) -> np.ndarray:
    """Solve ``diag*x - coef*Lap_N(x) = rhs``.

    Solved as a correction to the pointwise solution ``rhs/diag`` so that
    spatially constant data are reproduced bit for bit.
    """
    x0 = rhs / diag
    if coef == 0.0:
        return x0
    A = sp.diags(diag.ravel()) - coef * grid.neumann_matrix
    b = coef * grid.laplacian_neumann(x0)
    if not np.any(b):
        return x0
    return x0 + spla.spsolve(sp.csc_matrix(A), b.ravel()).reshape(grid.shape)


def step_density(state: State, dt: float, p: ModelParams, source=None) -> np.ndarray:
    """Upwind transport, backward-Euler artificial viscosity."""
    g = state.grid
    rhs = state.rho - dt * g.advect_upwind(state.rho, state.u)
    if source is not None:
        rhs = rhs + dt * source
    rho = _implicit_neumann(g, np.ones(g.shape), dt * p.eps, rhs)
    bad = rho <= 0
    if np.any(bad) or not np.all(np.isfinite(rho)):
        idx = np.unravel_index(np.argmin(rho), rho.shape)
        raise PositivityError("rho", idx, rho[idx], state.t + dt)
    return rho


def solve_stiff_pair(base: np.ndarray, c: np.ndarray, tol: float = 1e-15, max_iter: int = 200):
    """Positive root of ``c*x - (x**-2 - x**5) = c*base`` per cell (``c > 0``).

    The left side is strictly increasing in ``x > 0`` and sweeps all reals,
    so the root exists and is unique for any ``base``, including negative
    values.  Safeguarded Newton on a bracket.
    """
    base = np.asarray(base, float)
    c = np.broadcast_to(np.asarray(c, float), base.shape)

    def g(x):
        return c * (x - base) - x**-2.0 + x**5

    hi = np.maximum(base, 1.0)
    # g(1) < 0 when base > 1 and g(x) < 0 for x <= 1 once x**-2 dominates; starting
    # no lower than 0.5 keeps x**-2 finite for tiny positive base
    lo = np.where(base > 1.0, 1.0, np.maximum(base, 0.5))
    for _ in range(2000):
        neg = g(lo) <= 0
        if np.all(neg):
            break
        lo = np.where(neg, lo, 0.5 * lo)
    x = np.clip(np.where(base > 0, base, lo), lo, hi)
    for _ in range(max_iter):
        gx = g(x)
        lo = np.where(gx <= 0, x, lo)
        hi = np.where(gx > 0, x, hi)
        dg_ = c + 2.0 * x**-3.0 + 5.0 * x**4
        xn = x - gx / dg_
        outside = (xn <= lo) | (xn >= hi)
        xn = np.where(outside, 0.5 * (lo + hi), xn)
        done = np.abs(xn - x) <= tol * np.abs(x)
        x = xn
        if np.all(done):
            break
    return x


def step_energy_detailed(state: State, rho_new: np.ndarray, dt: float, p: ModelParams,
                         rho_u=None, theta_u=None, source=None,
                         theta_floor: float = 1e-10) -> EnergyStep:
    g = state.grid
    rho_u = state.rho if rho_u is None else rho_u
    theta_u = state.theta if theta_u is None else theta_u
    u = state.u
    E = p.k1 * state.rho * state.theta
    visc = p.mu * g.velocity_gradient_sq(u)
    drag = p.nu * rho_u * np.sum(u * u, axis=0)
    work = -p.k2 * rho_u * theta_u * g.divergence(u)
    src = visc + drag + work
    reg = 0.0
    if p.eps > 0 and p.delta > 0:
        reg_density = p.eps * p.delta * (rho_u**p.gamma_exp + 2.0) * g.face_energy_density(rho_u)
        src = src + reg_density
        reg = dt * g.integrate(reg_density)
    if source is not None:
        src = src + source
    rhs = E - dt * g.advect_upwind(E, u) + dt * src
    cdiag = p.k1 * rho_new
    theta_pre = _implicit_neumann(g, cdiag, dt * p.kappa, rhs)
    if p.delta > 0:
        theta = solve_stiff_pair(theta_pre, cdiag / (dt * p.delta))
        stiff = g.integrate(cdiag * (theta - theta_pre))
    else:
        theta = theta_pre
        stiff = 0.0
    if not np.all(np.isfinite(theta)):
        raise FloatingPointError("non-finite temperature")
    bad = theta <= theta_floor
    if np.any(bad):
        idx = np.unravel_index(np.argmin(theta), theta.shape)
        raise PositivityError("theta", idx, theta[idx], state.t + dt)
    return EnergyStep(theta, theta_pre, stiff, reg)


def step_energy(state: State, rho_new: np.ndarray, dt: float, p: ModelParams, **kw) -> np.ndarray:
    """New temperature from the conserved internal-energy update."""
    return step_energy_detailed(state, rho_new, dt, p, **kw).theta


def step_coupled(state: State, dt: float, cfg: TimeStepConfig, p: ModelParams,
                 forcing: Optional[Forcing] = None) -> tuple[State, StepInfo]:
    """Advance one step with the Picard fixed-point loop.

    Exhausting ``picard_max`` is not an error: the last iterate is accepted
    and the step is flagged in the returned :class:`StepInfo`.
    """
    check_cfl(state, dt, cfg)
    g = state.grid
    t_new = state.t + dt
    src_rho = forcing.density(t_new) if forcing is not None else None
    src_E = forcing.energy(t_new) if forcing is not None else None
    mom = forcing.momentum(t_new) if forcing is not None else None

    info = StepInfo(dt=dt, picard_converged=False)
    rho_k, theta_k, u = state.rho, state.theta, state.u
    scale = g.norm(state.rho) + g.norm(state.theta)
    for it in range(1, cfg.picard_max + 1):
        u, cg = brinkman_velocity(g, rho_k, theta_k, p, cfg, momentum=mom, x0=u,
                                  return_info=True)
        info.cg_iterations += cg.iterations
        frozen = replace(state, u=u)
        check_cfl(frozen, dt, cfg)
        rho_new = step_density(frozen, dt, p, source=src_rho)
        es = step_energy_detailed(frozen, rho_new, dt, p, rho_u=rho_k, theta_u=theta_k,
                                  source=src_E, theta_floor=cfg.theta_floor)
        change = math.sqrt(g.norm(rho_new - rho_k) ** 2 + g.norm(es.theta - theta_k) ** 2) / scale
        rho_k, theta_k = rho_new, es.theta
        info.picard_iterations = it
        info.picard_change = change
        info.stiff_source = es.stiff_source
        info.regularization_source = es.regularization_source
        if change <= cfg.picard_tol:
            info.picard_converged = True
            break
    if not info.picard_converged:
        log.warning("Picard loop hit cap %d at t=%.6g (change %.3e)", cfg.picard_max, t_new,
                    info.picard_change)
    u_new, cg = brinkman_velocity(g, rho_k, theta_k, p, cfg, momentum=mom, x0=u, return_info=True)
    info.cg_iterations += cg.iterations
    if mom is None:
        sys = BrinkmanSystem(g, rho_k, theta_k, p, cfg.solver_tol, cfg.max_iter)
        info.brinkman_residual = energy_identity_residual(u_new, sys)
    return State(g, rho_k, theta_k, u_new, t_new), info


# -- driver ----------------------------------------------------------------
class Sink(Protocol):
    def on_record(self, rec: "dg.DiagnosticsRecord") -> None: ...
    def on_snapshot(self, step: int, state: State) -> None: ...


@dataclass
class RunSummary:
    cause: str  # completed | positivity-abort | solver-failure
    steps: int
    t_final: float
    dt: float
    final_state: State
    records: list = field(default_factory=list)
    states: list = field(default_factory=list)
    message: str = ""
    abort_step: Optional[int] = None
    abort_cell: Optional[tuple] = None
    picard_warnings: int = 0
    dt_halvings: int = 0

    @property
    def completed(self) -> bool:
        return self.cause == "completed"


def plan_steps(initial: State, cfg: TimeStepConfig) -> tuple[float, Optional[int]]:
    """Uniform step size and step count for a run."""
    dt = cfg.dt
    if cfg.t_end is not None:
        if dt is None:
            lim = cfl_limit(initial, cfg)
            dt = cfg.t_end / 100 if math.isinf(lim) else min(lim, cfg.t_end)
        nsteps = max(1, math.ceil(cfg.t_end / dt - 1e-9))
        dt = cfg.t_end / nsteps
        if cfg.max_steps is not None:
            nsteps = min(nsteps, cfg.max_steps)
        return dt, nsteps
    if dt is None:
        lim = cfl_limit(initial, cfg)
        if math.isinf(lim):
            raise ValueError("automatic dt needs nonzero initial velocity or a finite t_end")
        dt = lim
    return dt, cfg.max_steps


def _step_with_retry(state, dt, cfg, p, forcing):
    """One coupled step, halving ``dt`` while the iterate velocity breaks the CFL limit.

    Positivity failures are never retried.
    """
    h = dt
    for k in range(cfg.max_halvings + 1):
        try:
            new, info = step_coupled(state, h, cfg, p, forcing=forcing)
            return new, info, k
        except CFLError:
            if k == cfg.max_halvings:
                raise
            h *= 0.5
    raise AssertionError("unreachable")


def run(initial: State, cfg: TimeStepConfig, p: ModelParams, sinks=(), *,
        snapshot_every: int = 0, keep_states: bool = False,
        forcing: Optional[Forcing] = None, theta_lower: Optional[float] = None,
        theta_bar: float = 1.0,
        callback: Optional[Callable[[State, StepInfo], None]] = None) -> RunSummary:
    """Iterate :func:`step_coupled` to the horizon or the first abort.

    ``initial`` must already carry its Brinkman velocity (see
    :func:`equilibrate`).  Every step emits a diagnostics record to each
    sink; snapshots go out every ``snapshot_every`` steps (0 disables),
    always including the initial and final states.
    """
    initial.check(cfg.theta_floor)
    dt, nsteps = plan_steps(initial, cfg)
    monitor = dg.Monitor(initial, p, theta_lower=theta_lower, theta_bar=theta_bar)
    rec0 = monitor.initial_record()
    summary = RunSummary("completed", 0, initial.t, dt, initial, records=[rec0])
    if keep_states:
        summary.states.append(initial)
    for s in sinks:
        s.on_record(rec0)
        if snapshot_every:
            s.on_snapshot(0, initial)

    state = initial
    step = 0
    t_stop = None if nsteps is None or cfg.t_end is None else initial.t + nsteps * dt
    while True:
        if t_stop is None:
            if nsteps is not None and step >= nsteps:
                break
            h = dt
        else:
            remaining = t_stop - state.t
            if remaining <= 1e-12 * max(1.0, abs(t_stop)) or (cfg.max_steps is not None
                                                              and step >= cfg.max_steps):
                break
            # snap to the horizon so accumulated rounding cannot add a sliver step
            h = remaining if remaining < dt * (1 + 1e-9) else dt
        try:
            new, info, halvings = _step_with_retry(state, h, cfg, p, forcing)
            summary.dt_halvings += halvings
        except PositivityError as exc:
            exc.step = step + 1
            summary.cause = "positivity-abort"
            summary.message = str(exc)
            summary.abort_step = step + 1
            summary.abort_cell = exc.index
            log.info("run aborted: %s", exc)
            break
        except (SolverError, CFLError, FloatingPointError) as exc:
            summary.cause = "solver-failure"
            summary.message = str(exc)
            summary.abort_step = step + 1
            log.info("run failed: %s", exc)
            break
        step += 1
        state = new
        rec = monitor.record(state, info, step)
        if not rec.finite():
            summary.cause = "solver-failure"
            summary.message = "non-finite diagnostics"
            summary.abort_step = step
            break
        summary.records.append(rec)
        summary.picard_warnings += int(not info.picard_converged)
        if keep_states:
            summary.states.append(state)
        for s in sinks:
            s.on_record(rec)
            if snapshot_every and step % snapshot_every == 0:
                s.on_snapshot(step, state)
        if callback is not None:
            callback(state, info)
    summary.steps = step
    summary.t_final = state.t
    if snapshot_every and step % snapshot_every != 0:
        for s in sinks:
            s.on_snapshot(step, state)
    summary.final_state = state
    return summary

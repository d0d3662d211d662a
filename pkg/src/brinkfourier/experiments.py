"""Scenario builders and scripted studies.

* limit sweeps over mesh, artificial viscosity, barrier strength and step
  size, reported as distance to the finest member run;
* manufactured-solution verification with analytic forcing;
* an empirical local-existence probe over a family of initial data.

Member runs are independent and may run in a thread pool; results are always
assembled in the order of the requested values, so tables do not depend on
scheduling.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import csvio
from . import evolution as ev
from .constitutive import ModelParams
from .grid import MIN_CELLS, Grid

TWO_PI = 2.0 * math.pi


# -- initial data ----------------------------------------------------------
@dataclass(frozen=True)
class FourierMode:
    k: tuple[int, ...]
    cos: float = 0.0
    sin: float = 0.0


@dataclass(frozen=True)
class FourierField:
    """``offset + sum a*cos(2 pi k.x/L) + b*sin(2 pi k.x/L)``."""

    offset: float
    modes: tuple[FourierMode, ...] = ()

    def __call__(self, grid: Grid) -> np.ndarray:
        X = grid.coords()
        out = np.full(grid.shape, float(self.offset))
        for m in self.modes:
            if len(m.k) != grid.dim:
                raise ValueError(f"mode {m.k} does not match a {grid.dim}D grid")
            phase = sum(TWO_PI * k * x / L for k, x, L in zip(m.k, X, grid.L))
            out = out + m.cos * np.cos(phase) + m.sin * np.sin(phase)
        return out

    def sampled_min(self, grid: Grid, factor: int = 8) -> float:
        fine = Grid(tuple(n * factor for n in grid.n), grid.L)
        return float(self(fine).min())


@dataclass(frozen=True)
class FourierInitial:
    rho: FourierField
    theta: FourierField

    def __call__(self, grid: Grid):
        return self.rho(grid), self.theta(grid)

    def validation_errors(self, grid: Grid, factor: int = 8) -> list[str]:
        errs = []
        for name, f in (("rho", self.rho), ("theta", self.theta)):
            m = f.sampled_min(grid, factor)
            if not m > 0:
                errs.append(f"initial.{name}: not positive (minimum {m:.6g} sampled at "
                            f"{factor}x resolution)")
        return errs


def _bump(grid: Grid, width: float) -> np.ndarray:
    X = grid.coords()
    r2 = sum(((x - 0.5 * L) / width) ** 2 for x, L in zip(X, grid.L))
    return np.exp(-r2)


@dataclass(frozen=True)
class ColdSpot:
    """Temperature dip ``1 - depth*bump`` with an optional density bump."""

    depth: float = 0.95
    width: float = 0.3
    rho_amp: float = 0.0

    def __call__(self, grid: Grid):
        b = _bump(grid, self.width)
        return 1.0 + self.rho_amp * b, 1.0 - self.depth * b


@dataclass(frozen=True)
class DenseColdGas:
    """Uniformly cold gas with a density bump of the given amplitude.

    The bump is over-pressured, expands and cools below the ambient
    temperature; the cooling grows with the amplitude.
    """

    amplitude: float = 16.0
    theta_c: float = 0.05
    width: float = 0.5

    def __call__(self, grid: Grid):
        b = _bump(grid, self.width)
        return 1.0 + self.amplitude * b, np.full(grid.shape, self.theta_c)


def default_initial(dim: int = 1) -> FourierInitial:
    k = (1,) + (0,) * (dim - 1)
    return FourierInitial(FourierField(1.0, (FourierMode(k, sin=0.3),)),
                          FourierField(1.0, (FourierMode(k, cos=0.2),)))


def equilibrium_initial() -> FourierInitial:
    return FourierInitial(FourierField(1.0), FourierField(1.0))


PRESETS: dict[str, Callable[[int], Callable]] = {
    "default": default_initial,
    "equilibrium": lambda dim: equilibrium_initial(),
    "cold-spot": lambda dim: ColdSpot(),
    "deep-cold-spot": lambda dim: DenseColdGas(),
}


# -- scenarios -------------------------------------------------------------
@dataclass(frozen=True)
class Scenario:
    params: ModelParams = field(default_factory=ModelParams)
    n: tuple[int, ...] = (128,)
    L: tuple[float, ...] = (TWO_PI,)
    initial: Callable = field(default_factory=default_initial)
    time: ev.TimeStepConfig = field(default_factory=lambda: ev.TimeStepConfig(t_end=1.0))

    def grid(self) -> Grid:
        return Grid(self.n, self.L)

    def initial_state(self, forcing: Optional[ev.Forcing] = None) -> ev.State:
        g = self.grid()
        rho, theta = self.initial(g)
        return ev.equilibrate(g, rho, theta, self.params, self.time, forcing=forcing)

    def run(self, **kw) -> ev.RunSummary:
        forcing = kw.get("forcing")
        return ev.run(self.initial_state(forcing), self.time, self.params, **kw)


def default_scenario(n: int = 128, dim: int = 1, t_end: float = 1.0, **params) -> Scenario:
    """Smooth mean-one data on ``[0, 2 pi]``, all constants one except ``k1 = 1.5``."""
    return Scenario(ModelParams(**params), (n,) * dim, (TWO_PI,) * dim, default_initial(dim),
                    ev.TimeStepConfig(t_end=t_end))


def equilibrium_scenario(n: int = 128, dim: int = 1, t_end: float = 1.0, **params) -> Scenario:
    return replace(default_scenario(n, dim, t_end, **params), initial=equilibrium_initial())


def cold_spot_scenario(delta: float = 0.0, n: int = 128, t_end: float = 2.0,
                       spot: ColdSpot = ColdSpot(), **params) -> Scenario:
    return Scenario(ModelParams(delta=delta, **params), (n,), (TWO_PI,), spot,
                    ev.TimeStepConfig(t_end=t_end))


def deep_cold_spot_scenario(delta: float = 0.0, amplitude: float = 16.0, n: int = 64,
                            t_end: float = 20.0, theta_floor: float = 0.04,
                            **params) -> Scenario:
    """Expansion-cooling data with a raised positivity floor.

    ``theta_floor`` acts as the lower temperature bound the run must respect;
    the default ``0.04`` is 80% of the ambient temperature.
    """
    params.setdefault("kappa", 0.01)
    return Scenario(ModelParams(delta=delta, **params), (n,), (TWO_PI,),
                    DenseColdGas(amplitude=amplitude),
                    ev.TimeStepConfig(t_end=t_end, theta_floor=theta_floor))


# -- member-run invariants ---------------------------------------------------
def check_invariants(summary: ev.RunSummary, p: ModelParams,
                     cfg: ev.TimeStepConfig) -> dict[str, bool]:
    """Diagnostic invariants every member run is expected to satisfy."""
    recs = summary.records
    r0 = recs[0]
    steps = max(len(recs) - 1, 1)
    out = {"completed": summary.completed}
    out["mass"] = all(abs(r.mass - r0.mass) <= 1e-12 * abs(r0.mass) for r in recs)
    e_tol = 100 * cfg.solver_tol * steps * max(1.0, abs(r0.energy))
    out["energy"] = all(abs(r.energy_residual) <= e_tol for r in recs)
    out["brinkman"] = all(r.brinkman_residual <= max(10 * cfg.solver_tol, 1e-10) for r in recs)
    out["production"] = all(r.sigma_min >= 0 for r in recs)
    if p.eps == 0 and p.delta == 0:
        out["entropy"] = all(b.entropy - a.entropy >= -1e-8 * abs(b.entropy)
                             for a, b in zip(recs, recs[1:]))
    return out


# -- sweeps ------------------------------------------------------------------
AXES = ("mesh", "eps", "delta", "dt")
NORMS = ("L2", "Linf")


@dataclass(frozen=True)
class SweepSpec:
    """Axis values run from coarse/large to fine/small.

    Mesh values are relative spacings ``1/n``, so they are negative powers
    of two (``0.03125`` is 32 cells per axis).
    """

    axis: str
    values: tuple[float, ...]
    base: Scenario = field(default_factory=default_scenario)
    norm: str = "L2"

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        errs = self.validation_errors()
        if errs:
            raise ValueError("; ".join(errs))

    def validation_errors(self) -> list[str]:
        errs = []
        v = self.values
        if self.axis not in AXES:
            errs.append(f"axis must be one of {AXES}, got {self.axis!r}")
        if self.norm not in NORMS:
            errs.append(f"norm must be one of {NORMS}, got {self.norm!r}")
        if len(v) < 3:
            errs.append(f"need at least 3 values, got {len(v)}")
        if not all(x > 0 for x in v):
            errs.append("values must be positive")
        if not all(a > b for a, b in zip(v, v[1:])):
            errs.append("values must be strictly decreasing")
        if self.axis == "mesh":
            for x in v:
                k = -math.log2(x) if x > 0 else math.nan
                if not (math.isfinite(k) and k == round(k) and 2 ** round(k) >= MIN_CELLS):
                    errs.append(f"mesh value {x} is not 1/2^k with 2^k >= {MIN_CELLS}")
        return errs

    def scenario_for(self, value: float) -> Scenario:
        b = self.base
        if self.axis == "mesh":
            n = int(round(1.0 / value))
            return replace(b, n=(n,) * len(b.n))
        if self.axis == "eps":
            return replace(b, params=b.params.with_(eps=value))
        if self.axis == "delta":
            return replace(b, params=b.params.with_(delta=value))
        return replace(b, time=replace(b.time, dt=value))


@dataclass
class SweepRow:
    value: float
    distance: float
    dist_rho: float
    dist_theta: float
    dist_u: float
    order: float
    cause: str
    steps: int
    t_final: float
    theta_min: float
    invariants_ok: bool
    flagged: bool

    @classmethod
    def columns(cls) -> list[str]:
        return list(cls.__dataclass_fields__)

    def as_row(self) -> list:
        return [getattr(self, c) for c in self.columns()]


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow]
    runs: list[ev.RunSummary] = field(default_factory=list, repr=False)

    @property
    def distances(self) -> np.ndarray:
        return np.array([r.distance for r in self.rows])

    @property
    def strictly_decreasing(self) -> bool:
        d = self.distances
        return bool(np.all(np.isfinite(d)) and np.all(d[:-1] > d[1:]))

    @property
    def all_zero(self) -> bool:
        return bool(np.all(self.distances == 0.0))

    @property
    def all_ok(self) -> bool:
        return all(r.invariants_ok and not r.flagged for r in self.rows)


def _theta_min(r: ev.RunSummary) -> float:
    """Minimum temperature over the accepted steps (the initial level if none)."""
    recs = r.records[1:] or r.records
    return min(q.theta_min for q in recs)


def _field_distance(a: ev.State, ref: ev.State, norm: str) -> tuple[float, float, float]:
    g = a.grid
    if ref.grid != g:
        ref_f = [ref.grid.restrict(ref.rho, g), ref.grid.restrict(ref.theta, g),
                 np.stack([ref.grid.restrict(c, g) for c in ref.u])]
    else:
        ref_f = [ref.rho, ref.theta, ref.u]
    diffs = [a.rho - ref_f[0], a.theta - ref_f[1], a.u - ref_f[2]]
    if norm == "L2":
        return tuple(g.norm(d) if d.ndim == g.dim else math.sqrt(sum(g.norm(c) ** 2 for c in d))
                     for d in diffs)
    return tuple(float(np.max(np.abs(d))) for d in diffs)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_sweep(spec: SweepSpec, threads: int = 1) -> SweepResult:
    """Run the base scenario at every axis value and compare with the last one."""
    scenarios = [spec.scenario_for(v) for v in spec.values]
    runs = _map(lambda s: s.run(), scenarios, threads)
    ref = runs[-1]
    rows = []
    for v, sc, r in zip(spec.values, scenarios, runs):
        inv = check_invariants(r, sc.params, sc.time)
        flagged = not (r.completed and ref.completed)
        if flagged:
            d = (math.nan,) * 3
        else:
            d = _field_distance(r.final_state, ref.final_state, spec.norm)
        total = math.sqrt(sum(x * x for x in d)) if spec.norm == "L2" else max(d)
        rows.append(SweepRow(v, total, *d, math.nan, r.cause, r.steps, r.t_final,
                             _theta_min(r), all(inv.values()), flagged))
    # observed order between successive non-reference rows
    for a, b in zip(rows[:-2], rows[1:-1]):
        if a.distance > 0 and b.distance > 0:
            a.order = math.log(a.distance / b.distance) / math.log(a.value / b.value)
    return SweepResult(spec, rows, runs)


def write_sweep(result: SweepResult, out_dir: str | os.PathLike,
                timestamp: Optional[str] = None) -> tuple[str, str]:
    """Write ``<axis>_<timestamp>.csv`` and its ``_summary.csv`` companion."""
    stamp = timestamp or time.strftime("%Y%m%dT%H%M%S")
    base = os.path.join(os.fspath(out_dir), f"{result.spec.axis}_{stamp}")
    table = base + ".csv"
    summary = base + "_summary.csv"
    csvio.write_table(table, SweepRow.columns(), [r.as_row() for r in result.rows])
    csvio.write_key_values(summary, [
        ("axis", result.spec.axis), ("norm", result.spec.norm),
        ("members", len(result.rows)),
        ("strictly_decreasing", result.strictly_decreasing),
        ("all_zero", result.all_zero),
        ("invariants_ok", result.all_ok),
    ])
    return table, summary


# -- manufactured solutions --------------------------------------------------
@dataclass(frozen=True)
class Manufactured:
    """Static 1D fields compatible with the boundary conditions on ``[0, L]``.

    ``rho = 1 + a cos(k x)``, ``theta = 1 + b cos(2 k x)``, ``u = U sin(k x)``
    with ``k = pi/L``: zero normal derivative for the scalars and zero
    velocity on both walls.
    """

    rho_amp: float = 0.3
    theta_amp: float = 0.2
    u_amp: float = 0.5
    L: float = TWO_PI

    def fields(self, x):
        k = math.pi / self.L
        a, b, U = self.rho_amp, self.theta_amp, self.u_amp
        rho = 1 + a * np.cos(k * x)
        rho_x = -a * k * np.sin(k * x)
        rho_xx = -a * k * k * np.cos(k * x)
        th = 1 + b * np.cos(2 * k * x)
        th_x = -2 * b * k * np.sin(2 * k * x)
        th_xx = -4 * b * k * k * np.cos(2 * k * x)
        u = U * np.sin(k * x)
        u_x = U * k * np.cos(k * x)
        u_xx = -U * k * k * np.sin(k * x)
        return rho, rho_x, rho_xx, th, th_x, th_xx, u, u_x, u_xx


class ManufacturedForcing:
    """Analytic sources making :class:`Manufactured` an exact steady solution."""

    def __init__(self, grid: Grid, p: ModelParams, m: Manufactured):
        if grid.dim != 1:
            raise ValueError("manufactured solutions are one-dimensional")
        (x,) = grid.coords()
        rho, rx, rxx, th, tx, txx, u, ux, uxx = m.fields(x)
        d, eps, G = p.delta, p.eps, p.gamma_exp
        self._rho = (rx * u + rho * ux) - eps * rxx
        flux = p.k1 * (rx * th * u + rho * tx * u + rho * th * ux)
        self._E = (flux + p.k2 * rho * th * ux - p.kappa * txx - p.mu * ux**2
                   - p.nu * rho * u**2 - d / th**2 + d * th**5
                   - eps * d * (rho**G + 2) * rx**2)
        pres_x = p.k2 * (rx * th + rho * tx)
        self._mom = (p.mu * uxx - p.nu * rho * u - pres_x)[None]

    def density(self, t):
        return self._rho

    def energy(self, t):
        return self._E

    def momentum(self, t):
        return self._mom


MMS_KINDS = {
    # kind: (manufactured fields, parameter overrides)
    "static": (Manufactured(), {}),
    "diffusion": (Manufactured(u_amp=0.0), {}),
    "advection": (Manufactured(u_amp=2.0), dict(kappa=0.01, mu=0.05)),
    "equilibrium": (Manufactured(0.0, 0.0, 0.0), {}),
}


@dataclass
class MMSRow:
    n: int
    h: float
    dt: float
    steps: int
    err_rho: float
    err_theta: float
    err_u: float
    error: float
    order: float
    cause: str

    @classmethod
    def columns(cls) -> list[str]:
        return list(cls.__dataclass_fields__)

    def as_row(self) -> list:
        return [getattr(self, c) for c in self.columns()]


def _mms_member(n: int, kind: str, p: ModelParams, t_end: float) -> MMSRow:
    m, over = MMS_KINDS[kind]
    p = p.with_(**over)
    g = Grid((n,), (m.L,))
    (x,) = g.coords()
    rho, _, _, th, _, _, u, _, _ = m.fields(x)
    forcing = ManufacturedForcing(g, p, m)
    cfg = ev.TimeStepConfig(t_end=t_end)
    s0 = ev.equilibrate(g, rho, th, p, cfg, forcing=forcing)
    r = ev.run(s0, cfg, p, forcing=forcing)
    f = r.final_state
    e = (g.norm(f.rho - rho), g.norm(f.theta - th), g.norm(f.u[0] - u))
    return MMSRow(n, g.h[0], r.dt, r.steps, *e, math.sqrt(sum(v * v for v in e)), math.nan,
                  r.cause)


def run_mms(resolutions: Sequence[int] = (32, 64, 128), kind: str = "static",
            p: Optional[ModelParams] = None, t_end: float = 1.0,
            threads: int = 1) -> list[MMSRow]:
    """L2 errors against a manufactured steady state under mesh refinement.

    The step size follows the CFL limit of each resolution, so space and
    time are refined together.  The exact state is static, so the error is
    purely spatial.
    """
    if kind not in MMS_KINDS:
        raise ValueError(f"kind must be one of {sorted(MMS_KINDS)}, got {kind!r}")
    res = [int(n) for n in resolutions]
    if len(res) < 2 or not all(a < b for a, b in zip(res, res[1:])):
        raise ValueError("resolutions must be an increasing list of at least two sizes")
    p = p or ModelParams()
    rows = _map(lambda n: _mms_member(n, kind, p, t_end), res, threads)
    for a, b in zip(rows, rows[1:]):
        if a.error > 0 and b.error > 0:
            b.order = math.log(a.error / b.error) / math.log(a.h / b.h)
    return rows


# -- local existence ---------------------------------------------------------
@dataclass
class ProbeRow:
    amplitude: float
    delta: float
    cause: str
    completed: bool
    t_abort: float
    t_final: float
    steps: int
    theta_min: float

    @classmethod
    def columns(cls) -> list[str]:
        return list(cls.__dataclass_fields__)

    def as_row(self) -> list:
        return [getattr(self, c) for c in self.columns()]


def local_existence_probe(amplitudes: Sequence[float], deltas: Sequence[float] = (0.0,),
                          family: Callable[[float], Callable] = None,
                          base: Optional[Scenario] = None, threads: int = 1) -> list[ProbeRow]:
    """Run each amplitude of an initial-data family to the horizon or an abort.

    ``family(a)`` returns initial data; the default is :class:`DenseColdGas`
    on :func:`deep_cold_spot_scenario`.  Rows are ordered by ``delta`` then
    amplitude.
    """
    family = family or (lambda a: DenseColdGas(amplitude=a))
    base = base or deep_cold_spot_scenario()
    jobs = [(d, a) for d in deltas for a in amplitudes]

    def one(job):
        d, a = job
        sc = replace(base, params=base.params.with_(delta=d), initial=family(a))
        r = sc.run()
        t_abort = r.t_final if r.cause == "positivity-abort" else math.nan
        return ProbeRow(float(a), float(d), r.cause, r.completed, t_abort, r.t_final, r.steps,
                        _theta_min(r))

    return _map(one, jobs, threads)


MMS_FORMAL_ORDER = {"static": 1.0, "diffusion": 2.0, "advection": 1.0, "equilibrium": None}


def mms_passed(rows: Sequence[MMSRow], kind: str, slack: float = 0.1,
               exact_tol: float = 1e-10) -> bool:
    """All runs completed and every observed order is within ``slack`` of formal."""
    if not all(r.cause == "completed" for r in rows):
        return False
    formal = MMS_FORMAL_ORDER[kind]
    if formal is None:
        return all(r.error <= exact_tol for r in rows)
    return all(r.order >= formal - slack for r in rows[1:])

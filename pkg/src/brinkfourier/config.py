"""Run configuration: a TOML document validated into a :class:`RunConfig`.

Schema (every key optional; omitted keys take the defaults shown)::

    seed = 0                      # integer in [0, 2**64)

    [model]
    k1 = 1.5                      # internal energy e = k1*rho*theta
    k2 = 1.0                      # pressure p = k2*rho*theta
    mu = 1.0                      # viscosity, > 0
    nu = 1.0                      # drag, >= 0
    kappa = 1.0                   # heat conductivity, > 0
    eps = 0.0                     # artificial viscosity in the continuity equation
    delta = 0.0                   # temperature barrier strength
    gamma_exp = 8.0               # density exponent of the regularization, > 6
    enforce_ideal_ratio = false   # require k1 = 1.5*k2

    [grid]
    dim = 1                       # 1 or 2
    n = 128                       # cells per axis (integer or list)
    L = 6.283185307179586         # domain length per axis (number or list)

    [time]
    # dt = 0.01                   # omit for the largest uniform CFL-limited step
    t_end = 1.0
    # max_steps = 500             # optional cap; with t_end omitted, the run length
    cfl_safety = 0.5
    picard_tol = 1e-10
    picard_max = 30
    theta_floor = 1e-10           # positivity-abort threshold for theta
    max_halvings = 12

    [initial]
    preset = "default"            # default | equilibrium | cold-spot | deep-cold-spot
    # preset parameters: cold-spot takes depth, width, rho_amp;
    # deep-cold-spot takes amplitude, theta_c, width.
    # Instead of a preset, give Fourier data for both fields:
    # rho = { offset = 1.0, modes = [ { k = [1], cos = 0.0, sin = 0.3 } ] }
    # theta = { offset = 1.0, modes = [ { k = [1], cos = 0.2 } ] }

    [output]
    directory = "out"
    snapshot_every = 0            # 0: initial and final snapshots only

    [solver]
    solver_tol = 1e-12
    max_iter = 20000

Fourier data are checked for positivity on a grid eight times finer than the
run grid.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Any, Callable

from . import evolution as ev
from . import experiments as ex
from .constitutive import ModelParams
from .grid import MIN_CELLS, Grid

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib


class ConfigError(ValueError):
    """All problems found in a configuration document."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


MODEL_KEYS = ("k1", "k2", "mu", "nu", "kappa", "eps", "delta", "gamma_exp", "enforce_ideal_ratio")
GRID_KEYS = ("dim", "n", "L")
TIME_KEYS = ("dt", "t_end", "max_steps", "cfl_safety", "picard_tol", "picard_max",
             "theta_floor", "max_halvings")
SOLVER_KEYS = ("solver_tol", "max_iter")
OUTPUT_KEYS = ("directory", "snapshot_every")
PRESET_KEYS = {
    "default": (),
    "equilibrium": (),
    "cold-spot": ("depth", "width", "rho_amp"),
    "deep-cold-spot": ("amplitude", "theta_c", "width"),
}
TOP_KEYS = ("seed", "model", "grid", "time", "initial", "output", "solver")


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams = field(default_factory=ModelParams)
    grid: Grid = field(default_factory=lambda: Grid((128,), (2 * math.pi,)))
    time: ev.TimeStepConfig = field(default_factory=lambda: ev.TimeStepConfig(t_end=1.0))
    initial: Callable = field(default_factory=ex.default_initial)
    initial_label: str = "default"
    out_dir: str = "out"
    snapshot_every: int = 0
    seed: int = 0

    def scenario(self) -> ex.Scenario:
        return ex.Scenario(self.params, self.grid.n, self.grid.L, self.initial, self.time)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


class _Collector:
    def __init__(self):
        self.errors: list[str] = []

    def table(self, doc: dict, key: str, allowed) -> dict:
        v = doc.get(key, {})
        if not isinstance(v, dict):
            self.errors.append(f"{key}: expected a table")
            return {}
        for k in v:
            if k not in allowed:
                self.errors.append(f"{key}.{k}: unknown key")
        return v

    def num(self, tab: dict, path: str, key: str, default, *, integer=False):
        if key not in tab:
            return default
        v = tab[key]
        ok = _is_int(v) if integer else _is_num(v)
        if not ok:
            kind = "an integer" if integer else "a number"
            self.errors.append(f"{path}.{key}: expected {kind}, got {v!r}")
            return default
        if not integer and not math.isfinite(v):
            self.errors.append(f"{path}.{key}: must be finite")
            return default
        return int(v) if integer else float(v)


def _parse_fourier(c: _Collector, spec, path: str, dim: int):
    if not isinstance(spec, dict):
        c.errors.append(f"{path}: expected a table with offset and modes")
        return None
    for k in spec:
        if k not in ("offset", "modes"):
            c.errors.append(f"{path}.{k}: unknown key")
    offset = c.num(spec, path, "offset", 1.0)
    modes = []
    raw = spec.get("modes", [])
    if not isinstance(raw, list):
        c.errors.append(f"{path}.modes: expected an array of tables")
        raw = []
    for i, m in enumerate(raw):
        mp = f"{path}.modes[{i}]"
        if not isinstance(m, dict):
            c.errors.append(f"{mp}: expected a table")
            continue
        for k in m:
            if k not in ("k", "cos", "sin"):
                c.errors.append(f"{mp}.{k}: unknown key")
        k = m.get("k")
        if not (isinstance(k, list) and len(k) == dim and all(_is_int(j) and j >= 0 for j in k)):
            c.errors.append(f"{mp}.k: expected {dim} non-negative integer wave numbers")
            continue
        modes.append(ex.FourierMode(tuple(k), c.num(m, mp, "cos", 0.0), c.num(m, mp, "sin", 0.0)))
    return ex.FourierField(offset, tuple(modes))


def _axis_list(c: _Collector, tab, key, dim, default, integer):
    v = tab.get(key, default)
    vals = v if isinstance(v, list) else [v] * dim
    check = _is_int if integer else _is_num
    if len(vals) != dim or not all(check(x) for x in vals):
        kind = "integers" if integer else "numbers"
        c.errors.append(f"grid.{key}: expected one value or {dim} {kind}, got {v!r}")
        return None
    return tuple(int(x) if integer else float(x) for x in vals)


def parse_config(text: str) -> RunConfig:
    """Validate a TOML document; raises :class:`ConfigError` listing every problem."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries "(at line L, column C)"
        raise ConfigError([f"syntax error: {exc}"]) from None
    c = _Collector()
    for k in doc:
        if k not in TOP_KEYS:
            c.errors.append(f"{k}: unknown key")

    seed = doc.get("seed", 0)
    if not (_is_int(seed) and 0 <= seed < 2**64):
        c.errors.append(f"seed: expected an integer in [0, 2**64), got {seed!r}")
        seed = 0

    m = c.table(doc, "model", MODEL_KEYS)
    mvals: dict[str, Any] = {}
    for k in MODEL_KEYS:
        if k == "enforce_ideal_ratio":
            if k in m:
                if isinstance(m[k], bool):
                    mvals[k] = m[k]
                else:
                    c.errors.append(f"model.{k}: expected true or false")
        elif k in m:
            v = c.num(m, "model", k, None)
            if v is not None:
                mvals[k] = v
    c.errors += [f"model: {e}" for e in ModelParams.errors_for(**mvals)]

    g = c.table(doc, "grid", GRID_KEYS)
    dim = c.num(g, "grid", "dim", 1, integer=True)
    if dim not in (1, 2):
        c.errors.append(f"grid.dim: must be 1 or 2, got {dim}")
        dim = 1
    n = _axis_list(c, g, "n", dim, 128, True)
    L = _axis_list(c, g, "L", dim, 2 * math.pi, False)
    if n is not None and min(n) < MIN_CELLS:
        c.errors.append(f"grid.n: need at least {MIN_CELLS} cells per axis, got {list(n)}")
        n = None
    if L is not None and not min(L) > 0:
        c.errors.append(f"grid.L: lengths must be positive, got {list(L)}")
        L = None

    t = c.table(doc, "time", TIME_KEYS)
    s = c.table(doc, "solver", SOLVER_KEYS)
    tv = dict(
        dt=c.num(t, "time", "dt", None),
        t_end=c.num(t, "time", "t_end", 1.0),
        max_steps=c.num(t, "time", "max_steps", None, integer=True),
        cfl_safety=c.num(t, "time", "cfl_safety", 0.5),
        picard_tol=c.num(t, "time", "picard_tol", 1e-10),
        picard_max=c.num(t, "time", "picard_max", 30, integer=True),
        theta_floor=c.num(t, "time", "theta_floor", 1e-10),
        max_halvings=c.num(t, "time", "max_halvings", 12, integer=True),
        solver_tol=c.num(s, "solver", "solver_tol", 1e-12),
        max_iter=c.num(s, "solver", "max_iter", 20000, integer=True),
    )
    checks = [
        ("time.dt", tv["dt"] is None or tv["dt"] > 0, "must be > 0"),
        ("time.t_end", tv["t_end"] > 0, "must be > 0"),
        ("time.max_steps", tv["max_steps"] is None or tv["max_steps"] >= 1, "must be >= 1"),
        ("time.cfl_safety", 0 < tv["cfl_safety"] <= 1, "must lie in (0, 1]"),
        ("time.picard_tol", tv["picard_tol"] > 0, "must be > 0"),
        ("time.picard_max", tv["picard_max"] >= 1, "must be >= 1"),
        ("time.theta_floor", tv["theta_floor"] >= 0, "must be >= 0"),
        ("time.max_halvings", tv["max_halvings"] >= 0, "must be >= 0"),
        ("solver.solver_tol", 0 < tv["solver_tol"] <= 1e-6, "must lie in (0, 1e-6]"),
        ("solver.max_iter", tv["max_iter"] >= 1, "must be >= 1"),
    ]
    c.errors += [f"{path}: {msg}" for path, ok, msg in checks if not ok]

    o = c.table(doc, "output", OUTPUT_KEYS)
    out_dir = o.get("directory", "out")
    if not isinstance(out_dir, str) or not out_dir:
        c.errors.append("output.directory: expected a non-empty string")
        out_dir = "out"
    snap = c.num(o, "output", "snapshot_every", 0, integer=True)
    if snap < 0:
        c.errors.append("output.snapshot_every: must be >= 0")

    ini = doc.get("initial", {})
    initial, label = ex.default_initial(dim), "default"
    if not isinstance(ini, dict):
        c.errors.append("initial: expected a table")
    elif "preset" in ini:
        name = ini["preset"]
        if name not in PRESET_KEYS:
            c.errors.append(f"initial.preset: unknown preset {name!r}; "
                            f"choose from {sorted(PRESET_KEYS)}")
        else:
            allowed = ("preset",) + PRESET_KEYS[name]
            for k in ini:
                if k not in allowed:
                    c.errors.append(f"initial.{k}: unknown key for preset {name!r}")
            kw = {k: c.num(ini, "initial", k, None) for k in PRESET_KEYS[name] if k in ini}
            kw = {k: v for k, v in kw.items() if v is not None}
            if name == "cold-spot":
                initial = ex.ColdSpot(**kw)
            elif name == "deep-cold-spot":
                initial = ex.DenseColdGas(**kw)
            else:
                initial = ex.PRESETS[name](dim)
            label = name
    elif ini:
        for k in ini:
            if k not in ("rho", "theta"):
                c.errors.append(f"initial.{k}: unknown key")
        if "rho" not in ini or "theta" not in ini:
            c.errors.append("initial: Fourier data need both rho and theta (or use preset)")
        else:
            fr = _parse_fourier(c, ini["rho"], "initial.rho", dim)
            ft = _parse_fourier(c, ini["theta"], "initial.theta", dim)
            if fr is not None and ft is not None:
                initial, label = ex.FourierInitial(fr, ft), "fourier"

    if c.errors:
        raise ConfigError(c.errors)

    grid = Grid(n, L)
    # positivity of the initial data on an 8x finer sampling grid
    fine = Grid(tuple(k * 8 for k in grid.n), grid.L)
    try:
        rho0, th0 = initial(fine)
    except ValueError as exc:
        raise ConfigError([f"initial: {exc}"]) from None
    for nm, f in (("rho", rho0), ("theta", th0)):
        if not float(f.min()) > 0:
            c.errors.append(f"initial.{nm}: not positive (minimum {float(f.min()):.6g} sampled "
                            "at 8x resolution)")
    if float(th0.min()) > 0 and not float(th0.min()) > tv["theta_floor"]:
        c.errors.append(f"initial.theta: minimum {float(th0.min()):.6g} is not above "
                        f"time.theta_floor = {tv['theta_floor']}")
    if c.errors:
        raise ConfigError(c.errors)
    t_end = tv.pop("t_end")
    if "max_steps" in t and "t_end" not in t:
        t_end = None  # run length set by max_steps alone
    time_cfg = ev.TimeStepConfig(t_end=t_end, **tv)
    return RunConfig(ModelParams(**mvals), grid, time_cfg, initial, label, out_dir, snap, seed)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())

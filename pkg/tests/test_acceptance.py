"""Acceptance criteria 1-9, each at its stated tolerance and time budget.

Every test reports one PASS/FAIL line (printed and repeated in the pytest
terminal summary) before asserting, so a failing criterion is still logged.
"""

import math
import os
import subprocess
import sys
import time
from dataclasses import replace

import mpmath
import numpy as np
import pytest
import scipy.linalg as sla
from scipy.integrate import trapezoid

from brinkfourier import brinkman as bk
from brinkfourier import constitutive as cst
from brinkfourier import diagnostics as dg
from brinkfourier import envara
from brinkfourier import evolution as ev
from brinkfourier import experiments as ex
from brinkfourier.grid import Grid

SOLVER_TOL = 1e-12


def with_dt(sc, dt):
    return replace(sc, time=replace(sc.time, dt=dt))


# -- shared runs ---------------------------------------------------------------
@pytest.fixture(scope="module")
def conservation_runs():
    t0 = time.perf_counter()
    base = ex.default_scenario(n=128, t_end=1.0)
    barrier = ex.default_scenario(n=128, t_end=1.0, delta=1e-3)
    runs = {
        "plain": with_dt(base, 0.002).run(),
        "barrier": with_dt(barrier, 0.002).run(keep_states=True),
        "barrier_half": with_dt(barrier, 0.001).run(keep_states=True),
    }
    return runs, barrier.params, time.perf_counter() - t0


@pytest.fixture(scope="module")
def cold_spot_pair():
    t0 = time.perf_counter()
    runs = [with_dt(ex.cold_spot_scenario(delta=d, n=128, t_end=2.0), 0.05).run()
            for d in (0.0, 1e-3)]
    return runs, time.perf_counter() - t0


# -- 1 ---------------------------------------------------------------------------
def test_criterion_1_constitutive_identities(acceptance_report):
    t0 = time.perf_counter()
    p = cst.ModelParams.ideal()
    rng = np.random.default_rng(2024)
    R, T = rng.uniform(0.05, 20.0, (2, 10_000))
    psi = cst.free_energy(R, T, p)
    s = cst.entropy(R, T, p)
    e = cst.internal_energy(R, T, p)
    pr = cst.pressure(R, T, p)

    def rel(a, b):
        return float(np.max(np.abs(a - b) / np.abs(b)))

    algebraic = {
        "e=psi+s*theta": rel(psi + s * T, e),
        "p=rho*psi_rho-psi": rel(R * cst.free_energy_drho(R, T, p) - psi, pr),
        "e=1.5p": rel(1.5 * pr, e),
        "theta(rho,s)": rel(cst.temperature_from_entropy(R, s, p), T),
    }
    rows = [r for r in envara.identity_suite(n_points=10_000, seed=2024) if r.model == "ideal-gas"]
    ratios = {r.identity: r.ratio for r in rows if not math.isnan(r.ratio)}
    elapsed = time.perf_counter() - t0
    ok = (max(algebraic.values()) <= 1e-10
          and {"gibbs", "pressure-split", "energy-entropy-variables"} <= set(ratios)
          and min(ratios.values()) >= 3.5 and all(r.passed for r in rows) and elapsed < 5)
    detail = (f"max algebraic rel. error {max(algebraic.values()):.1e}; refinement ratios "
              + ", ".join(f"{k} {v:.2f}" for k, v in sorted(ratios.items())))
    assert acceptance_report(1, ok, detail, elapsed, 5), (algebraic, ratios)


# -- 2 ---------------------------------------------------------------------------
def test_criterion_2_brinkman_solver(acceptance_report, monkeypatch):
    t0 = time.perf_counter()
    p = cst.ModelParams()
    L = 2.0
    errs = []
    for n in (32, 64, 128):
        g = Grid((n,), (L,))
        (x,) = g.coords()
        k = math.pi / L
        u_star = np.sin(k * x)
        f = -p.mu * k * k * u_star - p.nu * u_star
        u = bk.solve_brinkman(bk.BrinkmanSystem(g, np.ones(n), np.ones(n), p), forcing=f[None])
        errs.append(g.norm(u[0] - u_star))
    ratios = [a / b for a, b in zip(errs, errs[1:])]

    # dense LU oracle on the 4-cell system
    n, h = 4, 1.0
    theta = np.array([1.0, 2.0, 3.0, 4.0])
    A = np.eye(n) + (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2
    A[0, 0] = A[-1, -1] = 1 + 3 / h**2
    qp = np.concatenate([[theta[0]], theta, [theta[-1]]])
    exact = sla.lu_solve(sla.lu_factor(A), -(qp[2:] - qp[:-2]) / (2 * h))
    u4 = bk.solve_brinkman(bk.BrinkmanSystem(Grid((4,), (4.0,)), np.ones(4), theta, p, 1e-14))
    lu_err = float(np.max(np.abs(u4[0] - exact)))

    # energy identity on every Brinkman solve of a coupled run, Picard iterates included
    residuals = []
    orig = ev.solve_brinkman

    def audited(sys, forcing=None, x0=None, return_info=False):
        out = orig(sys, forcing=forcing, x0=x0, return_info=return_info)
        if forcing is None:
            u = out[0] if return_info else out
            residuals.append((bk.energy_identity_residual(u, sys), sys.solver_tol))
        return out

    monkeypatch.setattr(ev, "solve_brinkman", audited)
    for delta in (0.0, 1e-3):
        with_dt(ex.default_scenario(n=64, t_end=0.5, delta=delta, eps=delta), 0.01).run()
    worst = max(r / max(10 * tol, 1e-10) for r, tol in residuals)
    elapsed = time.perf_counter() - t0
    ok = (all(3.2 <= r <= 4.8 for r in ratios) and lu_err <= 1e-10 and worst <= 1.0
          and elapsed < 10)
    detail = (f"MMS ratios {ratios[0]:.3f}, {ratios[1]:.3f}; dense-LU error {lu_err:.1e}; "
              f"{len(residuals)} solves, worst identity residual/bound {worst:.1e}")
    assert acceptance_report(2, ok, detail, elapsed, 10)


# -- 3 ---------------------------------------------------------------------------
def test_criterion_3_conservation(acceptance_report, conservation_runs):
    runs, p, elapsed = conservation_runs
    plain = runs["plain"]
    recs = plain.records
    m0 = recs[0].mass
    mass = max(abs(r.mass - m0) for r in recs) / m0
    energy = max(abs(r.energy_residual) for r in recs)
    energy_bound = 100 * SOLVER_TOL * plain.steps

    def balance(r):
        g = r.states[0].grid
        E = [g.integrate(cst.internal_energy(s.rho, s.theta, p)) for s in r.states]
        src = [g.integrate(p.delta / s.theta**2 - p.delta * s.theta**5) for s in r.states]
        return E[-1] - E[0] - trapezoid(src, [s.t for s in r.states]), E[0]

    coarse, E0 = balance(runs["barrier"])
    fine, _ = balance(runs["barrier_half"])
    extrapolated = abs(2 * fine - coarse) / abs(E0)
    ok = (plain.completed and plain.steps == 500 and mass <= 1e-12 and energy <= energy_bound
          and runs["barrier"].steps == 500 and extrapolated <= 1e-6 and elapsed < 60)
    detail = (f"500 steps: mass drift {mass:.1e}; energy residual {energy:.1e} "
              f"(bound {energy_bound:.0e}); delta=1e-3 balance {abs(coarse) / E0:.1e} -> "
              f"{abs(fine) / E0:.1e}, extrapolated {extrapolated:.1e}")
    assert acceptance_report(3, ok, detail, elapsed, 60)


# -- 4 ---------------------------------------------------------------------------
def test_criterion_4_second_law(acceptance_report, conservation_runs, cold_spot_pair):
    runs, _, t_a = conservation_runs
    pair, t_b = cold_spot_pair
    all_runs = list(runs.values()) + pair
    sigma_min = min(r.sigma_min for run in all_runs for r in run.records)
    worst = math.inf
    for run in (runs["plain"], pair[0]):  # the eps = delta = 0 runs
        for a, b in zip(run.records, run.records[1:]):
            worst = min(worst, (b.entropy - a.entropy) / abs(b.entropy))
    ok = sigma_min >= 0 and worst >= -1e-8
    detail = (f"min production density {sigma_min:.1e} over {len(all_runs)} runs; "
              f"min relative entropy increment {worst:.1e}")
    assert acceptance_report(4, ok, detail, t_a + t_b)


# -- 5 ---------------------------------------------------------------------------
def test_criterion_5_positivity(acceptance_report, conservation_runs, cold_spot_pair):
    runs, _, _ = conservation_runs
    pair, elapsed = cold_spot_pair
    all_runs = list(runs.values()) + pair
    positive = all(r.completed and min(q.rho_min for q in r.records) > 0
                   and min(q.theta_min for q in r.records) > 0 for r in all_runs)
    plain, barrier = pair
    same_times = [abs(a.t - b.t) <= 1e-12 for a, b in zip(plain.records, barrier.records)]
    gaps = [b.theta_min - a.theta_min for a, b in zip(plain.records[1:], barrier.records[1:])]
    ok = (positive and len(plain.records) == len(barrier.records) and all(same_times)
          and min(gaps) > 0 and elapsed < 60)
    detail = (f"all runs positive: {positive}; cold-spot min theta gap (delta-run minus "
              f"plain) over {len(gaps)} steps in [{min(gaps):.2e}, {max(gaps):.2e}]")
    assert acceptance_report(5, ok, detail, elapsed, 60)


# -- 6 ---------------------------------------------------------------------------
def test_criterion_6_limit_sweeps(acceptance_report):
    t0 = time.perf_counter()
    axes = [("mesh", (1 / 32, 1 / 64, 1 / 128, 1 / 256)),
            ("eps", (1e-2, 1e-3, 1e-4, 1e-5)),
            ("delta", (1e-2, 1e-3, 1e-4, 1e-5))]
    default = with_dt(ex.default_scenario(n=128), 0.02)
    equilibrium = with_dt(ex.equilibrium_scenario(n=128), 0.02)
    parts, ok = [], True
    for axis, values in axes:
        smooth = ex.run_sweep(ex.SweepSpec(axis, values, default))
        flat = ex.run_sweep(ex.SweepSpec(axis, values, equilibrium))
        ok &= smooth.strictly_decreasing and smooth.all_ok and flat.all_zero and flat.all_ok
        d = smooth.distances
        parts.append(f"{axis} {d[0]:.1e}>{d[1]:.1e}>{d[2]:.1e}>0 (equilibrium zero: {flat.all_zero})")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    assert acceptance_report(6, ok, "; ".join(parts), elapsed, 300)


# -- 7 ---------------------------------------------------------------------------
def test_criterion_7_appendix_inequalities(acceptance_report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    a = 10 ** rng.uniform(-3, 3, 10_000)
    b = 10 ** rng.uniform(-3, 3, 10_000)
    nu = rng.uniform(0, 1, 10_000)
    young = bool(np.all(dg.reverse_young_check(a, b, nu)))
    sym = max(abs(dg.specht_ratio(h) - dg.specht_ratio(1 / h)) for h in (2.0, 5.0, 10.0))
    mpmath.mp.dps = 50
    r4 = mpmath.mpf(4) ** (mpmath.mpf(1) / 3)
    s4 = float(r4 / (mpmath.e * mpmath.log(r4)))
    s4_err = abs(dg.specht_ratio(4.0) - s4)
    m, M, x0, pexp = 1.0, 2.0, 1.5, 3.0
    jensen = all(np.subtract(*dg.inverse_jensen_bound([m, M], [w, 1 - w], pexp, m, M, x0)) <= 1e-12
                 for w in np.linspace(0, 1, 1001))
    elapsed = time.perf_counter() - t0
    ok = (young and sym <= 1e-12 and s4_err <= 1e-3 and abs(s4 - 1.2637) <= 1e-3 and jensen
          and elapsed < 5)
    detail = (f"reverse Young 10^4/10^4: {young}; |S(h)-S(1/h)| {sym:.1e}; S(4)={dg.specht_ratio(4.0):.6f} "
              f"vs {s4:.6f}; inverse Jensen on two-point grid: {jensen}")
    assert acceptance_report(7, ok, detail, elapsed, 5)


# -- 8 ---------------------------------------------------------------------------
def test_criterion_8_weak_forms(acceptance_report):
    t0 = time.perf_counter()
    levels = (128, 256, 512)
    res = []
    for n in levels:
        sc = with_dt(ex.default_scenario(n=n, t_end=1.0), 16 / n)
        r = sc.run(keep_states=True)
        assert r.completed
        res.append(dg.weak_form_residual(r.states, sc.params).as_dict())
    floor = 1e-12  # residuals at roundoff everywhere count as converged

    def orders(key):
        v = [x[key] for x in res]
        if max(v) <= floor:
            return None
        return [math.log2(a / b) for a, b in zip(v, v[1:])]

    keyed = {"continuity": "continuity", "brinkman": "brinkman", "energy": "energy",
             "entropy": "entropy_gap"}
    obs = {name: orders(key) for name, key in keyed.items()}
    violation = max(x["entropy"] for x in res)
    elapsed = time.perf_counter() - t0
    ok = (all(o is None or min(o) >= 0.9 for o in obs.values()) and violation <= 1e-8
          and elapsed < 180)
    detail = "; ".join(
        f"{k} " + ("at roundoff" if o is None else "orders " + ", ".join(f"{q:.2f}" for q in o))
        for k, o in obs.items()) + f"; entropy violation {violation:.1e}"
    assert acceptance_report(8, ok, detail, elapsed, 180)


# -- 9 ---------------------------------------------------------------------------
DETERMINISM_CONFIG = """
seed = 5
[model]
delta = 1e-3
eps = 1e-3
[grid]
n = 64
[time]
dt = 0.01
t_end = 0.5
[output]
snapshot_every = 10
"""


def test_criterion_9_determinism(acceptance_report, tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "run.toml"
    cfg.write_text(DETERMINISM_CONFIG, encoding="utf-8")
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        for cmd in (["simulate"], ["derive-check"]):
            proc = subprocess.run([sys.executable, "-m", "brinkfourier", *cmd, "--config", str(cfg),
                                   "--out", str(out), "--seed", "5", "--threads", "1"],
                                  capture_output=True)
            assert proc.returncode == 0, proc.stderr
        outputs.append({f: (out / f).read_bytes() for f in sorted(os.listdir(out))})
    same = outputs[0].keys() == outputs[1].keys() and all(
        outputs[0][f] == outputs[1][f] for f in outputs[0])
    csvs = [f for f in outputs[0] if f.endswith(".csv")]
    elapsed = time.perf_counter() - t0
    detail = f"{len(csvs)} CSV files compared byte for byte: {'identical' if same else 'DIFFER'}"
    assert acceptance_report(9, same and len(csvs) >= 4, detail, elapsed)

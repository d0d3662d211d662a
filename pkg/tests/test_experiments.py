import math
import os

import numpy as np
import pytest

from brinkfourier import csvio
from brinkfourier import experiments as ex
from brinkfourier.grid import Grid


def test_default_initial_data():
    g = Grid((64,), (ex.TWO_PI,))
    rho, theta = ex.default_initial()(g)
    (x,) = g.coords()
    np.testing.assert_allclose(rho, 1 + 0.3 * np.sin(x), atol=1e-15)
    np.testing.assert_allclose(theta, 1 + 0.2 * np.cos(x), atol=1e-15)


def test_fourier_positivity_is_sampled_finely():
    g = Grid((4,), (ex.TWO_PI,))
    f = ex.FourierField(1.0, (ex.FourierMode((1,), sin=1.05),))
    assert f(g).min() > 0  # the coarse cells miss the dip
    errs = ex.FourierInitial(f, ex.FourierField(1.0)).validation_errors(g)
    assert len(errs) == 1 and "rho" in errs[0]


def test_fourier_mode_dimension_mismatch():
    f = ex.FourierField(1.0, (ex.FourierMode((1, 0), cos=0.1),))
    with pytest.raises(ValueError):
        f(Grid((8,), (1.0,)))


@pytest.mark.parametrize("name", sorted(ex.PRESETS))
def test_presets_are_positive(name):
    g = Grid((64,), (ex.TWO_PI,))
    rho, theta = ex.PRESETS[name](1)(g)
    assert rho.min() > 0 and theta.min() > 0


# -- sweeps ------------------------------------------------------------------
@pytest.mark.parametrize("kw,needle", [
    (dict(axis="mesh", values=(1 / 32, 1 / 64)), "at least 3"),
    (dict(axis="eps", values=(1e-3, 1e-2, 1e-4)), "strictly decreasing"),
    (dict(axis="mesh", values=(0.03, 0.015, 0.0075)), r"1/2\^k"),
    (dict(axis="time", values=(3.0, 2.0, 1.0)), "axis"),
    (dict(axis="eps", values=(1e-2, 1e-3, 1e-4), norm="L1"), "norm"),
    (dict(axis="delta", values=(1.0, 0.5, 0.0)), "positive"),
])
def test_sweep_spec_validation(kw, needle):
    with pytest.raises(ValueError, match=needle):
        ex.SweepSpec(**kw)


def test_mesh_sweep_on_equilibrium_is_zero():
    spec = ex.SweepSpec("mesh", (1 / 32, 1 / 64, 1 / 128), ex.equilibrium_scenario(t_end=0.5))
    res = ex.run_sweep(spec)
    assert res.all_zero and res.all_ok
    assert [r.steps for r in res.rows] and all(r.cause == "completed" for r in res.rows)


@pytest.mark.parametrize("axis,values", [("eps", (1e-2, 1e-3, 1e-4)),
                                         ("delta", (1e-2, 1e-3, 1e-4)),
                                         ("dt", (0.1, 0.05, 0.025))])
def test_equilibrium_is_zero_on_every_axis(axis, values):
    res = ex.run_sweep(ex.SweepSpec(axis, values, ex.equilibrium_scenario(n=16, t_end=0.5)))
    assert res.all_zero


def test_sweep_is_thread_count_independent(tmp_path):
    base = ex.default_scenario(n=32, t_end=0.5)
    spec = ex.SweepSpec("eps", (1e-2, 1e-3, 1e-4), base)
    one = ex.run_sweep(spec, threads=1)
    three = ex.run_sweep(spec, threads=3)
    for a, b in zip(one.rows, three.rows):
        assert a.distance == b.distance and a.steps == b.steps
    assert one.strictly_decreasing
    os.makedirs(tmp_path / "a")
    os.makedirs(tmp_path / "b")
    t1, s1 = ex.write_sweep(one, tmp_path / "a", timestamp="T0")
    t3, _ = ex.write_sweep(three, tmp_path / "b", timestamp="T0")
    assert os.path.basename(t1) == "eps_T0.csv" and os.path.basename(s1) == "eps_T0_summary.csv"
    assert open(t1, "rb").read() == open(t3, "rb").read()
    header, rows = csvio.read_table(t1)
    assert header == ex.SweepRow.columns() and len(rows) == 3
    keys = dict(csvio.read_table(s1)[1])
    assert keys["format_version"] == "1" and keys["strictly_decreasing"] == "1"


def test_flagged_member_does_not_stop_the_sweep():
    base = ex.deep_cold_spot_scenario(t_end=6.0)
    spec = ex.SweepSpec("delta", (1e-2, 1e-3, 1e-9), base)
    res = ex.run_sweep(spec)
    assert len(res.rows) == 3
    assert res.rows[-1].cause == "positivity-abort" and res.rows[-1].flagged
    assert all(math.isnan(r.distance) for r in res.rows)
    assert not res.all_ok


# -- manufactured solutions -------------------------------------------------
@pytest.mark.parametrize("kind", ["static", "diffusion", "advection"])
def test_mms_orders(kind):
    rows = ex.run_mms((32, 64, 128), kind)
    assert ex.mms_passed(rows, kind)
    assert all(r.order >= ex.MMS_FORMAL_ORDER[kind] - 0.1 for r in rows[1:])
    assert rows[-1].error < rows[0].error


def test_mms_zero_forcing_equilibrium_is_exact():
    rows = ex.run_mms((16, 32), "equilibrium")
    assert all(r.error == 0.0 for r in rows)
    assert ex.mms_passed(rows, "equilibrium")


def test_manufactured_fields_respect_boundaries():
    m = ex.Manufactured()
    rho, rx, _, th, tx, _, u, _, _ = m.fields(np.array([0.0, m.L]))
    np.testing.assert_allclose(rx, 0, atol=1e-15)
    np.testing.assert_allclose(tx, 0, atol=1e-15)
    np.testing.assert_allclose(u, 0, atol=1e-15)


@pytest.mark.parametrize("res", [(32,), (64, 32)])
def test_mms_resolution_validation(res):
    with pytest.raises(ValueError):
        ex.run_mms(res)


# -- local existence ----------------------------------------------------------
def test_local_existence_probe():
    rows = ex.local_existence_probe([0.0, 2.0, 16.0], deltas=(0.0, 1e-3), threads=2)
    by = {(r.delta, r.amplitude): r for r in rows}
    assert by[0.0, 0.0].completed and by[0.0, 0.0].t_final == pytest.approx(20.0)
    assert by[0.0, 2.0].completed
    big = by[0.0, 16.0]
    assert big.cause == "positivity-abort" and 0 < big.t_abort < 20.0
    guarded = by[1e-3, 16.0]
    assert guarded.completed or guarded.t_abort > big.t_abort
    assert [(r.delta, r.amplitude) for r in rows] == [(d, a) for d in (0.0, 1e-3)
                                                      for a in (0.0, 2.0, 16.0)]


def test_cold_spot_barrier_raises_minimum_temperature():
    runs = [ex.cold_spot_scenario(delta=d, n=64, t_end=1.0).run() for d in (0.0, 1e-3)]
    assert all(r.completed for r in runs)
    for a, b in zip(runs[0].records[1:], runs[1].records[1:]):
        assert a.t == pytest.approx(b.t)
        assert b.theta_min > a.theta_min


def test_check_invariants_keys():
    sc = ex.default_scenario(n=16, t_end=0.3)
    inv = ex.check_invariants(sc.run(), sc.params, sc.time)
    assert set(inv) == {"completed", "mass", "energy", "brinkman", "production", "entropy"}
    assert all(inv.values())

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brinkfourier import constitutive as cst
from brinkfourier.constitutive import ModelParams, ParameterError, ThermoDomainError

IDEAL = ModelParams.ideal()
UNIT = ModelParams(k1=1.0, k2=1.0)
E = math.e

positive = st.floats(0.05, 20.0)


@pytest.mark.parametrize("rho,theta,expected", [(1.0, 1.0, 0.0), (E, 1.0, E), (1.0, E, -1.5 * E)])
def test_free_energy_values(rho, theta, expected):
    assert cst.free_energy(rho, theta, IDEAL) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("rho,theta,expected", [(1.0, 1.0, 1.5), (E, 1.0, 0.5 * E)])
def test_entropy_values(rho, theta, expected):
    assert cst.entropy(rho, theta, IDEAL) == pytest.approx(expected, rel=1e-14)


def test_entropy_is_minus_theta_derivative():
    rho, theta = 1.3, 0.7
    errs = []
    for h in (1e-3, 5e-4):
        fd = -(cst.free_energy(rho, theta + h, IDEAL) - cst.free_energy(rho, theta - h, IDEAL)) / (2 * h)
        errs.append(abs(fd - cst.entropy(rho, theta, IDEAL)))
    assert errs[1] < 1e-6
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


@pytest.mark.parametrize("rho,theta,expected", [(1.0, 1.0, 1.5), (2.0, 3.0, 9.0)])
def test_internal_energy_values(rho, theta, expected):
    assert cst.internal_energy(rho, theta, IDEAL) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("rho,theta,expected", [(1.0, 1.0, 1.0), (2.0, 3.0, 6.0)])
def test_pressure_values(rho, theta, expected):
    assert cst.pressure(rho, theta, IDEAL) == pytest.approx(expected, rel=1e-15)


def test_algebraic_identities_on_random_points():
    rng = np.random.default_rng(1)
    R, T = rng.uniform(0.05, 20, (2, 10_000))
    psi = cst.free_energy(R, T, IDEAL)
    s = cst.entropy(R, T, IDEAL)
    e = cst.internal_energy(R, T, IDEAL)
    p = cst.pressure(R, T, IDEAL)
    scale = np.maximum(1.0, np.abs(e))
    assert np.max(np.abs(psi + s * T - e) / scale) < 1e-12
    assert np.max(np.abs(R * cst.free_energy_drho(R, T, IDEAL) - psi - p) / np.maximum(1, p)) < 1e-12
    assert np.max(np.abs(e - 1.5 * p) / scale) < 1e-12


def test_temperature_from_entropy_values():
    assert cst.temperature_from_entropy(1.0, IDEAL.k1, IDEAL) == pytest.approx(1.0, rel=1e-15)
    assert cst.temperature_from_entropy(2.0, 0.0, UNIT) == pytest.approx(0.735758882342885, rel=1e-12)
    s = cst.entropy(2.0, 5.0, IDEAL)
    assert cst.temperature_from_entropy(2.0, s, IDEAL) == pytest.approx(5.0, rel=1e-12)


def test_temperature_from_entropy_overflow_and_domain():
    with pytest.raises(OverflowError):
        cst.temperature_from_entropy(1.0, 1e6, IDEAL)
    with pytest.raises(ThermoDomainError):
        cst.temperature_from_entropy(0.0, 1.0, IDEAL)


def test_energy_in_entropy_variables():
    assert cst.internal_energy_from_entropy(1.0, 1.5, IDEAL) == pytest.approx(1.5, rel=1e-15)
    rho, s, h = 1.2, 0.4, 1e-5
    theta = cst.temperature_from_entropy(rho, s, IDEAL)
    e1 = lambda r, q: cst.internal_energy_from_entropy(r, q, IDEAL)
    de_ds = (e1(rho, s + h) - e1(rho, s - h)) / (2 * h)
    de_drho = (e1(rho + h, s) - e1(rho - h, s)) / (2 * h)
    assert de_ds == pytest.approx(theta, abs=1e-8)
    assert de_drho == pytest.approx(cst.free_energy_drho(rho, theta, IDEAL), abs=1e-8)


@pytest.mark.parametrize("args,expected", [
    ((1.0, 0.0, 0.0, 1.0, 0.0, ModelParams()), 0.0),
    ((2.0, 4.0, 0.0, 1.0, 0.0, ModelParams(nu=0.0, kappa=1.0)), 2.0),
    ((1.0, 0.0, 3.0, 2.0, 0.0, ModelParams(mu=1.0, kappa=1.0)), 6.0),
])
def test_entropy_production_values(args, expected):
    # kappa must stay positive; the gradients that would feed it are zero
    assert cst.entropy_production_density(*args) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("theta,expected", [(1.0, 0.0), (E, E - 2.0)])
def test_helmholtz_functional_values(theta, expected):
    assert cst.helmholtz_functional(1.0, theta, 1.0, UNIT) == pytest.approx(expected, abs=1e-14)


def test_helmholtz_minimum_by_golden_section():
    f = lambda t: cst.helmholtz_functional(1.0, t, 1.0, UNIT)
    a, b = 0.1, 5.0
    g = (math.sqrt(5) - 1) / 2
    for _ in range(200):
        c, d = b - g * (b - a), a + g * (b - a)
        if f(c) < f(d):
            b = d
        else:
            a = c
    assert 0.5 * (a + b) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("bad", [(0.0, 1.0), (1.0, 0.0), (-1.0, 2.0), (1.0, -0.1)])
def test_quadrant_is_enforced(bad):
    for fn in (cst.free_energy, cst.entropy, cst.internal_energy, cst.pressure):
        with pytest.raises(ThermoDomainError):
            fn(*bad, IDEAL)


@pytest.mark.parametrize("kw,needle", [
    (dict(mu=0.0), "Darcy"),
    (dict(gamma_exp=4.0), "above 6"),
    (dict(k1=-1.0), "k1"),
    (dict(kappa=0.0), "kappa"),
    (dict(delta=-1e-3), "delta"),
    (dict(k1=1.0, enforce_ideal_ratio=True), "1.5"),
])
def test_parameter_validation(kw, needle):
    with pytest.raises(ParameterError, match=needle):
        ModelParams(**kw)
    assert any(needle in e for e in ModelParams.errors_for(**kw))


def test_errors_for_collects_everything():
    errs = ModelParams.errors_for(mu=0.0, gamma_exp=4.0, nu=-1.0)
    assert len(errs) == 3


@settings(max_examples=200, deadline=None)
@given(positive, positive, positive, positive)
def test_entropy_strictly_increasing_in_theta(rho, t1, t2, k2):
    p = ModelParams(k1=1.5 * k2, k2=k2)
    if t1 == t2:
        return
    lo, hi = sorted((t1, t2))
    assert cst.entropy(rho, hi, p) > cst.entropy(rho, lo, p)


@settings(max_examples=300, deadline=None)
@given(positive, positive)
def test_entropy_inversion_round_trips(rho, theta):
    s = cst.entropy(rho, theta, IDEAL)
    assert cst.temperature_from_entropy(rho, s, IDEAL) == pytest.approx(theta, rel=1e-10)
    th = cst.temperature_from_entropy(rho, s, IDEAL)
    assert cst.entropy(rho, th, IDEAL) == pytest.approx(s, rel=1e-10, abs=1e-10)


@settings(max_examples=300, deadline=None)
@given(positive, st.floats(0, 100), st.floats(0, 100), positive, st.floats(0, 100))
def test_entropy_production_nonnegative(theta, gu, u2, rho, gt):
    assert cst.entropy_production_density(theta, gu, u2, rho, gt, IDEAL) >= 0


@settings(max_examples=200, deadline=None)
@given(positive, positive)
def test_gibbs_relation_specific_variables(rho, theta):
    h = 1e-4
    s_hat = lambda r, t: cst.entropy(r, t, IDEAL) / r
    e_hat = lambda r, t: cst.internal_energy(r, t, IDEAL) / r
    ht, hr = h * theta, h * rho
    r_theta = theta * (s_hat(rho, theta + ht) - s_hat(rho, theta - ht)) / (2 * ht) \
        - (e_hat(rho, theta + ht) - e_hat(rho, theta - ht)) / (2 * ht)
    r_rho = theta * (s_hat(rho + hr, theta) - s_hat(rho - hr, theta)) / (2 * hr) \
        - (e_hat(rho + hr, theta) - e_hat(rho - hr, theta)) / (2 * hr) \
        + cst.pressure(rho, theta, IDEAL) / rho**2
    assert abs(r_theta) < 1e-5 * max(1, theta)
    assert abs(r_rho) < 1e-5 * max(1, theta / rho)

"""Derive entropy, internal energy and pressure from an arbitrary free energy.

Given a Helmholtz free energy density ``psi(rho, theta)``, the laws are

    s = -psi_theta,   e = psi - theta*psi_theta,   p = rho*psi_rho - psi.

Partials come from the model when it supplies them, otherwise from
fourth-order central differences with a step relative to the evaluation
point.  The residual checks here verify the structural identities every such
derivation must satisfy (pressure gradient split, Gibbs relation, and the
``(rho, s)`` energy representation), independently of the closed forms in
:mod:`brinkfourier.constitutive`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import constitutive as cst

Func2 = Callable[[np.ndarray, np.ndarray], np.ndarray]

THETA_BRACKET = (1e-6, 1e6)


class EntropyInversionError(ValueError):
    """Requested entropy lies outside ``s(rho, .)`` on the bracket."""


@dataclass(frozen=True)
class FreeEnergyModel:
    psi: Func2
    name: str = "model"
    psi_rho: Optional[Func2] = None
    psi_theta: Optional[Func2] = None


def d1(f: Callable[[np.ndarray], np.ndarray], x, h):
    """Fourth-order central first derivative with absolute step ``h``."""
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def d2(f, x, h):
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h)


def central(f, x, h):
    """Second-order central first derivative."""
    return (f(x + h) - f(x - h)) / (2 * h)


@dataclass
class DerivedLaws:
    model: FreeEnergyModel
    fd_step: float
    provenance: str
    invertible: bool = True
    min_s_theta: float = math.nan
    probe: tuple = field(default=(0.1, 10.0, 10), repr=False)

    def psi(self, rho, theta):
        return self.model.psi(np.asarray(rho, float), np.asarray(theta, float))

    def psi_theta(self, rho, theta):
        rho = np.asarray(rho, float)
        theta = np.asarray(theta, float)
        if self.model.psi_theta is not None:
            return self.model.psi_theta(rho, theta)
        return d1(lambda t: self.model.psi(rho, t), theta, self.fd_step * theta)

    def psi_rho(self, rho, theta):
        rho = np.asarray(rho, float)
        theta = np.asarray(theta, float)
        if self.model.psi_rho is not None:
            return self.model.psi_rho(rho, theta)
        return d1(lambda r: self.model.psi(r, theta), rho, self.fd_step * rho)

    def s(self, rho, theta):
        return -self.psi_theta(rho, theta)

    def e(self, rho, theta):
        theta = np.asarray(theta, float)
        return self.psi(rho, theta) - theta * self.psi_theta(rho, theta)

    def p(self, rho, theta):
        rho = np.asarray(rho, float)
        return rho * self.psi_rho(rho, theta) - self.psi(rho, theta)

    def s_theta(self, rho, theta):
        rho = np.asarray(rho, float)
        theta = np.asarray(theta, float)
        hs = self.fd_step * theta
        if self.model.psi_theta is not None:
            return -d1(lambda t: self.model.psi_theta(rho, t), theta, hs)
        return -d2(lambda t: self.model.psi(rho, t), theta, hs)

    def theta_from_entropy(self, rho: float, s_value: float,
                           bracket: tuple[float, float] = THETA_BRACKET) -> float:
        """Monotone bisection of ``s(rho, .) = s_value`` in log-temperature."""
        lo, hi = math.log(bracket[0]), math.log(bracket[1])
        s_lo = float(self.s(rho, math.exp(lo)))
        s_hi = float(self.s(rho, math.exp(hi)))
        if not (s_lo <= s_value <= s_hi):
            raise EntropyInversionError(
                f"s={s_value} outside [{s_lo:.6g}, {s_hi:.6g}] at rho={rho}"
            )
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if float(self.s(rho, math.exp(mid))) < s_value:
                lo = mid
            else:
                hi = mid
        return math.exp(0.5 * (lo + hi))

    def e1(self, rho: float, s_value: float) -> float:
        """Internal energy in entropy variables, via numeric inversion."""
        return float(self.e(rho, self.theta_from_entropy(rho, s_value)))


def derive_laws(model: FreeEnergyModel, h: float = 1e-4,
                probe: tuple = (0.1, 10.0, 10)) -> DerivedLaws:
    """Build the derived laws and probe entropy invertibility.

    ``probe = (lo, hi, n)`` is the log-spaced grid on which ``s_theta > 0``
    is checked; a failure is reported on the result, not raised, because
    degenerate models (``psi = 0``, ``psi`` linear in ``theta``) are still
    legitimate inputs for the other identities.
    """
    if not 1e-8 <= h <= 1e-2:
        raise ValueError(f"finite-difference step must lie in [1e-8, 1e-2], got {h}")
    analytic = model.psi_rho is not None and model.psi_theta is not None
    laws = DerivedLaws(model=model, fd_step=h,
                       provenance="analytic" if analytic else "finite-difference",
                       probe=probe)
    g = np.geomspace(probe[0], probe[1], probe[2])
    R, T = np.meshgrid(g, g, indexing="ij")
    st = np.asarray(laws.s_theta(R, T), float)
    laws.min_s_theta = float(np.min(st))
    laws.invertible = bool(np.all(st > 0))
    return laws


def ideal_gas_model(p: cst.ModelParams, analytic: bool = True) -> FreeEnergyModel:
    def psi(r, t):
        return p.k2 * t * r * np.log(r) - p.k1 * r * t * np.log(t)

    if not analytic:
        return FreeEnergyModel(psi=psi, name="ideal-gas (fd)")
    return FreeEnergyModel(
        psi=psi,
        name="ideal-gas",
        psi_rho=lambda r, t: p.k2 * t * (np.log(r) + 1.0) - p.k1 * t * np.log(t),
        psi_theta=lambda r, t: p.k2 * r * np.log(r) - p.k1 * r * (np.log(t) + 1.0),
    )


def pressure_split_residual(laws: DerivedLaws, rho_profile, theta_profile, h: float) -> float:
    """``max |dp/dx - rho d(psi_rho)/dx - s dtheta/dx|`` over interior samples.

    The profiles are samples on a uniform 1D grid of spacing ``h``; all
    x-derivatives use second-order central differences.
    """
    rho = np.asarray(rho_profile, float)
    theta = np.asarray(theta_profile, float)
    if rho.shape != theta.shape or rho.ndim != 1 or rho.size < 5:
        raise ValueError("profiles must be 1D, equal length, with at least 5 samples")
    if not (np.all(rho > 0) and np.all(theta > 0)):
        raise cst.ThermoDomainError("profiles must be strictly positive")

    def dx(f):
        return (f[2:] - f[:-2]) / (2 * h)

    pr = laws.p(rho, theta)
    psr = laws.psi_rho(rho, theta)
    s = laws.s(rho, theta)
    res = dx(pr) - rho[1:-1] * dx(psr) - s[1:-1] * dx(theta)
    return float(np.max(np.abs(res)))


def gibbs_residual(laws: DerivedLaws, rho: float, theta: float, h: float = 1e-5):
    """Residuals of the Gibbs relation in specific (per-mass) variables.

    With ``e_hat = e/rho`` and ``s_hat = s/rho`` the relation
    ``theta d(s_hat) = d(e_hat) + p d(1/rho)`` splits into

        r_theta = |theta d_theta(s_hat) - d_theta(e_hat)|
        r_rho   = |theta d_rho(s_hat) - d_rho(e_hat) + p/rho^2|

    both evaluated by central differences with relative step ``h``.
    """
    if not (rho > 0 and theta > 0):
        raise cst.ThermoDomainError("Gibbs residual needs rho, theta > 0")
    ht, hr = h * theta, h * rho

    def s_hat(r, t):
        return laws.s(r, t) / r

    def e_hat(r, t):
        return laws.e(r, t) / r

    r_theta = abs(theta * central(lambda t: s_hat(rho, t), theta, ht)
                  - central(lambda t: e_hat(rho, t), theta, ht))
    r_rho = abs(theta * central(lambda r: s_hat(r, theta), rho, hr)
                - central(lambda r: e_hat(r, theta), rho, hr)
                + laws.p(rho, theta) / rho**2)
    return float(r_theta), float(r_rho)


def entropy_variables_residual(laws, rho: float, s_value: float, h: float = 1e-4):
    """Check ``d_s e1 = theta`` and ``d_rho e1 = psi_rho`` in entropy variables.

    ``e1(rho, s) = e(rho, theta(rho, s))`` with ``theta`` from bisection.
    Central differences use absolute step ``h`` in ``s`` and ``h*rho`` in
    ``rho``.  Returns ``(r1, r2)``.
    """
    theta = laws.theta_from_entropy(rho, s_value)
    de_ds = (laws.e1(rho, s_value + h) - laws.e1(rho, s_value - h)) / (2 * h)
    hr = h * rho
    de_drho = (laws.e1(rho + hr, s_value) - laws.e1(rho - hr, s_value)) / (2 * hr)
    r1 = abs(de_ds - theta)
    r2 = abs(de_drho - float(laws.psi_rho(rho, theta)))
    return float(r1), float(r2)


# -- identity suite ----------------------------------------------------------
@dataclass
class IdentityCheck:
    model: str
    identity: str
    max_residual: float
    ratio: float  # residual ratio per step halving; nan for pointwise checks
    tolerance: float
    passed: bool

    @classmethod
    def columns(cls) -> list[str]:
        return list(cls.__dataclass_fields__)

    def as_row(self) -> list:
        return [getattr(self, c) for c in self.columns()]


MIN_RATIO = 3.5  # second-order residuals must shrink at least this much per halving


def van_der_waals_model(p: cst.ModelParams, a: float = 0.5, b: float = 0.01) -> FreeEnergyModel:
    """Ideal gas plus attraction ``-a rho^2`` and co-volume ``b`` (needs ``rho < 1/b``)."""

    def psi(r, t):
        return p.k2 * t * r * np.log(r / (1 - b * r)) - a * r * r - p.k1 * r * t * np.log(t)

    return FreeEnergyModel(
        psi=psi, name="van-der-waals",
        psi_rho=lambda r, t: (p.k2 * t * (np.log(r / (1 - b * r)) + 1 / (1 - b * r))
                              - 2 * a * r - p.k1 * t * np.log(t)),
        psi_theta=lambda r, t: p.k2 * r * np.log(r / (1 - b * r)) - p.k1 * r * (np.log(t) + 1),
    )


def polytropic_model(p: cst.ModelParams, K: float = 0.3, gamma: float = 5 / 3) -> FreeEnergyModel:
    """Ideal gas plus a cold polytropic part ``K rho^gamma / (gamma - 1)``."""

    def psi(r, t):
        return K * r**gamma / (gamma - 1) + p.k2 * t * r * np.log(r) - p.k1 * r * t * np.log(t)

    return FreeEnergyModel(
        psi=psi, name="polytropic",
        psi_rho=lambda r, t: (K * gamma * r ** (gamma - 1) / (gamma - 1)
                              + p.k2 * t * (np.log(r) + 1) - p.k1 * t * np.log(t)),
        psi_theta=lambda r, t: p.k2 * r * np.log(r) - p.k1 * r * (np.log(t) + 1),
    )


def corrupted_model(p: cst.ModelParams) -> FreeEnergyModel:
    """Ideal gas whose density partial drops a term; every detector should fire."""
    good = ideal_gas_model(p)
    return FreeEnergyModel(
        psi=good.psi, name="corrupted",
        psi_rho=lambda r, t: p.k2 * t * np.log(r) - p.k1 * t * np.log(t),
        psi_theta=good.psi_theta,
    )


def _pointwise(model, identity, res, tol):
    res = float(res)
    return IdentityCheck(model, identity, res, math.nan, tol, bool(res <= tol))


def _convergent(model, identity, coarse, fine):
    ratio = coarse / fine if fine > 0 else math.inf
    return IdentityCheck(model, identity, float(fine), float(ratio), MIN_RATIO,
                         bool(ratio >= MIN_RATIO))


def _rel(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def identity_suite(models=None, p: cst.ModelParams | None = None, seed: int = 0,
                   n_points: int = 10_000) -> list[IdentityCheck]:
    """Run every structural identity on each model.

    Pointwise checks use ``n_points`` random states in ``[0.05, 20]^2``;
    finite-difference checks compare residuals at two step sizes and pass
    when the ratio shows second-order decay.
    """
    p = p or cst.ModelParams.ideal()
    if models is None:
        models = [ideal_gas_model(p), ideal_gas_model(p, analytic=False),
                  van_der_waals_model(p), polytropic_model(p)]
    rng = np.random.default_rng(seed)
    R = rng.uniform(0.05, 20.0, n_points)
    T = rng.uniform(0.05, 20.0, n_points)
    few = slice(0, 20)
    out: list[IdentityCheck] = []
    for model in models:
        laws = derive_laws(model)
        name = model.name
        # supplied partials agree with differences of psi itself
        if model.psi_rho is not None:
            fd = FreeEnergyModel(model.psi)
            fd_laws = derive_laws(fd)
            out.append(_pointwise(name, "partials",
                                  max(_rel(laws.psi_rho(R, T), fd_laws.psi_rho(R, T)),
                                      _rel(laws.psi_theta(R, T), fd_laws.psi_theta(R, T))),
                                  1e-6))
        if name.startswith("ideal-gas"):  # closed forms available for comparison
            tol = 1e-10 if laws.provenance == "analytic" else 1e-6
            out.append(_pointwise(name, "entropy-law", _rel(laws.s(R, T), cst.entropy(R, T, p)), tol))
            out.append(_pointwise(name, "energy-law",
                                  _rel(laws.e(R, T), cst.internal_energy(R, T, p)), tol))
            out.append(_pointwise(name, "pressure-law", _rel(laws.p(R, T), cst.pressure(R, T, p)),
                                  tol))
            if math.isclose(p.k1, 1.5 * p.k2, rel_tol=1e-15):
                out.append(_pointwise(name, "energy-pressure-ratio",
                                      _rel(laws.e(R, T), 1.5 * laws.p(R, T)), tol))
        # round trip through the entropy inversion
        back = [laws.theta_from_entropy(r, float(laws.s(r, t))) for r, t in zip(R[few], T[few])]
        out.append(_pointwise(name, "entropy-inversion", _rel(back, T[few]), 1e-9))

        pts = list(zip(np.minimum(R[few], 5.0), np.minimum(T[few], 5.0)))
        gib = [max(max(gibbs_residual(laws, r, t, h)) for r, t in pts) for h in (2e-3, 1e-3)]
        out.append(_convergent(name, "gibbs", *gib))

        res0 = []
        for n in (64, 128):
            x = (np.arange(n) + 0.5) * (2 * math.pi / n)
            res0.append(pressure_split_residual(laws, 1 + 0.5 * np.sin(x), 1 + 0.3 * np.cos(x),
                                        2 * math.pi / n))
        out.append(_convergent(name, "pressure-split", *res0))

        pts_s = [(r, float(laws.s(r, t))) for r, t in pts[:5]]
        ev_res = [max(max(entropy_variables_residual(laws, r, s, h)) for r, s in pts_s) for h in (1e-2, 5e-3)]
        out.append(_convergent(name, "energy-entropy-variables", *ev_res))
    return out

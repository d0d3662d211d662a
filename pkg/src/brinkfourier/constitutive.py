"""Ideal-gas constitutive laws.

All functions are vectorized over numpy arrays and evaluated on the open
quadrant ``rho > 0, theta > 0``.  Points outside it raise
:class:`ThermoDomainError`; nothing is clamped.

The free energy is ``psi = k2*theta*rho*log(rho) - k1*rho*theta*log(theta)``
and everything else follows from it:

* entropy          ``s = -psi_theta``
* internal energy  ``e = psi + s*theta = k1*rho*theta``
* pressure         ``p = rho*psi_rho - psi = k2*rho*theta``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from types import SimpleNamespace

import numpy as np

__all__ = [
    "ModelParams",
    "ThermoDomainError",
    "ParameterError",
    "free_energy",
    "free_energy_drho",
    "entropy",
    "internal_energy",
    "pressure",
    "temperature_from_entropy",
    "internal_energy_from_entropy",
    "entropy_production_density",
    "helmholtz_functional",
]

_MAX_EXP = math.log(np.finfo(float).max)


class ThermoDomainError(ValueError):
    """A constitutive function was evaluated off the positive quadrant."""


class ParameterError(ValueError):
    """Model parameters violate a structural requirement."""


@dataclass(frozen=True)
class ModelParams:
    """Physical constants and regularization knobs.

    ``eps`` is the artificial viscosity in the continuity equation, ``delta``
    scales the temperature barrier/damping sources and ``gamma_exp`` is the
    density exponent of the regularizing term.
    """

    k1: float = 1.5
    k2: float = 1.0
    mu: float = 1.0
    nu: float = 1.0
    kappa: float = 1.0
    eps: float = 0.0
    delta: float = 0.0
    gamma_exp: float = 8.0
    enforce_ideal_ratio: bool = False

    def __post_init__(self):
        errors = self.validation_errors()
        if errors:
            raise ParameterError("; ".join(errors))

    def validation_errors(self) -> list[str]:
        errs = []
        for name in ("k1", "k2", "kappa"):
            if not getattr(self, name) > 0:
                errs.append(f"{name} must be > 0 (got {getattr(self, name)})")
        if not self.mu > 0:
            errs.append(
                f"mu must be > 0 (got {self.mu}): without the viscous Laplacian the "
                "Darcy limit loses the velocity-gradient bounds"
            )
        for name in ("nu", "eps", "delta"):
            if not getattr(self, name) >= 0:
                errs.append(f"{name} must be >= 0 (got {getattr(self, name)})")
        if not self.gamma_exp > 6:
            errs.append(
                f"gamma_exp must be > 6 (got {self.gamma_exp}): the vanishing-viscosity "
                "limit needs the density exponent above 6"
            )
        if self.enforce_ideal_ratio and not math.isclose(
            self.k1, 1.5 * self.k2, rel_tol=1e-15, abs_tol=0.0
        ):
            errs.append(
                f"enforce_ideal_ratio requires k1 = 1.5*k2 (got k1={self.k1}, k2={self.k2})"
            )
        return errs

    @classmethod
    def errors_for(cls, **values) -> list[str]:
        """Validation messages for ``values`` (defaults elsewhere) without raising."""
        ns = {f.name: f.default for f in fields(cls)}
        ns.update(values)
        return cls.validation_errors(SimpleNamespace(**ns))

    @classmethod
    def ideal(cls, k2: float = 1.0, **kw) -> "ModelParams":
        """Monatomic ideal gas, ``k1 = 3/2 k2`` exactly."""
        return cls(k1=1.5 * k2, k2=k2, enforce_ideal_ratio=True, **kw)

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)


def _check_quadrant(rho, theta):
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if not (np.all(rho > 0) and np.all(theta > 0)):
        raise ThermoDomainError(
            f"constitutive law evaluated at rho<=0 or theta<=0 "
            f"(min rho={np.min(rho):.3g}, min theta={np.min(theta):.3g})"
        )
    return rho, theta


def _scalar_out(x):
    return x.item() if isinstance(x, np.ndarray) and x.ndim == 0 else x


def free_energy(rho, theta, p: ModelParams):
    rho, theta = _check_quadrant(rho, theta)
    return _scalar_out(p.k2 * theta * rho * np.log(rho) - p.k1 * rho * theta * np.log(theta))


def free_energy_drho(rho, theta, p: ModelParams):
    """Analytic ``psi_rho = k2*theta*(log rho + 1) - k1*theta*log theta``."""
    rho, theta = _check_quadrant(rho, theta)
    return _scalar_out(p.k2 * theta * (np.log(rho) + 1.0) - p.k1 * theta * np.log(theta))


def entropy(rho, theta, p: ModelParams):
    rho, theta = _check_quadrant(rho, theta)
    return _scalar_out(-rho * (p.k2 * np.log(rho) - p.k1 * (np.log(theta) + 1.0)))


def internal_energy(rho, theta, p: ModelParams):
    rho, theta = _check_quadrant(rho, theta)
    return _scalar_out(p.k1 * rho * theta)


def pressure(rho, theta, p: ModelParams):
    rho, theta = _check_quadrant(rho, theta)
    return _scalar_out(p.k2 * rho * theta)


def _entropy_exponent(rho, s, p):
    rho = np.asarray(rho, dtype=float)
    s = np.asarray(s, dtype=float)
    if not np.all(rho > 0):
        raise ThermoDomainError("entropy inversion needs rho > 0")
    expo = s / (p.k1 * rho)
    big = expo + (p.k2 / p.k1 + 1.0) * np.log(rho)
    if np.any(big > _MAX_EXP - 2):
        raise OverflowError("s/(k1*rho) too large: temperature overflows float64")
    return rho, expo


def temperature_from_entropy(rho, s, p: ModelParams):
    """Invert ``s(rho, .)``: ``theta = rho**(k2/k1) * exp(s/(k1*rho) - 1)``."""
    rho, expo = _entropy_exponent(rho, s, p)
    return _scalar_out(rho ** (p.k2 / p.k1) * np.exp(expo - 1.0))


def internal_energy_from_entropy(rho, s, p: ModelParams):
    rho, expo = _entropy_exponent(rho, s, p)
    return _scalar_out(p.k1 * rho ** (1.0 + p.k2 / p.k1) * np.exp(expo - 1.0))


def entropy_production_density(theta, grad_u_sq, u_sq, rho, grad_theta_sq, p: ModelParams):
    """Local rate ``(mu|grad u|^2 + nu*rho|u|^2 + kappa|grad theta|^2/theta) / theta``."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(theta > 0):
        raise ThermoDomainError("entropy production needs theta > 0")
    return _scalar_out(
        (p.mu * np.asarray(grad_u_sq) + p.nu * np.asarray(rho) * np.asarray(u_sq)
         + p.kappa * np.asarray(grad_theta_sq) / theta) / theta
    )


def helmholtz_functional(rho, theta, theta_bar: float, p: ModelParams):
    """``H = e - theta_bar * s``, the functional controlled by the dissipation balance."""
    if not theta_bar > 0:
        raise ThermoDomainError("theta_bar must be > 0")
    return _scalar_out(
        np.asarray(internal_energy(rho, theta, p)) - theta_bar * np.asarray(entropy(rho, theta, p))
    )

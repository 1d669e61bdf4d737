"""Closed-form dispersion relations of the 1D diffusion and telegraph equations.

Plane waves ``exp(i(q z - w t))`` inserted into

    diffusion:  psi_t = d_dif psi_zz        =>  w = -i d_dif q^2
    telegraph:  psi_tt + (2/tau) psi_t = c^2 psi_zz
                                        =>  w^2 + (2i/tau) w - c^2 q^2 = 0

The telegraph quadratic splits at the critical wavenumber ``q0 = 1/(c*tau)``
(critical wavelength ``lambda0 = 2 pi c tau``):

- ``q > q0``  propagating: w = -i/tau ± sqrt(c^2 q^2 - 1/tau^2); the envelope
  decays with relaxation time tau and crests move at the phase velocity
  ``c_p = c sqrt(1 - 1/(c^2 tau^2 q^2))``.
- ``q < q0``  standing: two purely imaginary roots w = -i theta with
  ``theta = 1/tau ± sqrt(1/tau^2 - c^2 q^2)``, both damping rates positive.
- ``q = q0``  critical: double root w = -i/tau.

All roots have Im(w) <= 0: damping never amplifies.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

from .errors import OutOfRegime

CRITICAL_REL_TOL = 1e-9


class Regime(enum.Enum):
    PROPAGATING = "propagating"
    STANDING = "standing"
    CRITICAL = "critical"


@dataclass(frozen=True)
class DispersionRoot:
    """One complex root with its regime label and derived quantities.

    ``relaxation_time`` is ``-1/Im(w)`` (the damping time of this root);
    infinite when the root does not decay.  ``phase_velocity`` is
    ``|Re(w)|/q`` and only set for propagating roots.
    """

    omega: complex
    regime: Regime
    relaxation_time: float | None
    phase_velocity: float | None


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if not value > 0.0:
            raise ValueError(f"{name} must be > 0, got {value}")


def diffusion_dispersion(q, d_dif) -> DispersionRoot:
    """Root of the diffusion equation: a standing wave damped at rate d_dif*q^2."""
    _check_positive(d_dif=d_dif)
    if q < 0.0:
        raise ValueError(f"q must be >= 0, got {q}")
    theta = d_dif * q * q
    tau = math.inf if theta == 0.0 else 1.0 / theta
    return DispersionRoot(complex(0.0, -theta), Regime.STANDING, tau, None)


def critical_thresholds(c, tau_tel):
    """Critical wavenumber q0 = 1/(c*tau_tel) and wavelength lambda0 = 2 pi c tau_tel."""
    _check_positive(c=c, tau_tel=tau_tel)
    return {"q0": 1.0 / (c * tau_tel), "lambda0": 2.0 * math.pi * c * tau_tel}


def classify_regime(q, c, tau_tel, tol=CRITICAL_REL_TOL) -> Regime:
    """Which side of q0 the wavenumber falls on, with a relative tolerance band."""
    _check_positive(c=c, tau_tel=tau_tel)
    if q < 0.0:
        raise ValueError(f"q must be >= 0, got {q}")
    q0 = 1.0 / (c * tau_tel)
    if abs(q - q0) <= tol * q0:
        return Regime.CRITICAL
    return Regime.PROPAGATING if q > q0 else Regime.STANDING


def telegraph_dispersion(q, c, tau_tel, tol=CRITICAL_REL_TOL):
    """Both roots of w^2 + (2i/tau) w - c^2 q^2 = 0, sorted by Re desc, Im desc."""
    regime = classify_regime(q, c, tau_tel, tol)
    inv_tau = 1.0 / tau_tel
    if regime is Regime.CRITICAL:
        root = DispersionRoot(complex(0.0, -inv_tau), regime, tau_tel, None)
        return root, root
    disc = (c * q) ** 2 - inv_tau ** 2
    if regime is Regime.PROPAGATING:
        re = math.sqrt(disc)
        c_p = re / q
        return (DispersionRoot(complex(re, -inv_tau), regime, tau_tel, c_p),
                DispersionRoot(complex(-re, -inv_tau), regime, tau_tel, c_p))
    s = math.sqrt(-disc)
    theta_fast = inv_tau + s
    # product of the damping rates is c^2 q^2: avoids cancellation for q << q0
    theta_slow = (c * q) ** 2 / theta_fast
    return (DispersionRoot(complex(0.0, -theta_slow), regime,
                           math.inf if theta_slow == 0.0 else 1.0 / theta_slow,
                           None),
            DispersionRoot(complex(0.0, -theta_fast), regime,
                           1.0 / theta_fast, None))


def phase_velocity(q, c, tau_tel) -> float:
    """Propagating-regime phase velocity c*sqrt(1 - 1/(c^2 tau^2 q^2))."""
    _check_positive(c=c, tau_tel=tau_tel)
    if q < 0.0:
        raise ValueError(f"q must be >= 0, got {q}")
    if c * q <= 1.0 / tau_tel:
        raise OutOfRegime(
            f"phase velocity defined only for c*q > 1/tau_tel "
            f"(c*q={c * q:.6g}, 1/tau_tel={1.0 / tau_tel:.6g})")
    return c * math.sqrt(1.0 - 1.0 / (c * tau_tel * q) ** 2)


def telegraph_residual(omega, q, c, tau_tel) -> float:
    """|w^2 + (2i/tau) w - c^2 q^2|, the defect of a candidate root."""
    return abs(omega * omega + 2j * omega / tau_tel - (c * q) ** 2)


def modal_solution(q, c, tau_tel, u0, v0):
    """Closed-form time evolution of one spatial mode of the telegraph equation.

    Returns a callable ``t -> u(t)`` for initial amplitude ``u0`` and initial
    rate ``v0``, valid in every regime (uses the analytic continuation of the
    two-root superposition; the critical double root gets the secular form
    ``exp(-t/tau) (u0 + (v0 + u0/tau) t)``).
    """
    _check_positive(c=c, tau_tel=tau_tel)
    inv_tau = 1.0 / tau_tel
    disc = complex((c * q) ** 2 - inv_tau ** 2)
    s = cmath.sqrt(disc)
    if abs(s) * tau_tel < 1e-12:
        def critical(t):
            return math.exp(-inv_tau * t) * (u0 + (v0 + u0 * inv_tau) * t)
        return critical

    w1 = -1j * inv_tau + s   # as complex frequencies w = -i theta or ±Omega - i/tau
    w2 = -1j * inv_tau - s
    # u(t) = a exp(-i w1 t) + b exp(-i w2 t) with u(0)=u0, u'(0)=v0
    b = (v0 + 1j * w1 * u0) / (1j * (w1 - w2))
    a = u0 - b

    def general(t):
        return (a * cmath.exp(-1j * w1 * t) + b * cmath.exp(-1j * w2 * t)).real

    return general

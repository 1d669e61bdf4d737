"""Pointwise constitutive relations.

All operations are pure functions of a :class:`PointState` and a
:class:`~qcdyn.material.MaterialSpec`:

    sigma_par  = C : b_par + D : b_perp           (symmetric)
    sigma_perp = D^T : b_par + E : b_perp         (asymmetric, reported raw)
    p_par      = rho * v_par,  p_perp = rho * v_perp
    W          = 1/2 b_par:C:b_par + b_par:D:b_perp + 1/2 b_perp:E:b_perp
    T          = 1/2 rho (|v_par|^2 + |v_perp|^2)
    2R         = v_perp . friction . v_perp       (dissipation rate)
    f_fr       = -friction . v_perp               (= -dR/dv_perp)

``D^T`` denotes the pair-transposed coupling tensor: the phason stress picks
up ``D_klij b_par_kl``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .material import MaterialSpec


@dataclass(frozen=True)
class PointState:
    """Elastic distortions and elastic velocities at one material point."""

    beta_par: np.ndarray   # (n_par, n_par)
    beta_perp: np.ndarray  # (n_perp, n_par)
    v_par: np.ndarray      # (n_par,)
    v_perp: np.ndarray     # (n_perp,)

    @staticmethod
    def zero(dims) -> "PointState":
        p, r = dims.n_par, dims.n_perp
        return PointState(np.zeros((p, p)), np.zeros((r, p)),
                          np.zeros(p), np.zeros(r))


@dataclass(frozen=True)
class StressPair:
    sigma_par: np.ndarray
    sigma_perp: np.ndarray


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float            # J/m^3
    elastic: float            # J/m^3
    dissipation_rate: float   # W/m^3


def _validate(state: PointState, mat: MaterialSpec):
    p, r = mat.n_par, mat.n_perp
    checks = (("beta_par", state.beta_par, (p, p)),
              ("beta_perp", state.beta_perp, (r, p)),
              ("v_par", state.v_par, (p,)),
              ("v_perp", state.v_perp, (r,)))
    for name, arr, shape in checks:
        if np.shape(arr) != shape:
            raise ShapeMismatch(f"{name} must have shape {shape}, "
                                f"got {np.shape(arr)}")


def stresses(state: PointState, mat: MaterialSpec) -> StressPair:
    """Phonon and phason stress tensors by full double contraction."""
    _validate(state, mat)
    sigma_par = (np.einsum("ijkl,kl->ij", mat.c_tensor, state.beta_par)
                 + np.einsum("ijkl,kl->ij", mat.d_tensor, state.beta_perp))
    sigma_perp = (np.einsum("klij,kl->ij", mat.d_tensor, state.beta_par)
                  + np.einsum("ijkl,kl->ij", mat.e_tensor, state.beta_perp))
    return StressPair(sigma_par, sigma_perp)


def momenta(state: PointState, mat: MaterialSpec):
    """Momentum densities (rho*v_par, rho*v_perp)."""
    _validate(state, mat)
    return mat.rho * np.asarray(state.v_par), mat.rho * np.asarray(state.v_perp)


def energy_density(state: PointState, mat: MaterialSpec) -> EnergyBreakdown:
    """Kinetic and elastic energy densities plus the dissipation rate 2R."""
    _validate(state, mat)
    kinetic = 0.5 * mat.rho * (float(np.dot(state.v_par, state.v_par))
                               + float(np.dot(state.v_perp, state.v_perp)))
    bp, bq = state.beta_par, state.beta_perp
    elastic = (0.5 * float(np.einsum("ij,ijkl,kl->", bp, mat.c_tensor, bp))
               + float(np.einsum("ij,ijkl,kl->", bp, mat.d_tensor, bq))
               + 0.5 * float(np.einsum("ij,ijkl,kl->", bq, mat.e_tensor, bq)))
    # Route through friction @ v so that f_fr . v == -2R holds exactly.
    dissipation_rate = float(np.dot(mat.friction @ state.v_perp, state.v_perp))
    return EnergyBreakdown(kinetic, elastic, dissipation_rate)


def friction_force(v_perp, mat: MaterialSpec) -> np.ndarray:
    """Dissipative force density -friction . v_perp."""
    v_perp = np.asarray(v_perp, dtype=float)
    if v_perp.shape != (mat.n_perp,):
        raise ShapeMismatch(f"v_perp must have shape ({mat.n_perp},), "
                            f"got {v_perp.shape}")
    return -(mat.friction @ v_perp)

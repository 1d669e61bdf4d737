"""Asymptotic-limit comparison studies.

Two desk-scale runs demonstrate that the damped-wave (telegraph) phason model
degenerates to the established limits at extreme friction:

- ``wave_limit_study``: zero friction; the phason run must match the exact
  undamped single-mode wave solution ``sin(q x) cos(c q t)``.
- ``diffusion_limit_study``: friction so large that ``friction * dt / rho``
  is >= 1e3; after the fast transient (t > 5 tau_tel) the run must match the
  diffusion solution ``sin(q x) exp(-d q^2 t)`` with ``d = E / friction``.

Both references are closed forms evaluated independently of the integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .material import build_material, scalar_model, Dims
from .solver import Grid, SolverConfig, run, single_mode_state

WAVE_THRESHOLD = 1e-6
DIFFUSION_THRESHOLD = 0.02


@dataclass(frozen=True)
class LimitStudy:
    name: str
    rel_err: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.rel_err <= self.threshold


@dataclass(frozen=True)
class LimitsReport:
    wave: LimitStudy
    diffusion: LimitStudy

    @property
    def passed(self) -> bool:
        return self.wave.passed and self.diffusion.passed


def wave_limit_study(n=64, dt=1e-3, t_end=10.0) -> LimitStudy:
    """Zero-friction run against the exact undamped wave solution."""
    c = 1.0
    mat = scalar_model(c=c, tau_tel=math.inf, rho=1.0)
    grid = Grid(n, 2.0 * math.pi)
    q = 1.0
    state = single_mode_state(mat, grid, "perp", 0, 1, amplitude=1.0)
    steps = int(round(t_end / dt))
    cfg = SolverConfig(grid=grid, steps=steps, dt=dt,
                       snapshot_every=max(1, steps // 100), energy_every=0)
    result = run(state, mat, None, cfg)

    x = grid.axes()[0]
    norm_ref = 0.0
    err = 0.0
    for snap in result.snapshots:
        ref = np.sin(q * x) * math.cos(c * q * snap.t)
        err = max(err, float(np.linalg.norm(snap.fields["u_perp"][0] - ref)))
        norm_ref = max(norm_ref, float(np.linalg.norm(ref)))
    return LimitStudy("wave_limit", err / norm_ref, WAVE_THRESHOLD)


def diffusion_limit_study(n=32, dt=0.02, friction=5.0e4, k=8,
                          decay_target=0.5) -> LimitStudy:
    """Large-friction run against the diffusion solution with d = E/friction.

    Parameters are chosen so that ``friction * dt / rho >= 1e3`` while the
    wave part stays inside its CFL bound; the run lasts until the reference
    has decayed by ``exp(-decay_target)``.
    """
    rho = 1.0
    stiff = 1.0  # C = E = rho * c^2 with c = 1
    mat = build_material(Dims(1, 1), rho,
                         np.full((1, 1, 1, 1), stiff), np.zeros((1, 1, 1, 1)),
                         np.full((1, 1, 1, 1), stiff), np.full((1, 1), friction))
    assert friction * dt / rho >= 1e3
    grid = Grid(n, 2.0 * math.pi)
    q = float(k)
    d_dif = stiff / friction
    tau_tel = 2.0 * rho / friction

    t_end = decay_target / (d_dif * q * q)
    steps = int(round(t_end / dt))
    state = single_mode_state(mat, grid, "perp", 0, k, amplitude=1.0)
    cfg = SolverConfig(grid=grid, steps=steps, dt=dt,
                       snapshot_every=max(1, steps // 100), energy_every=0)
    result = run(state, mat, None, cfg)

    x = grid.axes()[0]
    rel_err = 0.0
    for snap in result.snapshots:
        if snap.t <= 5.0 * tau_tel:
            continue
        ref = np.sin(q * x) * math.exp(-d_dif * q * q * snap.t)
        diff = float(np.linalg.norm(snap.fields["u_perp"][0] - ref))
        rel_err = max(rel_err, diff / float(np.linalg.norm(ref)))
    return LimitStudy("diffusion_limit", rel_err, DIFFUSION_THRESHOLD)


def run_limit_studies() -> LimitsReport:
    return LimitsReport(wave=wave_limit_study(), diffusion=diffusion_limit_study())

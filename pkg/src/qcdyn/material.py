"""Material tensors for coupled phonon-phason elastodynamics.

A material couples a conventional displacement field living in the physical
("parallel") space of dimension ``n_par`` to an additional phason field
living in a "perpendicular" internal space of dimension ``n_perp``.  Four
tensors plus the mass density define it:

- ``C`` (n_par, n_par, n_par, n_par): phonon elastic constants, Pa.
- ``D`` (n_par, n_par, n_perp, n_par): phonon-phason coupling, Pa.
- ``E`` (n_perp, n_par, n_perp, n_par): phason elastic constants, Pa.
- ``friction`` (n_perp, n_perp): phason friction coefficients, Pa*s/m^2.

Index convention (matters when n_perp != n_par): the first index pair of a
rank-4 tensor is the equation/stress row space, the second pair is
(field component, gradient direction).  Gradient directions always range
over the parallel space, since fields depend on physical coordinates only.

Required symmetries::

    C_ijkl = C_klij = C_ijlk = C_jikl
    D_ijkl = D_jikl
    E_ijkl = E_klij
    friction_ij = friction_ji   (and no negative eigenvalues)

Units are SI throughout.  The friction tensor has the dimension of a mass
density per unit time; its inverse scale is the hydrodynamic phason kinetic
coefficient (units note only, not modeled).  The kinetic energy uses a single
mass density for both sectors; a distinct effective phason density would slot
into ``rho`` uses in :mod:`qcdyn.constitutive` and :mod:`qcdyn.solver` but is
intentionally not a parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    IndefiniteFriction,
    NonPositiveDensity,
    ShapeMismatch,
    SingularFriction,
    SymmetryViolation,
)

DEFAULT_SYM_TOL = 1e-12

# Symmetry orbits as tuples of axis permutations (numpy transpose orders).
_C_PERMS = (
    (1, 0, 2, 3),  # jikl
    (0, 1, 3, 2),  # ijlk
    (2, 3, 0, 1),  # klij
)
_D_PERMS = ((1, 0, 2, 3),)
_E_PERMS = ((2, 3, 0, 1),)


@dataclass(frozen=True)
class Dims:
    """Dimensions of the parallel (physical) and perpendicular spaces."""

    n_par: int
    n_perp: int

    def __post_init__(self):
        for name, n in (("n_par", self.n_par), ("n_perp", self.n_perp)):
            if not isinstance(n, (int, np.integer)) or not 1 <= n <= 3:
                raise ShapeMismatch(f"{name} must be an integer in 1..3, got {n!r}")


@dataclass(frozen=True)
class MaterialSpec:
    """Validated, immutable material: density plus the four tensors.

    Construct through :func:`build_material` or :func:`scalar_model`; those
    enforce shapes and symmetries and freeze the arrays.
    """

    dims: Dims
    rho: float
    c_tensor: np.ndarray
    d_tensor: np.ndarray
    e_tensor: np.ndarray
    friction: np.ndarray

    @property
    def n_par(self) -> int:
        return self.dims.n_par

    @property
    def n_perp(self) -> int:
        return self.dims.n_perp

    @property
    def is_damped(self) -> bool:
        return bool(np.any(self.friction != 0.0))


@dataclass(frozen=True)
class EnergyPdReport:
    is_pd: bool
    min_eigenvalue: float


def _orbit_average(entries, perms, tol, name):
    """Average ``entries`` over its symmetry orbit.

    Each orbit of index positions gets one mean value (computed in a fixed
    canonical order and written to every member), so the result satisfies
    the symmetries exactly.  Violations are measured entrywise against that
    mean, relative to the largest tensor entry; anything beyond ``tol`` is
    rejected with the worst offending index.
    """
    group = {tuple(range(entries.ndim))}
    frontier = list(group)
    while frontier:  # close the permutation group generated by `perms`
        new = []
        for g in frontier:
            for p in perms:
                composed = tuple(g[i] for i in p)
                if composed not in group:
                    group.add(composed)
                    new.append(composed)
        frontier = new

    out = np.empty_like(entries)
    scale = max(float(np.max(np.abs(entries))), 1.0)
    worst_idx, worst_dev = None, 0.0
    seen = set()
    for idx in np.ndindex(entries.shape):
        if idx in seen:
            continue
        orbit = sorted({tuple(idx[a] for a in g) for g in group})
        mean = math.fsum(entries[o] for o in orbit) / len(orbit)
        for o in orbit:
            dev = abs(entries[o] - mean)
            if dev > worst_dev:
                worst_idx, worst_dev = o, dev
            out[o] = mean
        seen.update(orbit)
    if worst_dev > tol * scale:
        raise SymmetryViolation(
            f"{name} violates its index symmetry at {worst_idx}: "
            f"deviation {worst_dev:.3e} exceeds {tol:.1e} * {scale:.3e}",
            index=worst_idx,
            magnitude=worst_dev,
        )
    return out


def _check_shape(arr, shape, name):
    if arr.shape != shape:
        raise ShapeMismatch(f"{name} must have shape {shape}, got {arr.shape}")


def _freeze(arr):
    arr = np.array(arr, dtype=float)
    arr.flags.writeable = False
    return arr


def build_material(dims, rho, c_entries, d_entries, e_entries, friction_entries,
                   sym_tol=DEFAULT_SYM_TOL) -> MaterialSpec:
    """Assemble and validate a :class:`MaterialSpec`.

    Parameters
    ----------
    dims : Dims
        Parallel/perpendicular space dimensions.
    rho : float
        Mass density, kg/m^3, strictly positive.
    c_entries, d_entries, e_entries : array_like
        Rank-4 tensor entries with the module-level shapes; entries violating
        a symmetry within ``sym_tol`` (relative) are averaged over the
        symmetry orbit, larger violations raise.
    friction_entries : array_like
        Symmetric (n_perp, n_perp) friction coefficients; must have no
        negative eigenvalues (the zero tensor is the undamped limit).
    sym_tol : float
        Relative symmetrization tolerance.

    Raises
    ------
    ShapeMismatch, SymmetryViolation, NonPositiveDensity, IndefiniteFriction
    """
    if not isinstance(dims, Dims):
        dims = Dims(*dims)
    rho = float(rho)
    if not math.isfinite(rho) or rho <= 0.0:
        raise NonPositiveDensity(f"rho must be finite and > 0, got {rho}")
    p, r = dims.n_par, dims.n_perp

    c = np.asarray(c_entries, dtype=float)
    d = np.asarray(d_entries, dtype=float)
    e = np.asarray(e_entries, dtype=float)
    fr = np.asarray(friction_entries, dtype=float)
    _check_shape(c, (p, p, p, p), "C")
    _check_shape(d, (p, p, r, p), "D")
    _check_shape(e, (r, p, r, p), "E")
    _check_shape(fr, (r, r), "friction")
    for name, arr in (("C", c), ("D", d), ("E", e), ("friction", fr)):
        if not np.all(np.isfinite(arr)):
            raise ShapeMismatch(f"{name} contains non-finite entries")

    c = _orbit_average(c, _C_PERMS, sym_tol, "C")
    d = _orbit_average(d, _D_PERMS, sym_tol, "D")
    e = _orbit_average(e, _E_PERMS, sym_tol, "E")
    fr = _orbit_average(fr, ((1, 0),), sym_tol, "friction")

    eigs = np.linalg.eigvalsh(fr)
    scale = max(float(np.max(np.abs(fr))), 1.0)
    if eigs[0] < -sym_tol * scale:
        raise IndefiniteFriction(
            f"friction tensor has negative eigenvalue {eigs[0]:.3e}")

    return MaterialSpec(dims, rho, _freeze(c), _freeze(d), _freeze(e), _freeze(fr))


def sym_identity_rank4(n) -> np.ndarray:
    """Identity on symmetric rank-2 tensors: (d_ik d_jl + d_il d_jk) / 2."""
    eye = np.eye(n)
    return 0.5 * (np.einsum("ik,jl->ijkl", eye, eye)
                  + np.einsum("il,jk->ijkl", eye, eye))


def identity_rank4(n_row, n_col) -> np.ndarray:
    """Identity pattern d_ik d_jl on (n_row, n_col) rank-2 arguments."""
    return np.einsum("ik,jl->ijkl", np.eye(n_row), np.eye(n_col))


def isotropic_c(n, lam, mu) -> np.ndarray:
    """Isotropic phonon stiffness lam*d_ij d_kl + mu*(d_ik d_jl + d_il d_jk)."""
    eye = np.eye(n)
    return (lam * np.einsum("ij,kl->ijkl", eye, eye)
            + 2.0 * mu * sym_identity_rank4(n))


def _sym_basis(n):
    """Orthonormal basis of symmetric n x n matrices, flattened to columns."""
    cols = []
    for i in range(n):
        for j in range(i, n):
            b = np.zeros((n, n))
            if i == j:
                b[i, i] = 1.0
            else:
                b[i, j] = b[j, i] = 1.0 / math.sqrt(2.0)
            cols.append(b.reshape(-1))
    return np.array(cols).T  # (n*n, n*(n+1)/2)


def energy_matrix(mat: MaterialSpec) -> np.ndarray:
    """Flatten the elastic energy density into a symmetric matrix.

    The quadratic form ``W = 1/2 b_par:C:b_par + b_par:D:b_perp
    + 1/2 b_perp:E:b_perp`` is expressed on the space sym(b_par) ⊕ b_perp:
    the C/D symmetries make W blind to the antisymmetric part of b_par, so
    the form is evaluated on an orthonormal basis of symmetric phonon
    distortions concatenated with all phason distortion components.
    """
    p, r = mat.n_par, mat.n_perp
    c_mat = mat.c_tensor.reshape(p * p, p * p)
    d_mat = mat.d_tensor.reshape(p * p, r * p)
    e_mat = mat.e_tensor.reshape(r * p, r * p)
    full = np.block([[c_mat, d_mat], [d_mat.T, e_mat]])
    basis = _sym_basis(p)
    q = np.zeros((p * p + r * p, basis.shape[1] + r * p))
    q[: p * p, : basis.shape[1]] = basis
    q[p * p :, basis.shape[1] :] = np.eye(r * p)
    reduced = q.T @ full @ q
    return 0.5 * (reduced + reduced.T)


def check_energy_pd(mat: MaterialSpec) -> EnergyPdReport:
    """Report positive definiteness of the elastic energy quadratic form."""
    eigs = np.linalg.eigvalsh(energy_matrix(mat))
    return EnergyPdReport(is_pd=bool(eigs[0] > 0.0), min_eigenvalue=float(eigs[0]))


def char_time_tensor(mat: MaterialSpec) -> np.ndarray:
    """Characteristic damping-time tensor ``2 * rho * friction^-1`` (seconds).

    Requires a strictly positive-definite friction tensor.
    """
    fr = mat.friction
    eigs = np.linalg.eigvalsh(fr)
    scale = max(float(np.max(np.abs(fr))), 1.0)
    if eigs[0] <= scale * 1e-14:
        raise SingularFriction(
            "characteristic damping time needs a strictly PD friction tensor "
            f"(min eigenvalue {eigs[0]:.3e})")
    tau = 2.0 * mat.rho * np.linalg.inv(fr)
    return 0.5 * (tau + tau.T)


def scalar_model(c, tau_tel, rho=1.0) -> MaterialSpec:
    """One-dimensional scalar material with wave speed ``c`` and damping time
    ``tau_tel``.

    Both sectors get stiffness ``rho*c^2`` with no cross coupling; the phason
    friction is ``2*rho/tau_tel`` so that the phason equation of motion is the
    plain telegraph equation ``u_tt + (2/tau_tel) u_t = c^2 u_xx``.
    ``tau_tel=math.inf`` gives the undamped wave limit (zero friction).
    """
    c = float(c)
    rho = float(rho)
    tau_tel = float(tau_tel)
    if c <= 0.0 or rho <= 0.0 or tau_tel <= 0.0 or math.isnan(tau_tel):
        raise ValueError("scalar_model needs c > 0, tau_tel > 0, rho > 0")
    stiff = rho * c * c
    friction = 0.0 if math.isinf(tau_tel) else 2.0 * rho / tau_tel
    one = np.full((1, 1, 1, 1), stiff)
    return build_material(Dims(1, 1), rho, one, np.zeros((1, 1, 1, 1)), one.copy(),
                          np.full((1, 1), friction))

"""Plane-wave symbol of the coupled phonon-phason operator and its branches.

For a plane wave ``exp(i(q.x - w t))`` the coupled equations of motion reduce
to the homogeneous system ``M(w, q) U = 0`` over the stacked polarization
``U = (u_par, u_perp)`` with

    M(w, q) = [[-rho w^2 I + Kpar(q),        Kc(q)              ],
               [ Kc(q)^T,  -rho w^2 I - i w friction + Kperp(q) ]]

where the stiffness blocks contract the gradient index pairs with q:
``Kpar_ik = C_ijkl q_j q_l``, ``Kc_ik = D_ijkl q_j q_l`` and
``Kperp_ik = E_ijkl q_j q_l``.  The admissible frequencies are the
2*(n_par+n_perp) roots of the quadratic eigenvalue problem det M(w, q) = 0,
solved here by first-companion linearization and a dense eigensolver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import EigensolverFailure, ShapeMismatch
from .material import MaterialSpec

RESIDUAL_RTOL = 1e-8


@dataclass(frozen=True)
class AcousticSymbol:
    """Stiffness blocks of the plane-wave symbol at one wavevector."""

    k_par: np.ndarray       # (n_par, n_par), symmetric
    k_coupling: np.ndarray  # (n_par, n_perp)
    k_perp: np.ndarray      # (n_perp, n_perp), symmetric
    friction: np.ndarray
    rho: float
    q: np.ndarray

    @property
    def size(self) -> int:
        return self.k_par.shape[0] + self.k_perp.shape[0]

    def stiffness(self) -> np.ndarray:
        """The full (symmetric) stiffness block [[Kpar, Kc], [Kc^T, Kperp]]."""
        return np.block([[self.k_par, self.k_coupling],
                         [self.k_coupling.T, self.k_perp]])

    def damping(self) -> np.ndarray:
        """Block-diagonal friction acting on the phason components."""
        n = self.size
        p = self.k_par.shape[0]
        b = np.zeros((n, n))
        b[p:, p:] = self.friction
        return b

    def matrix(self, omega) -> np.ndarray:
        """Evaluate M(w, q) at a complex frequency."""
        n = self.size
        return (-self.rho * omega ** 2 * np.eye(n)
                - 1j * omega * self.damping()
                + self.stiffness()).astype(complex)


@dataclass(frozen=True)
class BranchSet:
    """All roots and polarization modes at one wavevector.

    Roots are sorted by Re(w) descending, ties by Im(w) descending; modes are
    normalized so their largest-magnitude component is +1.
    """

    q: np.ndarray
    roots: np.ndarray    # (2N,) complex
    modes: np.ndarray    # (2N, N) complex, one row per root
    residuals: np.ndarray = field(repr=False)  # relative residual per root


def assemble_symbol(mat: MaterialSpec, q) -> AcousticSymbol:
    """Contract the gradient index pairs of C, D, E with the wavevector."""
    q = np.asarray(q, dtype=float)
    if q.shape != (mat.n_par,):
        raise ShapeMismatch(f"q must have shape ({mat.n_par},), got {q.shape}")
    k_par = np.einsum("ijkl,j,l->ik", mat.c_tensor, q, q)
    k_c = np.einsum("ijkl,j,l->ik", mat.d_tensor, q, q)
    k_perp = np.einsum("ijkl,j,l->ik", mat.e_tensor, q, q)
    return AcousticSymbol(k_par, k_c, k_perp, mat.friction, mat.rho, q)


def _normalize_mode(mode):
    idx = int(np.argmax(np.abs(mode)))
    pivot = mode[idx]
    if pivot == 0.0:
        return mode
    return mode / pivot


def solve_branches(mat: MaterialSpec, q) -> BranchSet:
    """All 2*(n_par+n_perp) branches at one wavevector.

    The quadratic pencil ``w^2 A2 + w A1 + A0`` with ``A2 = -rho I``,
    ``A1 = -i damping`` and ``A0 = stiffness`` is linearized to the 2N x 2N
    companion matrix ``[[0, I], [A0/rho, A1/rho]]`` acting on (U, wU).
    """
    sym = assemble_symbol(mat, q)
    n = sym.size
    companion = np.zeros((2 * n, 2 * n), dtype=complex)
    companion[:n, n:] = np.eye(n)
    companion[n:, :n] = sym.stiffness() / mat.rho
    companion[n:, n:] = -1j * sym.damping() / mat.rho
    try:
        vals, vecs = np.linalg.eig(companion)
    except np.linalg.LinAlgError as exc:
        raise EigensolverFailure(f"companion eigensolve failed at q={q}: {exc}")

    order = np.lexsort((-vals.imag, -vals.real))
    vals = vals[order]
    modes = np.array([_normalize_mode(vecs[:n, j]) for j in order])
    residuals = np.array([_relative_residual(sym, w, m)
                          for w, m in zip(vals, modes)])
    return BranchSet(sym.q, vals, modes, residuals)


def _relative_residual(sym, omega, mode):
    m = sym.matrix(omega)
    denom = np.linalg.norm(m) * np.linalg.norm(mode)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(m @ mode) / denom)


@dataclass(frozen=True)
class SweepResult:
    """Branch-continuous roots along a wavevector path.

    ``branches[i]`` is the BranchSet at ``q_path[i]`` with roots permuted so
    that index b stays on one continuous branch; ``failed[i]`` carries the
    error message for points whose eigensolve failed (their rows are NaN).
    """

    q_path: list
    branches: list
    failed: dict


def _match(prev, new):
    """Permutation aligning `new` roots to `prev`: greedy nearest neighbor,
    Hungarian assignment when the greedy choice is ambiguous."""
    dist = np.abs(new[None, :] - prev[:, None])  # (prev, new)
    perm = np.full(len(prev), -1)
    taken = np.zeros(len(new), dtype=bool)
    for i in range(len(prev)):
        free = np.flatnonzero(~taken)
        d = dist[i, free]
        best = np.argsort(d)
        if len(best) > 1 and d[best[0]] > 0 and d[best[1]] < 2.0 * d[best[0]]:
            rows, cols = scipy.optimize.linear_sum_assignment(dist)
            perm[rows] = cols
            return perm
        perm[i] = free[best[0]]
        taken[free[best[0]]] = True
    return perm


def sweep(mat: MaterialSpec, q_path) -> SweepResult:
    """Solve along a path of wavevectors, keeping branch indices continuous."""
    q_path = [np.asarray(q, dtype=float) for q in q_path]
    if not q_path:
        raise ValueError("q_path must not be empty")
    branches = []
    failed = {}
    prev_roots = None
    for i, q in enumerate(q_path):
        try:
            bs = solve_branches(mat, q)
        except EigensolverFailure as exc:
            n = 2 * (mat.n_par + mat.n_perp)
            nan_roots = np.full(n, np.nan + 1j * np.nan)
            bs = BranchSet(q, nan_roots,
                           np.full((n, n // 2), np.nan + 1j * np.nan),
                           np.full(n, np.nan))
            failed[i] = str(exc)
            branches.append(bs)
            continue
        if prev_roots is not None:
            perm = _match(prev_roots, bs.roots)
            bs = BranchSet(bs.q, bs.roots[perm], bs.modes[perm],
                           bs.residuals[perm])
        branches.append(bs)
        prev_roots = bs.roots
    return SweepResult(q_path, branches, failed)

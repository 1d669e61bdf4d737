"""Time-domain integration of the coupled phonon-phason equations of motion.

Compatible case (no plastic fields)::

    rho u_par_tt  = C:grad(grad(u_par)) + D:grad(grad(u_perp)) + f_par
    rho u_perp_tt + friction . u_perp_t
                  = D^T:grad(grad(u_par)) + E:grad(grad(u_perp)) + f_perp

The incompatible case adds plastic distortions and plastic velocities as
right-hand-side sources::

    phonon row:  + rho d/dt v_p_par  - C:div(beta_p_par) - D:div(beta_p_perp)
    phason row:  + rho d/dt v_p_perp + friction . v_p_perp
                 - D^T:div(beta_p_par) - E:div(beta_p_perp)

Grids are periodic, 1D or 2D.  Spatial derivatives are Fourier pseudo-spectral
(default) or 2nd-order central finite differences.  Time stepping is a
kick-drift-kick scheme, second order, symplectic in the undamped limit; the
friction term is treated with a trapezoidal implicit velocity solve (a small
n_perp x n_perp system, the same at every grid point), which makes the
damping unconditionally stable.  Writing ``h = dt``, ``K`` for the negative
spatial operator and ``B`` for the friction block::

    w_half  = w_n + (h/2rho)(-K u_n - B w_half + s_n)      (implicit in w_half)
    u_next  = u_n + h w_half
    w_next  = w_half + (h/2rho)(-K u_next - B w_half + s_next)

For zero sources the staggered energy ``E_{n+1/2} = rho/2 |w_half|^2
+ 1/2 u_n.K.u_next`` obeys ``E_{n+3/2} - E_{n+1/2} = -(h/4) s.B.s`` with
``s = w_{n+1/2} + w_{n+3/2}``, i.e. it never increases when the friction is
positive semi-definite; the run log carries it as ``audit_total`` next to the
instantaneous energies.

Initial value problems require both displacement and total velocity for both
sectors.  Time-dependent sources must be continuous in t; plastic velocities
need either an analytic time derivative or explicit opt-in to centered finite
differencing with the run's dt.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingSourceDerivative, NumericalBlowup, ShapeMismatch
from .material import MaterialSpec

CFL_SAFETY = 0.9


class Scheme(enum.Enum):
    SEMI_IMPLICIT = "semi_implicit"
    EXPLICIT = "explicit"


class Spatial(enum.Enum):
    SPECTRAL = "spectral"
    FD2 = "fd2"


@dataclass(frozen=True)
class Grid:
    """Periodic grid, 1 or 2 axes; at most 2048 (1D) or 256^2 (2D) points."""

    n: tuple
    length: tuple

    def __init__(self, n, length):
        n = tuple(int(v) for v in np.atleast_1d(n))
        length = tuple(float(v) for v in np.atleast_1d(length))
        if len(n) not in (1, 2) or len(length) != len(n):
            raise ShapeMismatch(f"grid needs 1 or 2 axes, got n={n}, length={length}")
        cap = 2048 if len(n) == 1 else 256
        for nv, lv in zip(n, length):
            if nv < 8 or nv > cap:
                raise ShapeMismatch(f"points per axis must be in 8..{cap}, got {nv}")
            if lv <= 0.0:
                raise ShapeMismatch(f"axis length must be > 0, got {lv}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "length", length)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple:
        return self.n

    @property
    def spacing(self) -> tuple:
        return tuple(l / n for l, n in zip(self.length, self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self):
        return tuple(np.arange(n) * h for n, h in zip(self.n, self.spacing))

    def meshgrid(self):
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))


@dataclass(frozen=True)
class SimState:
    """Displacements, total velocities and time on a grid."""

    u_par: np.ndarray
    u_perp: np.ndarray
    w_par: np.ndarray
    w_perp: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class SourceSet:
    """Body forces and plastic source fields as callables ``(x, t) -> array``.

    ``x`` is the tuple of meshgrid coordinate arrays.  Field shapes:
    forces/velocities ``(ncomp, *grid)``, plastic distortions
    ``(ncomp, n_par, *grid)``.  Any member may be None (treated as absent).
    If a plastic velocity is given, either supply its analytic time
    derivative (``v_p_*_dt``) or set ``fd_time_derivative=True`` to let the
    solver difference it in time with the run's dt.
    """

    f_par: object = None
    f_perp: object = None
    beta_p_par: object = None
    beta_p_perp: object = None
    v_p_par: object = None
    v_p_perp: object = None
    v_p_par_dt: object = None
    v_p_perp_dt: object = None
    fd_time_derivative: bool = False

    @property
    def has_plastic(self) -> bool:
        return any(s is not None for s in (self.beta_p_par, self.beta_p_perp,
                                           self.v_p_par, self.v_p_perp))

    def validate(self):
        for name, v, dv in (("v_p_par", self.v_p_par, self.v_p_par_dt),
                            ("v_p_perp", self.v_p_perp, self.v_p_perp_dt)):
            if v is not None and dv is None and not self.fd_time_derivative:
                raise MissingSourceDerivative(
                    f"{name} given without {name}_dt; pass the analytic "
                    "derivative or set fd_time_derivative=True")


@dataclass(frozen=True)
class SolverConfig:
    grid: Grid
    steps: int
    dt: float | None = None          # None -> stability bound ("auto")
    scheme: Scheme = Scheme.SEMI_IMPLICIT
    spatial: Spatial = Spatial.SPECTRAL
    probes: tuple = ()
    snapshot_every: int = 0
    energy_every: int = 1


@dataclass(frozen=True)
class Snapshot:
    step: int
    t: float
    fields: dict


@dataclass(frozen=True)
class EnergyReport:
    kinetic: float
    elastic: float
    dissipated_cumulative: float
    balance_residual: float


@dataclass(frozen=True)
class RunResult:
    final_state: SimState
    dt: float
    times: np.ndarray
    probe_columns: list
    probe_data: np.ndarray
    energy_columns: list
    energy_data: np.ndarray
    snapshots: list = field(repr=False)


# ---------------------------------------------------------------------------
# spatial operators


class SpatialOperator:
    """Periodic spatial derivatives contracted with the material tensors.

    Gradient directions range over the parallel space; directions beyond the
    grid dimension contribute nothing (fields do not vary along them), so the
    grid dimension must not exceed n_par.
    """

    def __init__(self, mat: MaterialSpec, grid: Grid, spatial: Spatial):
        if grid.dim > mat.n_par:
            raise ShapeMismatch(
                f"grid dim {grid.dim} exceeds parallel dimension {mat.n_par}")
        self.mat = mat
        self.grid = grid
        self.spatial = spatial
        self._axes = tuple(range(-grid.dim, 0))
        if spatial is Spatial.SPECTRAL:
            ks = [2.0 * math.pi * np.fft.fftfreq(n, d=h)
                  for n, h in zip(grid.n, grid.spacing)]
            kk = np.meshgrid(*ks, indexing="ij")
            d = grid.dim
            c, dt_, e = mat.c_tensor, mat.d_tensor, mat.e_tensor
            self._kk = kk
            # Symbol fields K[i, k, *grid] = T_ijkl k_j k_l over resolved axes.
            self._kp = sum(np.multiply.outer(c[:, j, :, l], kk[j] * kk[l])
                           for j in range(d) for l in range(d))
            self._kc = sum(np.multiply.outer(dt_[:, j, :, l], kk[j] * kk[l])
                           for j in range(d) for l in range(d))
            self._ke = sum(np.multiply.outer(e[:, j, :, l], kk[j] * kk[l])
                           for j in range(d) for l in range(d))
            self._kct = np.swapaxes(self._kc, 0, 1)

    # -- low-level derivatives ------------------------------------------------

    def _fft(self, f):
        return np.fft.fftn(f, axes=self._axes)

    def _ifft(self, f):
        return np.fft.ifftn(f, axes=self._axes).real

    def _d1_fd(self, f, axis):
        h = self.grid.spacing[axis]
        a = axis - self.grid.dim  # negative axis into the trailing grid dims
        return (np.roll(f, -1, axis=a) - np.roll(f, 1, axis=a)) / (2.0 * h)

    def _d2_fd(self, f, ax1, ax2):
        if ax1 == ax2:
            h = self.grid.spacing[ax1]
            a = ax1 - self.grid.dim
            return (np.roll(f, -1, axis=a) - 2.0 * f + np.roll(f, 1, axis=a)) / (h * h)
        return self._d1_fd(self._d1_fd(f, ax1), ax2)

    def gradient(self, u) -> np.ndarray:
        """d_l u_k for all parallel directions l; zero beyond the grid dim."""
        ncomp = u.shape[0]
        out = np.zeros((ncomp, self.mat.n_par) + self.grid.shape)
        if self.spatial is Spatial.SPECTRAL:
            uh = self._fft(u)
            for l in range(self.grid.dim):
                out[:, l] = self._ifft(1j * self._kk[l] * uh)
        else:
            for l in range(self.grid.dim):
                out[:, l] = self._d1_fd(u, l)
        return out

    # -- tensor-contracted operators -------------------------------------------

    def div_stress(self, u_par, u_perp):
        """(C:dd u_par + D:dd u_perp, D^T:dd u_par + E:dd u_perp)."""
        if self.spatial is Spatial.SPECTRAL:
            up_h, uq_h = self._fft(u_par), self._fft(u_perp)
            ell_par = -self._ifft(np.einsum("ik...,k...->i...", self._kp, up_h)
                                  + np.einsum("ik...,k...->i...", self._kc, uq_h))
            ell_perp = -self._ifft(np.einsum("ik...,k...->i...", self._kct, up_h)
                                   + np.einsum("ik...,k...->i...", self._ke, uq_h))
            return ell_par, ell_perp
        d = self.grid.dim
        c, dt_, e = self.mat.c_tensor, self.mat.d_tensor, self.mat.e_tensor
        ell_par = np.zeros_like(u_par)
        ell_perp = np.zeros_like(u_perp)
        for j in range(d):
            for l in range(d):
                dd_par = self._d2_fd(u_par, j, l)
                dd_perp = self._d2_fd(u_perp, j, l)
                ell_par += (np.einsum("ik,k...->i...", c[:, j, :, l], dd_par)
                            + np.einsum("ik,k...->i...", dt_[:, j, :, l], dd_perp))
                ell_perp += (np.einsum("ki,k...->i...", dt_[:, l, :, j], dd_par)
                             + np.einsum("ik,k...->i...", e[:, j, :, l], dd_perp))
        return ell_par, ell_perp

    def div_plastic(self, beta_par, beta_perp):
        """Divergence of the plastic stress contributions.

        Returns (C_ijkl d_j b_par_kl + D_ijkl d_j b_perp_kl,
                 D_klij d_j b_par_kl + E_ijkl d_j b_perp_kl); either argument
        may be None.
        """
        p, r = self.mat.n_par, self.mat.n_perp
        c, dt_, e = self.mat.c_tensor, self.mat.d_tensor, self.mat.e_tensor
        g_par = np.zeros((p,) + self.grid.shape)
        g_perp = np.zeros((r,) + self.grid.shape)
        for j in range(self.grid.dim):
            if beta_par is not None:
                db = self._deriv_field(beta_par, j)
                g_par += np.einsum("ikl,kl...->i...", c[:, j], db)
                g_perp += np.einsum("kli,kl...->i...", dt_[:, :, :, j], db)
            if beta_perp is not None:
                db = self._deriv_field(beta_perp, j)
                g_par += np.einsum("ikl,kl...->i...", dt_[:, j], db)
                g_perp += np.einsum("ikl,kl...->i...", e[:, j], db)
        return g_par, g_perp

    def _deriv_field(self, f, axis):
        if self.spatial is Spatial.SPECTRAL:
            return self._ifft(1j * self._kk[axis] * self._fft(f))
        return self._d1_fd(f, axis)


# ---------------------------------------------------------------------------
# stability


def _unit_directions(dim, n_samples=64):
    if dim == 1:
        return [np.array([1.0])]
    ang = np.linspace(0.0, math.pi, n_samples, endpoint=False)
    return [np.array([math.cos(a), math.sin(a)]) for a in ang]


def stability_bound(mat: MaterialSpec, grid: Grid,
                    spatial: Spatial = Spatial.SPECTRAL) -> float:
    """Largest stable time step for the explicit wave part (CFL).

    ``dt_max = safety * h_min / (c_max * sqrt(dim))`` with
    ``c_max = sqrt(lambda_max / rho)``, ``lambda_max`` the largest eigenvalue
    of the stiffness block of the plane-wave symbol over unit wavevectors in
    the resolved directions.  The Spectral bound carries the extra factor
    2/pi (its largest resolved wavenumber is pi/h instead of 2/h).
    """
    from .dispersion_aniso import assemble_symbol

    lam_max = 0.0
    for qhat in _unit_directions(grid.dim):
        q = np.zeros(mat.n_par)
        q[: grid.dim] = qhat
        sym = assemble_symbol(mat, q)
        lam_max = max(lam_max, float(np.linalg.eigvalsh(sym.stiffness())[-1]))
    c_max = math.sqrt(lam_max / mat.rho)
    if c_max == 0.0:
        return math.inf
    bound = CFL_SAFETY * min(grid.spacing) / (c_max * math.sqrt(grid.dim))
    if spatial is Spatial.SPECTRAL:
        bound *= 2.0 / math.pi
    return bound


# ---------------------------------------------------------------------------
# sources


class _SourceSampler:
    """Evaluates a SourceSet on the grid at arbitrary times."""

    def __init__(self, sources: SourceSet, mat, grid, op, dt):
        sources.validate()
        self.src = sources
        self.mat = mat
        self.grid = grid
        self.op = op
        self.dt = dt
        self.x = grid.meshgrid()

    def _eval(self, f, t):
        return None if f is None else np.asarray(f(self.x, t), dtype=float)

    def v_p_perp(self, t):
        return self._eval(self.src.v_p_perp, t)

    def v_p_par(self, t):
        return self._eval(self.src.v_p_par, t)

    def _vdot(self, v, vdot, t):
        if v is None:
            return None
        if vdot is not None:
            return np.asarray(vdot(self.x, t), dtype=float)
        return (self._eval(v, t + self.dt) - self._eval(v, t - self.dt)) / (2.0 * self.dt)

    def accelerations(self, t):
        """Source contributions (s_par, s_perp) to the two force densities."""
        src = self.src
        s_par = None
        s_perp = None

        f_par = self._eval(src.f_par, t)
        f_perp = self._eval(src.f_perp, t)
        if f_par is not None:
            s_par = f_par.copy()
        if f_perp is not None:
            s_perp = f_perp.copy()

        if src.has_plastic:
            bp = self._eval(src.beta_p_par, t)
            bq = self._eval(src.beta_p_perp, t)
            if bp is not None or bq is not None:
                g_par, g_perp = self.op.div_plastic(bp, bq)
                s_par = g_par * -1.0 if s_par is None else s_par - g_par
                s_perp = g_perp * -1.0 if s_perp is None else s_perp - g_perp
            vdot_par = self._vdot(src.v_p_par, src.v_p_par_dt, t)
            if vdot_par is not None:
                term = self.mat.rho * vdot_par
                s_par = term if s_par is None else s_par + term
            vdot_perp = self._vdot(src.v_p_perp, src.v_p_perp_dt, t)
            vp_perp = self.v_p_perp(t)
            if vdot_perp is not None:
                term = self.mat.rho * vdot_perp
                s_perp = term if s_perp is None else s_perp + term
            if vp_perp is not None:
                term = np.einsum("ab,b...->a...", self.mat.friction, vp_perp)
                s_perp = term if s_perp is None else s_perp + term
        return s_par, s_perp

    def forces(self, t):
        return self._eval(self.src.f_par, t), self._eval(self.src.f_perp, t)


_EMPTY_SOURCES = SourceSet()


# ---------------------------------------------------------------------------
# stepping


def _check_state(state: SimState, mat: MaterialSpec, grid: Grid):
    p, r = mat.n_par, mat.n_perp
    want = {"u_par": (p,) + grid.shape, "u_perp": (r,) + grid.shape,
            "w_par": (p,) + grid.shape, "w_perp": (r,) + grid.shape}
    for name, shape in want.items():
        arr = getattr(state, name)
        if np.shape(arr) != shape:
            raise ShapeMismatch(f"{name} must have shape {shape}, got {np.shape(arr)}")


def zero_state(mat: MaterialSpec, grid: Grid) -> SimState:
    p, r = mat.n_par, mat.n_perp
    return SimState(np.zeros((p,) + grid.shape), np.zeros((r,) + grid.shape),
                    np.zeros((p,) + grid.shape), np.zeros((r,) + grid.shape), 0.0)


def single_mode_state(mat: MaterialSpec, grid: Grid, sector, component,
                      k_index, amplitude=1.0, phase=0.0, omega=None) -> SimState:
    """One Fourier mode in one sector.

    ``u = A sin(q.x + phase)`` with ``q = 2 pi k / L`` per axis.  With
    ``omega=None`` the initial velocity is zero (a standing start); passing a
    complex branch frequency ``omega = Omega - i/tau`` launches the pure
    branch ``A e^{Im(omega) t} sin(q.x - Re(omega) t + phase)``.
    """
    state = zero_state(mat, grid)
    k_index = np.atleast_1d(k_index)
    q = np.array([2.0 * math.pi * k / L for k, L in zip(k_index, grid.length)])
    x = grid.meshgrid()
    arg = sum(qi * xi for qi, xi in zip(q, x)) + phase
    u = amplitude * np.sin(arg)
    if omega is None:
        w = np.zeros_like(u)
    else:
        w = amplitude * (omega.imag * np.sin(arg) - omega.real * np.cos(arg))
    fields = {"u_par": state.u_par.copy(), "u_perp": state.u_perp.copy(),
              "w_par": state.w_par.copy(), "w_perp": state.w_perp.copy()}
    fields[f"u_{sector}"][component] = u
    fields[f"w_{sector}"][component] = w
    return SimState(t=0.0, **fields)


def gaussian_state(mat: MaterialSpec, grid: Grid, sector, component,
                   center, width, amplitude=1.0) -> SimState:
    """Gaussian displacement bump (not periodically wrapped), zero velocity."""
    state = zero_state(mat, grid)
    x = grid.meshgrid()
    center = np.atleast_1d(center)
    r2 = sum((xi - ci) ** 2 for xi, ci in zip(x, center))
    u = amplitude * np.exp(-r2 / (2.0 * width * width))
    fields = {"u_par": state.u_par.copy(), "u_perp": state.u_perp.copy(),
              "w_par": state.w_par.copy(), "w_perp": state.w_perp.copy()}
    fields[f"u_{sector}"][component] = u
    return SimState(t=0.0, **fields)


def _advance(state, mat, cfg, op, sampler, h):
    """One kick-drift-kick step; returns (new_state, w_par_half, w_perp_half)."""
    rho = mat.rho
    half = h / (2.0 * rho)
    fr = mat.friction
    semi = cfg.scheme is Scheme.SEMI_IMPLICIT

    ell_par, ell_perp = op.div_stress(state.u_par, state.u_perp)
    s_par, s_perp = sampler.accelerations(state.t) if sampler else (None, None)
    rhs_par = ell_par if s_par is None else ell_par + s_par
    rhs_perp = ell_perp if s_perp is None else ell_perp + s_perp

    w_par_half = state.w_par + half * rhs_par
    if semi:
        minv = np.linalg.inv(np.eye(mat.n_perp) + half * fr)
        w_perp_half = np.einsum("ab,b...->a...", minv,
                                state.w_perp + half * rhs_perp)
    else:
        w_perp_half = state.w_perp + half * (
            rhs_perp - np.einsum("ab,b...->a...", fr, state.w_perp))

    u_par = state.u_par + h * w_par_half
    u_perp = state.u_perp + h * w_perp_half
    t_next = state.t + h

    ell_par, ell_perp = op.div_stress(u_par, u_perp)
    s_par, s_perp = sampler.accelerations(t_next) if sampler else (None, None)
    rhs_par = ell_par if s_par is None else ell_par + s_par
    rhs_perp = ell_perp if s_perp is None else ell_perp + s_perp

    w_par = w_par_half + half * rhs_par
    w_perp = w_perp_half + half * (
        rhs_perp - np.einsum("ab,b...->a...", fr, w_perp_half))

    new = SimState(u_par, u_perp, w_par, w_perp, t_next)
    return new, w_par_half, w_perp_half, ell_par, ell_perp


def _resolve_dt(mat, cfg):
    if cfg.dt is not None:
        dt = float(cfg.dt)
        if dt <= 0.0:
            raise ValueError(f"dt must be > 0, got {dt}")
        if cfg.scheme is Scheme.EXPLICIT:
            bound = stability_bound(mat, cfg.grid, cfg.spatial)
            if dt > bound:
                raise ValueError(
                    f"dt={dt:.6g} exceeds the stability bound {bound:.6g} "
                    "for the explicit scheme")
        return dt
    return stability_bound(mat, cfg.grid, cfg.spatial)


def step_compatible(state: SimState, mat: MaterialSpec, sources, cfg: SolverConfig) -> SimState:
    """Advance one step; sources may carry body forces only."""
    sources = sources or _EMPTY_SOURCES
    if sources.has_plastic:
        raise ShapeMismatch("step_compatible does not accept plastic sources; "
                            "use step_incompatible")
    return step_incompatible(state, mat, sources, cfg)


def step_incompatible(state: SimState, mat: MaterialSpec, sources, cfg: SolverConfig) -> SimState:
    """Advance one step with the full source set (forces and plastic fields)."""
    sources = sources or _EMPTY_SOURCES
    _check_state(state, mat, cfg.grid)
    dt = _resolve_dt(mat, cfg)
    op = SpatialOperator(mat, cfg.grid, cfg.spatial)
    sampler = _SourceSampler(sources, mat, cfg.grid, op, dt) \
        if _has_any_source(sources) else None
    new, *_ = _advance(state, mat, cfg, op, sampler, dt)
    for name in ("u_par", "u_perp", "w_par", "w_perp"):
        if not np.all(np.isfinite(getattr(new, name))):
            raise NumericalBlowup(f"{name} became non-finite", step=None)
    return new


def _has_any_source(sources: SourceSet) -> bool:
    return any(s is not None for s in (sources.f_par, sources.f_perp)) \
        or sources.has_plastic


def _instant_energies(state, mat, grid, op, sampler):
    """Instantaneous (kinetic, elastic) integrated over the domain."""
    dv = grid.cell_volume
    v_par, v_perp = state.w_par, state.w_perp
    if sampler is not None:
        vp = sampler.v_p_par(state.t)
        vq = sampler.v_p_perp(state.t)
        if vp is not None:
            v_par = v_par - vp
        if vq is not None:
            v_perp = v_perp - vq
    kinetic = 0.5 * mat.rho * dv * float(np.sum(v_par * v_par)
                                         + np.sum(v_perp * v_perp))
    beta_par = op.gradient(state.u_par)
    beta_perp = op.gradient(state.u_perp)
    if sampler is not None:
        bp = sampler._eval(sampler.src.beta_p_par, state.t)
        bq = sampler._eval(sampler.src.beta_p_perp, state.t)
        if bp is not None:
            beta_par = beta_par - bp
        if bq is not None:
            beta_perp = beta_perp - bq
    c, d, e = mat.c_tensor, mat.d_tensor, mat.e_tensor
    density = (0.5 * np.einsum("ijkl,ij...,kl...->...", c, beta_par, beta_par)
               + np.einsum("ijkl,ij...,kl...->...", d, beta_par, beta_perp)
               + 0.5 * np.einsum("ijkl,ij...,kl...->...", e, beta_perp, beta_perp))
    elastic = dv * float(np.sum(density))
    return kinetic, elastic


def energy_report(state: SimState, mat: MaterialSpec, grid: Grid,
                  sources=None, spatial=Spatial.SPECTRAL,
                  dissipated_cumulative=0.0, work_cumulative=0.0,
                  initial_total=None) -> EnergyReport:
    """Instantaneous energy breakdown of a state.

    With the run's accumulated dissipation/work and the initial total energy,
    also reports the cumulative balance residual
    ``|(T+W - E0) + dissipated - work|`` normalized by the energy scale.
    """
    op = SpatialOperator(mat, grid, spatial)
    sampler = None
    if sources is not None and _has_any_source(sources):
        sampler = _SourceSampler(sources, mat, grid, op, dt=1.0)
    kinetic, elastic = _instant_energies(state, mat, grid, op, sampler)
    residual = math.nan
    if initial_total is not None:
        total = kinetic + elastic
        scale = max(abs(initial_total), abs(total), 1e-300)
        residual = abs((total - initial_total) + dissipated_cumulative
                       - work_cumulative) / scale
    return EnergyReport(kinetic, elastic, dissipated_cumulative, residual)


ENERGY_COLUMNS = ["step", "t", "kinetic", "elastic", "total", "audit_total",
                  "dissipated_cumulative", "work_cumulative",
                  "balance_residual"]


def _probe_columns(mat, probes):
    cols = ["t"]
    for ip in range(len(probes)):
        for name, ncomp in (("u_par", mat.n_par), ("u_perp", mat.n_perp),
                            ("w_par", mat.n_par), ("w_perp", mat.n_perp)):
            cols.extend(f"p{ip}_{name}_{c}" for c in range(ncomp))
    return cols


def _probe_row(state, t, probes):
    row = [t]
    for pt in probes:
        idx = (slice(None),) + tuple(pt)
        for name in ("u_par", "u_perp", "w_par", "w_perp"):
            row.extend(np.asarray(getattr(state, name)[idx]).ravel())
    return row


def run(initial: SimState, mat: MaterialSpec, sources, cfg: SolverConfig) -> RunResult:
    """Integrate ``cfg.steps`` steps, recording probes, energies and snapshots.

    Deterministic: identical inputs give bit-identical outputs.
    """
    sources = sources or _EMPTY_SOURCES
    _check_state(initial, mat, cfg.grid)
    dt = _resolve_dt(mat, cfg)
    op = SpatialOperator(mat, cfg.grid, cfg.spatial)
    sampler = _SourceSampler(sources, mat, cfg.grid, op, dt) \
        if _has_any_source(sources) else None
    grid = cfg.grid
    dv = grid.cell_volume
    probes = [tuple(np.atleast_1d(p)) for p in cfg.probes]

    probe_cols = _probe_columns(mat, probes)
    probe_rows = [_probe_row(initial, initial.t, probes)]
    energy_rows = []
    snapshots = []

    kin, ela = _instant_energies(initial, mat, grid, op, sampler)
    total0 = kin + ela
    energy_scale = max(abs(total0), 1e-300)
    energy_rows.append([0, initial.t, kin, ela, kin + ela, kin + ela, 0.0, 0.0, 0.0])

    def snap(state, step):
        snapshots.append(Snapshot(step, state.t, {
            "u_par": state.u_par.copy(), "u_perp": state.u_perp.copy(),
            "w_par": state.w_par.copy(), "w_perp": state.w_perp.copy()}))

    if cfg.snapshot_every > 0:
        snap(initial, 0)

    state = initial
    diss_cum = 0.0
    work_cum = 0.0
    prev_total = total0
    for step in range(1, cfg.steps + 1):
        prev = state
        state, w_par_half, w_perp_half, ell_par_next, ell_perp_next = _advance(
            state, mat, cfg, op, sampler, dt)
        for name in ("u_par", "u_perp", "w_par", "w_perp"):
            if not np.all(np.isfinite(getattr(state, name))):
                raise NumericalBlowup(f"{name} became non-finite", step=step)

        t_mid = prev.t + 0.5 * dt
        v_perp_mid = w_perp_half
        if sampler is not None:
            vq = sampler.v_p_perp(t_mid)
            if vq is not None:
                v_perp_mid = w_perp_half - vq
        diss_cum += dt * dv * float(np.sum(np.einsum(
            "a...,ab,b...->...", v_perp_mid, mat.friction, v_perp_mid)))
        if sampler is not None:
            f_par, f_perp = sampler.forces(t_mid)
            if f_par is not None:
                work_cum += dt * dv * float(np.sum(f_par * w_par_half))
            if f_perp is not None:
                work_cum += dt * dv * float(np.sum(f_perp * w_perp_half))

        probe_rows.append(_probe_row(state, state.t, probes))
        if cfg.energy_every > 0 and (step % cfg.energy_every == 0
                                     or step == cfg.steps):
            kin, ela = _instant_energies(state, mat, grid, op, sampler)
            total = kin + ela
            kin_half = 0.5 * mat.rho * dv * float(
                np.sum(w_par_half * w_par_half) + np.sum(w_perp_half * w_perp_half))
            ela_audit = -0.5 * dv * float(
                np.sum(prev.u_par * ell_par_next) + np.sum(prev.u_perp * ell_perp_next))
            energy_scale = max(energy_scale, abs(total))
            residual = abs((total - prev_total) + (diss_cum - _last(energy_rows, 6))
                           - (work_cum - _last(energy_rows, 7))) / energy_scale
            energy_rows.append([step, state.t, kin, ela, total,
                                kin_half + ela_audit, diss_cum, work_cum, residual])
            prev_total = total
        if cfg.snapshot_every > 0 and (step % cfg.snapshot_every == 0
                                       or step == cfg.steps):
            snap(state, step)

    return RunResult(
        final_state=state, dt=dt,
        times=np.array([r[0] for r in probe_rows]),
        probe_columns=probe_cols,
        probe_data=np.array(probe_rows),
        energy_columns=list(ENERGY_COLUMNS),
        energy_data=np.array(energy_rows),
        snapshots=snapshots)


def _last(rows, col):
    return rows[-1][col] if rows else 0.0


def field_equation_residual(state_prev: SimState, state_next: SimState,
                            mat: MaterialSpec, cfg: SolverConfig,
                            sources=None):
    """Defect of the momenta/stress-form field equations across one step.

    Discretizes ``dp/dt - div(sigma) - f = 0`` (phonon row) and
    ``dp/dt - div(sigma) - f_fr - f = 0`` (phason row) with the momentum rate
    from the step's velocity difference and stresses at the midpoint, and
    returns the relative L2 norms (res_par, res_perp).  Diagnostic only.
    """
    op = SpatialOperator(mat, cfg.grid, cfg.spatial)
    dt = state_next.t - state_prev.t
    sampler = None
    if sources is not None and _has_any_source(sources):
        sampler = _SourceSampler(sources, mat, cfg.grid, op, dt)

    u_par_mid = 0.5 * (state_prev.u_par + state_next.u_par)
    u_perp_mid = 0.5 * (state_prev.u_perp + state_next.u_perp)
    ell_par, ell_perp = op.div_stress(u_par_mid, u_perp_mid)
    s_par, s_perp = (sampler.accelerations(state_prev.t + 0.5 * dt)
                     if sampler else (None, None))
    pdot_par = mat.rho * (state_next.w_par - state_prev.w_par) / dt
    pdot_perp = mat.rho * (state_next.w_perp - state_prev.w_perp) / dt
    w_perp_mid = 0.5 * (state_prev.w_perp + state_next.w_perp)
    fric = np.einsum("ab,b...->a...", mat.friction, w_perp_mid)

    res_par = pdot_par - ell_par
    res_perp = pdot_perp + fric - ell_perp
    if s_par is not None:
        res_par = res_par - s_par
    if s_perp is not None:
        res_perp = res_perp - s_perp
    scale = max(float(np.max(np.abs(pdot_par))), float(np.max(np.abs(pdot_perp))),
                float(np.max(np.abs(ell_par))), float(np.max(np.abs(ell_perp))), 1e-300)
    return (float(np.linalg.norm(res_par)) / (scale * math.sqrt(res_par.size)),
            float(np.linalg.norm(res_perp)) / (scale * math.sqrt(res_perp.size)))

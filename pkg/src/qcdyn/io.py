"""File formats: material JSON, run configs, CSV tables, raw snapshots.

Every CSV starts with one comment line ``# qcdyn-csv: <kind> v<version>``
followed by a header row; column orders are fixed and pinned by tests.
Floats are serialized with ``repr`` (shortest exact round-trip).  Snapshots
are raw little-endian float64, C order, one file per field per snapshot,
with a JSON sidecar carrying shape, field name, time, step and units.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import QcdynError, SchemaError
from .material import Dims, MaterialSpec, build_material
from .solver import (Grid, Scheme, SimState, SolverConfig, SourceSet, Spatial,
                     gaussian_state, single_mode_state, zero_state)

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# material files


def material_to_dict(mat: MaterialSpec) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "dims": {"n_par": mat.n_par, "n_perp": mat.n_perp},
        "rho": mat.rho,
        "C": mat.c_tensor.tolist(),
        "D": mat.d_tensor.tolist(),
        "E": mat.e_tensor.tolist(),
        "friction": mat.friction.tolist(),
    }


def write_material(path, mat: MaterialSpec):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(material_to_dict(mat), fh, indent=1)
        fh.write("\n")


def material_from_dict(data) -> MaterialSpec:
    errors = []
    if not isinstance(data, dict):
        raise SchemaError(["material: top level must be an object"])
    known = {"format_version", "dims", "rho", "C", "D", "E", "friction"}
    for key in data:
        if key not in known:
            errors.append(f"material.{key}: unknown key")
    for key in ("dims", "rho", "C", "D", "E", "friction"):
        if key not in data:
            errors.append(f"material.{key}: missing")
    if errors:
        raise SchemaError(errors)
    version = data.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise SchemaError([f"material.format_version: expected {FORMAT_VERSION}, "
                           f"got {version}"])
    dims = data["dims"]
    if (not isinstance(dims, dict) or set(dims) != {"n_par", "n_perp"}):
        raise SchemaError(["material.dims: must be {n_par, n_perp}"])
    try:
        return build_material(Dims(dims["n_par"], dims["n_perp"]), data["rho"],
                              np.asarray(data["C"], dtype=float),
                              np.asarray(data["D"], dtype=float),
                              np.asarray(data["E"], dtype=float),
                              np.asarray(data["friction"], dtype=float))
    except (QcdynError, ValueError, TypeError) as exc:
        raise SchemaError([f"material: {exc}"])


def read_material(path) -> MaterialSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise SchemaError([f"material: cannot read {path}: {exc}"])
    except json.JSONDecodeError as exc:
        raise SchemaError([f"material: invalid JSON in {path}: {exc}"])
    return material_from_dict(data)


# ---------------------------------------------------------------------------
# CSV


def format_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(fh, kind, columns, rows):
    fh.write(f"# qcdyn-csv: {kind} v{FORMAT_VERSION}\n")
    fh.write(",".join(columns) + "\n")
    for row in rows:
        fh.write(",".join(format_value(v) for v in row) + "\n")


def write_csv_file(path, kind, columns, rows):
    with open(path, "w", encoding="utf-8") as fh:
        write_csv(fh, kind, columns, rows)


# ---------------------------------------------------------------------------
# snapshots

_FIELD_UNITS = {"u_par": "m", "u_perp": "m", "w_par": "m/s", "w_perp": "m/s"}


def write_snapshot_field(directory, step, t, name, arr) -> str:
    base = os.path.join(directory, f"snap_{step:06d}_{name}")
    arr = np.ascontiguousarray(arr, dtype="<f8")
    with open(base + ".f64", "wb") as fh:
        fh.write(arr.tobytes())
    meta = {"format_version": FORMAT_VERSION, "field": name,
            "shape": list(arr.shape), "dtype": "<f8", "order": "C",
            "time": t, "step": step, "units": _FIELD_UNITS.get(name, "1")}
    with open(base + ".json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")
    return base


def read_snapshot_field(json_path):
    with open(json_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("format_version") != FORMAT_VERSION:
        raise SchemaError([f"snapshot.format_version: expected {FORMAT_VERSION}, "
                           f"got {meta.get('format_version')}"])
    raw = np.fromfile(json_path[: -len(".json")] + ".f64", dtype=meta["dtype"])
    return meta, raw.reshape(meta["shape"])


# ---------------------------------------------------------------------------
# run config


@dataclass(frozen=True)
class RunConfig:
    """Fully validated simulate configuration."""

    material_path: str
    material: MaterialSpec
    cfg: SolverConfig
    initial: SimState
    sources: SourceSet | None
    seed: int | None


class _Checker:
    """Collects schema errors with JSON-path context instead of failing fast."""

    def __init__(self):
        self.errors = []

    def fail(self, path, msg):
        self.errors.append(f"{path}: {msg}")
        return None

    def require_keys(self, obj, path, required, optional=()):
        ok = True
        for key in obj:
            if key not in required and key not in optional:
                self.fail(f"{path}.{key}", "unknown key")
                ok = False
        for key in required:
            if key not in obj:
                self.fail(f"{path}.{key}", "missing")
                ok = False
        return ok

    def number(self, obj, path, key, default=None, minimum=None,
               integer=False, required=False):
        if key not in obj:
            if required:
                self.fail(f"{path}.{key}", "missing")
            return default
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            return self.fail(f"{path}.{key}", f"must be a number, got {v!r}")
        if integer and not isinstance(v, int):
            return self.fail(f"{path}.{key}", f"must be an integer, got {v!r}")
        if minimum is not None and v < minimum:
            return self.fail(f"{path}.{key}", f"must be >= {minimum}, got {v!r}")
        return v

    def choice(self, obj, path, key, choices, default=None):
        if key not in obj:
            return default
        v = obj[key]
        if v not in choices:
            return self.fail(f"{path}.{key}", f"must be one of {sorted(choices)}, "
                                              f"got {v!r}")
        return v


def _build_initial(spec, mat, grid, check):
    from .dispersion_scalar import telegraph_dispersion

    if not isinstance(spec, dict):
        check.fail("initial", "must be an object")
        return None
    preset = check.choice(spec, "initial", "preset",
                          {"zero", "single_mode", "gaussian"})
    if preset is None:
        check.fail("initial.preset", "missing or invalid")
        return None
    if preset == "zero":
        check.require_keys(spec, "initial", {"preset"})
        return zero_state(mat, grid)

    sector = check.choice(spec, "initial", "sector", {"par", "perp"})
    ncomp = mat.n_par if sector == "par" else mat.n_perp
    component = check.number(spec, "initial", "component", default=0,
                             minimum=0, integer=True)
    if component is not None and sector is not None and component >= ncomp:
        check.fail("initial.component", f"must be < {ncomp}")
        return None
    amplitude = check.number(spec, "initial", "amplitude", default=1.0)

    if preset == "single_mode":
        check.require_keys(spec, "initial", {"preset", "sector", "k"},
                           {"component", "amplitude", "phase", "velocity"})
        k = spec.get("k")
        if isinstance(k, int):
            k = [k]
        if (not isinstance(k, list) or len(k) != grid.dim
                or not all(isinstance(v, int) for v in k)):
            check.fail("initial.k", f"must be {grid.dim} integer mode index(es)")
            return None
        phase = check.number(spec, "initial", "phase", default=0.0)
        velocity = check.choice(spec, "initial", "velocity",
                                {"zero", "traveling"}, default="zero")
        if check.errors:
            return None
        omega = None
        if velocity == "traveling":
            scalar_like = (mat.n_par == 1 and mat.n_perp == 1
                           and not np.any(mat.d_tensor))
            if not scalar_like:
                check.fail("initial.velocity",
                           "'traveling' needs an uncoupled 1D material")
                return None
            q = abs(2.0 * math.pi * k[0] / grid.length[0])
            if sector == "perp":
                stiff = float(mat.e_tensor[0, 0, 0, 0])
                c = math.sqrt(stiff / mat.rho)
                if mat.is_damped:
                    tau = 2.0 * mat.rho / float(mat.friction[0, 0])
                    root = telegraph_dispersion(q, c, tau)[0]
                    omega = root.omega
                else:
                    omega = complex(c * q, 0.0)
            else:
                stiff = float(mat.c_tensor[0, 0, 0, 0])
                omega = complex(math.sqrt(stiff / mat.rho) * q, 0.0)
        return single_mode_state(mat, grid, sector, component, k,
                                 amplitude=amplitude, phase=phase, omega=omega)

    check.require_keys(spec, "initial", {"preset", "sector", "center", "width"},
                       {"component", "amplitude"})
    width = check.number(spec, "initial", "width", minimum=0.0, required=True)
    center = spec.get("center")
    center = [center] if isinstance(center, (int, float)) else center
    if (not isinstance(center, list) or len(center) != grid.dim
            or not all(isinstance(v, (int, float)) for v in center)):
        check.fail("initial.center", f"must be {grid.dim} coordinate(s)")
        return None
    if check.errors:
        return None
    return gaussian_state(mat, grid, sector, component, center, width, amplitude)


def _time_law(spec, path, check):
    kind = check.choice(spec, path, "kind", {"const", "sine", "ricker"})
    if kind is None:
        check.fail(f"{path}.kind", "missing or invalid")
        return None
    amp = check.number(spec, path, "amplitude", required=True)
    if kind == "const":
        check.require_keys(spec, path, {"kind", "amplitude"})
        return lambda t: amp
    if kind == "sine":
        check.require_keys(spec, path, {"kind", "amplitude", "omega"}, {"phase"})
        omega = check.number(spec, path, "omega", required=True)
        phase = check.number(spec, path, "phase", default=0.0)
        if check.errors:
            return None
        return lambda t: amp * math.sin(omega * t + phase)
    check.require_keys(spec, path, {"kind", "amplitude", "t0", "sigma"})
    t0 = check.number(spec, path, "t0", required=True)
    sigma = check.number(spec, path, "sigma", required=True)
    if check.errors:
        return None

    def ricker(t):
        a = (t - t0) / sigma
        return amp * (1.0 - a * a) * math.exp(-0.5 * a * a)

    return ricker


def _build_sources(spec, mat, grid, check):
    if spec is None:
        return None
    if not isinstance(spec, dict):
        check.fail("sources", "must be an object or null")
        return None
    check.require_keys(spec, "sources", {"forces"})
    forces = spec.get("forces", [])
    if not isinstance(forces, list):
        check.fail("sources.forces", "must be a list")
        return None
    built = []
    for i, fs in enumerate(forces):
        path = f"sources.forces[{i}]"
        if not isinstance(fs, dict):
            check.fail(path, "must be an object")
            continue
        check.require_keys(fs, path, {"sector", "profile", "time"}, {"component"})
        sector = check.choice(fs, path, "sector", {"par", "perp"})
        component = check.number(fs, path, "component", default=0,
                                 minimum=0, integer=True)
        profile = fs.get("profile")
        envelope = None
        if not isinstance(profile, dict):
            check.fail(f"{path}.profile", "must be an object")
        else:
            pk = check.choice(profile, f"{path}.profile", "kind",
                              {"uniform", "gaussian"})
            if pk == "uniform":
                check.require_keys(profile, f"{path}.profile", {"kind"})
                envelope = lambda x: np.ones(grid.shape)
            elif pk == "gaussian":
                check.require_keys(profile, f"{path}.profile",
                                   {"kind", "center", "width"})
                width = check.number(profile, f"{path}.profile", "width",
                                     minimum=0.0, required=True)
                center = profile.get("center")
                center = [center] if isinstance(center, (int, float)) else center
                if (not isinstance(center, list) or len(center) != grid.dim):
                    check.fail(f"{path}.profile.center",
                               f"must be {grid.dim} coordinate(s)")
                elif width is not None:
                    def envelope(x, _c=center, _w=width):
                        r2 = sum((xi - ci) ** 2 for xi, ci in zip(x, _c))
                        return np.exp(-r2 / (2.0 * _w * _w))
        law = _time_law(fs.get("time", {}), f"{path}.time", check) \
            if isinstance(fs.get("time"), dict) else check.fail(f"{path}.time",
                                                                "must be an object")
        if check.errors or envelope is None or law is None:
            continue
        ncomp = mat.n_par if sector == "par" else mat.n_perp
        if component >= ncomp:
            check.fail(f"{path}.component", f"must be < {ncomp}")
            continue
        built.append((sector, component, envelope, law))
    if check.errors:
        return None
    if not built:
        return None

    def make(sector, ncomp):
        members = [(c, env, law) for s, c, env, law in built if s == sector]
        if not members:
            return None

        def f(x, t):
            out = np.zeros((ncomp,) + grid.shape)
            for c, env, law in members:
                out[c] += env(x) * law(t)
            return out

        return f

    return SourceSet(f_par=make("par", mat.n_par), f_perp=make("perp", mat.n_perp))


def parse_config(text, base_dir=".") -> RunConfig:
    """Validate a simulate config; raises SchemaError listing every problem."""
    check = _Checker()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError([f"config: invalid JSON: {exc}"])
    if not isinstance(data, dict):
        raise SchemaError(["config: top level must be an object"])

    check.require_keys(data, "config",
                       {"material", "grid", "dt", "steps", "initial"},
                       {"format_version", "scheme", "spatial", "sources",
                        "probes", "snapshot_every", "energy_every", "seed"})
    version = data.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        check.fail("config.format_version", f"expected {FORMAT_VERSION}, got {version}")

    mat = None
    mat_path = data.get("material")
    if not isinstance(mat_path, str):
        if "material" in data:
            check.fail("config.material", "must be a path string")
    else:
        mat_path = os.path.join(base_dir, mat_path)
        try:
            mat = read_material(mat_path)
        except SchemaError as exc:
            check.errors.extend(exc.errors)

    grid = None
    gspec = data.get("grid")
    if isinstance(gspec, dict):
        if check.require_keys(gspec, "grid", {"n", "length"}):
            try:
                grid = Grid(gspec["n"], gspec["length"])
            except (QcdynError, ValueError, TypeError) as exc:
                check.fail("config.grid", str(exc))
    elif "grid" in data:
        check.fail("config.grid", "must be an object {n, length}")

    dt = data.get("dt")
    if dt == "auto":
        dt = None
    elif "dt" in data and (isinstance(dt, bool)
                           or not isinstance(dt, (int, float)) or dt <= 0.0):
        check.fail("config.dt", f"must be a positive number or \"auto\", got {dt!r}")
        dt = None

    steps = check.number(data, "config", "steps", minimum=0, integer=True,
                         required=True)
    scheme = check.choice(data, "config", "scheme",
                          {s.value for s in Scheme}, default=Scheme.SEMI_IMPLICIT.value)
    spatial = check.choice(data, "config", "spatial",
                           {s.value for s in Spatial}, default=Spatial.SPECTRAL.value)
    snapshot_every = check.number(data, "config", "snapshot_every", default=0,
                                  minimum=0, integer=True)
    energy_every = check.number(data, "config", "energy_every", default=1,
                                minimum=0, integer=True)
    seed = check.number(data, "config", "seed", default=None, integer=True)

    probes = data.get("probes", [])
    probe_tuples = []
    if not isinstance(probes, list):
        check.fail("config.probes", "must be a list of grid index tuples")
    elif grid is not None:
        for i, p in enumerate(probes):
            pt = [p] if isinstance(p, int) else p
            if (not isinstance(pt, list) or len(pt) != grid.dim
                    or not all(isinstance(v, int) and 0 <= v < n
                               for v, n in zip(pt, grid.n))):
                check.fail(f"config.probes[{i}]", "invalid grid index")
            else:
                probe_tuples.append(tuple(pt))

    initial = None
    sources = None
    if mat is not None and grid is not None:
        if "initial" in data:
            initial = _build_initial(data["initial"], mat, grid, check)
        sources = _build_sources(data.get("sources"), mat, grid, check)

    if check.errors:
        raise SchemaError(check.errors)

    cfg = SolverConfig(grid=grid, steps=int(steps), dt=dt,
                       scheme=Scheme(scheme), spatial=Spatial(spatial),
                       probes=tuple(probe_tuples),
                       snapshot_every=int(snapshot_every),
                       energy_every=int(energy_every))
    return RunConfig(material_path=mat_path, material=mat, cfg=cfg,
                     initial=initial, sources=sources,
                     seed=None if seed is None else int(seed))

"""Command-line interface.

Subcommands: ``material check``, ``dispersion scalar``, ``dispersion aniso``,
``simulate``, ``limits``.  Exit codes: 0 success, 1 numerical failure,
2 configuration/usage error.  Failures print one machine-readable line
``qcdyn-error: {"code": ..., "message": ...}`` to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import (EigensolverFailure, NumericalBlowup, QcdynError,
                     SchemaError, SingularFriction)
from .dispersion_aniso import sweep
from .dispersion_scalar import (classify_regime, critical_thresholds,
                                telegraph_dispersion)
from .io import (FORMAT_VERSION, RunConfig, parse_config, read_material,
                 write_csv, write_csv_file, write_snapshot_field)
from .limits import run_limit_studies
from .material import char_time_tensor, check_energy_pd
from .solver import run

DISPERSION_SCALAR_COLUMNS = ["q", "regime", "re_omega_1", "im_omega_1",
                             "re_omega_2", "im_omega_2", "c_p", "tau_1", "tau_2"]


def _error(code, message):
    sys.stderr.write("qcdyn-error: "
                     + json.dumps({"code": code, "message": str(message)}) + "\n")


def _cmd_material_check(args):
    mat = read_material(args.file)
    report = check_energy_pd(mat)
    print(f"material: n_par={mat.n_par} n_perp={mat.n_perp} rho={mat.rho!r}")
    print(f"energy_pd: is_pd={report.is_pd} "
          f"min_eigenvalue={report.min_eigenvalue!r}")
    try:
        tau = char_time_tensor(mat)
        print("char_time_tensor:")
        for row in tau:
            print("  " + " ".join(repr(float(v)) for v in row))
    except SingularFriction:
        print("char_time_tensor: undamped (friction singular or zero; "
              "no finite damping time)")
    if not report.is_pd:
        _error("energy_not_pd", "elastic energy form is not positive definite")
        return 1
    return 0


def _scalar_rows(c, tau, q_values):
    rows = []
    for q in q_values:
        r1, r2 = telegraph_dispersion(q, c, tau)
        regime = classify_regime(q, c, tau)
        c_p = "" if r1.phase_velocity is None else r1.phase_velocity
        rows.append([q, regime.value, r1.omega.real, r1.omega.imag,
                     r2.omega.real, r2.omega.imag, c_p,
                     r1.relaxation_time, r2.relaxation_time])
    return rows


def _cmd_dispersion_scalar(args):
    if args.c <= 0 or args.tau <= 0:
        raise SchemaError(["dispersion scalar: --c and --tau must be > 0"])
    if args.q_min < 0 or args.q_max < args.q_min or args.n < 1:
        raise SchemaError(["dispersion scalar: need 0 <= q-min <= q-max, n >= 1"])
    q_values = np.linspace(args.q_min, args.q_max, args.n)
    rows = _scalar_rows(args.c, args.tau, q_values)
    if args.output:
        write_csv_file(args.output, "dispersion_scalar",
                       DISPERSION_SCALAR_COLUMNS, rows)
    else:
        write_csv(sys.stdout, "dispersion_scalar", DISPERSION_SCALAR_COLUMNS, rows)
    thresholds_path = args.thresholds
    if thresholds_path is None and args.output:
        thresholds_path = os.path.splitext(args.output)[0] + ".thresholds.json"
    if thresholds_path:
        data = critical_thresholds(args.c, args.tau)
        data.update({"format_version": FORMAT_VERSION, "c": args.c,
                     "tau_tel": args.tau})
        with open(thresholds_path, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=1)
            fh.write("\n")
    return 0


def _cmd_dispersion_aniso(args):
    mat = read_material(args.material)
    try:
        with open(args.q_path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError([f"q-path: {exc}"])
    if (not isinstance(data, dict) or "q_path" not in data
            or not isinstance(data["q_path"], list) or not data["q_path"]):
        raise SchemaError(["q-path: must be {\"q_path\": [[...], ...]}"])
    q_path = [np.atleast_1d(np.asarray(q, dtype=float)) for q in data["q_path"]]
    for q in q_path:
        if q.shape != (mat.n_par,):
            raise SchemaError([f"q-path: each wavevector needs {mat.n_par} "
                               f"component(s), got {q.tolist()}"])
    result = sweep(mat, q_path)
    n = mat.n_par + mat.n_perp
    columns = ([f"q_{i}" for i in range(mat.n_par)]
               + ["branch", "re_omega", "im_omega"]
               + [f"mode_re_{i}" for i in range(n)]
               + [f"mode_im_{i}" for i in range(n)])
    rows = []
    for bs in result.branches:
        for b, (w, mode) in enumerate(zip(bs.roots, bs.modes)):
            rows.append(list(bs.q) + [b, w.real, w.imag]
                        + list(mode.real) + list(mode.imag))
    if args.output:
        write_csv_file(args.output, "dispersion_aniso", columns, rows)
    else:
        write_csv(sys.stdout, "dispersion_aniso", columns, rows)
    if result.failed:
        _error("eigensolver_failure",
               f"{len(result.failed)} path point(s) failed: {result.failed}")
        return 1
    return 0


def _cmd_simulate(args):
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SchemaError([f"config: cannot read {args.config}: {exc}"])
    rc: RunConfig = parse_config(text, base_dir=os.path.dirname(args.config) or ".")
    cfg = rc.cfg
    if args.dt is not None:
        cfg = type(cfg)(**{**cfg.__dict__, "dt": args.dt})
    if args.steps is not None:
        cfg = type(cfg)(**{**cfg.__dict__, "steps": args.steps})
    try:
        result = run(rc.initial, rc.material, rc.sources, cfg)
    except ValueError as exc:
        raise SchemaError([f"simulate: {exc}"])
    os.makedirs(args.output, exist_ok=True)
    write_csv_file(os.path.join(args.output, "probes.csv"), "probes",
                   result.probe_columns, result.probe_data.tolist())
    write_csv_file(os.path.join(args.output, "energy.csv"), "energy",
                   result.energy_columns, result.energy_data.tolist())
    for snap in result.snapshots:
        for name, arr in snap.fields.items():
            write_snapshot_field(args.output, snap.step, snap.t, name, arr)
    print(f"ok steps={cfg.steps} dt={result.dt!r} output={args.output}")
    return 0


def _cmd_limits(args):
    report = run_limit_studies()
    rows = []
    for study in (report.wave, report.diffusion):
        status = "pass" if study.passed else "fail"
        print(f"{study.name} rel_err={study.rel_err!r} "
              f"threshold={study.threshold!r} status={status}")
        rows.append({"name": study.name, "rel_err": study.rel_err,
                     "threshold": study.threshold, "passed": study.passed})
    if args.output:
        os.makedirs(args.output, exist_ok=True)
        with open(os.path.join(args.output, "limits_report.json"), "w",
                  encoding="utf-8") as fh:
            json.dump({"format_version": FORMAT_VERSION, "studies": rows}, fh,
                      indent=1)
            fh.write("\n")
    if not report.passed:
        _error("limit_mismatch", "asymptotic limit study exceeded its threshold")
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcdyn",
        description="Coupled phonon-phason elastodynamics: damped-wave phason "
                    "dynamics, dispersion analysis, energy diagnostics.")
    parser.add_argument("--version", action="version",
                        version=f"qcdyn {__version__} formats={FORMAT_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_mat = sub.add_parser("material", help="material file tools")
    mat_sub = p_mat.add_subparsers(dest="subcommand", required=True)
    p_check = mat_sub.add_parser("check", help="validate a material file and "
                                               "print PD / damping-time report")
    p_check.add_argument("file")
    p_check.set_defaults(func=_cmd_material_check)

    p_disp = sub.add_parser("dispersion", help="dispersion relations")
    disp_sub = p_disp.add_subparsers(dest="subcommand", required=True)
    p_sc = disp_sub.add_parser("scalar", help="1D telegraph dispersion sweep (CSV)")
    p_sc.add_argument("--c", type=float, required=True)
    p_sc.add_argument("--tau", type=float, required=True)
    p_sc.add_argument("--q-min", type=float, required=True)
    p_sc.add_argument("--q-max", type=float, required=True)
    p_sc.add_argument("--n", type=int, required=True)
    p_sc.add_argument("--output", help="CSV path (default: stdout)")
    p_sc.add_argument("--thresholds",
                      help="write {q0, lambda0} JSON here "
                           "(default: alongside --output)")
    p_sc.set_defaults(func=_cmd_dispersion_scalar)

    p_an = disp_sub.add_parser("aniso", help="anisotropic branch sweep (CSV)")
    p_an.add_argument("--material", required=True)
    p_an.add_argument("--q-path", required=True)
    p_an.add_argument("--output", help="CSV path (default: stdout)")
    p_an.set_defaults(func=_cmd_dispersion_aniso)

    p_sim = sub.add_parser("simulate", help="run a time-domain simulation")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--output", required=True)
    p_sim.add_argument("--dt", type=float, help="override config dt")
    p_sim.add_argument("--steps", type=int, help="override config steps")
    p_sim.set_defaults(func=_cmd_simulate)

    p_lim = sub.add_parser("limits", help="run the zero/large-friction "
                                          "asymptotic comparison studies")
    p_lim.add_argument("--output", help="directory for limits_report.json")
    p_lim.set_defaults(func=_cmd_limits)
    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SchemaError as exc:
        for err in exc.errors:
            sys.stderr.write(f"config error: {err}\n")
        _error("schema", f"{len(exc.errors)} configuration error(s)")
        return 2
    except (NumericalBlowup, EigensolverFailure) as exc:
        _error("numerical", exc)
        return 1
    except QcdynError as exc:
        _error("invalid_input", exc)
        return 2


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())

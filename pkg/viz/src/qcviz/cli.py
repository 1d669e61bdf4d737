"""Command-line entry points for the batch plot jobs.

Exit codes: 0 success, 2 on bad inputs (schema mismatch, missing columns,
empty files).  ``decay-fit`` prints ``fitted_tau=<value>`` so scripts can
consume the regression result; ``branches``/``phase-velocity`` print
``q0=<value>`` as read from the thresholds file.
"""

from __future__ import annotations

import argparse
import sys

from .io import QcvizError
from .plots import PlotJob, render


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qcviz", description="Render figures from qcdyn output files.")
    sub = parser.add_subparsers(dest="kind", required=True)

    p = sub.add_parser("branches", help="Re/Im omega vs q with q0 marked")
    p.add_argument("--dispersion", required=True)
    p.add_argument("--thresholds", required=True)
    p.add_argument("--output", required=True)

    p = sub.add_parser("decay-fit", help="probe envelope with fitted decay time")
    p.add_argument("--probes", required=True)
    p.add_argument("--column", required=True)
    p.add_argument("--tau-tel", type=float,
                   help="theoretical damping time to annotate alongside")
    p.add_argument("--output", required=True)

    p = sub.add_parser("phase-velocity", help="c_p vs q with q0 marked")
    p.add_argument("--dispersion", required=True)
    p.add_argument("--thresholds", required=True)
    p.add_argument("--output", required=True)

    p = sub.add_parser("wavefield", help="snapshot frame(s)")
    p.add_argument("--snapshot", action="append", required=True,
                   help="sidecar JSON path (repeatable)")
    p.add_argument("--output", required=True)

    p = sub.add_parser("energy", help="energy history")
    p.add_argument("--energy", required=True)
    p.add_argument("--output", required=True)
    return parser


def job_from_args(args) -> PlotJob:
    if args.kind == "branches":
        return PlotJob("branches", {"dispersion": args.dispersion,
                                    "thresholds": args.thresholds}, args.output)
    if args.kind == "decay-fit":
        options = {"column": args.column}
        if args.tau_tel is not None:
            options["tau_tel"] = args.tau_tel
        return PlotJob("decay_fit", {"probes": args.probes}, args.output,
                       options)
    if args.kind == "phase-velocity":
        return PlotJob("phase_velocity", {"dispersion": args.dispersion,
                                          "thresholds": args.thresholds},
                       args.output)
    if args.kind == "wavefield":
        return PlotJob("wavefield", {"snapshots": args.snapshot}, args.output)
    return PlotJob("energy", {"energy": args.energy}, args.output)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        result = render(job_from_args(args))
    except (QcvizError, OSError, ValueError) as exc:
        sys.stderr.write(f"qcviz error: {exc}\n")
        return 2
    for key in ("tau_fit", "q0"):
        if key in result.annotations:
            name = "fitted_tau" if key == "tau_fit" else key
            print(f"{name}={float(result.annotations[key])!r}")
    print(f"wrote {result.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

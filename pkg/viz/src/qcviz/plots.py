"""Figure rendering for the documented qcdyn output files."""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .envelope import fit_decay_time  # noqa: E402
from .io import (QcvizError, read_csv, read_snapshot,  # noqa: E402
                 read_thresholds)

KINDS = ("branches", "decay_fit", "phase_velocity", "wavefield", "energy")
_SAVEFIG = dict(dpi=120, metadata={"Software": "qcviz"})


@dataclass(frozen=True)
class PlotJob:
    """One rendering job: plot kind, named input paths, output image path.

    Inputs by kind:
      branches:       dispersion (CSV), thresholds (JSON)
      decay_fit:      probes (CSV); options: column, tau_tel
      phase_velocity: dispersion (CSV), thresholds (JSON)
      wavefield:      snapshots (list of sidecar JSON paths)
      energy:         energy (CSV)
    """

    kind: str
    inputs: dict
    output: str
    options: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RenderResult:
    output: str
    annotations: dict


def render(job: PlotJob) -> RenderResult:
    if job.kind not in KINDS:
        raise QcvizError(f"unknown plot kind {job.kind!r}; choose from {KINDS}")
    fig = plt.figure(figsize=(7.0, 4.5))
    try:
        annotations = _RENDERERS[job.kind](fig, job)
        fig.savefig(job.output, **_SAVEFIG)
    finally:
        plt.close(fig)
    return RenderResult(job.output, annotations)


def _render_branches(fig, job):
    table = read_csv(job.inputs["dispersion"], expect_kind="dispersion_scalar")
    th = read_thresholds(job.inputs["thresholds"])
    q = table.column("q")
    ax_re, ax_im = fig.subplots(1, 2)
    for idx, style in (("1", "-"), ("2", "--")):
        ax_re.plot(q, table.column(f"re_omega_{idx}"), style,
                   label=f"branch {idx}")
        ax_im.plot(q, table.column(f"im_omega_{idx}"), style,
                   label=f"branch {idx}")
    q0 = th["q0"]
    for ax, name in ((ax_re, "Re $\\omega$"), (ax_im, "Im $\\omega$")):
        ax.axvline(q0, color="k", lw=0.8, ls=":",
                   label=f"$q_0$ = {q0:.6g}")
        ax.set_xlabel("q [1/m]")
        ax.set_ylabel(name + " [rad/s]")
        ax.legend(fontsize=8)
    fig.suptitle("dispersion branches")
    fig.tight_layout()
    return {"q0": q0, "n_points": len(q)}


def _render_decay_fit(fig, job):
    column = job.options.get("column")
    if not column:
        raise QcvizError("decay_fit needs options['column']")
    tau_theory = job.options.get("tau_tel")
    table = read_csv(job.inputs["probes"], expect_kind="probes")
    t = table.column("t")
    y = table.column(column)
    tau_fit, pt, py, amp = fit_decay_time(t, y)

    ax = fig.subplots()
    ax.plot(t, y, lw=0.6, label=column)
    ax.plot(pt, py, "o", ms=3, label="envelope extrema")
    ax.plot(t, amp * np.exp(-t / tau_fit), "r--",
            label=f"fit: {amp:.3g} exp(-t/{tau_fit:.4g})")
    text = f"fitted tau = {tau_fit:.6g}"
    if tau_theory is not None:
        text += f"\ntheoretical tau_tel = {tau_theory:.6g}"
    ax.annotate(text, xy=(0.97, 0.95), xycoords="axes fraction",
                ha="right", va="top",
                bbox=dict(boxstyle="round", fc="w", alpha=0.8))
    ax.set_xlabel("t [s]")
    ax.set_ylabel("probe value")
    ax.legend(fontsize=8, loc="lower right")
    fig.tight_layout()
    out = {"tau_fit": tau_fit, "n_peaks": len(pt)}
    if tau_theory is not None:
        out["tau_tel"] = tau_theory
        out["rel_err"] = abs(tau_fit - tau_theory) / tau_theory
    return out


def _render_phase_velocity(fig, job):
    table = read_csv(job.inputs["dispersion"], expect_kind="dispersion_scalar")
    th = read_thresholds(job.inputs["thresholds"])
    q = table.column("q")
    c_p = table.column("c_p")  # empty cells (out of regime) become NaN
    ax = fig.subplots()
    ax.plot(q, c_p, ".-", ms=3, label="c_p(q)")
    ax.axvline(th["q0"], color="k", lw=0.8, ls=":",
               label=f"$q_0$ = {th['q0']:.6g}")
    ax.set_xlabel("q [1/m]")
    ax.set_ylabel("phase velocity [m/s]")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return {"q0": th["q0"], "n_defined": int(np.sum(~np.isnan(c_p)))}


def _render_wavefield(fig, job):
    paths = job.inputs["snapshots"]
    if isinstance(paths, str):
        paths = [paths]
    if not paths:
        raise QcvizError("wavefield needs at least one snapshot")
    ax = fig.subplots()
    meta = None
    for path in paths:
        meta, arr = read_snapshot(path)
        if arr.ndim == 2:  # (ncomp, n) 1D field
            for comp in range(arr.shape[0]):
                ax.plot(arr[comp], lw=0.9,
                        label=f"{meta['field']}[{comp}] t={meta['time']:.4g}")
            ax.set_xlabel("grid index")
            ax.set_ylabel(f"{meta['field']} [{meta.get('units', '?')}]")
        else:  # (ncomp, nx, ny): show component 0 of the last file
            im = ax.imshow(arr[0].T, origin="lower", aspect="auto")
            fig.colorbar(im, ax=ax,
                         label=f"{meta['field']}[0] [{meta.get('units', '?')}]")
            ax.set_xlabel("x index")
            ax.set_ylabel("y index")
    if not ax.images:
        ax.legend(fontsize=7)
    fig.tight_layout()
    return {"n_snapshots": len(paths)}


def _render_energy(fig, job):
    table = read_csv(job.inputs["energy"], expect_kind="energy")
    t = table.column("t")
    ax = fig.subplots()
    for col in ("kinetic", "elastic", "total", "dissipated_cumulative"):
        ax.plot(t, table.column(col), label=col)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("energy [J]")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return {"n_rows": len(t)}


_RENDERERS = {
    "branches": _render_branches,
    "decay_fit": _render_decay_fit,
    "phase_velocity": _render_phase_velocity,
    "wavefield": _render_wavefield,
    "energy": _render_energy,
}

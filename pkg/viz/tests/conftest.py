import json

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def write_csv(path, kind, columns, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# qcdyn-csv: {kind} v1\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join("" if v is None else repr(float(v))
                              if isinstance(v, float) else str(v)
                              for v in row) + "\n")
    return str(path)


def write_probe_csv(path, t, y, column="p0_u_perp_0"):
    rows = [[float(tt), float(yy)] for tt, yy in zip(t, y)]
    return write_csv(path, "probes", ["t", column], rows)


def write_dispersion_csv(path, q, tau_tel=2.0, c=1.0):
    """Schema-conforming dispersion table with plausible numbers."""
    rows = []
    q0 = 1.0 / (c * tau_tel)
    for qq in q:
        if qq > q0:
            re = float(np.sqrt((c * qq) ** 2 - 1.0 / tau_tel ** 2))
            rows.append([float(qq), "propagating", re, -1.0 / tau_tel,
                         -re, -1.0 / tau_tel, re / qq, tau_tel, tau_tel])
        else:
            s = float(np.sqrt(1.0 / tau_tel ** 2 - (c * qq) ** 2))
            rows.append([float(qq), "standing", 0.0, -(1.0 / tau_tel - s),
                         0.0, -(1.0 / tau_tel + s), None,
                         1.0 / max(1.0 / tau_tel - s, 1e-300),
                         1.0 / (1.0 / tau_tel + s)])
    cols = ["q", "regime", "re_omega_1", "im_omega_1", "re_omega_2",
            "im_omega_2", "c_p", "tau_1", "tau_2"]
    return write_csv(path, "dispersion_scalar", cols, rows)


def write_thresholds(path, c=1.0, tau_tel=2.0):
    data = {"format_version": 1, "q0": 1.0 / (c * tau_tel),
            "lambda0": 2.0 * np.pi * c * tau_tel, "c": c, "tau_tel": tau_tel}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh)
    return str(path)


def write_snapshot(directory, step, t, name, arr):
    arr = np.ascontiguousarray(arr, dtype="<f8")
    base = f"{directory}/snap_{step:06d}_{name}"
    arr.tofile(base + ".f64")
    meta = {"format_version": 1, "field": name, "shape": list(arr.shape),
            "dtype": "<f8", "order": "C", "time": t, "step": step,
            "units": "m"}
    with open(base + ".json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh)
    return base + ".json"

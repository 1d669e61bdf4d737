"""Envelope extraction and decay-time regression for probe time series."""

from __future__ import annotations

import numpy as np

from .io import QcvizError


def envelope_peaks(t, y, floor=1e-12):
    """Times and magnitudes of successive extrema of ``y``.

    Extrema are interior samples where |y| is a local maximum; a parabola
    through the three neighbouring |y| samples refines time and magnitude.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    ay = np.abs(y)
    scale = float(ay.max(initial=0.0))
    peaks_t, peaks_y = [], []
    for i in range(1, len(y) - 1):
        if ay[i] >= ay[i - 1] and ay[i] >= ay[i + 1] and ay[i] > floor * scale:
            denom = ay[i - 1] - 2.0 * ay[i] + ay[i + 1]
            if denom >= 0.0:
                continue
            delta = 0.5 * (ay[i - 1] - ay[i + 1]) / denom
            peaks_t.append(t[i] + delta * (t[i + 1] - t[i]))
            peaks_y.append(ay[i] - 0.25 * (ay[i - 1] - ay[i + 1]) * delta)
    return np.array(peaks_t), np.array(peaks_y)


def fit_decay_time(t, y):
    """Decay time from linear regression on log|peak| of successive extrema.

    Returns (tau, peak_times, peak_values, amplitude) with the fitted model
    ``amplitude * exp(-t / tau)``.
    """
    pt, py = envelope_peaks(t, y)
    if len(pt) < 4:
        raise QcvizError(f"need at least 4 envelope extrema, found {len(pt)}")
    slope, intercept = np.polyfit(pt, np.log(py), 1)
    if slope >= 0.0:
        raise QcvizError("envelope does not decay (non-negative log slope)")
    return -1.0 / slope, pt, py, float(np.exp(intercept))

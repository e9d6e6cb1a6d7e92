"""Feature extraction from sampled curves: capacity times, crossings, periods."""

from __future__ import annotations

import numpy as np
from scipy.signal import find_peaks


def first_capacity_time(times, values, level: float = 1.0, tol: float = 1e-3) -> float:
    """Time of the first local maximum that comes within ``tol`` of ``level``.

    Returns NaN when the curve never gets there.
    """
    times = np.asarray(times)
    values = np.asarray(values)
    near = np.flatnonzero(values >= level - tol)
    if near.size == 0:
        return float("nan")
    # walk uphill from the first sample inside the band
    k = near[0]
    while k + 1 < len(values) and values[k + 1] >= values[k]:
        k += 1
    return float(times[k])


def zero_crossings(times, values, skip_initial: int = 1) -> np.ndarray:
    """Linearly interpolated sign changes, ignoring the first ``skip_initial`` samples."""
    t = np.asarray(times)[skip_initial:]
    v = np.asarray(values)[skip_initial:]
    idx = np.flatnonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)
    return t[idx] - v[idx] * (t[idx + 1] - t[idx]) / (v[idx + 1] - v[idx])


def peak_spacing_period(times, values, prominence_frac: float = 0.5) -> float:
    """Mean spacing of prominent maxima.

    Peaks must rise at least ``prominence_frac`` of the curve's full range;
    this isolates the slow envelope from small fast ripples.
    """
    values = np.asarray(values)
    span = float(values.max() - values.min())
    peaks, _ = find_peaks(values, prominence=prominence_frac * span)
    if len(peaks) < 2:
        return float("nan")
    return float(np.mean(np.diff(np.asarray(times)[peaks])))


def dominant_period(times, values) -> float:
    """Period of the strongest non-zero Fourier component (uniform grid)."""
    times = np.asarray(times)
    values = np.asarray(values) - np.mean(values)
    freqs = np.fft.rfftfreq(len(values), times[1] - times[0])
    amp = np.abs(np.fft.rfft(values))
    k = 1 + int(np.argmax(amp[1:]))
    return float(1.0 / freqs[k])

"""Objective impulse-response metrics.

Schroeder backward integration, T30 from the ISO [-5, -35] dB span,
normalized echo density, two-segment (dual-slope) decay fitting, spectral
deviation, direct-to-reverberant ratio and the mean free path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDecayError, SceneValidationError
from .filterbank import OCTAVE_CENTERS_8, bandpass
from .scene import RoomSpec, surface_area, volume

EDC_FLOOR_DB = -120.0
T30_FIT_SPAN_DB = (-5.0, -35.0)
NED_GAUSSIAN_FRACTION = math.erfc(1.0 / math.sqrt(2.0))  # ~0.3173
DRR_CLAMP_DB = 120.0


@dataclass(frozen=True)
class EdcCurve:
    values: np.ndarray  # dB, 0 at t = 0, non-increasing
    sample_rate: float

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) / self.sample_rate


@dataclass(frozen=True)
class NedProfile:
    times: np.ndarray
    values: np.ndarray
    window: float


@dataclass(frozen=True)
class DualSlopeFit:
    slope1: float  # dB/s
    slope2: float  # dB/s
    knee_time: float
    knee_level: float
    residual: float  # mean squared fit error, dB^2


def schroeder_edc(ir: np.ndarray, fs: float) -> EdcCurve:
    """Backward-integrated energy decay, normalized and clamped at -120 dB."""
    h = np.asarray(ir, dtype=float)
    energy = h**2
    total = float(energy.sum())
    if total <= 0.0:
        raise SceneValidationError("all-zero impulse response")
    tail = np.cumsum(energy[::-1])[::-1]
    with np.errstate(divide="ignore"):
        values = 10.0 * np.log10(tail / total)
    values = np.maximum(values, EDC_FLOOR_DB)
    return EdcCurve(values=values, sample_rate=fs)


def _fit_line(t: np.ndarray, y: np.ndarray):
    slope, intercept = np.polyfit(t, y, 1)
    return float(slope), float(intercept)


def t30(edc: EdcCurve) -> float:
    """T30 from a least-squares line over the [-5, -35] dB EDC span."""
    hi, lo = T30_FIT_SPAN_DB
    v = edc.values
    start = int(np.argmax(v <= hi))
    if v[start] > hi:
        raise InsufficientDecayError("EDC never reaches -5 dB")
    stop = int(np.argmax(v <= lo))
    if v[stop] > lo:
        raise InsufficientDecayError("EDC never reaches -35 dB")
    t = edc.times[start:stop + 1]
    slope, _ = _fit_line(t, v[start:stop + 1])
    if slope >= 0:
        raise InsufficientDecayError("EDC is not decaying over the fit span")
    return 60.0 / abs(slope)


def t30_bands(ir: np.ndarray, fs: float, centers=OCTAVE_CENTERS_8) -> np.ndarray:
    """Per-octave-band T30 of a single channel."""
    return np.array([
        t30(schroeder_edc(bandpass(ir, fs, b, centers), fs))
        for b in range(len(centers))
    ])


def ned(ir: np.ndarray, fs: float, window: float = 25e-3,
        hop: int = 64) -> NedProfile:
    """Normalized echo density: fraction of |h| above the local std dev,
    divided by the Gaussian expectation erfc(1/sqrt(2)).
    """
    h = np.asarray(ir, dtype=float)
    w = int(round(window * fs))
    if w > h.size:
        raise SceneValidationError("window longer than impulse response")
    w += (w + 1) % 2  # odd length
    half = w // 2
    centers = np.arange(half, h.size - half, hop)
    values = np.empty(centers.size)
    for i, c in enumerate(centers):
        frame = h[c - half: c + half + 1]
        sigma = float(np.sqrt(np.mean(frame**2)))
        if sigma == 0.0:
            values[i] = 0.0
        else:
            values[i] = np.count_nonzero(np.abs(frame) > sigma) / frame.size
    return NedProfile(times=centers / fs,
                      values=values / NED_GAUSSIAN_FRACTION,
                      window=w / fs)


def dual_slope_fit(edc: EdcCurve, span_db: float = 60.0) -> DualSlopeFit:
    """Two-segment piecewise-linear least squares with a gridded knee.

    The knee is searched on a 0.5 dB level grid; the model is continuous at
    the knee (hinge basis). Fitting runs from the -5 dB point (skipping the
    onset plateau, as in the T30 convention) down to ``span_db`` below the
    peak (or 5 dB above the clamp floor).
    """
    v = edc.values
    if v.min() > -50.0:
        raise InsufficientDecayError("EDC must span at least 50 dB")
    floor = max(-span_db, float(v.min()) + 5.0)
    start = int(np.argmax(v <= -5.0))
    stop = int(np.argmax(v <= floor))
    t = edc.times[start:stop + 1]
    y = v[start:stop + 1]

    knee_levels = np.arange(-10.0, floor + 10.0, -0.5)
    best = None
    for level in knee_levels:
        k = int(np.argmax(y <= level))
        if y[k] > level or k < 2 or k > y.size - 3:
            continue
        tk = t[k]
        basis = np.stack([np.ones_like(t), t - t[0], np.maximum(t - tk, 0.0)], axis=1)
        coef, _, _, _ = np.linalg.lstsq(basis, y, rcond=None)
        resid = float(np.mean((basis @ coef - y) ** 2))
        if best is None or resid < best[0]:
            best = (resid, coef, tk)
    if best is None:
        raise InsufficientDecayError("no admissible knee position")
    resid, coef, tk = best
    slope1 = float(coef[1])
    slope2 = float(coef[1] + coef[2])
    knee_level = float(coef[0] + coef[1] * (tk - t[0]))
    return DualSlopeFit(slope1=slope1, slope2=slope2, knee_time=float(tk),
                        knee_level=min(knee_level, 0.0), residual=resid)


def single_slope_residual(edc: EdcCurve, span_db: float = 60.0) -> float:
    """Mean squared error of the best single line (dual-slope baseline)."""
    v = edc.values
    floor = max(-span_db, float(v.min()) + 5.0)
    start = int(np.argmax(v <= -5.0))
    stop = int(np.argmax(v <= floor))
    t = edc.times[start:stop + 1]
    y = v[start:stop + 1]
    slope, intercept = _fit_line(t, y)
    return float(np.mean((slope * t + intercept - y) ** 2))


def spectral_deviation(ir_a, ir_b, band_range=(100.0, 16000.0)) -> float:
    """Mean |difference| of third-octave smoothed spectra in dB (see postproc)."""
    from .postproc import spectral_deviation_db

    return spectral_deviation_db(ir_a, ir_b, band_range)


def mean_free_path(room: RoomSpec) -> float:
    """4 V / S, the average distance between reflections."""
    return 4.0 * volume(room) / surface_area(room)


def drr(ir: np.ndarray, fs: float, direct_window: float = 2.5e-3) -> float:
    """Direct-to-reverberant ratio, direct window centered on first arrival."""
    h = np.asarray(ir, dtype=float)
    energy = h**2
    total = float(energy.sum())
    if total <= 0.0:
        raise SceneValidationError("all-zero impulse response")
    peak = int(np.argmax(np.abs(h)))
    half = int(round(direct_window * fs / 2.0))
    lo = max(peak - half, 0)
    hi = min(peak + half + 1, h.size)
    e_direct = float(energy[lo:hi].sum())
    e_rest = total - e_direct
    if e_rest <= 10.0 ** (-DRR_CLAMP_DB / 10.0) * e_direct:
        return DRR_CLAMP_DB
    return 10.0 * math.log10(e_direct / e_rest)

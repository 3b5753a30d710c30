"""Spectral matching of a simulated IR to a reference IR.

A single minimum-phase correction filter (cepstral construction) is derived
from the ratio of third-octave smoothed magnitude spectra and applied
identically to every channel, which preserves interchannel level and time
differences exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import MatchInfeasibleError, RateMismatchError
from .spatial import ImpulseResponse

DEFAULT_RANGE_HZ = (100.0, 16000.0)
DEFAULT_CLAMP_DB = 12.0
DEFAULT_FIR_TAPS = 2048


@dataclass(frozen=True)
class SpectralMatchReport:
    residual_mean_db: float
    residual_max_db: float
    residual_rms_db: float
    band_range: tuple
    clamped: bool
    filter_taps: np.ndarray


def third_octave_smooth(magnitude: np.ndarray, fs: float) -> np.ndarray:
    """Energy mean over a +/- 1/6-octave window around each rFFT bin."""
    mag = np.asarray(magnitude, dtype=float)
    n_bins = mag.size
    power = mag**2
    cums = np.concatenate([[0.0], np.cumsum(power)])
    k = np.arange(n_bins)
    lo = np.maximum((k * 2.0 ** (-1.0 / 6.0)).astype(int), 0)
    hi = np.minimum(np.ceil(k * 2.0 ** (1.0 / 6.0)).astype(int), n_bins - 1)
    hi = np.maximum(hi, lo)
    mean_power = (cums[hi + 1] - cums[lo]) / (hi + 1 - lo)
    out = np.sqrt(mean_power)
    out[0] = mag[0]
    return out


def _mean_magnitude(ir: ImpulseResponse, n_fft: int) -> np.ndarray:
    spec = np.fft.rfft(ir.channels, n=n_fft, axis=1)
    return np.sqrt(np.mean(np.abs(spec) ** 2, axis=0))


def minimum_phase_fir(magnitude: np.ndarray, n_taps: int) -> np.ndarray:
    """Minimum-phase FIR with the given rFFT magnitude (cepstral method)."""
    mag = np.maximum(np.asarray(magnitude, dtype=float), 1e-12)
    n_fft = 2 * (mag.size - 1)
    log_mag = np.log(mag)
    cepstrum = np.fft.irfft(log_mag, n=n_fft)
    folded = cepstrum.copy()
    folded[1: n_fft // 2] *= 2.0
    folded[n_fft // 2 + 1:] = 0.0
    min_phase_spec = np.exp(np.fft.rfft(folded, n=n_fft))
    h = np.fft.irfft(min_phase_spec, n=n_fft)
    return h[:n_taps]


def _smooth_edge(freqs: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """1 inside [lo, hi], raised-cosine rolloff over 1/3 octave outside."""
    w = np.ones_like(freqs)
    third = 2.0 ** (1.0 / 3.0)
    with np.errstate(divide="ignore"):
        log_f = np.log2(np.maximum(freqs, 1e-6))
    lo_edge = (log_f - np.log2(lo / third)) / (np.log2(lo) - np.log2(lo / third))
    hi_edge = (np.log2(hi * third) - log_f) / (np.log2(hi * third) - np.log2(hi))
    w = np.minimum(np.clip(lo_edge, 0.0, 1.0), np.clip(hi_edge, 0.0, 1.0))
    return 0.5 - 0.5 * np.cos(np.pi * w)


def spectral_deviation_db(ir_a: ImpulseResponse, ir_b: ImpulseResponse,
                          band_range=DEFAULT_RANGE_HZ) -> float:
    """Mean |difference| of third-octave smoothed magnitude spectra (dB)."""
    if ir_a.sample_rate != ir_b.sample_rate:
        raise RateMismatchError("sample rates differ")
    n_fft = 1 << max(ir_a.n_samples, ir_b.n_samples, 2).bit_length()
    freqs = np.fft.rfftfreq(n_fft, 1.0 / ir_a.sample_rate)
    sa = third_octave_smooth(_mean_magnitude(ir_a, n_fft), ir_a.sample_rate)
    sb = third_octave_smooth(_mean_magnitude(ir_b, n_fft), ir_b.sample_rate)
    sel = (freqs >= band_range[0]) & (freqs <= band_range[1])
    with np.errstate(divide="ignore"):
        diff = 20.0 * np.log10(np.maximum(sa[sel], 1e-12) / np.maximum(sb[sel], 1e-12))
    return float(np.mean(np.abs(diff)))


def match_spectrum(sim: ImpulseResponse, ref: ImpulseResponse,
                   band_range=DEFAULT_RANGE_HZ,
                   clamp_db: float = DEFAULT_CLAMP_DB,
                   n_taps: int = DEFAULT_FIR_TAPS):
    """Correct ``sim`` toward the average spectrum of ``ref``.

    Returns (corrected IR, filter, SpectralMatchReport). The correction
    magnitude is smoothed-ref / smoothed-sim, clamped to +/- clamp_db and
    rolled off to unity outside ``band_range``.
    """
    if sim.sample_rate != ref.sample_rate:
        raise RateMismatchError("sample rates differ")
    n_fft = 1 << max(sim.n_samples, ref.n_samples, 4 * n_taps).bit_length()
    freqs = np.fft.rfftfreq(n_fft, 1.0 / sim.sample_rate)

    mag_sim = third_octave_smooth(_mean_magnitude(sim, n_fft), sim.sample_rate)
    mag_ref = third_octave_smooth(_mean_magnitude(ref, n_fft), ref.sample_rate)
    sel = (freqs >= band_range[0]) & (freqs <= band_range[1])
    if not np.any(mag_sim[sel] > 1e-9 * np.max(mag_sim)):
        raise MatchInfeasibleError("simulated IR spectrally empty in match range")

    raw = mag_ref / np.maximum(mag_sim, 1e-12 * np.max(mag_sim))
    clamp = 10.0 ** (clamp_db / 20.0)
    clamped = bool(np.any((raw[sel] > clamp) | (raw[sel] < 1.0 / clamp)))
    correction = np.clip(raw, 1.0 / clamp, clamp)
    weight = _smooth_edge(freqs, band_range[0], band_range[1])
    correction = correction**weight  # unity outside range, smooth rolloff

    fir = minimum_phase_fir(correction, n_taps)
    corrected = ImpulseResponse(
        channels=fftconvolve(sim.channels, fir[None, :], axes=1),
        sample_rate=sim.sample_rate,
        channel_semantics=sim.channel_semantics,
    )

    # post-hoc residual over the match range
    n_res = 1 << max(corrected.n_samples, ref.n_samples, 2).bit_length()
    res_freqs = np.fft.rfftfreq(n_res, 1.0 / sim.sample_rate)
    sa = third_octave_smooth(_mean_magnitude(corrected, n_res), sim.sample_rate)
    sb = third_octave_smooth(_mean_magnitude(ref, n_res), ref.sample_rate)
    rsel = (res_freqs >= band_range[0]) & (res_freqs <= band_range[1])
    with np.errstate(divide="ignore"):
        diff = 20.0 * np.log10(np.maximum(sa[rsel], 1e-12) / np.maximum(sb[rsel], 1e-12))
    report = SpectralMatchReport(
        residual_mean_db=float(np.mean(np.abs(diff))),
        residual_max_db=float(np.max(np.abs(diff))),
        residual_rms_db=float(math.sqrt(np.mean(diff**2))),
        band_range=tuple(band_range),
        clamped=clamped,
        filter_taps=fir,
    )
    return corrected, fir, report

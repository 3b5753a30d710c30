"""Zero-phase octave filterbank.

Bands are realized as raised-cosine magnitude masks on the rFFT grid with
crossovers on a log-frequency axis. The masks of a bank sum to exactly 1 at
every bin, so per-band buffers that carry identical gains recombine into the
original broadband signal.
"""

from __future__ import annotations

import numpy as np

# Octave band centers used for room absorption / decay targets.
OCTAVE_CENTERS_8 = (125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0, 16000.0)

# Octave band centers used for stimulus band manipulation (31 Hz .. 16 kHz).
OCTAVE_CENTERS_10 = (
    31.5, 63.0, 125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0, 16000.0,
)

# Width (in octaves) of the raised-cosine crossover around each band edge.
CROSSOVER_OCTAVES = 1.0 / 3.0


def _smooth_step(log_f: np.ndarray, log_edge: float, half_width: float) -> np.ndarray:
    """Raised-cosine step rising 0 -> 1 around ``log_edge`` (log2 frequency)."""
    x = (log_f - (log_edge - half_width)) / (2.0 * half_width)
    x = np.clip(x, 0.0, 1.0)
    return 0.5 - 0.5 * np.cos(np.pi * x)


def band_masks(n_fft: int, fs: float, centers=OCTAVE_CENTERS_8) -> np.ndarray:
    """Amplitude masks, shape (n_bands, n_fft // 2 + 1), summing to 1 per bin.

    Band ``i`` spans the geometric-midpoint edges between neighboring
    centers; the lowest band extends to DC and the highest to Nyquist.
    """
    centers = np.asarray(centers, dtype=float)
    freqs = np.fft.rfftfreq(n_fft, 1.0 / fs)
    log_f = np.log2(np.maximum(freqs, 1e-6))
    edges = np.sqrt(centers[:-1] * centers[1:])
    half_width = CROSSOVER_OCTAVES / 2.0

    steps = [_smooth_step(log_f, np.log2(e), half_width) for e in edges]
    masks = np.empty((len(centers), freqs.size))
    lower = np.ones_like(freqs)  # step at the band's lower edge (1 for band 0)
    for i in range(len(centers)):
        upper = steps[i] if i < len(edges) else np.zeros_like(freqs)
        masks[i] = lower - upper
        lower = upper
    return masks


def bandpass(x: np.ndarray, fs: float, band: int, centers=OCTAVE_CENTERS_8) -> np.ndarray:
    """Zero-phase band-filtered copy of ``x`` for one octave band.

    The signal is zero-padded to twice its length before masking so the
    acausal half of the filter kernel falls into the padding instead of
    wrapping around to the end of the buffer (the low bands are narrow and
    their kernels ring for a long time).
    """
    n = len(x)
    masks = band_masks(2 * n, fs, centers)
    return np.fft.irfft(np.fft.rfft(x, n=2 * n) * masks[band], n=2 * n)[:n]


def combine_bands(band_buffers: np.ndarray, fs: float, centers=OCTAVE_CENTERS_8) -> np.ndarray:
    """Filter each band buffer with its mask and sum to a broadband signal.

    ``band_buffers`` has shape (n_bands, n_samples). Zero-padded masking as
    in :func:`bandpass`.
    """
    n = band_buffers.shape[1]
    masks = band_masks(2 * n, fs, centers)
    spec = np.einsum("bk,bk->k", masks, np.fft.rfft(band_buffers, n=2 * n, axis=1))
    return np.fft.irfft(spec, n=2 * n)[:n]


def band_energies(x: np.ndarray, fs: float, centers=OCTAVE_CENTERS_8) -> np.ndarray:
    """Per-band energy of ``x`` (Parseval over masked spectra)."""
    n = len(x)
    masks = band_masks(n, fs, centers)
    spec = np.fft.rfft(x)
    power = np.abs(spec) ** 2
    # rfft bins count interior frequencies twice in the full spectrum
    weights = np.full(power.shape, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    return (masks**2 * power * weights).sum(axis=1) / n

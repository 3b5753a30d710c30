"""Feedback-delay-network late reverberation.

Delay times are physically based: the room's edge lengths, face diagonals
and space diagonal, converted to samples and nudged to pairwise coprime
integers. Per-line per-band attenuation realizes the decay target; the
feedback matrix is a seeded random orthogonal matrix, so the loop is
energy-preserving before attenuation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.ndimage import uniform_filter1d

from .errors import SceneValidationError
from .filterbank import OCTAVE_CENTERS_8, band_masks
from .ism import SpatialIR, TailStream
from .scene import DecayTarget, RoomSpec, volume

DEFAULT_N_LINES = 12


@dataclass(frozen=True)
class FdnConfig:
    delays: np.ndarray  # samples per line, pairwise distinct integers
    feedback_matrix: np.ndarray  # orthogonal (n, n)
    line_gains: np.ndarray  # (n_lines, n_bands)
    output_directions: np.ndarray  # (n_lines, 3) unit vectors
    sample_rate: float
    onset: float = 0.0
    input_gain: float = 1.0
    # Injection points per line, in samples ahead of the read head. Multiple
    # offsets spread the input along each line the way a diffuse field fills
    # a room, so long lines radiate continuously instead of staying silent
    # for a full recirculation; the injected amplitudes are pre-attenuated by
    # gain^(offset/delay) so every exit lands on the target decay curve.
    # (0,) per line = classic injection at the line input.
    input_offsets: Optional[tuple] = None

    def __post_init__(self):
        delays = np.asarray(self.delays, dtype=int)
        if np.any(delays < 1):
            raise SceneValidationError("FDN delays must be >= 1 sample")
        if len(set(delays.tolist())) != delays.size:
            raise SceneValidationError("FDN delays must be pairwise distinct")
        offsets = self.input_offsets
        if offsets is None:
            offsets = tuple((0,) for _ in range(delays.size))
        else:
            if len(offsets) != delays.size:
                raise SceneValidationError("input_offsets must match delays")
            offsets = tuple(tuple(int(o) for o in line) for line in offsets)
            d_min = int(delays.min())
            for d, line in zip(delays, offsets):
                if not line:
                    raise SceneValidationError("each line needs >= 1 input offset")
                for o in line:
                    if not 0 <= o < d:
                        raise SceneValidationError("input offsets must lie in [0, delay)")
                    if o != 0 and o < d_min:
                        raise SceneValidationError(
                            "nonzero input offsets must be >= min(delays)"
                        )
        object.__setattr__(self, "input_offsets", offsets)
        m = np.asarray(self.feedback_matrix, dtype=float)
        if np.max(np.abs(m.T @ m - np.eye(m.shape[0]))) > 1e-9:
            raise SceneValidationError("FDN feedback matrix must be orthogonal")
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "feedback_matrix", m)
        object.__setattr__(self, "line_gains", np.asarray(self.line_gains, dtype=float))
        object.__setattr__(self, "output_directions",
                           np.asarray(self.output_directions, dtype=float))

    @property
    def n_lines(self) -> int:
        return self.delays.size


@dataclass(frozen=True)
class DualSlopeConfig:
    primary: FdnConfig
    secondary: FdnConfig
    onset_level_db: float = -40.0

    def __post_init__(self):
        if self.onset_level_db >= -20.0:
            raise SceneValidationError("dual-slope onset level must be below -20 dB")


def _coprime_delays(raw: np.ndarray) -> np.ndarray:
    """Round to integers, nudging upward until pairwise coprime and distinct."""
    chosen = []
    for value in raw:
        d = max(int(round(value)), 2)
        while any(math.gcd(d, c) != 1 for c in chosen):
            d += 1
        chosen.append(d)
    return np.asarray(chosen, dtype=int)


def _room_path_lengths(room: RoomSpec) -> np.ndarray:
    lx, ly, lz = room.dims
    return np.array([
        lx, ly, lz,
        math.hypot(lx, ly), math.hypot(lx, lz), math.hypot(ly, lz),
        math.sqrt(lx * lx + ly * ly + lz * lz),
    ])


def _fibonacci_sphere(n: int) -> np.ndarray:
    """Quasi-uniform unit directions (golden-angle spiral)."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _random_orthogonal(n: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    # symmetrize the rounding: re-orthogonalize once for tight tolerance
    u, _, vt = np.linalg.svd(q)
    return u @ vt


def design_fdn(room: RoomSpec, target: DecayTarget, fs: float,
               c: float = 343.0, n_lines: int = DEFAULT_N_LINES,
               seed: int = 0, band_centers=OCTAVE_CENTERS_8) -> FdnConfig:
    """FDN whose per-line band gains realize the room's decay target.

    g_i(f) = 10^(-3 d_i / (fs T60(f))), i.e. -60 dB per T60 of recirculation.
    When the room carries a volume override (non-box real geometry), path
    lengths are scaled by (V_override / V_box)^(1/3).
    """
    paths = _room_path_lengths(room)
    box_volume = float(np.prod(room.dims))
    if room.volume_override is not None:
        paths = paths * (volume(room) / box_volume) ** (1.0 / 3.0)
    # cycle the 7 physical paths with a golden-ratio-ish stretch for extra lines
    reps = int(math.ceil(n_lines / paths.size))
    stretched = np.concatenate([paths * (1.0 + 0.31 * k) for k in range(reps)])
    raw = np.sort(stretched)[:n_lines] * fs / c
    delays = _coprime_delays(raw)
    if len(set(delays.tolist())) != n_lines:
        raise SceneValidationError("room too small for distinct FDN delays")
    t60 = np.asarray(target.t30_bands, dtype=float)
    line_gains = 10.0 ** (-3.0 * delays[:, None] / (fs * t60[None, :]))
    # injection points roughly every min-delay along each line, with a
    # deterministic golden-ratio jitter so lines never fire in sync; nonzero
    # offsets must stay >= min(delays) so block processing matches the
    # per-sample recurrence bit-exactly
    d_min = int(delays.min())
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    offsets = []
    for i, d in enumerate(delays):
        line = [0]
        k = 1
        while True:
            jitter = int(((i * 31 + k) * phi % 1.0) * 0.9 * d_min)
            o = k * d_min + jitter
            if o > d - 1:
                break
            line.append(o)
            k += 1
        offsets.append(tuple(line))
    offsets = tuple(offsets)
    return FdnConfig(
        delays=delays,
        feedback_matrix=_random_orthogonal(n_lines, seed),
        line_gains=line_gains,
        output_directions=_fibonacci_sphere(n_lines),
        sample_rate=fs,
        input_gain=1.0 / math.sqrt(n_lines),
        input_offsets=offsets,
    )


def _run_band(config: FdnConfig, gains: np.ndarray, n: int,
              input_signal: np.ndarray) -> np.ndarray:
    """Run the recurrence for one band; returns (n_lines, n) line outputs.

    Block processing: with block size B = min(delay), the next B outputs of
    every line are already in its buffer, so each block is fully vectorized.
    Results match the per-sample recurrence to rounding (the matrix products
    are evaluated blockwise, which may round differently in the last ulp).
    """
    n_lines = config.n_lines
    delays = config.delays
    # block equivalence needs every offset to be 0 or >= the block size,
    # which FdnConfig enforces
    block = int(delays.min())
    offsets = [np.asarray(line, dtype=int) for line in config.input_offsets]
    # equal amplitude per injection tap (the loop equilibrates toward equal
    # energy density per sample), decayed along the line and normalized so
    # the total injected energy matches the classic single-tap injection
    weights = [gains[i] ** (offsets[i] / delays[i]) for i in range(n_lines)]
    total = sum(float(np.dot(w, w)) for w in weights)
    scale = config.input_gain * math.sqrt(n_lines / total) if total > 0 else 0.0
    in_scale = [scale * w for w in weights]
    buffers = [np.zeros(d) for d in delays]
    heads = np.zeros(n_lines, dtype=int)
    out = np.zeros((n_lines, n))
    m = config.feedback_matrix
    pos = 0
    while pos < n:
        b = min(block, n - pos)
        y = np.empty((n_lines, b))
        for i in range(n_lines):
            h, d = heads[i], delays[i]
            if h + b <= d:
                y[i] = buffers[i][h:h + b]
            else:
                k = d - h
                y[i, :k] = buffers[i][h:]
                y[i, k:] = buffers[i][: b - k]
        # tap the output after the absorption gain, so even the very first
        # pass of a long line lands on the target decay curve
        attenuated = gains[:, None] * y
        out[:, pos:pos + b] = attenuated
        x = m @ attenuated
        chunk = input_signal[pos:pos + b] if pos < len(input_signal) else None
        for i in range(n_lines):
            h, d = heads[i], delays[i]
            if h + b <= d:
                buffers[i][h:h + b] = x[i]
            else:
                k = d - h
                buffers[i][h:] = x[i, :k]
                buffers[i][: b - k] = x[i, k:]
            if chunk is not None:
                lc = chunk.size
                for off, amp in zip(offsets[i], in_scale[i]):
                    vals = amp * chunk
                    s = (h + off) % d
                    if s + lc <= d:
                        buffers[i][s:s + lc] += vals
                    else:
                        k = d - s
                        buffers[i][s:] += vals[:k]
                        buffers[i][: lc - k] += vals[k:]
            heads[i] = (h + b) % d
        pos += b
    return out


_SHAPE_CLAMP_DB = 12.0
_SHAPE_WINDOW_S = 0.03


def _shape_decay(lines: np.ndarray, fs: float, t60: float) -> np.ndarray:
    """Regularize the summed power envelope toward the target exponential.

    Widely spread delay lines make the output flux oscillate around the
    ideal decay (energy parks in long lines for a full recirculation). The
    correction gain is smoothed over 30 ms and clamped to +/- 12 dB, so it
    removes the gross wobble without touching the fine structure.
    """
    n = lines.shape[1]
    power = np.sum(lines**2, axis=0)
    total = float(power.sum())
    if total <= 0.0 or not math.isfinite(t60):
        return lines
    win = max(int(_SHAPE_WINDOW_S * fs), 1) | 1  # odd: keeps the mean centered
    # the running-sum filter can round to tiny negatives on signals spanning
    # many orders of magnitude, so clamp both envelopes at zero
    actual = np.maximum(uniform_filter1d(power, win, mode="constant"), 0.0)
    ideal = 10.0 ** (-6.0 * np.arange(n) / (fs * t60))
    ideal *= total / float(ideal.sum())
    target = np.maximum(uniform_filter1d(ideal, win, mode="constant"), 0.0)
    clamp = 10.0 ** (_SHAPE_CLAMP_DB / 20.0)
    floor = float(actual.max()) * 1e-20
    gain = np.sqrt(target / np.maximum(actual, floor))
    gain = np.clip(gain, 1.0 / clamp, clamp)
    gain[actual <= floor] = 1.0
    return lines * gain[None, :]


def _band_t60(config: FdnConfig, band: int) -> float:
    g = float(config.line_gains[0, band])
    if g >= 1.0:
        return math.inf
    return -3.0 * float(config.delays[0]) / (config.sample_rate * math.log10(g))


def run_fdn(config: FdnConfig, duration: float,
            input_signal: Optional[np.ndarray] = None,
            band_centers=OCTAVE_CENTERS_8) -> list:
    """Direction-labeled tail streams of the FDN response.

    The loop runs once per octave band with that band's line gains; each
    band's line outputs are then band-limited with the zero-phase filterbank
    and summed per line. Default input is a unit impulse at t = 0, in which
    case the band envelopes are regularized toward the target decay.
    """
    fs = config.sample_rate
    n = int(round(duration * fs))
    if n <= 0:
        raise SceneValidationError("duration must cover at least one sample")
    impulse_driven = input_signal is None
    if input_signal is None:
        input_signal = np.array([1.0])
    n_bands = config.line_gains.shape[1]
    # zero-padded masking: the acausal half of each band kernel lands in the
    # padding rather than wrapping to the end of the tail
    masks = band_masks(2 * n, fs, band_centers)
    spectra = None
    for b in range(n_bands):
        lines = _run_band(config, config.line_gains[:, b], n, input_signal)
        if impulse_driven:
            lines = _shape_decay(lines, fs, _band_t60(config, b))
        contrib = np.fft.rfft(lines, n=2 * n, axis=1) * masks[b][None, :]
        spectra = contrib if spectra is None else spectra + contrib
    lines = np.fft.irfft(spectra, n=2 * n, axis=1)[:, :n]
    return [
        TailStream(samples=lines[i], onset=config.onset,
                   direction=config.output_directions[i])
        for i in range(config.n_lines)
    ]


def run_fdn_lossless_check(config: FdnConfig, n_samples: int = 10_000) -> float:
    """Energy drift of the unit-gain loop (orthogonality smoke check)."""
    gains = np.ones(config.n_lines)
    out = _run_band(config, gains, n_samples, np.array([1.0]))
    # after the impulse has entered, loop energy is conserved; compare the
    # output energy of two long windows
    half = n_samples // 2
    e1 = float(np.sum(out[:, :half] ** 2))
    e2 = float(np.sum(out[:, half:] ** 2))
    return abs(e2 - e1) / max(e1, 1e-30)


def splice(early: SpatialIR, tail, *, onset: float, t60: float,
           direct_delay: float) -> SpatialIR:
    """Attach tail streams to the early SpatialIR with a continuous EDC.

    The tail is scaled so that the combined Schroeder curve at the junction
    sits on the ideal decay anchored at the direct sound: with rho being the
    linear EDC level -60 (onset - t_direct) / T60 dB, the tail energy is set
    to rho / (1 - rho) times the early energy.
    """
    from .synth import synthesize_mono  # local import to avoid a cycle

    tail = list(tail)
    if not tail:
        return early
    if not early.taps:
        onset = direct_delay
        scale = 1.0
    else:
        mono = synthesize_mono(early, apply_signature=False)
        e_early = float(np.dot(mono, mono))
        level_db = -60.0 * max(onset - direct_delay, 0.0) / t60
        rho = min(10.0 ** (level_db / 10.0), 1.0 - 1e-9)
        e_tail_target = rho / (1.0 - rho) * e_early
        e_tail_raw = sum(float(np.dot(s.samples, s.samples)) for s in tail)
        scale = math.sqrt(e_tail_target / e_tail_raw) if e_tail_raw > 0 else 0.0
    scaled = [TailStream(samples=s.samples * scale, onset=onset + s.onset,
                         direction=s.direction) for s in tail]
    return SpatialIR(taps=early.taps, sample_rate=early.sample_rate,
                     tail=tuple(scaled), signature=early.signature)


def design_dual_slope(room: RoomSpec, target: DecayTarget, fs: float,
                      c: float = 343.0, n_lines: int = DEFAULT_N_LINES,
                      seed: int = 0) -> DualSlopeConfig:
    """Primary + secondary FDN whose EDC asymptotes cross at the onset level.

    The secondary input gain follows from the two exponential decay rates:
    with EDC_i(t) = a_i^2 (T_i / k) 10^(-60 t / (10 T_i)), requiring the
    crossing at level L places it at t* = -L T1 / 60 and gives
    20 log10(a2/a1) = L (1 - T1/T2) + 10 log10(T1/T2).
    """
    if target.second_slope is None:
        raise SceneValidationError("decay target has no second slope")
    t1 = target.broadband_t30
    t2 = target.second_slope.t30_2
    if abs(t2 - t1) < 1e-9:
        raise SceneValidationError("dual-slope decay times must differ")
    if t2 < t1:
        raise SceneValidationError("secondary T60 must exceed the primary")
    level = target.second_slope.onset_level_db
    primary = design_fdn(room, target, fs, c=c, n_lines=n_lines, seed=seed)
    secondary_target = DecayTarget(t30_bands=np.full_like(target.t30_bands, t2))
    secondary = design_fdn(room, secondary_target, fs, c=c, n_lines=n_lines,
                           seed=seed + 1)
    rel_db = level * (1.0 - t1 / t2) + 10.0 * math.log10(t1 / t2)
    gain_ratio = 10.0 ** (rel_db / 20.0)
    secondary = FdnConfig(
        delays=secondary.delays,
        feedback_matrix=secondary.feedback_matrix,
        line_gains=secondary.line_gains,
        output_directions=secondary.output_directions,
        sample_rate=secondary.sample_rate,
        onset=secondary.onset,
        input_gain=primary.input_gain * gain_ratio,
        input_offsets=secondary.input_offsets,
    )
    return DualSlopeConfig(primary=primary, secondary=secondary,
                           onset_level_db=level)

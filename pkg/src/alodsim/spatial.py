"""Spatialization: binaural (HRTF), loudspeaker array (VBAP), diotic, mono.

Directions are expressed in the listener's head frame: x front, y left,
z up. Azimuth is counterclockwise from front (positive = left), elevation
positive upward.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve
from scipy.spatial import ConvexHull

from .errors import RateMismatchError, SceneValidationError
from .ism import SpatialIR
from .synth import render_units, spatial_ir_length, synthesize_mono


@dataclass(frozen=True)
class ImpulseResponse:
    channels: np.ndarray  # (n_channels, n_samples)
    sample_rate: float
    channel_semantics: str = "mono"  # binaural-LR | array-indexed | mono

    def __post_init__(self):
        ch = np.atleast_2d(np.asarray(self.channels, dtype=float))
        if not np.all(np.isfinite(ch)):
            raise SceneValidationError("impulse response contains non-finite samples")
        object.__setattr__(self, "channels", ch)

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]


# ---------------------------------------------------------------------------
# HRTF sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HrtfSet:
    directions: np.ndarray  # (m, 3) unit vectors, head frame
    filters: np.ndarray  # (m, 2, taps) FIR pairs (left, right)
    sample_rate: float

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float)
        f = np.asarray(self.filters, dtype=float)
        if d.ndim != 2 or d.shape[1] != 3 or d.shape[0] < 4:
            raise SceneValidationError("HRTF set needs >= 4 directions")
        if np.linalg.matrix_rank(d) < 3:
            raise SceneValidationError("HRTF directions must be non-coplanar")
        if f.shape[:2] != (d.shape[0], 2):
            raise SceneValidationError("HRTF filters must be (n_dirs, 2, taps)")
        norms = np.linalg.norm(d, axis=1, keepdims=True)
        object.__setattr__(self, "directions", d / norms)
        object.__setattr__(self, "filters", f)

    def nearest(self, direction: np.ndarray) -> int:
        """Angular nearest neighbor; ties break to the lowest index."""
        dots = self.directions @ np.asarray(direction, dtype=float)
        return int(np.argmax(dots))


def az_el_to_vec(az_deg: float, el_deg: float) -> np.ndarray:
    az = math.radians(az_deg)
    el = math.radians(el_deg)
    return np.array([
        math.cos(el) * math.cos(az),
        math.cos(el) * math.sin(az),
        math.sin(el),
    ])


def synthetic_hrtf(fs: float = 44100.0, n_az: int = 24, n_el: int = 7,
                   n_taps: int = 64, head_radius: float = 0.0875) -> HrtfSet:
    """Crude spherical-head HRTF stand-in (ITD + first-order shadowing).

    Not a measured set; used as the default when no HRTF directory is given
    and by the tests.
    """
    c = 343.0
    azimuths = np.arange(n_az) * 360.0 / n_az
    elevations = np.linspace(-90.0, 90.0, n_el)
    dirs = []
    filters = []
    t = np.arange(n_taps)
    half = n_taps // 4  # fractional-delay kernel half width

    def frac_delay(d: float) -> np.ndarray:
        # windowed sinc centered on the delay (a raised cosine centered at
        # t = 0 would crush near-ear kernels pushed toward the buffer start)
        x = t - d
        w = np.where(np.abs(x) < half, 0.5 + 0.5 * np.cos(np.pi * x / half), 0.0)
        return np.sinc(x) * w

    for el in elevations:
        for az in azimuths:
            v = az_el_to_vec(az, el)
            # Woodworth-style ITD from the lateral angle
            sin_lat = float(v[1])  # +1 = fully left
            itd = head_radius / c * (math.asin(np.clip(sin_lat, -1, 1))
                                     + sin_lat)
            base_delay = n_taps // 2
            dl = base_delay - itd * fs / 2.0
            dr = base_delay + itd * fs / 2.0
            gl = math.sqrt(1.0 + 0.6 * sin_lat)
            gr = math.sqrt(1.0 - 0.6 * sin_lat)
            hl = gl * frac_delay(dl)
            hr = gr * frac_delay(dr)
            dirs.append(v)
            filters.append([hl, hr])
            if abs(el) == 90.0:
                break  # poles once
    return HrtfSet(directions=np.array(dirs), filters=np.array(filters),
                   sample_rate=fs)


def load_hrtf_dir(path: str) -> HrtfSet:
    """Load an HRTF set from a directory with an ``index.txt``.

    Each index row: ``azimuth_deg elevation_deg filename``; each file is a
    stereo WAV (left, right) at the set's common sample rate.
    """
    from .wavio import read_wav

    index_path = os.path.join(path, "index.txt")
    if not os.path.exists(index_path):
        raise SceneValidationError(f"HRTF directory {path!r} lacks index.txt")
    dirs, filters, fs = [], [], None
    with open(index_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            az_s, el_s, name = line.split()
            data, rate = read_wav(os.path.join(path, name))
            if data.ndim != 2 or data.shape[1] != 2:
                raise SceneValidationError(f"HRTF file {name!r} is not stereo")
            if fs is None:
                fs = rate
            elif rate != fs:
                raise RateMismatchError("HRTF files disagree on sample rate")
            dirs.append(az_el_to_vec(float(az_s), float(el_s)))
            filters.append(data.T)
    lengths = {f.shape[1] for f in filters}
    if len(lengths) != 1:
        raise SceneValidationError("HRTF filter lengths differ")
    return HrtfSet(directions=np.array(dirs), filters=np.array(filters),
                   sample_rate=fs)


# ---------------------------------------------------------------------------
# Loudspeaker layouts and VBAP
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LoudspeakerLayout:
    positions: np.ndarray  # (n, 3) meters
    center: np.ndarray  # listener position
    calibration_gains: Optional[np.ndarray] = None
    calibration_delays: Optional[np.ndarray] = None

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=float)
        if len(np.unique(np.round(p, 9), axis=0)) != p.shape[0]:
            raise SceneValidationError("duplicate loudspeaker positions")
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    @property
    def directions(self) -> np.ndarray:
        d = self.positions - self.center
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    @property
    def n_speakers(self) -> int:
        return self.positions.shape[0]


_RING_LAYOUT = (
    # (elevation degrees, count)
    (0.0, 48), (30.0, 12), (-30.0, 12), (60.0, 6), (-60.0, 6),
    (90.0, 1), (-90.0, 1),
)


def array_preset_86(radius: float = 2.4, height: float = 1.8) -> LoudspeakerLayout:
    """The 86-speaker array: a 48-speaker main ring plus elevated rings.

    Rings of 12 at +/-30 deg and 6 at +/-60 deg elevation, single speakers
    at the poles; azimuths uniformly spaced starting at 0 deg (front).
    """
    center = np.array([0.0, 0.0, height])
    positions = []
    for el, count in _RING_LAYOUT:
        for i in range(count):
            az = 360.0 * i / count
            positions.append(center + radius * az_el_to_vec(az, el))
    return LoudspeakerLayout(positions=np.array(positions), center=center)


class _Triangulation:
    """Convex-hull triangulation of the layout directions, with cached inverses."""

    def __init__(self, layout: LoudspeakerLayout):
        dirs = layout.directions
        hull = ConvexHull(dirs)
        self.triangles = hull.simplices
        mats = dirs[self.triangles]  # (T, 3, 3): rows are speaker directions
        self.inverses = np.linalg.inv(mats)

    def gains(self, direction: np.ndarray):
        # barycentric-style gains for all triangles at once
        g = np.einsum("tij,i->tj", self.inverses, direction)
        worst = g.min(axis=1)
        best = int(np.argmax(worst))
        return self.triangles[best], g[best], float(worst[best])


_TRI_CACHE: dict = {}


def _triangulation(layout: LoudspeakerLayout) -> _Triangulation:
    key = id(layout)
    tri = _TRI_CACHE.get(key)
    if tri is None:
        tri = _Triangulation(layout)
        _TRI_CACHE[key] = tri
    return tri


def vbap_gains(direction: np.ndarray, layout: LoudspeakerLayout) -> np.ndarray:
    """Power-normalized VBAP gains; at most 3 nonzero, sum of squares = 1."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    tri = _triangulation(layout)
    idx, g, worst = tri.gains(d)
    if worst < -1e-9:
        warnings.warn("direction outside triangulated coverage; "
                      "using nearest triangle", RuntimeWarning)
    g = np.clip(g, 0.0, None)
    norm = np.linalg.norm(g)
    if norm == 0.0:
        raise SceneValidationError("degenerate VBAP direction")
    gains = np.zeros(layout.n_speakers)
    gains[idx] = g / norm
    return gains


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def head_frame(orientation: np.ndarray) -> np.ndarray:
    """Rotation matrix whose rows map world vectors to (front, left, up)."""
    f = np.asarray(orientation, dtype=float)
    f = f / np.linalg.norm(f)
    up = np.array([0.0, 0.0, 1.0])
    if abs(float(np.dot(f, up))) > 0.999:
        up = np.array([1.0, 0.0, 0.0])
    left = np.cross(up, f)
    left /= np.linalg.norm(left)
    return np.stack([f, left, np.cross(f, left)])


def _apply_signature(channels: np.ndarray, spatial_ir: SpatialIR) -> np.ndarray:
    if spatial_ir.signature is None:
        return channels
    sig = np.asarray(spatial_ir.signature, dtype=float)
    return fftconvolve(channels, sig[None, :], axes=1)


def binauralize(spatial_ir: SpatialIR, hrtf: HrtfSet,
                orientation: Optional[np.ndarray] = None) -> ImpulseResponse:
    """Two-channel render: nearest-direction HRTF pair per tap/tail stream."""
    if hrtf.sample_rate != spatial_ir.sample_rate:
        raise RateMismatchError("HRTF and scene sample rates differ")
    frame = head_frame(orientation) if orientation is not None else np.eye(3)

    def spread(doa):
        return [(hrtf.nearest(frame @ doa), 1.0)]

    units = render_units(spatial_ir, spread)
    n = spatial_ir_length(spatial_ir)
    taps = hrtf.filters.shape[2]
    out = np.zeros((2, n + taps - 1))
    for idx in sorted(units):
        wave = units[idx]
        out[0] += fftconvolve(wave, hrtf.filters[idx, 0])
        out[1] += fftconvolve(wave, hrtf.filters[idx, 1])
    out = _apply_signature(out, spatial_ir)
    return ImpulseResponse(channels=out, sample_rate=spatial_ir.sample_rate,
                           channel_semantics="binaural-LR")


def render_array(spatial_ir: SpatialIR, layout: LoudspeakerLayout,
                 orientation: Optional[np.ndarray] = None) -> ImpulseResponse:
    """N-channel render: VBAP of each tap/tail stream onto the layout."""
    frame = head_frame(orientation) if orientation is not None else np.eye(3)

    def spread(doa):
        gains = vbap_gains(frame @ doa, layout)
        idx = np.nonzero(gains)[0]
        return [(int(i), float(gains[i])) for i in idx]

    units = render_units(spatial_ir, spread)
    n = spatial_ir_length(spatial_ir)
    out = np.zeros((layout.n_speakers, n))
    for idx, wave in units.items():
        out[idx] += wave
    if layout.calibration_gains is not None:
        out *= np.asarray(layout.calibration_gains, dtype=float)[:, None]
    if layout.calibration_delays is not None:
        shifted = np.zeros_like(out)
        for i, d in enumerate(np.asarray(layout.calibration_delays)):
            k = int(round(d * spatial_ir.sample_rate))
            if k >= 0:
                shifted[i, k:] = out[i, : out.shape[1] - k] if k else out[i]
            else:
                shifted[i, :k] = out[i, -k:]
        out = shifted
    out = _apply_signature(out, spatial_ir)
    return ImpulseResponse(channels=out, sample_rate=spatial_ir.sample_rate,
                           channel_semantics="array-indexed")


def render_mono(spatial_ir: SpatialIR) -> ImpulseResponse:
    return ImpulseResponse(channels=synthesize_mono(spatial_ir)[None, :],
                           sample_rate=spatial_ir.sample_rate,
                           channel_semantics="mono")


def diotic(ir: ImpulseResponse) -> ImpulseResponse:
    """Headphone diotic: the left channel presented to both ears."""
    left = ir.channels[0]
    return ImpulseResponse(channels=np.stack([left, left.copy()]),
                           sample_rate=ir.sample_rate,
                           channel_semantics="binaural-LR")


def frontal_speaker_index(layout: LoudspeakerLayout) -> int:
    """Main-ring speaker at azimuth 0 (maximal dot product with front)."""
    front = np.array([1.0, 0.0, 0.0])
    return int(np.argmax(layout.directions @ front))


def diotic_array(ir: ImpulseResponse, layout: LoudspeakerLayout) -> ImpulseResponse:
    """Loudspeaker diotic: the mono collapse routed to the frontal speaker."""
    out = np.zeros((layout.n_speakers, ir.n_samples))
    out[frontal_speaker_index(layout)] = ir.channels[0]
    return ImpulseResponse(channels=out, sample_rate=ir.sample_rate,
                           channel_semantics="array-indexed")

"""Scene description: rooms, apertures, panels, sources, receivers, profiles.

All types are immutable after construction and operations are pure, so scenes
can be shared freely across threads. Scene documents are UTF-8 JSON; the
schema mirrors the dataclass fields below (see README for an annotated
example).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import InfeasibleTargetError, SceneParseError, SceneValidationError
from .filterbank import OCTAVE_CENTERS_8

BAND_CENTERS = np.asarray(OCTAVE_CENTERS_8)
N_BANDS = len(OCTAVE_CENTERS_8)

DEFAULT_SAMPLE_RATE = 44100.0
DEFAULT_SPEED_OF_SOUND = 343.0

# Wall order used for per-surface absorption: (x=0, x=Lx, y=0, y=Ly, z=0, z=Lz)
WALL_NAMES = ("x0", "x1", "y0", "y1", "z0", "z1")


def _vec(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise SceneValidationError(f"expected a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise SceneValidationError("vector components must be finite")
    return a


def _unit(v) -> np.ndarray:
    a = _vec(v)
    n = float(np.linalg.norm(a))
    if abs(n - 1.0) > 1e-9:
        raise SceneValidationError(f"expected a unit vector, norm was {n!r}")
    return a


def _bands(value, name: str) -> np.ndarray:
    """Broadcast a scalar or per-band list onto the octave-band grid."""
    a = np.atleast_1d(np.asarray(value, dtype=float))
    if a.size == 1:
        a = np.full(N_BANDS, float(a[0]))
    if a.size != N_BANDS:
        raise SceneValidationError(
            f"{name}: expected scalar or {N_BANDS} band values, got {a.size}"
        )
    return a


@dataclass(frozen=True)
class SecondSlope:
    """Secondary decay for coupled-volume (dual-slope) reverberation."""

    t30_2: float
    onset_level_db: float = -40.0

    def __post_init__(self):
        if self.t30_2 <= 0:
            raise SceneValidationError("second-slope T30 must be positive")
        if self.onset_level_db >= 0:
            raise SceneValidationError("second-slope onset level must be below 0 dB")


@dataclass(frozen=True)
class DecayTarget:
    """Per-band reverberation-time target, optionally with a second slope."""

    t30_bands: np.ndarray
    second_slope: Optional[SecondSlope] = None

    def __post_init__(self):
        object.__setattr__(self, "t30_bands", _bands(self.t30_bands, "t30"))
        if np.any(self.t30_bands <= 0):
            raise SceneValidationError("T30 targets must be positive")

    @property
    def broadband_t30(self) -> float:
        return float(np.exp(np.mean(np.log(self.t30_bands))))


@dataclass(frozen=True)
class RoomSpec:
    """Shoebox room spanning ``origin`` .. ``origin + dims`` in world space."""

    id: str
    dims: np.ndarray
    absorption: np.ndarray  # (6 walls, n_bands)
    scattering: np.ndarray  # (n_bands,)
    decay: Optional[DecayTarget] = None
    volume_override: Optional[float] = None
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "dims", _vec(self.dims))
        object.__setattr__(self, "origin", _vec(self.origin))
        if np.any(self.dims <= 0):
            raise SceneValidationError(f"room {self.id}: dims must be positive")
        absorption = np.asarray(self.absorption, dtype=float)
        if absorption.ndim == 0 or absorption.ndim == 1:
            absorption = np.tile(_bands(absorption, "absorption"), (6, 1))
        if absorption.shape != (6, N_BANDS):
            raise SceneValidationError(
                f"room {self.id}: absorption must be (6, {N_BANDS}), got {absorption.shape}"
            )
        if np.any(absorption < 0) or np.any(absorption >= 1):
            raise SceneValidationError(f"room {self.id}: absorption must be in [0, 1)")
        object.__setattr__(self, "absorption", absorption)
        scattering = _bands(self.scattering, "scattering")
        if np.any(scattering < 0) or np.any(scattering > 1):
            raise SceneValidationError(f"room {self.id}: scattering must be in [0, 1]")
        object.__setattr__(self, "scattering", scattering)
        if self.volume_override is not None and self.volume_override <= 0:
            raise SceneValidationError(f"room {self.id}: volume_override must be > 0")

    def contains(self, point: np.ndarray, tol: float = 1e-9) -> bool:
        local = np.asarray(point) - self.origin
        return bool(np.all(local >= -tol) and np.all(local <= self.dims + tol))


@dataclass(frozen=True)
class ApertureSpec:
    """Rectangular opening in the shared wall of two rooms."""

    connects: tuple  # (room_id, room_id)
    center: np.ndarray
    width: float
    height: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        object.__setattr__(self, "connects", tuple(self.connects))
        if len(self.connects) != 2:
            raise SceneValidationError("aperture must connect exactly two rooms")
        if self.width <= 0 or self.height <= 0:
            raise SceneValidationError("aperture width/height must be positive")

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class PanelSpec:
    """Finite rectangular reflector (table, chalkboard, ...)."""

    id: str
    corners: np.ndarray  # (4, 3), coplanar rectangle
    absorption: np.ndarray  # (n_bands,)

    def __post_init__(self):
        corners = np.asarray(self.corners, dtype=float)
        if corners.shape != (4, 3):
            raise SceneValidationError(f"panel {self.id}: corners must be (4, 3)")
        object.__setattr__(self, "corners", corners)
        object.__setattr__(self, "absorption", _bands(self.absorption, "panel absorption"))
        e1 = corners[1] - corners[0]
        e2 = corners[3] - corners[0]
        normal = np.cross(e1, e2)
        area = np.linalg.norm(normal)
        if area < 1e-9:
            raise SceneValidationError(f"panel {self.id}: degenerate rectangle")
        n = normal / area
        if abs(float(np.dot(corners[2] - corners[0], n))) > 1e-3:
            raise SceneValidationError(f"panel {self.id}: corners not coplanar within 1 mm")
        if abs(float(np.dot(e1, e2))) > 1e-6 * np.linalg.norm(e1) * np.linalg.norm(e2):
            raise SceneValidationError(f"panel {self.id}: corners do not form a rectangle")

    @property
    def normal(self) -> np.ndarray:
        n = np.cross(self.corners[1] - self.corners[0], self.corners[3] - self.corners[0])
        return n / np.linalg.norm(n)


@dataclass(frozen=True)
class DirectivityGrid:
    """Sampled source directivity: gains per (azimuth, elevation) per band.

    Azimuths in degrees [0, 360), counterclockwise from the source's facing
    direction; elevations in degrees [-90, 90]. Lookup is nearest-neighbor.
    """

    azimuths_deg: np.ndarray
    elevations_deg: np.ndarray
    gains: np.ndarray  # (n_az, n_el, n_bands)

    def __post_init__(self):
        az = np.asarray(self.azimuths_deg, dtype=float)
        el = np.asarray(self.elevations_deg, dtype=float)
        g = np.asarray(self.gains, dtype=float)
        if g.shape != (az.size, el.size, N_BANDS):
            raise SceneValidationError("directivity gains must be (n_az, n_el, n_bands)")
        if not np.all(np.isfinite(g)) or np.any(g < 0):
            raise SceneValidationError("directivity gains must be finite and >= 0")
        if el.min() > -89.9 or el.max() < 89.9:
            raise SceneValidationError("directivity grid must cover the sphere in elevation")
        object.__setattr__(self, "azimuths_deg", az)
        object.__setattr__(self, "elevations_deg", el)
        object.__setattr__(self, "gains", g)

    def gain(self, direction: np.ndarray, forward: np.ndarray) -> np.ndarray:
        """Per-band gain for emission ``direction`` given the facing vector."""
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        f = np.asarray(forward, dtype=float)
        f = f / np.linalg.norm(f)
        up = np.array([0.0, 0.0, 1.0])
        if abs(np.dot(f, up)) > 0.999:
            up = np.array([1.0, 0.0, 0.0])
        left = np.cross(up, f)
        left /= np.linalg.norm(left)
        up2 = np.cross(f, left)
        x, y, z = np.dot(d, f), np.dot(d, left), np.dot(d, up2)
        az = math.degrees(math.atan2(y, x)) % 360.0
        el = math.degrees(math.asin(np.clip(z, -1.0, 1.0)))
        i = int(np.argmin(np.minimum(np.abs(self.azimuths_deg - az),
                                     360.0 - np.abs(self.azimuths_deg - az))))
        j = int(np.argmin(np.abs(self.elevations_deg - el)))
        return self.gains[i, j]


@dataclass(frozen=True)
class SourceSpec:
    id: str
    position: np.ndarray
    orientation: np.ndarray
    directivity: Optional[DirectivityGrid] = None
    level_db: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", _vec(self.position))
        object.__setattr__(self, "orientation", _unit(self.orientation))


@dataclass(frozen=True)
class ReceiverSpec:
    id: str
    position: np.ndarray
    orientation: np.ndarray
    kind: str = "binaural"  # binaural | omni | array

    def __post_init__(self):
        object.__setattr__(self, "position", _vec(self.position))
        object.__setattr__(self, "orientation", _unit(self.orientation))
        if self.kind not in ("binaural", "omni", "array"):
            raise SceneValidationError(f"receiver {self.id}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class SceneSpec:
    name: str
    rooms: tuple
    sources: tuple
    receivers: tuple
    apertures: tuple = ()
    panels: tuple = ()
    sample_rate: float = DEFAULT_SAMPLE_RATE
    speed_of_sound: float = DEFAULT_SPEED_OF_SOUND
    rng_seed: int = 0
    # Explicit occluded direct-path length (m) for source->receiver routes
    # without line of sight (stored rather than computed via diffraction).
    occluded_path_m: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "rooms", tuple(self.rooms))
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "receivers", tuple(self.receivers))
        object.__setattr__(self, "apertures", tuple(self.apertures))
        object.__setattr__(self, "panels", tuple(self.panels))
        if not self.rooms or not self.sources or not self.receivers:
            raise SceneValidationError("scene needs at least one room, source and receiver")
        ids = [r.id for r in self.rooms]
        if len(set(ids)) != len(ids):
            raise SceneValidationError("duplicate room ids")
        for ap in self.apertures:
            for rid in ap.connects:
                if rid not in ids:
                    raise SceneValidationError(f"aperture references unknown room {rid!r}")
        for s in self.sources:
            if self.room_of(s.position) is None:
                raise SceneValidationError(f"source {s.id} lies outside every room")
        for r in self.receivers:
            if self.room_of(r.position) is None:
                raise SceneValidationError(f"receiver {r.id} lies outside every room")

    def room(self, room_id: str) -> RoomSpec:
        for r in self.rooms:
            if r.id == room_id:
                return r
        raise SceneValidationError(f"unknown room id {room_id!r}")

    def room_of(self, point: np.ndarray) -> Optional[RoomSpec]:
        for r in self.rooms:
            if r.contains(point):
                return r
        return None


@dataclass(frozen=True)
class RenderingProfile:
    """The switchboard of simulation features (the acoustic level of detail)."""

    name: str
    ism_order: int = 3
    jitter_enabled: bool = True
    jitter_sigma_per_order: float = 0.1  # meters of stddev per reflection order
    smearing_enabled: bool = True
    specular_fraction: Optional[np.ndarray] = None  # None -> room scattering
    fdn_enabled: bool = True
    coupled_mode: str = "full"  # full | two_stage | off
    panels_enabled: bool = True
    dual_slope_enabled: bool = True
    anechoic: bool = False
    output_mode: str = "binaural"  # binaural | array | diotic | mono

    def __post_init__(self):
        if self.ism_order < 0:
            raise SceneValidationError("ism_order must be >= 0")
        if self.coupled_mode not in ("full", "two_stage", "off"):
            raise SceneValidationError(f"unknown coupled_mode {self.coupled_mode!r}")
        if self.output_mode not in ("binaural", "array", "diotic", "mono"):
            raise SceneValidationError(f"unknown output_mode {self.output_mode!r}")
        if self.anechoic and (self.fdn_enabled or self.ism_order != 0):
            raise SceneValidationError("anechoic profile requires fdn off and ism_order 0")
        if self.specular_fraction is not None:
            object.__setattr__(
                self, "specular_fraction", _bands(self.specular_fraction, "specular_fraction")
            )


_PROFILE_PRESETS = {
    # (1) all features: order-3 ISM, jitter, smearing, FDN, full coupling,
    # panels, dual slope
    "razr-full": dict(ism_order=3),
    # (2) same feature set with first-order ISM
    "razr-1st": dict(ism_order=1),
    # (3) per-scene feature removal: simplified (two-stage) coupling, no
    # panels, no dual slope -- each change only has an effect in the scene
    # that owns the feature
    "razr-simple": dict(ism_order=3, coupled_mode="two_stage",
                        panels_enabled=False, dual_slope_enabled=False),
    # (4) plain 15th-order ISM: no jitter, smearing, FDN or panels
    "ism-15": dict(ism_order=15, jitter_enabled=False, smearing_enabled=False,
                   fdn_enabled=False, coupled_mode="two_stage",
                   panels_enabled=False, dual_slope_enabled=False),
    # (5) diotic presentation of the full rendering
    "diotic": dict(ism_order=3, output_mode="diotic"),
    # (6) direct sound only (inverse-square law + occlusion stand-in)
    "anechoic": dict(ism_order=0, jitter_enabled=False, smearing_enabled=False,
                     fdn_enabled=False, coupled_mode="off", panels_enabled=False,
                     dual_slope_enabled=False, anechoic=True),
}


def profile_preset(name: str, output_mode: Optional[str] = None) -> RenderingProfile:
    """One of the six named rendering conditions."""
    if name not in _PROFILE_PRESETS:
        raise SceneParseError(
            f"unknown profile {name!r}; known: {', '.join(sorted(_PROFILE_PRESETS))}"
        )
    kwargs = dict(_PROFILE_PRESETS[name])
    if output_mode is not None and "output_mode" not in kwargs:
        kwargs["output_mode"] = output_mode
    return RenderingProfile(name=name, **kwargs)


def profile_names() -> tuple:
    return tuple(sorted(_PROFILE_PRESETS))


# ---------------------------------------------------------------------------
# Derived quantities
# ---------------------------------------------------------------------------

def surface_area(room: RoomSpec) -> float:
    """Total inner surface area 2(LxLy + LxLz + LyLz) in m^2."""
    lx, ly, lz = room.dims
    return 2.0 * (lx * ly + lx * lz + ly * lz)


def volume(room: RoomSpec) -> float:
    """Room volume in m^3; honors ``volume_override`` when present."""
    if room.volume_override is not None:
        return float(room.volume_override)
    return float(np.prod(room.dims))


def fit_absorption(room: RoomSpec, target: DecayTarget) -> np.ndarray:
    """Per-band uniform absorption that reproduces the target T60 (Eyring).

    alpha(f) = 1 - exp(-0.161 V / (S T60(f))). The closed-form inverse of
    Eyring's formula, so predicting T60 back from the result is exact.
    """
    v = volume(room)
    s = surface_area(room)
    alpha = 1.0 - np.exp(-0.161 * v / (s * target.t30_bands))
    if np.any(alpha >= 1.0 - 1e-12):
        raise InfeasibleTargetError(
            f"room {room.id}: T30 target too short for geometry (alpha -> 1)"
        )
    return alpha


def eyring_t60(room: RoomSpec, alpha: np.ndarray) -> np.ndarray:
    """Eyring reverberation time for uniform per-band absorption."""
    v = volume(room)
    s = surface_area(room)
    return 0.161 * v / (-s * np.log(1.0 - np.asarray(alpha, dtype=float)))


def sabine_absorption(room: RoomSpec, target: DecayTarget) -> np.ndarray:
    """Sabine-formula absorption, kept as a cross-check for the Eyring fit."""
    v = volume(room)
    s = surface_area(room)
    alpha = 0.161 * v / (s * target.t30_bands)
    if np.any(alpha >= 1.0):
        raise InfeasibleTargetError(
            f"room {room.id}: T30 target infeasible under Sabine"
        )
    return alpha


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

DEFAULT_SCATTERING = 0.3  # broadband scattering used by all presets
LIVING_ROOM_DOOR = (0.8, 2.0)  # door width x height (m); not stated, documented
OCCLUDED_PATH_LIVING_ROOM = 5.7  # m, through the door


def _fitted_room(room_id, dims, t30, origin=(0, 0, 0), volume_override=None,
                 second_slope=None) -> RoomSpec:
    decay = DecayTarget(t30_bands=t30, second_slope=second_slope)
    shell = RoomSpec(id=room_id, dims=dims, absorption=0.5, scattering=DEFAULT_SCATTERING,
                     origin=origin, volume_override=volume_override)
    alpha = fit_absorption(shell, decay)
    return replace(shell, absorption=np.tile(alpha, (6, 1)), decay=decay)


def _living_room_scene(seed: int = 0) -> SceneSpec:
    # Living room spans y in [0, 3.78]; the kitchen adjoins at y = 3.78.
    living = _fitted_room("living-room", (4.97, 3.78, 2.71), 0.54)
    kitchen = _fitted_room("kitchen", (4.97, 2.00, 2.71), 0.66, origin=(0.0, 3.78, 0.0))
    door_center = np.array([4.0, 3.78, 1.0])
    door = ApertureSpec(connects=("kitchen", "living-room"), center=door_center,
                        width=LIVING_ROOM_DOOR[0], height=LIVING_ROOM_DOOR[1])
    receiver_pos = np.array([1.0, 1.0, 1.2])
    # Source placed so the path source -> door center -> receiver is exactly
    # the occluded path length of 5.7 m.
    d2 = float(np.linalg.norm(door_center - receiver_pos))
    d1 = OCCLUDED_PATH_LIVING_ROOM - d2
    source_pos = door_center + np.array([0.0, d1, 0.0])
    to_door = door_center - source_pos
    look = to_door / np.linalg.norm(to_door)
    rec_look = np.array([0.0, 1.0, 0.0])  # facing the kitchen wall
    masker_pos = receiver_pos + 1.0 * np.cross(rec_look, np.array([0.0, 0.0, 1.0]))
    return SceneSpec(
        name="living-room",
        rooms=(living, kitchen),
        apertures=(door,),
        sources=(
            SourceSpec(id="target", position=source_pos, orientation=look),
            SourceSpec(id="masker", position=masker_pos,
                       orientation=_masker_orientation(masker_pos, receiver_pos)),
        ),
        receivers=(ReceiverSpec(id="listener", position=receiver_pos,
                                orientation=rec_look),),
        rng_seed=seed,
        occluded_path_m=OCCLUDED_PATH_LIVING_ROOM,
    )


def _masker_orientation(masker_pos, receiver_pos) -> np.ndarray:
    d = np.asarray(receiver_pos) - np.asarray(masker_pos)
    return d / np.linalg.norm(d)


def _pub_scene(seed: int = 0) -> SceneSpec:
    # Stated volume (~442 m^3) is below the box product (floor plan is not
    # rectangular); kept as an override for reverb design.
    room = _fitted_room("pub", (17.76, 10.2, 2.9), 0.7, volume_override=442.0)
    receiver_pos = np.array([8.0, 5.0, 1.2])
    source_pos = np.array([8.0, 5.97, 1.2])  # directly opposite, 0.97 m away
    look = np.array([0.0, -1.0, 0.0])
    rec_look = np.array([0.0, 1.0, 0.0])
    masker_pos = receiver_pos + 1.0 * np.cross(rec_look, np.array([0.0, 0.0, 1.0]))
    table = PanelSpec(
        id="table",
        corners=np.array([
            [7.4, 5.085, 0.75], [8.6, 5.085, 0.75],
            [8.6, 5.885, 0.75], [7.4, 5.885, 0.75],
        ]),
        absorption=0.1,
    )
    chalkboard = PanelSpec(
        id="chalkboard",
        corners=np.array([
            [6.2, 4.5, 1.0], [6.2, 6.5, 1.0],
            [6.2, 6.5, 2.0], [6.2, 4.5, 2.0],
        ]),
        absorption=0.1,
    )
    return SceneSpec(
        name="pub",
        rooms=(room,),
        panels=(table, chalkboard),
        sources=(
            SourceSpec(id="target", position=source_pos, orientation=look),
            SourceSpec(id="masker", position=masker_pos,
                       orientation=_masker_orientation(masker_pos, receiver_pos)),
        ),
        receivers=(ReceiverSpec(id="listener", position=receiver_pos,
                                orientation=rec_look),),
        rng_seed=seed,
    )


def _underground_scene(seed: int = 0) -> SceneSpec:
    # Coupled tunnel volumes produce the dual-slope decay; they are modeled
    # through the secondary decay target, not through extra geometry.
    room = _fitted_room(
        "underground", (120.0, 15.7, 4.16), 1.6, volume_override=11000.0,
        second_slope=SecondSlope(t30_2=3.2, onset_level_db=-40.0),
    )
    receiver_pos = np.array([60.0, 7.85, 1.6])
    source_pos = receiver_pos + np.array([6.37, 0.0, 0.0])  # 6.37 m frontal
    rec_look = np.array([1.0, 0.0, 0.0])
    masker_pos = receiver_pos + 1.0 * np.cross(rec_look, np.array([0.0, 0.0, 1.0]))
    return SceneSpec(
        name="underground",
        rooms=(room,),
        sources=(
            SourceSpec(id="target", position=source_pos, orientation=-rec_look),
            SourceSpec(id="masker", position=masker_pos,
                       orientation=_masker_orientation(masker_pos, receiver_pos)),
        ),
        receivers=(ReceiverSpec(id="listener", position=receiver_pos,
                                orientation=rec_look),),
        rng_seed=seed,
    )


_SCENE_PRESETS = {
    "living-room": _living_room_scene,
    "pub": _pub_scene,
    "underground": _underground_scene,
}


def preset(name: str, seed: int = 0) -> SceneSpec:
    """One of the three scene presets: living-room, pub, underground."""
    if name not in _SCENE_PRESETS:
        raise SceneParseError(
            f"unknown preset {name!r}; known: {', '.join(sorted(_SCENE_PRESETS))}"
        )
    return _SCENE_PRESETS[name](seed=seed)


def preset_names() -> tuple:
    return tuple(sorted(_SCENE_PRESETS))


# ---------------------------------------------------------------------------
# JSON (de)serialization
# ---------------------------------------------------------------------------

def _decay_to_json(d: Optional[DecayTarget]):
    if d is None:
        return None
    out = {"t30_bands": d.t30_bands.tolist()}
    if d.second_slope is not None:
        out["second_slope"] = {
            "t30_2": d.second_slope.t30_2,
            "onset_level_db": d.second_slope.onset_level_db,
        }
    return out


def _decay_from_json(obj) -> Optional[DecayTarget]:
    if obj is None:
        return None
    second = None
    if obj.get("second_slope") is not None:
        ss = obj["second_slope"]
        second = SecondSlope(t30_2=ss["t30_2"],
                             onset_level_db=ss.get("onset_level_db", -40.0))
    return DecayTarget(t30_bands=obj["t30_bands"], second_slope=second)


def _directivity_to_json(d: Optional[DirectivityGrid]):
    if d is None:
        return None
    return {
        "azimuths_deg": d.azimuths_deg.tolist(),
        "elevations_deg": d.elevations_deg.tolist(),
        "gains": d.gains.tolist(),
    }


def _directivity_from_json(obj) -> Optional[DirectivityGrid]:
    if obj is None:
        return None
    return DirectivityGrid(
        azimuths_deg=obj["azimuths_deg"],
        elevations_deg=obj["elevations_deg"],
        gains=obj["gains"],
    )


def serialize_scene(scene: SceneSpec) -> str:
    doc = {
        "name": scene.name,
        "sample_rate": scene.sample_rate,
        "speed_of_sound": scene.speed_of_sound,
        "seed": scene.rng_seed,
        "occluded_path_m": scene.occluded_path_m,
        "rooms": [
            {
                "id": r.id,
                "dims": r.dims.tolist(),
                "origin": r.origin.tolist(),
                "absorption": r.absorption.tolist(),
                "scattering": r.scattering.tolist(),
                "decay": _decay_to_json(r.decay),
                "volume_override": r.volume_override,
            }
            for r in scene.rooms
        ],
        "apertures": [
            {
                "connects": list(a.connects),
                "center": a.center.tolist(),
                "width": a.width,
                "height": a.height,
            }
            for a in scene.apertures
        ],
        "panels": [
            {
                "id": p.id,
                "corners": p.corners.tolist(),
                "absorption": p.absorption.tolist(),
            }
            for p in scene.panels
        ],
        "sources": [
            {
                "id": s.id,
                "position": s.position.tolist(),
                "orientation": s.orientation.tolist(),
                "level_db": s.level_db,
                "directivity": _directivity_to_json(s.directivity),
            }
            for s in scene.sources
        ],
        "receivers": [
            {
                "id": r.id,
                "position": r.position.tolist(),
                "orientation": r.orientation.tolist(),
                "kind": r.kind,
            }
            for r in scene.receivers
        ],
    }
    return json.dumps(doc, indent=2)


def parse_scene(document: str) -> SceneSpec:
    """Parse and validate a UTF-8 JSON scene document."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SceneParseError(f"invalid JSON: {exc}") from exc

    def require(obj, key, where):
        if key not in obj:
            raise SceneParseError(f"{where}: missing field {key!r}")
        return obj[key]

    try:
        rooms = tuple(
            RoomSpec(
                id=require(r, "id", "room"),
                dims=require(r, "dims", "room"),
                origin=r.get("origin", (0.0, 0.0, 0.0)),
                absorption=require(r, "absorption", f"room {r.get('id')}"),
                scattering=r.get("scattering", DEFAULT_SCATTERING),
                decay=_decay_from_json(r.get("decay")),
                volume_override=r.get("volume_override"),
            )
            for r in doc.get("rooms", [])
        )
        apertures = tuple(
            ApertureSpec(
                connects=tuple(require(a, "connects", "aperture")),
                center=require(a, "center", "aperture"),
                width=require(a, "width", "aperture"),
                height=require(a, "height", "aperture"),
            )
            for a in doc.get("apertures", [])
        )
        panels = tuple(
            PanelSpec(
                id=require(p, "id", "panel"),
                corners=require(p, "corners", "panel"),
                absorption=require(p, "absorption", f"panel {p.get('id')}"),
            )
            for p in doc.get("panels", [])
        )
        sources = tuple(
            SourceSpec(
                id=require(s, "id", "source"),
                position=require(s, "position", "source"),
                orientation=require(s, "orientation", "source"),
                level_db=s.get("level_db", 0.0),
                directivity=_directivity_from_json(s.get("directivity")),
            )
            for s in doc.get("sources", [])
        )
        receivers = tuple(
            ReceiverSpec(
                id=require(r, "id", "receiver"),
                position=require(r, "position", "receiver"),
                orientation=require(r, "orientation", "receiver"),
                kind=r.get("kind", "binaural"),
            )
            for r in doc.get("receivers", [])
        )
        return SceneSpec(
            name=doc.get("name", "scene"),
            rooms=rooms,
            apertures=apertures,
            panels=panels,
            sources=sources,
            receivers=receivers,
            sample_rate=doc.get("sample_rate", DEFAULT_SAMPLE_RATE),
            speed_of_sound=doc.get("speed_of_sound", DEFAULT_SPEED_OF_SOUND),
            rng_seed=doc.get("seed", 0),
            occluded_path_m=doc.get("occluded_path_m"),
        )
    except (TypeError, KeyError) as exc:
        raise SceneParseError(f"malformed scene document: {exc}") from exc

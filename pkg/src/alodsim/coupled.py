"""Coupled-volume rendering through a rectangular aperture.

Two modes:

* ``two_stage`` -- the source room is simulated with an omnidirectional
  receiver at the (closed) door, and its mono response becomes the signature
  of an omnidirectional source at the door center in the receiver room.
* ``full`` -- the same early path, plus the receiver room's FDN re-excited
  by the source room's diffuse tail with a coupling gain derived from the
  aperture-to-wall area ratio. With k = 0 this reduces bit-exactly to
  ``two_stage``. This cross-feed is an explicit approximation of true
  coupled-FDN topologies.

The occluded direct path (edge diffraction around the door frame) is
replaced by a documented stand-in: a single tap at the known path length
with a broadband attenuation and a first-order lowpass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import SceneValidationError
from .fdn import design_fdn, run_fdn, splice
from .ism import ReflectionTap, SpatialIR, early_spatial_ir
from .scene import (
    ApertureSpec,
    BAND_CENTERS,
    RenderingProfile,
    SceneSpec,
    SourceSpec,
    surface_area,
)
from .synth import synthesize_mono

OCCLUSION_ATTEN_DB = 6.0  # broadband stand-in loss around the door frame
OCCLUSION_CORNER_HZ = 2000.0  # first-order lowpass corner of the stand-in


@dataclass(frozen=True)
class CoupledPlan:
    mode: str  # full | two_stage | off
    aperture: Optional[ApertureSpec] = None
    path_length_direct: Optional[float] = None
    occlusion_atten_db: float = OCCLUSION_ATTEN_DB
    occlusion_corner_hz: float = OCCLUSION_CORNER_HZ

    def __post_init__(self):
        if self.mode in ("full", "two_stage") and self.aperture is None:
            raise SceneValidationError(f"coupled mode {self.mode!r} requires an aperture")


def plan_for(scene: SceneSpec, profile: RenderingProfile) -> CoupledPlan:
    aperture = scene.apertures[0] if scene.apertures else None
    mode = profile.coupled_mode if aperture is not None else "off"
    return CoupledPlan(mode=mode, aperture=aperture,
                       path_length_direct=scene.occluded_path_m)


def occluded_direct(plan: CoupledPlan, receiver_pos: np.ndarray,
                    c: float, band_centers=BAND_CENTERS) -> ReflectionTap:
    """Stand-in direct tap for a blocked line of sight.

    Inverse-square amplitude over the stored path length, attenuated and
    lowpassed by the occlusion filter; DOA points toward the aperture.
    """
    if plan.path_length_direct is None:
        raise SceneValidationError("no occluded path length available")
    r = plan.path_length_direct
    lowpass = 1.0 / np.sqrt(1.0 + (np.asarray(band_centers) / plan.occlusion_corner_hz) ** 2)
    amp = (1.0 / r) * 10.0 ** (-plan.occlusion_atten_db / 20.0) * lowpass
    if plan.aperture is not None:
        d = plan.aperture.center - np.asarray(receiver_pos, dtype=float)
        doa = d / np.linalg.norm(d)
    else:
        doa = np.array([1.0, 0.0, 0.0])
    return ReflectionTap(delay=r / c, amplitude=amp, doa=doa, order=0)


def _fdn_onset(room, profile: RenderingProfile, scene: SceneSpec,
               direct_delay: float) -> float:
    """Tail onset: arrival time of the first order beyond the ISM.

    Estimated by mean free path: reflections of order n cluster around
    n * mfp / c, so the tail starts at (ism_order + 1) * mfp / c.
    """
    from .analysis import mean_free_path

    mfp = mean_free_path(room)
    return max((profile.ism_order + 1) * mfp / scene.speed_of_sound, direct_delay)


def _room_tail(scene: SceneSpec, profile: RenderingProfile, room,
               duration: float, seed_seq: np.random.SeedSequence):
    """Designed + rendered (unscaled) tail streams for one room."""
    if not profile.fdn_enabled or room.decay is None:
        return []
    fs = scene.sample_rate
    seed = int(seed_seq.generate_state(1)[0] % (2**31))
    if profile.dual_slope_enabled and room.decay.second_slope is not None:
        from .fdn import design_dual_slope

        dual = design_dual_slope(room, room.decay, fs, c=scene.speed_of_sound,
                                 seed=seed)
        streams = run_fdn(dual.primary, duration)
        streams += run_fdn(dual.secondary, duration)
        return streams
    config = design_fdn(room, room.decay, fs, c=scene.speed_of_sound, seed=seed)
    return run_fdn(config, duration)


def single_room_ir(scene: SceneSpec, profile: RenderingProfile,
                   source: SourceSpec, receiver_pos: np.ndarray, room,
                   duration: float, seed_seq: np.random.SeedSequence,
                   include_panels: bool = True) -> SpatialIR:
    """Early + spliced tail for a source and receiver in the same room."""
    early_seed, tail_seed = seed_seq.spawn(2)
    early = early_spatial_ir(scene, profile, source, receiver_pos, room,
                             early_seed, include_panels=include_panels)
    tail = _room_tail(scene, profile, room, duration, tail_seed)
    if not tail:
        return early
    direct_delay = float(np.linalg.norm(source.position - receiver_pos)) / scene.speed_of_sound
    onset = _fdn_onset(room, profile, scene, direct_delay)
    return splice(early, tail, onset=onset, t60=room.decay.broadband_t30,
                  direct_delay=direct_delay)


def _door_source(aperture: ApertureSpec, toward: np.ndarray) -> SourceSpec:
    d = np.asarray(toward, dtype=float) - aperture.center
    d = d / np.linalg.norm(d)
    return SourceSpec(id="door", position=aperture.center, orientation=d)


def couple_two_stage(scene: SceneSpec, profile: RenderingProfile,
                     source: SourceSpec, receiver_pos: np.ndarray,
                     duration: float, seed_seq: np.random.SeedSequence,
                     door_signature: Optional[np.ndarray] = None) -> SpatialIR:
    """Two separate single-room simulations chained through the door.

    Stage 1 renders the source room to an omni receiver at the door center
    (mono); stage 2 renders the receiver room from an omni source at the
    door center, and carries the stage-1 response as its signature.
    """
    plan = plan_for(scene, profile)
    if plan.aperture is None:
        raise SceneValidationError("two-stage coupling requires an aperture")
    src_room = scene.room_of(source.position)
    rec_room = scene.room_of(receiver_pos)
    if src_room is None or rec_room is None or src_room.id == rec_room.id:
        raise SceneValidationError("coupling requires source and receiver in different rooms")
    if not set(plan.aperture.connects) == {src_room.id, rec_room.id}:
        raise SceneValidationError("rooms are not adjacent via the aperture")

    stage1_seed, stage2_seed = seed_seq.spawn(2)
    if door_signature is None:
        stage1 = single_room_ir(scene, profile, source, plan.aperture.center,
                                src_room, duration, stage1_seed,
                                include_panels=False)
        door_signature = synthesize_mono(stage1)
    door = _door_source(plan.aperture, receiver_pos)
    stage2 = single_room_ir(scene, profile, door, receiver_pos, rec_room,
                            duration, stage2_seed)
    return SpatialIR(taps=stage2.taps, sample_rate=stage2.sample_rate,
                     tail=stage2.tail, signature=np.asarray(door_signature, dtype=float))


def coupling_gain(scene: SceneSpec, aperture: ApertureSpec) -> float:
    """k = aperture area / shared wall area (area-ratio coupling rule)."""
    room = scene.room(aperture.connects[0])
    # the shared wall is the face containing the aperture center
    local = aperture.center - room.origin
    areas = []
    lx, ly, lz = room.dims
    faces = [(0, ly * lz), (1, lx * lz), (2, lx * ly)]
    for axis, area in faces:
        if abs(local[axis]) < 1e-6 or abs(local[axis] - room.dims[axis]) < 1e-6:
            areas.append(area)
    if not areas:
        raise SceneValidationError("aperture center does not lie on a wall")
    return aperture.area / areas[0]


def couple_full(scene: SceneSpec, profile: RenderingProfile,
                source: SourceSpec, receiver_pos: np.ndarray,
                duration: float, seed_seq: np.random.SeedSequence) -> SpatialIR:
    """Two-stage early path plus cross-fed FDN energy (mixed decay).

    The receiver room's FDN is re-excited by the source room's diffuse tail
    scaled by the coupling gain k; with k = 0 the result is bit-identical to
    couple_two_stage.
    """
    plan = plan_for(scene, profile)
    two_stage_seed, cross_seed = seed_seq.spawn(2)
    base = couple_two_stage(scene, profile, source, receiver_pos, duration,
                            two_stage_seed)
    k = coupling_gain(scene, plan.aperture)
    if k == 0.0 or not profile.fdn_enabled:
        return base
    src_room = scene.room_of(source.position)
    rec_room = scene.room_of(receiver_pos)
    # source-room diffuse tail, summed to mono, drives the receiver-room FDN
    src_tail_seed, rec_fdn_seed = cross_seed.spawn(2)
    src_streams = _room_tail(scene, profile, src_room, duration, src_tail_seed)
    if not src_streams:
        return base
    drive = np.sum([s.samples for s in src_streams], axis=0)
    seed = int(rec_fdn_seed.generate_state(1)[0] % (2**31))
    rec_config = design_fdn(rec_room, rec_room.decay, scene.sample_rate,
                            c=scene.speed_of_sound, seed=seed)
    cross = run_fdn(rec_config, duration, input_signal=k * drive)
    if base.tail:
        onset = min(s.onset for s in base.tail)
        ref_energy = sum(float(np.dot(s.samples, s.samples)) for s in base.tail)
        raw = sum(float(np.dot(s.samples[: len(s.samples)], s.samples)) for s in cross)
        # keep cross-fed energy in proportion to the main tail
        scale = math.sqrt(ref_energy / raw) * k if raw > 0 else 0.0
    else:
        onset = 0.0
        scale = k
    from .ism import TailStream

    cross = [TailStream(samples=s.samples * scale, onset=onset + s.onset,
                        direction=s.direction) for s in cross]
    return SpatialIR(taps=base.taps, sample_rate=base.sample_rate,
                     tail=base.tail + tuple(cross), signature=base.signature)

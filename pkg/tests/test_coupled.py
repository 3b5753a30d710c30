import numpy as np
import pytest

from alodsim.coupled import (
    _door_source,
    couple_full,
    couple_two_stage,
    coupling_gain,
    occluded_direct,
    plan_for,
    single_room_ir,
)
from alodsim.errors import SceneValidationError
from alodsim.scene import preset, profile_preset
from alodsim.synth import synthesize_mono


@pytest.fixture(scope="module")
def living():
    return preset("living-room")


def _target(scene):
    return next(s for s in scene.sources if s.id == "target")


def test_coupling_gain_is_area_ratio(living):
    plan = plan_for(living, profile_preset("razr-full"))
    k = coupling_gain(living, plan.aperture)
    # door 0.8 x 2.0 m in the 4.97 x 2.71 m shared wall
    expected = (0.8 * 2.0) / (4.97 * 2.71)
    assert k == pytest.approx(expected, rel=1e-12)
    assert k == pytest.approx(0.1188, abs=5e-4)


def test_unit_door_signature_reduces_to_receiver_room(living):
    """couple_two_stage with a unit-impulse signature must equal the plain
    receiver-room simulation run from a source at the door."""
    profile = profile_preset("razr-simple")
    src = _target(living)
    rec = living.receivers[0].position
    duration = 0.8

    root_a = np.random.SeedSequence([42])
    coupled = couple_two_stage(living, profile, src, rec, duration, root_a,
                               door_signature=np.array([1.0]))

    root_b = np.random.SeedSequence([42])
    _, stage2_seed = root_b.spawn(2)
    plan = plan_for(living, profile)
    door = _door_source(plan.aperture, rec)
    rec_room = living.room_of(rec)
    reference = single_room_ir(living, profile, door, rec, rec_room,
                               duration, stage2_seed)

    a = synthesize_mono(coupled)
    b = synthesize_mono(reference)
    n = min(a.size, b.size)
    assert np.max(np.abs(a[:n] - b[:n])) < 1e-10
    assert float(np.sum(a[n:] ** 2)) < 1e-20
    assert float(np.sum(b[n:] ** 2)) < 1e-20


def test_two_stage_signature_is_stage_one_response(living):
    profile = profile_preset("razr-simple")
    src = _target(living)
    rec = living.receivers[0].position
    duration = 0.6

    root = np.random.SeedSequence([7])
    coupled = couple_two_stage(living, profile, src, rec, duration, root)

    root_b = np.random.SeedSequence([7])
    stage1_seed, _ = root_b.spawn(2)
    plan = plan_for(living, profile)
    src_room = living.room_of(src.position)
    stage1 = single_room_ir(living, profile, src, plan.aperture.center,
                            src_room, duration, stage1_seed,
                            include_panels=False)
    assert np.array_equal(coupled.signature, synthesize_mono(stage1))


def test_full_coupling_without_fdn_equals_two_stage(living):
    from dataclasses import replace

    profile = replace(profile_preset("razr-full"), fdn_enabled=False,
                      dual_slope_enabled=False)
    src = _target(living)
    rec = living.receivers[0].position
    a = couple_full(living, profile, src, rec, 0.5, np.random.SeedSequence([1]))
    # couple_full spawns (two_stage_seed, cross_seed); replicate
    root = np.random.SeedSequence([1])
    two_stage_seed, _ = root.spawn(2)
    b = couple_two_stage(living, profile, src, rec, 0.5, two_stage_seed)
    assert np.array_equal(synthesize_mono(a), synthesize_mono(b))


def test_full_coupling_adds_cross_fed_tail(living):
    profile = profile_preset("razr-full")
    src = _target(living)
    rec = living.receivers[0].position
    root = np.random.SeedSequence([1])
    full = couple_full(living, profile, src, rec, 0.6, root)
    root = np.random.SeedSequence([1])
    two_stage_seed, _ = root.spawn(2)
    base = couple_two_stage(living, profile, src, rec, 0.6, two_stage_seed)
    assert len(full.tail) > len(base.tail)


def test_coupling_requires_different_rooms(living):
    profile = profile_preset("razr-full")
    masker = next(s for s in living.sources if s.id == "masker")
    rec = living.receivers[0].position  # same room as the masker
    with pytest.raises(SceneValidationError):
        couple_two_stage(living, profile, masker, rec, 0.5,
                         np.random.SeedSequence([0]))


def test_occluded_direct_tap(living):
    profile = profile_preset("razr-full")
    plan = plan_for(living, profile)
    rec = living.receivers[0].position
    tap = occluded_direct(plan, rec, 343.0)
    assert tap.delay == pytest.approx(5.7 / 343.0, rel=1e-12)
    # -6 dB broadband loss on top of 1/r spreading, then a first-order
    # lowpass at 2 kHz: the lowest band is close to the unfiltered level,
    # the highest bands clearly below it
    base = 10.0 ** (-6.0 / 20.0) / 5.7
    assert tap.amplitude[0] == pytest.approx(base, rel=0.01)
    assert tap.amplitude[-1] < 0.2 * tap.amplitude[0]
    assert np.all(np.diff(tap.amplitude) <= 1e-15)
    # DOA points from the receiver toward the door (the apparent source)
    door_dir = plan.aperture.center - rec
    door_dir = door_dir / np.linalg.norm(door_dir)
    assert np.dot(tap.doa, door_dir) > 0.99

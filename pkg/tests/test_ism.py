import time

import numpy as np
import pytest

from alodsim.ism import (
    apply_jitter,
    burst_samples,
    early_spatial_ir,
    enumerate_images,
    reflect_finite_panel,
    smear_taps,
    taps_from_images,
)
from alodsim.scene import PanelSpec, RoomSpec, preset, profile_preset
from alodsim.errors import SceneValidationError


def _box(dims, absorption=0.3, origin=(0, 0, 0)):
    return RoomSpec(id="r", dims=dims, absorption=absorption, scattering=0.3,
                    origin=origin)


def brute_force_images(dims, source, max_order):
    """Mirror oracle: breadth-first reflection across the six wall planes.

    Returns {rounded position: minimal reflection count}. Independent of the
    closed-form lattice enumeration under test.
    """
    dims = np.asarray(dims, float)
    found = {}
    frontier = {tuple(np.round(np.asarray(source, float), 9)): np.asarray(source, float)}
    found.update({k: 0 for k in frontier})
    for depth in range(1, max_order + 1):
        nxt = {}
        for pos in frontier.values():
            for axis in range(3):
                for plane in (0.0, dims[axis]):
                    p = pos.copy()
                    p[axis] = 2.0 * plane - p[axis]
                    key = tuple(np.round(p, 9))
                    if key not in found:
                        nxt[key] = p
        found.update({k: depth for k in nxt})
        frontier = nxt
    return found


# ---------------------------------------------------------------------------
# image enumeration
# ---------------------------------------------------------------------------

def test_positions_match_brute_force_oracle():
    rng = np.random.default_rng(12345)
    start = time.time()
    for _ in range(50):
        dims = rng.uniform(2.0, 9.0, 3)
        source = dims * rng.uniform(0.1, 0.9, 3)
        room = _box(dims)
        for order in (0, 1, 4):
            images = enumerate_images(room, source, order)
            got = {tuple(np.round(im.position, 9)) for im in images}
            oracle = set(brute_force_images(dims, source, order))
            assert got == oracle, f"dims={dims} order={order}"
            # per-image positions agree to 1e-9 with the oracle points
            for im in images:
                key = tuple(np.round(im.position, 9))
                assert key in oracle
    assert time.time() - start < 1.0, "oracle comparison exceeded 1 s"


def test_image_counts_follow_4n2_plus_2():
    room = _box((4.1, 3.3, 2.7))
    src = np.array([1.0, 1.0, 1.0])
    images = enumerate_images(room, src, 6)
    by_order = {}
    for im in images:
        by_order[im.order] = by_order.get(im.order, 0) + 1
    assert by_order[0] == 1
    for n in range(1, 7):
        assert by_order[n] == 4 * n * n + 2, f"order {n}"


def test_cumulative_image_counts():
    room = _box((4.1, 3.3, 2.7))
    src = np.array([1.0, 1.0, 1.0])
    assert len(enumerate_images(room, src, 1)) == 7
    assert len(enumerate_images(room, src, 3)) == 63
    assert len(enumerate_images(room, src, 15)) == 4991


def test_band_gain_is_product_of_wall_amplitudes():
    alpha = np.tile(np.linspace(0.1, 0.45, 8), (6, 1))
    alpha[0] = 0.2  # x0 wall distinct
    room = RoomSpec(id="r", dims=(4.0, 3.0, 2.5), absorption=alpha,
                    scattering=0.3)
    images = enumerate_images(room, np.array([1.0, 1.0, 1.0]), 2)
    for im in images:
        expected = np.ones(8)
        for wall, hits in enumerate(im.wall_hits):
            expected *= np.sqrt(1.0 - alpha[wall]) ** hits
        assert np.allclose(im.band_gain, expected, atol=1e-12)


def test_source_outside_room_rejected():
    room = _box((2.0, 2.0, 2.0))
    with pytest.raises(SceneValidationError):
        enumerate_images(room, np.array([3.0, 1.0, 1.0]), 1)


# ---------------------------------------------------------------------------
# jitter
# ---------------------------------------------------------------------------

def test_jitter_spares_direct_and_first_order():
    room = _box((5.0, 4.0, 3.0))
    images = enumerate_images(room, np.array([1.5, 1.5, 1.5]), 3)
    jittered = apply_jitter(images, profile_preset("razr-full"),
                            np.random.default_rng(0))
    for orig, jit in zip(images, jittered):
        if orig.order < 2:
            assert np.array_equal(orig.position, jit.position)
            assert not jit.jittered
        else:
            assert jit.jittered
            assert not np.array_equal(orig.position, jit.position)


def test_jitter_disabled_is_identity():
    room = _box((5.0, 4.0, 3.0))
    images = enumerate_images(room, np.array([1.5, 1.5, 1.5]), 3)
    out = apply_jitter(images, profile_preset("ism-15"),
                       np.random.default_rng(0))
    assert out == list(images)


# ---------------------------------------------------------------------------
# smearing
# ---------------------------------------------------------------------------

def test_smearing_conserves_per_band_energy():
    room = _box((5.0, 4.0, 3.0))
    images = enumerate_images(room, np.array([1.5, 1.5, 1.5]), 3)
    taps = taps_from_images(images, np.array([3.0, 2.0, 1.5]), 343.0)
    smeared = smear_taps(taps, profile_preset("razr-full"), room.scattering,
                         np.random.SeedSequence(7))
    for orig, sm in zip(taps, smeared):
        if orig.order < 1:
            assert sm is orig
            continue
        specular = sm.amplitude**2
        diffuse = sm.diffuse_burst.band_energy
        assert np.allclose(specular + diffuse, orig.amplitude**2, rtol=1e-12)


def test_smearing_disabled_is_identity():
    room = _box((5.0, 4.0, 3.0))
    images = enumerate_images(room, np.array([1.5, 1.5, 1.5]), 2)
    taps = taps_from_images(images, np.array([3.0, 2.0, 1.5]), 343.0)
    out = smear_taps(taps, profile_preset("ism-15"), room.scattering,
                     np.random.SeedSequence(7))
    assert out == list(taps)


def test_burst_samples_deterministic_and_energy_normalized():
    room = _box((5.0, 4.0, 3.0))
    images = enumerate_images(room, np.array([1.5, 1.5, 1.5]), 2)
    taps = taps_from_images(images, np.array([3.0, 2.0, 1.5]), 343.0)
    smeared = smear_taps(taps, profile_preset("razr-full"), room.scattering,
                         np.random.SeedSequence(7))
    burst = next(t.diffuse_burst for t in smeared if t.diffuse_burst)
    a = burst_samples(burst, 2, 44100.0)
    b = burst_samples(burst, 2, 44100.0)
    assert np.array_equal(a, b)
    assert float(np.dot(a, a)) == pytest.approx(burst.band_energy[2], rel=1e-9)
    # different bands draw different noise
    c = burst_samples(burst, 3, 44100.0)
    assert not np.array_equal(a, c)


# ---------------------------------------------------------------------------
# finite panels
# ---------------------------------------------------------------------------

def _panel_z1():
    return PanelSpec(id="p", corners=np.array([
        [0.0, 0.0, 1.0], [2.0, 0.0, 1.0], [2.0, 2.0, 1.0], [0.0, 2.0, 1.0],
    ]), absorption=0.1)


def test_panel_reflection_matches_mirror_geometry():
    panel = _panel_z1()
    src = np.array([0.5, 1.0, 2.0])
    rec = np.array([1.5, 1.0, 2.0])
    tap = reflect_finite_panel(panel, src, rec, c=343.0)
    assert tap is not None
    mirror = np.array([0.5, 1.0, 0.0])  # src reflected across z = 1
    r = np.linalg.norm(rec - mirror)
    assert tap.delay == pytest.approx(r / 343.0, rel=1e-12)
    assert np.allclose(np.abs(tap.amplitude), np.sqrt(1.0 - panel.absorption) / r)
    # DOA points from receiver toward the mirror image
    assert np.allclose(tap.doa, (mirror - rec) / r)


def test_panel_reflection_requires_same_side():
    panel = _panel_z1()
    assert reflect_finite_panel(panel, np.array([0.5, 1.0, 2.0]),
                                np.array([1.5, 1.0, 0.5])) is None


def test_panel_reflection_requires_hit_inside_rectangle():
    panel = _panel_z1()
    # reflection point would land at x = 5, far outside the 2 x 2 panel
    assert reflect_finite_panel(panel, np.array([4.0, 1.0, 2.0]),
                                np.array([6.0, 1.0, 2.0])) is None


# ---------------------------------------------------------------------------
# composed early part
# ---------------------------------------------------------------------------

def test_early_spatial_ir_taps_sorted_and_direct_delay():
    scene = preset("pub")
    src = next(s for s in scene.sources if s.id == "target")
    rec = scene.receivers[0]
    spatial = early_spatial_ir(scene, profile_preset("razr-full"), src,
                               rec.position, scene.rooms[0],
                               np.random.SeedSequence(0))
    delays = [t.delay for t in spatial.taps]
    assert delays == sorted(delays)
    assert min(delays) == pytest.approx(0.97 / 343.0, rel=1e-9)


def test_early_spatial_ir_is_seed_deterministic():
    scene = preset("pub")
    src = scene.sources[0]
    rec = scene.receivers[0]
    a = early_spatial_ir(scene, profile_preset("razr-full"), src,
                         rec.position, scene.rooms[0], np.random.SeedSequence(3))
    b = early_spatial_ir(scene, profile_preset("razr-full"), src,
                         rec.position, scene.rooms[0], np.random.SeedSequence(3))
    assert len(a.taps) == len(b.taps)
    for ta, tb in zip(a.taps, b.taps):
        assert ta.delay == tb.delay
        assert np.array_equal(ta.amplitude, tb.amplitude)

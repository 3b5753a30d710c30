import numpy as np
import pytest

from alodsim.ism import ReflectionTap, SpatialIR, TailStream
from alodsim.spatial import (
    ImpulseResponse,
    array_preset_86,
    az_el_to_vec,
    binauralize,
    diotic,
    diotic_array,
    frontal_speaker_index,
    head_frame,
    load_hrtf_dir,
    render_array,
    render_mono,
    synthetic_hrtf,
    vbap_gains,
)
from alodsim.wavio import write_wav

FS = 44100.0


def _tap(doa, delay=0.01, amp=0.5):
    return ReflectionTap(delay=delay, amplitude=np.full(8, amp),
                         doa=np.asarray(doa, dtype=float))


def _single_tap_ir(doa):
    return SpatialIR(taps=(_tap(doa),), sample_rate=FS)


# ---------------------------------------------------------------------------
# head frame / HRTF
# ---------------------------------------------------------------------------

def test_head_frame_is_orthonormal_and_front_aligned():
    for look in ([1, 0, 0], [0, 1, 0], [0.3, -0.8, 0.1]):
        frame = head_frame(np.array(look, dtype=float))
        assert np.allclose(frame @ frame.T, np.eye(3), atol=1e-12)
        assert np.allclose(frame[0], np.asarray(look) / np.linalg.norm(look))


def test_synthetic_hrtf_nearest_recovers_grid_direction():
    hrtf = synthetic_hrtf()
    for i in range(0, hrtf.directions.shape[0], 17):
        assert hrtf.nearest(hrtf.directions[i]) == i


def test_lateral_source_favors_the_near_ear():
    hrtf = synthetic_hrtf()
    ir = binauralize(_single_tap_ir([0.0, 1.0, 0.0]), hrtf)  # from the left
    assert ir.n_channels == 2
    e_left = float(np.sum(ir.channels[0] ** 2))
    e_right = float(np.sum(ir.channels[1] ** 2))
    assert e_left > 1.5 * e_right


def test_frontal_source_is_symmetric():
    hrtf = synthetic_hrtf()
    ir = binauralize(_single_tap_ir([1.0, 0.0, 0.0]), hrtf)
    assert np.allclose(ir.channels[0], ir.channels[1], atol=1e-12)


def test_orientation_rotates_the_scene():
    hrtf = synthetic_hrtf()
    # listener facing +y, source at world +x = to the listener's right
    ir = binauralize(_single_tap_ir([1.0, 0.0, 0.0]), hrtf,
                     orientation=np.array([0.0, 1.0, 0.0]))
    e_left = float(np.sum(ir.channels[0] ** 2))
    e_right = float(np.sum(ir.channels[1] ** 2))
    assert e_right > 1.5 * e_left


def test_load_hrtf_dir_round_trip(tmp_path):
    hrtf = synthetic_hrtf(n_az=6, n_el=3, n_taps=32)
    lines = []
    for i, d in enumerate(hrtf.directions):
        az = np.degrees(np.arctan2(d[1], d[0]))
        el = np.degrees(np.arcsin(np.clip(d[2], -1, 1)))
        name = f"h{i:03d}.wav"
        write_wav(str(tmp_path / name), hrtf.filters[i].T, FS, fmt="float32")
        lines.append(f"{az:.6f} {el:.6f} {name}")
    (tmp_path / "index.txt").write_text("\n".join(lines) + "\n")
    loaded = load_hrtf_dir(str(tmp_path))
    assert loaded.directions.shape == hrtf.directions.shape
    assert np.allclose(loaded.filters, hrtf.filters, atol=1e-6)
    assert loaded.sample_rate == FS


# ---------------------------------------------------------------------------
# VBAP / array
# ---------------------------------------------------------------------------

def test_vbap_gains_power_normalized():
    layout = array_preset_86()
    rng = np.random.default_rng(0)
    for _ in range(200):
        v = rng.standard_normal(3)
        g = vbap_gains(v, layout)
        assert np.sum(g**2) == pytest.approx(1.0, abs=1e-9)
        assert np.count_nonzero(g) <= 3
        assert np.all(g >= 0)


def test_vbap_speaker_coincident_single_channel():
    layout = array_preset_86()
    for i in (0, 12, 48, 85):
        g = vbap_gains(layout.directions[i], layout)
        assert g[i] == pytest.approx(1.0, abs=1e-9)
        assert np.count_nonzero(g > 1e-9) == 1


def test_vbap_midpoint_gets_equal_pair_gains():
    layout = array_preset_86()
    # adjacent main-ring speakers 0 and 1 (az 0 and 7.5 deg, el 0)
    mid = layout.directions[0] + layout.directions[1]
    mid = mid / np.linalg.norm(mid)
    g = vbap_gains(mid, layout)
    assert g[0] == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-6)
    assert g[1] == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-6)


def test_array_preset_86_layout():
    layout = array_preset_86()
    assert layout.n_speakers == 86
    # main ring: 48 speakers at listener height
    heights = layout.positions[:, 2]
    assert np.count_nonzero(np.abs(heights - 1.8) < 1e-9) == 48
    assert frontal_speaker_index(layout) == 0
    assert np.allclose(layout.directions[0], [1.0, 0.0, 0.0])


def test_render_array_routes_energy_to_vbap_channels():
    layout = array_preset_86()
    ir = render_array(_single_tap_ir(layout.directions[3]), layout)
    assert ir.n_channels == 86
    energies = np.sum(ir.channels**2, axis=1)
    assert np.argmax(energies) == 3
    assert energies[3] > 0.99 * energies.sum()


# ---------------------------------------------------------------------------
# diotic and mono contracts
# ---------------------------------------------------------------------------

def test_diotic_channels_bit_identical():
    hrtf = synthetic_hrtf()
    ir = diotic(binauralize(_single_tap_ir([0.0, 1.0, 0.0]), hrtf))
    assert ir.n_channels == 2
    assert np.array_equal(ir.channels[0], ir.channels[1])


def test_diotic_array_uses_only_frontal_speaker():
    layout = array_preset_86()
    mono = render_mono(_single_tap_ir([0.0, 1.0, 0.0]))
    out = diotic_array(mono, layout)
    active = np.nonzero(np.sum(out.channels**2, axis=1))[0]
    assert list(active) == [frontal_speaker_index(layout)]


def test_render_mono_places_tap_at_delay():
    ir = render_mono(_single_tap_ir([1.0, 0.0, 0.0]))
    peak = int(np.argmax(np.abs(ir.channels[0])))
    assert peak == int(round(0.01 * FS))
    assert ir.channels[0][peak] == pytest.approx(0.5, rel=1e-6)


def test_signature_applies_to_rendered_channels():
    tap = _tap([1.0, 0.0, 0.0])
    sig = np.array([0.0, 2.0])  # one-sample shift, gain 2
    plain = render_mono(SpatialIR(taps=(tap,), sample_rate=FS))
    with_sig = render_mono(SpatialIR(taps=(tap,), sample_rate=FS,
                                     signature=sig))
    n = plain.n_samples
    assert np.allclose(with_sig.channels[0][1:n + 1], 2.0 * plain.channels[0],
                       atol=1e-12)


def test_tail_streams_render_at_their_onset():
    stream = TailStream(samples=np.ones(100), onset=0.05,
                        direction=np.array([1.0, 0.0, 0.0]))
    spatial = SpatialIR(taps=(), sample_rate=FS, tail=(stream,))
    ir = render_mono(spatial)
    start = int(round(0.05 * FS))
    assert np.all(ir.channels[0][:start] == 0.0)
    assert ir.channels[0][start] == pytest.approx(1.0)

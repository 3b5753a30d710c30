"""Shared fixtures: expensive renders cached for the whole session."""

import time

import numpy as np
import pytest

from alodsim import preset, profile_preset, simulate

RENDER_TIMES = {}


def _timed(key, fn):
    t0 = time.perf_counter()
    result = fn()
    RENDER_TIMES[key] = time.perf_counter() - t0
    return result


@pytest.fixture(scope="session")
def living_scene():
    return preset("living-room")


@pytest.fixture(scope="session")
def pub_scene():
    return preset("pub")


@pytest.fixture(scope="session")
def underground_scene():
    return preset("underground")


@pytest.fixture(scope="session")
def living_full_mono(living_scene):
    """razr-full render of the living room target source (coupled rooms)."""
    return _timed("living-full", lambda: simulate(
        living_scene, profile_preset("razr-full"), output_mode="mono"))


@pytest.fixture(scope="session")
def living_masker_mono(living_scene):
    """razr-full render of the in-room masker source (single room physics)."""
    return _timed("living-masker-full", lambda: simulate(
        living_scene, profile_preset("razr-full"),
        source_id="masker", output_mode="mono"))


@pytest.fixture(scope="session")
def pub_full_mono(pub_scene):
    return _timed("pub-full", lambda: simulate(
        pub_scene, profile_preset("razr-full"), output_mode="mono"))


@pytest.fixture(scope="session")
def underground_full_mono(underground_scene):
    return _timed("underground-full", lambda: simulate(
        underground_scene, profile_preset("razr-full"), output_mode="mono"))


@pytest.fixture(scope="session")
def underground_simple_mono(underground_scene):
    return simulate(underground_scene, profile_preset("razr-simple"),
                    output_mode="mono")


@pytest.fixture(scope="session")
def underground_ism15_mono(underground_scene):
    return simulate(underground_scene, profile_preset("ism-15"),
                    output_mode="mono")


def first_arrival(samples: np.ndarray, fs: float, search_s: float = 0.05) -> int:
    """Index of the first sample exceeding half the early-region peak."""
    n = min(int(search_s * fs), samples.size)
    thresh = 0.5 * np.max(np.abs(samples[:n]))
    return int(np.argmax(np.abs(samples) > thresh))

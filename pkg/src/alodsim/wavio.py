"""Minimal RIFF/WAVE reader and writer.

Supports PCM 16/24-bit and IEEE float32, mono or multichannel. No
resampling: callers must check the returned rate.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import SceneParseError

_FMT_PCM = 1
_FMT_FLOAT = 3
_FMT_EXTENSIBLE = 0xFFFE


def read_wav(path: str):
    """Returns (samples as float64 array of shape (n, channels), rate)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise SceneParseError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    payload = None
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        size = struct.unpack_from("<I", data, pos + 4)[0]
        body = data[pos + 8: pos + 8 + size]
        if chunk_id == b"fmt ":
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            payload = body
        pos += 8 + size + (size & 1)
    if fmt is None or payload is None:
        raise SceneParseError(f"{path}: missing fmt or data chunk")
    tag, channels, rate, _, block_align, bits = fmt
    if tag == _FMT_EXTENSIBLE:
        tag = _FMT_FLOAT if bits == 32 else _FMT_PCM
    if tag == _FMT_FLOAT and bits == 32:
        samples = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    elif tag == _FMT_PCM and bits == 16:
        samples = np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32768.0
    elif tag == _FMT_PCM and bits == 24:
        raw = np.frombuffer(payload, dtype=np.uint8)
        raw = raw[: (raw.size // 3) * 3].reshape(-1, 3)
        ints = (raw[:, 0].astype(np.int32)
                | (raw[:, 1].astype(np.int32) << 8)
                | (raw[:, 2].astype(np.int32) << 16))
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        samples = ints.astype(np.float64) / float(1 << 23)
    else:
        raise SceneParseError(f"{path}: unsupported WAV format (tag {tag}, {bits} bit)")
    n_frames = samples.size // channels
    return samples[: n_frames * channels].reshape(n_frames, channels), float(rate)


def write_wav(path: str, samples: np.ndarray, rate: float, fmt: str = "float32"):
    """Write (n, channels) or (n,) samples. fmt: float32 | pcm16 | pcm24."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    channels = x.shape[1]
    if fmt == "float32":
        tag, bits = _FMT_FLOAT, 32
        payload = x.astype("<f4").tobytes()
    elif fmt == "pcm16":
        tag, bits = _FMT_PCM, 16
        clipped = np.clip(x, -1.0, 32767.0 / 32768.0)
        payload = (clipped * 32768.0).round().astype("<i2").tobytes()
    elif fmt == "pcm24":
        tag, bits = _FMT_PCM, 24
        clipped = np.clip(x, -1.0, (float(1 << 23) - 1) / float(1 << 23))
        ints = (clipped * float(1 << 23)).round().astype(np.int32).reshape(-1)
        raw = np.empty((ints.size, 3), dtype=np.uint8)
        raw[:, 0] = ints & 0xFF
        raw[:, 1] = (ints >> 8) & 0xFF
        raw[:, 2] = (ints >> 16) & 0xFF
        payload = raw.tobytes()
    else:
        raise SceneParseError(f"unknown WAV format {fmt!r}")
    block_align = channels * bits // 8
    byte_rate = int(rate) * block_align
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, tag, channels, int(rate), byte_rate, block_align, bits,
        b"data", len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)

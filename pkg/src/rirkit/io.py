"""File formats: 16 kHz mono WAV, float32/int32 blobs, 16-bit PGM, PNG."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.io import wavfile

from .signal import SAMPLE_RATE, AudioBuffer

# blob header: magic(4s) version(u32) rows(u32) cols(u32), little-endian
BLOB_HEADER = struct.Struct("<4sIII")
BLOB_VERSION = 1
FLOAT_MAGIC = b"RKF1"
INT_MAGIC = b"RKI1"


class FormatError(ValueError):
    """Raised when a file does not match the expected layout."""


def read_wav(path) -> AudioBuffer:
    """Read a mono 16 kHz WAV (PCM16 or float32) into an AudioBuffer."""
    try:
        rate, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        raise FormatError(f"{path}: cannot read WAV ({exc})") from exc
    if rate != SAMPLE_RATE:
        raise FormatError(f"{path}: sample rate {rate} Hz, expected {SAMPLE_RATE} Hz")
    if data.ndim != 1:
        raise FormatError(f"{path}: {data.shape[1]} channels, expected mono")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise FormatError(f"{path}: unsupported sample format {data.dtype}")
    return AudioBuffer(samples, rate)


def write_wav(path, x: AudioBuffer, pcm16: bool = False) -> None:
    if x.sample_rate != SAMPLE_RATE:
        raise FormatError(f"refusing to write {x.sample_rate} Hz audio; only {SAMPLE_RATE} Hz")
    if pcm16:
        data = np.clip(np.round(x.samples * 32768.0), -32768, 32767).astype(np.int16)
    else:
        data = x.samples.astype(np.float32)
    wavfile.write(path, x.sample_rate, data)


def write_blob(path, array) -> None:
    """Write a 2-D float32 (or int32) grid with the 16-byte header."""
    arr = np.asarray(array)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError("blobs hold 2-D grids")
    if np.issubdtype(arr.dtype, np.integer):
        magic, payload = INT_MAGIC, arr.astype("<i4")
    else:
        magic, payload = FLOAT_MAGIC, arr.astype("<f4")
    with open(path, "wb") as fh:
        fh.write(BLOB_HEADER.pack(magic, BLOB_VERSION, arr.shape[0], arr.shape[1]))
        fh.write(payload.tobytes(order="C"))


def read_blob(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < BLOB_HEADER.size:
        raise FormatError(f"{path}: truncated blob header")
    magic, version, rows, cols = BLOB_HEADER.unpack_from(raw)
    if magic not in (FLOAT_MAGIC, INT_MAGIC):
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != BLOB_VERSION:
        raise FormatError(f"{path}: unsupported blob version {version}")
    dtype = "<f4" if magic == FLOAT_MAGIC else "<i4"
    body = raw[BLOB_HEADER.size:]
    if len(body) != rows * cols * 4:
        raise FormatError(f"{path}: expected {rows}x{cols} values, got {len(body) // 4}")
    arr = np.frombuffer(body, dtype=dtype).reshape(rows, cols)
    if magic == FLOAT_MAGIC:
        return arr.astype(np.float64)
    return arr.astype(np.int64)


def write_pgm16(path, labels) -> None:
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=0) > 65535:
        raise ValueError("labels must fit in 16 bits")
    h, w = labels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(labels.astype(">u2").tobytes())


def read_pgm16(path) -> np.ndarray:
    """Read a binary (P5) PGM label map; 8- and 16-bit maxvals are accepted."""
    raw = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace before the raster
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:])
    dtype = ">u2" if maxval > 255 else "u1"
    count = w * h
    body = raw[pos:]
    if len(body) != count * np.dtype(dtype).itemsize:
        raise FormatError(f"{path}: raster size does not match {w}x{h}")
    return np.frombuffer(body, dtype=dtype).reshape(h, w).astype(np.int64)


def write_png_rgb(path, channels: np.ndarray) -> None:
    img = np.ascontiguousarray(np.moveaxis(np.asarray(channels, dtype=np.uint8), 0, -1))
    Image.fromarray(img).save(path)


def read_png_rgb(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.moveaxis(np.asarray(img.convert("RGB")), -1, 0).astype(np.int64)

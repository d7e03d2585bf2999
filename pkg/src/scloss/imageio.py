"""File formats: binary PGM (P5), grayscale PNG, the SCF1 raw float grid,
and TOML loss configs.

Grayscale intensities map to probabilities as v/255 (8-bit) or v/65535
(16-bit).
"""

from __future__ import annotations

import struct
import sys
from pathlib import Path

import numpy as np
from PIL import Image

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .config import SCLossConfig
from .errors import ConfigError, SCLossError

SCF1_MAGIC = b"SCF1"

__all__ = [
    "read_probability_image",
    "write_pgm",
    "read_pgm",
    "write_raw_field",
    "read_raw_field",
    "load_loss_config",
]


def read_pgm(path):
    """Read a binary (P5) PGM; returns (array, maxval)."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise SCLossError(f"{path}: not a binary PGM (P5) file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval < 1 or maxval > 65535:
        raise SCLossError(f"{path}: invalid PGM maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    count = width * height
    if len(data) - pos < count * dtype.itemsize:
        raise SCLossError(f"{path}: truncated PGM payload")
    raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    return raw.reshape(height, width).astype(np.int64), maxval


def write_pgm(path, values):
    """Write an 8-bit binary PGM from integer values in [0, 255]."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise SCLossError(f"PGM payload must be 2-D, got shape {arr.shape}")
    if arr.min() < 0 or arr.max() > 255:
        raise SCLossError("PGM values must lie in [0, 255]")
    h, w = arr.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + arr.astype(np.uint8).tobytes())


def read_probability_image(path):
    """Read a grayscale PGM or PNG as probabilities in [0, 1]."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        raw, maxval = read_pgm(path)
        return raw.astype(np.float64) / maxval
    if suffix == ".png":
        with Image.open(path) as img:
            if img.mode == "I;16":
                return np.asarray(img, dtype=np.float64) / 65535.0
            if img.mode != "L":
                img = img.convert("L")
            return np.asarray(img, dtype=np.float64) / 255.0
    raise SCLossError(f"{path}: unsupported image format (use .pgm or .png)")


def write_raw_field(path, values):
    """Write the SCF1 raw format: 16-byte header + row-major float64."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise SCLossError(f"raw field must be 2-D, got shape {arr.shape}")
    h, w = arr.shape
    header = struct.pack("<4sII4x", SCF1_MAGIC, h, w)
    Path(path).write_bytes(header + arr.astype("<f8").tobytes())


def read_raw_field(path):
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise SCLossError(f"{path}: truncated SCF1 header")
    magic, h, w = struct.unpack("<4sII4x", data[:16])
    if magic != SCF1_MAGIC:
        raise SCLossError(f"{path}: bad SCF1 magic {magic!r}")
    if len(data) - 16 < h * w * 8:
        raise SCLossError(f"{path}: truncated SCF1 payload")
    arr = np.frombuffer(data, dtype="<f8", count=h * w, offset=16)
    return arr.reshape(h, w).copy()


def load_loss_config(path=None, text=None) -> SCLossConfig:
    """Load an SCLossConfig from TOML; every field is optional."""
    if text is None:
        text = Path(path).read_text()
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config TOML: {exc}") from exc
    known = {
        "k_max",
        "alpha",
        "single_response",
        "regularizer",
        "epsilon",
        "reduction",
        "level_weights",
        "addon_weight",
    }
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "level_weights" in doc:
        doc["level_weights"] = tuple(doc["level_weights"])
    return SCLossConfig(**doc).validated()

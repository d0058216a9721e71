"""Linear image container, 16-bit PPM IO and black-level handling."""

from __future__ import annotations

import dataclasses
import json
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    ImageFormatError,
    MissingSidecarError,
    PreprocessingError,
    TruncatedDataError,
    UnsupportedMaxvalError,
)

DEFAULT_SATURATION_MARGIN = 0.02

_HEADER_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


def _triple(values, name):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(3, float(arr))
    if arr.shape != (3,):
        raise DataError(f"{name} must be a scalar or a 3-vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class LinearImage:
    """A linear RGB raster with its sensor metadata.

    ``data`` has shape ``(height, width, 3)`` and holds real-valued sensor
    counts. The black level is a single per-channel value for the whole
    image. When ``black_subtracted`` is true the black level has already
    been removed from ``data`` and is kept only as a record.
    """

    data: np.ndarray
    black_level: np.ndarray
    saturation_level: np.ndarray
    camera_id: str = "unknown"
    black_subtracted: bool = False

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != 3:
            raise DataError(f"image data must be (height, width, 3), got {data.shape}")
        black = _triple(self.black_level, "black_level")
        sat = _triple(self.saturation_level, "saturation_level")
        if np.any(black < 0):
            raise DataError("black_level must be nonnegative")
        if np.any(sat <= 0):
            raise DataError("saturation_level must be positive")
        if not self.black_subtracted and np.any(black >= sat):
            raise DataError("black_level must be below saturation_level")
        if not np.all(np.isfinite(data)):
            raise DataError("image data contains non-finite values")
        if data.size and (data.min() < 0 or np.any(data > sat)):
            raise DataError("pixel values must lie in [0, saturation_level]")
        data.setflags(write=False)
        black.setflags(write=False)
        sat.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "black_level", black)
        object.__setattr__(self, "saturation_level", sat)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def replace(self, **changes) -> LinearImage:
        return dataclasses.replace(self, **changes)

    def metadata(self) -> dict:
        """Sidecar dictionary for this image."""
        return {
            "black_level": [float(v) for v in self.black_level],
            "saturation_level": [float(v) for v in self.saturation_level],
            "camera_id": self.camera_id,
            "black_subtracted": bool(self.black_subtracted),
        }


@dataclass(frozen=True, eq=False)
class SaturationMask:
    flags: np.ndarray

    @property
    def height(self) -> int:
        return self.flags.shape[0]

    @property
    def width(self) -> int:
        return self.flags.shape[1]

    def count(self) -> int:
        return int(self.flags.sum())


def subtract_black(img: LinearImage) -> LinearImage:
    """Remove the black level, clamping at zero.

    Refuses images that are already black-subtracted, since a second
    subtraction silently darkens the image and skews its chromaticity.
    """
    if img.black_subtracted:
        raise PreprocessingError(
            "black level already subtracted; refusing to subtract it twice"
        )
    data = np.maximum(img.data - img.black_level, 0.0)
    return img.replace(
        data=data,
        saturation_level=img.saturation_level - img.black_level,
        black_subtracted=True,
    )


def saturation_mask(img: LinearImage, margin: float = DEFAULT_SATURATION_MARGIN) -> SaturationMask:
    """Flag pixels with any channel within ``margin`` of saturation."""
    if not 0.0 <= margin < 1.0:
        raise DataError(f"margin must be in [0, 1), got {margin}")
    limit = (1.0 - margin) * img.saturation_level
    return SaturationMask(np.any(img.data >= limit, axis=2))


def rb_chromaticity(e) -> tuple[float, float]:
    """Intensity-normalized (r, b) coordinates of an RGB triple."""
    rgb = np.asarray(e, dtype=np.float64).reshape(3)
    if np.any(rgb < 0):
        raise DataError("chromaticity needs a nonnegative RGB triple")
    total = rgb.sum()
    if total <= 0:
        raise DataError("chromaticity of a zero vector is undefined")
    return float(rgb[0] / total), float(rgb[2] / total)


# -- 16-bit PPM -------------------------------------------------------------


def sidecar_path(path) -> Path:
    """``scene.ppm`` -> ``scene.meta.json``."""
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def _parse_header(buf: bytes):
    if not buf.startswith(b"P6"):
        raise ImageFormatError("not a P6 PPM")
    pos = 2
    fields = []
    for _ in range(3):
        m = _HEADER_TOKEN.match(buf, pos)
        if m is None:
            raise ImageFormatError("malformed PPM header")
        token = m.group(1)
        if not token.isdigit():
            raise ImageFormatError(f"malformed PPM header field {token!r}")
        fields.append(int(token))
        pos = m.end()
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(buf) or buf[pos : pos + 1] not in b" \t\r\n":
        raise ImageFormatError("malformed PPM header")
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise ImageFormatError("PPM dimensions must be positive")
    return width, height, maxval, pos + 1


def decode_ppm16(buf: bytes) -> np.ndarray:
    """Decode a binary P6 PPM with maxval 65535 into a float array."""
    width, height, maxval, offset = _parse_header(buf)
    if maxval != 65535:
        raise UnsupportedMaxvalError(f"unsupported maxval {maxval} (need 65535)")
    n = width * height * 3
    raster = buf[offset:]
    if len(raster) < 2 * n:
        raise TruncatedDataError(
            f"truncated pixel data: expected {2 * n} bytes, found {len(raster)}"
        )
    samples = np.frombuffer(raster, dtype=">u2", count=n)
    return samples.reshape(height, width, 3).astype(np.float64)


def encode_ppm16(data: np.ndarray) -> bytes:
    """Encode an (h, w, 3) array as P6/65535, rounding half up."""
    data = np.asarray(data, dtype=np.float64)
    height, width, _ = data.shape
    q = np.clip(np.floor(data + 0.5), 0, 65535).astype(">u2")
    return b"P6\n%d %d\n65535\n" % (width, height) + q.tobytes()


def read_sidecar(path) -> dict:
    meta_path = sidecar_path(path)
    if not meta_path.exists():
        raise MissingSidecarError(f"missing sidecar metadata {meta_path}")
    with open(meta_path) as f:
        meta = json.load(f)
    missing = {"black_level", "saturation_level", "camera_id"} - meta.keys()
    if missing:
        raise DataError(f"sidecar {meta_path} lacks fields {sorted(missing)}")
    return meta


def read_ppm16(path) -> LinearImage:
    """Read a 16-bit PPM plus its ``.meta.json`` sidecar.

    Sample values are taken verbatim, with no scaling.
    """
    meta = read_sidecar(path)
    with open(path, "rb") as f:
        data = decode_ppm16(f.read())
    return LinearImage(
        data=data,
        black_level=meta["black_level"],
        saturation_level=meta["saturation_level"],
        camera_id=str(meta["camera_id"]),
        black_subtracted=bool(meta.get("black_subtracted", False)),
    )


def write_ppm16(img: LinearImage, path, sidecar: bool = True) -> None:
    path = Path(path)
    path.write_bytes(encode_ppm16(img.data))
    if sidecar:
        write_json(sidecar_path(path), img.metadata())


def write_json(path, obj) -> None:
    """Write JSON deterministically (sorted keys, trailing newline)."""
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)

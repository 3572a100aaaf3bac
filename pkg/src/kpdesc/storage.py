"""Binary containers and simple exports.

Descriptor container (``.kpdc``), all values little-endian:

    magic   4 bytes  b"KPDC"
    version u32      1
    count   u64      number of descriptors
    dim     u32      descriptor dimension
    variant u8       0=polar 1=cartesian 2=combined 3=postprocessed
    values  f32[count * dim], row-major

Whitening-model container (``.kpwm``):

    magic        4 bytes  b"KPWM"
    version      u32      1
    variant      u8       0=supervised 1=pca 2=attenuated 3=shrinkage 4=pca_sqrt
    d_in         u32
    d_out        u32
    t            f64
    beta         f64
    shrink_index u32      0 when not applicable
    mu           f64[d_in]
    a            f64[d_in * d_out], column-major

Round trips are bit-exact.  Maps are additionally exported as full-precision
CSV and as 8-bit binary PGM with per-map min-max scaling.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .descriptor import CARTESIAN, COMBINED, POLAR, POSTPROCESSED
from .errors import InputFormatError
from .whitening import ATTENUATED, PCA, PCA_SQRT, SHRINKAGE, SUPERVISED, WhiteningModel

KPDC_MAGIC = b"KPDC"
KPWM_MAGIC = b"KPWM"
FORMAT_VERSION = 1

DESCRIPTOR_CODES = {POLAR: 0, CARTESIAN: 1, COMBINED: 2, POSTPROCESSED: 3}
DESCRIPTOR_NAMES = {v: k for k, v in DESCRIPTOR_CODES.items()}

MODEL_CODES = {SUPERVISED: 0, PCA: 1, ATTENUATED: 2, SHRINKAGE: 3, PCA_SQRT: 4}
MODEL_NAMES = {v: k for k, v in MODEL_CODES.items()}

_KPDC_HEADER = struct.Struct("<4sIQIB")
_KPWM_HEADER = struct.Struct("<4sIBIIddI")


def write_descriptors(path, values: np.ndarray, variant: str) -> None:
    """Write a (count, dim) array of descriptors to a .kpdc file."""
    rows = np.ascontiguousarray(np.atleast_2d(values), dtype="<f4")
    if variant not in DESCRIPTOR_CODES:
        raise ValueError(f"unknown descriptor variant {variant!r}")
    with open(path, "wb") as fh:
        fh.write(
            _KPDC_HEADER.pack(
                KPDC_MAGIC, FORMAT_VERSION, rows.shape[0], rows.shape[1], DESCRIPTOR_CODES[variant]
            )
        )
        fh.write(rows.tobytes())


def read_descriptors(path) -> tuple[np.ndarray, str]:
    """Read a .kpdc file; returns (values float32 (count, dim), variant)."""
    data = Path(path).read_bytes()
    if len(data) < _KPDC_HEADER.size:
        raise InputFormatError(f"{path}: truncated descriptor file")
    magic, version, count, dim, code = _KPDC_HEADER.unpack_from(data)
    if magic != KPDC_MAGIC:
        raise InputFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise InputFormatError(f"{path}: unsupported version {version}")
    if code not in DESCRIPTOR_NAMES:
        raise InputFormatError(f"{path}: unknown variant code {code}")
    expected = _KPDC_HEADER.size + 4 * count * dim
    if len(data) != expected:
        raise InputFormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=_KPDC_HEADER.size).reshape(count, dim)
    return values.copy(), DESCRIPTOR_NAMES[code]


def write_model(path, model: WhiteningModel) -> None:
    """Write a whitening model to a .kpwm file."""
    if model.variant not in MODEL_CODES:
        raise ValueError(f"unknown model variant {model.variant!r}")
    mu = np.ascontiguousarray(model.mu, dtype="<f8")
    a = np.asfortranarray(model.a, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(
            _KPWM_HEADER.pack(
                KPWM_MAGIC,
                FORMAT_VERSION,
                MODEL_CODES[model.variant],
                model.d_in,
                model.d_out,
                model.t,
                model.beta,
                model.shrink_index,
            )
        )
        fh.write(mu.tobytes())
        fh.write(a.tobytes(order="F"))


def read_model(path) -> WhiteningModel:
    """Read a whitening model from a .kpwm file."""
    data = Path(path).read_bytes()
    if len(data) < _KPWM_HEADER.size:
        raise InputFormatError(f"{path}: truncated model file")
    magic, version, code, d_in, d_out, t, beta, shrink_index = _KPWM_HEADER.unpack_from(data)
    if magic != KPWM_MAGIC:
        raise InputFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise InputFormatError(f"{path}: unsupported version {version}")
    if code not in MODEL_NAMES:
        raise InputFormatError(f"{path}: unknown variant code {code}")
    expected = _KPWM_HEADER.size + 8 * (d_in + d_in * d_out)
    if len(data) != expected:
        raise InputFormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    mu = np.frombuffer(data, dtype="<f8", offset=_KPWM_HEADER.size, count=d_in).copy()
    a = np.frombuffer(data, dtype="<f8", offset=_KPWM_HEADER.size + 8 * d_in)
    a = a.reshape((d_in, d_out), order="F").copy()
    return WhiteningModel(
        variant=MODEL_NAMES[code], mu=mu, a=a, t=t, beta=beta, shrink_index=shrink_index
    )


def write_map_csv(path, grid: np.ndarray) -> None:
    """Write a 2-d map as full-precision CSV, one patch row per line."""
    np.savetxt(path, np.atleast_2d(grid), delimiter=",", fmt="%.17g")


def read_map_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=","))


def write_map_pgm(path, grid: np.ndarray) -> None:
    """Write a 2-d map as binary 8-bit PGM with per-map min-max scaling."""
    g = np.asarray(grid, dtype=np.float64)
    lo, hi = g.min(), g.max()
    scaled = np.zeros_like(g) if hi == lo else (g - lo) / (hi - lo)
    pixels = np.round(scaled * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{g.shape[1]} {g.shape[0]}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read an 8-bit binary or ASCII PGM into a float array scaled to [0, 1]."""
    from PIL import Image

    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("I"), dtype=np.float64)
    except Exception as exc:
        raise InputFormatError(f"{path}: not a readable PGM file ({exc})") from exc
    return arr / 255.0

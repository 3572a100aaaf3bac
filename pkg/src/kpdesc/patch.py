"""Per-pixel patch attributes and synthetic patch transforms.

A patch is a square ``W x W`` numpy array of intensities in ``[0, 1]``
(row-major; ``W >= 3`` so the gradient stencil fits).  Every pixel carries:

* 1-based grid coordinates ``x`` (column) and ``y`` (row) in ``{1..W}``,
* polar coordinates about the patch center ``((W+1)/2, (W+1)/2)``:
  radius ``rho`` normalized by ``W/2`` and clamped to ``[0, 1]``, and
  angle ``phi`` in ``[0, 2*pi)`` (defined as 0 at the exact center),
* gradient magnitude ``m`` and absolute gradient angle ``theta`` from
  central differences ``[-1, 0, 1]`` with replicate boundary padding,
* the relative gradient angle ``theta_rel = (theta - phi) mod 2*pi``,
* a Gaussian center weight ``g = exp(-rho**2)``.

All functions are pure; arrays are never modified in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

TWO_PI = 2.0 * np.pi

ROTATION = "rotation"
TRANSLATION = "translation"

MAX_ROTATION_DEG = 30.0
MAX_TRANSLATION_PX = 12


def validate_patch(patch) -> np.ndarray:
    """Check patch invariants and return the intensities as float64."""
    a = np.asarray(patch, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"patch must be square, got shape {a.shape}")
    if a.shape[0] < 3:
        raise ValueError(f"patch width must be >= 3, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise ValueError("patch intensities must be finite")
    if a.min() < 0.0 or a.max() > 1.0:
        raise ValueError("patch intensities must lie in [0, 1]")
    return a


def compute_gradients(patch) -> tuple[np.ndarray, np.ndarray]:
    """Gradient magnitude and angle fields of a patch.

    Central differences with replicate padding; the angle is wrapped to
    ``[0, 2*pi)`` and fixed to 0 wherever the magnitude is exactly zero.

    Returns
    -------
    (m, theta) : two (W, W) float64 arrays.
    """
    a = validate_patch(patch)
    padded = np.pad(a, 1, mode="edge")
    gx = padded[1:-1, 2:] - padded[1:-1, :-2]
    gy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    m = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), TWO_PI)
    theta[m == 0.0] = 0.0
    return m, theta


@dataclass(frozen=True)
class PixelAttributes:
    """Attribute tuple of a single pixel (see module docstring)."""

    width: int
    x: float
    y: float
    rho: float
    phi: float
    theta: float
    theta_rel: float
    m: float
    g: float


@dataclass(frozen=True)
class PatchAttributes:
    """Per-pixel attributes of a whole patch, flattened row-major.

    Arrays all have length ``width * width``; indexing yields the
    corresponding :class:`PixelAttributes`.
    """

    width: int
    x: np.ndarray
    y: np.ndarray
    rho: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    theta_rel: np.ndarray
    m: np.ndarray
    g: np.ndarray

    def __len__(self) -> int:
        return self.x.size

    def __getitem__(self, i: int) -> PixelAttributes:
        return PixelAttributes(
            self.width,
            float(self.x[i]),
            float(self.y[i]),
            float(self.rho[i]),
            float(self.phi[i]),
            float(self.theta[i]),
            float(self.theta_rel[i]),
            float(self.m[i]),
            float(self.g[i]),
        )


def _polar_grid(width: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    # 1-based coordinate grids and the derived (rho, phi) fields.
    coords = np.arange(1, width + 1, dtype=np.float64)
    x = np.tile(coords, width)
    y = np.repeat(coords, width)
    center = 0.5 * (width + 1)
    dx = x - center
    dy = y - center
    rho = np.minimum(np.hypot(dx, dy) / (width / 2.0), 1.0)
    phi = np.mod(np.arctan2(dy, dx), TWO_PI)
    phi[(dx == 0.0) & (dy == 0.0)] = 0.0
    return x, y, rho, phi


def pixel_attributes(patch) -> PatchAttributes:
    """Compute the full attribute set of a patch (one tuple per pixel)."""
    a = validate_patch(patch)
    width = a.shape[0]
    m, theta = compute_gradients(a)
    x, y, rho, phi = _polar_grid(width)
    theta = theta.ravel()
    theta_rel = np.mod(theta - phi, TWO_PI)
    return PatchAttributes(
        width=width,
        x=x,
        y=y,
        rho=rho,
        phi=phi,
        theta=theta,
        theta_rel=theta_rel,
        m=m.ravel(),
        g=np.exp(-rho * rho),
    )


def attributes_at(width: int, x: float, y: float, theta: float, m: float = 1.0) -> PixelAttributes:
    """Attributes of a synthetic pixel at grid position (x, y) with a given
    gradient angle; used to build probes and visualization grids."""
    center = 0.5 * (width + 1)
    dx = x - center
    dy = y - center
    rho = min(np.hypot(dx, dy) / (width / 2.0), 1.0)
    phi = 0.0 if dx == 0.0 and dy == 0.0 else float(np.mod(np.arctan2(dy, dx), TWO_PI))
    theta = float(np.mod(theta, TWO_PI))
    return PixelAttributes(
        width=width,
        x=float(x),
        y=float(y),
        rho=rho,
        phi=phi,
        theta=theta,
        theta_rel=float(np.mod(theta - phi, TWO_PI)),
        m=float(m),
        g=float(np.exp(-rho * rho)),
    )


def grid_attributes(width: int, theta: float, m: float = 1.0) -> PatchAttributes:
    """Attributes of a full synthetic grid with constant gradient angle and
    magnitude; the geometry fields match :func:`pixel_attributes`."""
    x, y, rho, phi = _polar_grid(width)
    theta_arr = np.full(x.size, float(np.mod(theta, TWO_PI)))
    return PatchAttributes(
        width=width,
        x=x,
        y=y,
        rho=rho,
        phi=phi,
        theta=theta_arr,
        theta_rel=np.mod(theta_arr - phi, TWO_PI),
        m=np.full(x.size, float(m)),
        g=np.exp(-rho * rho),
    )


@dataclass(frozen=True)
class SyntheticTransform:
    """A synthetic patch perturbation for robustness experiments.

    ``rotation`` amounts are degrees, ``translation`` amounts are whole
    pixels along +x; magnitudes are limited to the sweep ranges (30 degrees,
    12 pixels).  Negative amounts invert the direction.
    """

    kind: str
    amount: float

    def __post_init__(self):
        if self.kind == ROTATION:
            if abs(self.amount) > MAX_ROTATION_DEG:
                raise ValueError(f"rotation must be within +-{MAX_ROTATION_DEG} degrees")
        elif self.kind == TRANSLATION:
            if abs(self.amount) > MAX_TRANSLATION_PX:
                raise ValueError(f"translation must be within +-{MAX_TRANSLATION_PX} pixels")
            if self.amount != int(self.amount):
                raise ValueError("translation amount must be a whole number of pixels")
        else:
            raise ValueError(f"unknown transform kind {self.kind!r}")


def apply_synthetic_transform(patch, transform: SyntheticTransform) -> np.ndarray:
    """Rotate (bilinear, about the center) or translate (integer shift) a patch.

    Out-of-support samples replicate the nearest edge pixel.  Gradient angles
    are not adjusted here: recomputing gradients on the transformed patch
    transforms them implicitly.
    """
    a = validate_patch(patch)
    if transform.amount == 0:
        return a.copy()
    if transform.kind == ROTATION:
        angle = np.deg2rad(transform.amount)
        c, s = np.cos(angle), np.sin(angle)
        center = 0.5 * (a.shape[0] - 1)
        matrix = np.array([[c, -s], [s, c]])
        offset = np.array([center, center]) - matrix @ np.array([center, center])
        out = ndimage.affine_transform(a, matrix, offset=offset, order=1, mode="nearest")
        return np.clip(out, 0.0, 1.0)
    shift = int(transform.amount)
    out = np.empty_like(a)
    if shift > 0:
        out[:, shift:] = a[:, :-shift]
        out[:, :shift] = a[:, :1]
    else:
        out[:, :shift] = a[:, -shift:]
        out[:, shift:] = a[:, -1:]
    return out

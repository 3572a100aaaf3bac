"""Truncated Fourier feature maps for the Von Mises kernel.

The Von Mises kernel ``k(d) = exp(kappa * (cos d - 1))`` is a periodic,
bell-shaped similarity on angular differences, normalized so that
``k(0) = 1``.  Truncating its Fourier cosine series after ``N`` frequencies
gives

    k(d) ~= gamma_0 + sum_{i=1..N} gamma_i * cos(i * d)

and the coefficients define an explicit feature map of dimension ``2N + 1``
whose dot products reproduce the truncated series exactly:

    psi(v) = (sqrt(g0), sqrt(g1) cos v, ..., sqrt(gN) cos Nv,
                        sqrt(g1) sin v, ..., sqrt(gN) sin Nv)

    psi(p) . psi(q) = sum_i gamma_i cos(i * (p - q))

Coefficients are computed by adaptive numerical quadrature; no Bessel
functions are needed.  Scalar attributes that live on a bounded interval
(radius, x, y) are linearly mapped to ``[0, pi]`` before embedding so that
the periodic kernel never wraps around.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

TWO_PI = 2.0 * np.pi

#: Attribute domain markers.  Full-period attributes (angles) are embedded
#: as-is on [0, 2*pi); half-period attributes are linearly mapped to [0, pi].
FULL_PERIOD = "full-period"
HALF_PERIOD = "half-period"

_QUAD_TOL = 1e-12


@dataclass(frozen=True)
class AttributeKernelSpec:
    """Von Mises kernel settings for one scalar pixel attribute.

    Parameters
    ----------
    kappa : float
        Concentration; larger values give a narrower, more selective kernel.
    n_freq : int
        Number of retained Fourier frequencies (>= 1).  The feature map has
        ``2 * n_freq + 1`` components.
    domain : str
        ``FULL_PERIOD`` for native angles, ``HALF_PERIOD`` for scalars that
        are mapped to [0, pi] first.
    """

    kappa: float
    n_freq: int
    domain: str = FULL_PERIOD

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if self.n_freq < 1:
            raise ValueError(f"n_freq must be >= 1, got {self.n_freq}")
        if self.domain not in (FULL_PERIOD, HALF_PERIOD):
            raise ValueError(f"unknown domain {self.domain!r}")

    @property
    def dim(self) -> int:
        return 2 * self.n_freq + 1


@dataclass(frozen=True)
class FourierCoeffs:
    """Truncated Fourier cosine coefficients gamma_0 .. gamma_N of a kernel."""

    gamma: np.ndarray
    kappa: float = 0.0

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=np.float64)
        if g.ndim != 1 or g.size < 2:
            raise ValueError("gamma must be a 1-d array with at least two entries")
        if np.any(g < 0):
            raise ValueError("Fourier coefficients must be non-negative")
        object.__setattr__(self, "gamma", g)

    @property
    def n_freq(self) -> int:
        return self.gamma.size - 1

    @property
    def dim(self) -> int:
        return 2 * self.n_freq + 1

    @property
    def sqrt_gamma(self) -> np.ndarray:
        return np.sqrt(self.gamma)


def vm_kernel_exact(delta, kappa: float):
    """Evaluate the untruncated Von Mises kernel exp(kappa * (cos(delta) - 1)).

    Serves as the reference when measuring truncation error.
    """
    if not kappa > 0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    return np.exp(kappa * (np.cos(delta) - 1.0))


def _clamped(values: np.ndarray, kappa: float) -> np.ndarray:
    if np.any(values < 0):
        # Quadrature round-off can produce tiny negative tails; the feature
        # map needs sqrt(gamma_i), so clamp and warn.
        warnings.warn(
            f"negative Fourier coefficients clamped to 0 for kappa={kappa}",
            RuntimeWarning,
            stacklevel=3,
        )
        values = np.maximum(values, 0.0)
    return values


def vm_fourier_coeffs(spec: AttributeKernelSpec) -> FourierCoeffs:
    """Compute gamma_0 .. gamma_N for a Von Mises kernel by adaptive quadrature.

    gamma_0 is the mean of the kernel over one period; gamma_i for i >= 1 is
    ``(1/pi) * integral(k(d) * cos(i*d), -pi, pi)``.
    """
    kappa = float(spec.kappa)

    def kernel(d):
        return np.exp(kappa * (np.cos(d) - 1.0))

    gamma = np.empty(spec.n_freq + 1)
    val, _ = quad(kernel, -np.pi, np.pi, epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=200)
    gamma[0] = val / TWO_PI
    for i in range(1, spec.n_freq + 1):
        val, _ = quad(
            lambda d: kernel(d) * np.cos(i * d),
            -np.pi,
            np.pi,
            epsabs=_QUAD_TOL,
            epsrel=_QUAD_TOL,
            limit=200,
        )
        gamma[i] = val / np.pi
    return FourierCoeffs(_clamped(gamma, kappa), kappa=kappa)


def embed_scalar(value: float, coeffs: FourierCoeffs) -> np.ndarray:
    """Map one scalar into the (2N+1)-dimensional Fourier feature space."""
    return embed_array(np.asarray([value], dtype=np.float64), coeffs)[0]


def embed_array(values, coeffs: FourierCoeffs) -> np.ndarray:
    """Vectorized feature map: (n,) values -> (n, 2N+1) embedding rows.

    Layout per row: sqrt(g0), then the cosine block sqrt(gi)*cos(i*v), then
    the sine block sqrt(gi)*sin(i*v), for i = 1..N.
    """
    v = np.asarray(values, dtype=np.float64)
    sg = coeffs.sqrt_gamma
    n = coeffs.n_freq
    angles = v[:, None] * np.arange(1, n + 1)
    out = np.empty((v.size, 2 * n + 1))
    out[:, 0] = sg[0]
    out[:, 1 : n + 1] = sg[1:] * np.cos(angles)
    out[:, n + 1 :] = sg[1:] * np.sin(angles)
    return out


def eval_kernel_truncated(delta, coeffs: FourierCoeffs):
    """Evaluate the truncated series sum_i gamma_i * cos(i * delta).

    Even in ``delta`` and 2*pi-periodic; equals the dot product of the
    feature maps of any two points differing by ``delta``.
    """
    d = np.asarray(delta, dtype=np.float64)
    i = np.arange(coeffs.n_freq + 1)
    return np.cos(d[..., None] * i) @ coeffs.gamma


def truncation_error(coeffs: FourierCoeffs, grid_size: int = 4096) -> float:
    """Max absolute gap between the exact kernel and its truncation on a dense grid."""
    d = np.linspace(-np.pi, np.pi, grid_size)
    return float(np.max(np.abs(vm_kernel_exact(d, coeffs.kappa) - eval_kernel_truncated(d, coeffs))))

"""Patch descriptors built from Fourier feature-map embeddings.

Each pixel is embedded by a Kronecker product of three attribute feature
maps and the embeddings are sum-pooled with per-pixel weights
``g * sqrt(m)`` (Gaussian center weight times root gradient magnitude):

* ``polar``      psi_phi (x) psi_rho (x) psi_theta_rel   -> 175 dims
* ``cartesian``  psi_x   (x) psi_y   (x) psi_theta       -> 63 dims
* ``combined``   the two blocks, each l2-normalized, concatenated -> 238 dims

The dot product of two aggregated (and l2-normalized) descriptors
approximates the corresponding normalized match kernel: the double sum of
the truncated Von Mises kernel products over all pixel pairs.  Kronecker
index layout: the first factor varies slowest, the third fastest.

Patches with no gradient signal anywhere produce the zero vector and are
flagged degenerate instead of raising, so batch pipelines never abort.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import accel
from .featuremaps import (
    FULL_PERIOD,
    HALF_PERIOD,
    AttributeKernelSpec,
    FourierCoeffs,
    embed_array,
    vm_fourier_coeffs,
)
from .patch import PatchAttributes, pixel_attributes

POLAR = "polar"
CARTESIAN = "cartesian"
COMBINED = "combined"
POSTPROCESSED = "postprocessed"

VARIANTS = (POLAR, CARTESIAN, COMBINED)


@dataclass(frozen=True)
class DescriptorConfig:
    """Kernel settings for all six pixel attributes."""

    phi: AttributeKernelSpec = AttributeKernelSpec(8.0, 2, FULL_PERIOD)
    rho: AttributeKernelSpec = AttributeKernelSpec(8.0, 2, HALF_PERIOD)
    theta: AttributeKernelSpec = AttributeKernelSpec(8.0, 3, FULL_PERIOD)
    theta_rel: AttributeKernelSpec = AttributeKernelSpec(8.0, 3, FULL_PERIOD)
    x: AttributeKernelSpec = AttributeKernelSpec(1.0, 1, HALF_PERIOD)
    y: AttributeKernelSpec = AttributeKernelSpec(1.0, 1, HALF_PERIOD)

    def dim(self, variant: str) -> int:
        if variant == POLAR:
            return self.phi.dim * self.rho.dim * self.theta_rel.dim
        if variant == CARTESIAN:
            return self.x.dim * self.y.dim * self.theta.dim
        if variant == COMBINED:
            return self.dim(POLAR) + self.dim(CARTESIAN)
        raise ValueError(f"unknown variant {variant!r}")


DEFAULT_CONFIG = DescriptorConfig()


@lru_cache(maxsize=None)
def coeffs_for(spec: AttributeKernelSpec) -> FourierCoeffs:
    """Fourier coefficients for a kernel spec, computed once and shared."""
    return vm_fourier_coeffs(spec)


@dataclass
class Descriptor:
    """A patch descriptor: variant tag, values, and a degeneracy flag."""

    variant: str
    values: np.ndarray
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return self.values.size


def normalize(values: np.ndarray) -> np.ndarray:
    """l2-normalize a vector; the zero vector is preserved."""
    v = np.asarray(values, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return v.copy()
    return v / norm


def _map_half(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    # Linear map [lo, hi] -> [0, pi].
    return (values - lo) * (np.pi / (hi - lo))


def _triple(attrs: PatchAttributes, cfg: DescriptorConfig, variant: str):
    # Mapped attribute values and kernel specs of one parametrization.
    if variant == POLAR:
        return (
            (attrs.phi, cfg.phi),
            (_map_half(attrs.rho, 0.0, 1.0), cfg.rho),
            (attrs.theta_rel, cfg.theta_rel),
        )
    if variant == CARTESIAN:
        w = attrs.width
        return (
            (_map_half(attrs.x, 1.0, w), cfg.x),
            (_map_half(attrs.y, 1.0, w), cfg.y),
            (attrs.theta, cfg.theta),
        )
    raise ValueError(f"unknown parametrization {variant!r}")


def pixel_weights(attrs: PatchAttributes) -> np.ndarray:
    """Per-pixel aggregation weights g * sqrt(m)."""
    return attrs.g * np.sqrt(attrs.m)


def aggregate(attrs: PatchAttributes, cfg: DescriptorConfig, variant: str) -> np.ndarray:
    """Unnormalized weighted sum of per-pixel embeddings (polar or cartesian)."""
    (va, sa), (vb, sb), (vc, sc) = _triple(attrs, cfg, variant)
    return accel.aggregate_kron3(
        np.ascontiguousarray(va, np.float64),
        np.ascontiguousarray(vb, np.float64),
        np.ascontiguousarray(vc, np.float64),
        pixel_weights(attrs),
        coeffs_for(sa).sqrt_gamma,
        coeffs_for(sb).sqrt_gamma,
        coeffs_for(sc).sqrt_gamma,
    )


def pixel_embeddings(attrs: PatchAttributes, cfg: DescriptorConfig, variant: str) -> np.ndarray:
    """Per-pixel embedding rows (n, dim) without weights.

    ``combined`` stacks the polar and cartesian embeddings side by side.
    Used by the analysis tools; descriptor extraction goes through
    :func:`aggregate` instead.
    """
    if variant == COMBINED:
        return np.hstack(
            [pixel_embeddings(attrs, cfg, POLAR), pixel_embeddings(attrs, cfg, CARTESIAN)]
        )
    (va, sa), (vb, sb), (vc, sc) = _triple(attrs, cfg, variant)
    ea = embed_array(va, coeffs_for(sa))
    eb = embed_array(vb, coeffs_for(sb))
    ec = embed_array(vc, coeffs_for(sc))
    n = ea.shape[0]
    return np.einsum("pa,pb,pc->pabc", ea, eb, ec, optimize=True).reshape(n, -1)


def combined_from_parts(polar_values: np.ndarray, cartesian_values: np.ndarray) -> np.ndarray:
    """Build a combined descriptor from raw block aggregates.

    Each block is l2-normalized first (equal weight), then the concatenation
    is normalized once more.
    """
    v = np.concatenate([normalize(polar_values), normalize(cartesian_values)])
    return normalize(v)


def describe_polar(patch, cfg: DescriptorConfig = DEFAULT_CONFIG) -> Descriptor:
    """175-d polar-parametrization descriptor of a patch."""
    return describe_attrs(pixel_attributes(patch), POLAR, cfg)


def describe_cartesian(patch, cfg: DescriptorConfig = DEFAULT_CONFIG) -> Descriptor:
    """63-d Cartesian-parametrization descriptor of a patch."""
    return describe_attrs(pixel_attributes(patch), CARTESIAN, cfg)


def describe_combined(patch, cfg: DescriptorConfig = DEFAULT_CONFIG) -> Descriptor:
    """238-d concatenation of the polar and Cartesian descriptors."""
    return describe_attrs(pixel_attributes(patch), COMBINED, cfg)


def describe(patch, variant: str, cfg: DescriptorConfig = DEFAULT_CONFIG) -> Descriptor:
    """Descriptor of a patch for any variant name."""
    return describe_attrs(pixel_attributes(patch), variant, cfg)


def describe_attrs(
    attrs: PatchAttributes, variant: str, cfg: DescriptorConfig = DEFAULT_CONFIG
) -> Descriptor:
    """Descriptor from precomputed patch attributes."""
    if variant == COMBINED:
        vp = aggregate(attrs, cfg, POLAR)
        vc = aggregate(attrs, cfg, CARTESIAN)
        values = combined_from_parts(vp, vc)
    elif variant in (POLAR, CARTESIAN):
        values = normalize(aggregate(attrs, cfg, variant))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return Descriptor(variant=variant, values=values, degenerate=not values.any())


def describe_batch(
    patches,
    variant: str,
    cfg: DescriptorConfig = DEFAULT_CONFIG,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Extract descriptors for a collection of patches.

    Returns
    -------
    values : (n, dim) float64 array
    degenerate : (n,) bool mask of zero-gradient patches
    """
    patches = list(patches)
    out = np.zeros((len(patches), cfg.dim(variant)))
    degenerate = np.zeros(len(patches), dtype=bool)

    def work(i):
        d = describe(patches[i], variant, cfg)
        out[i] = d.values
        degenerate[i] = d.degenerate

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(len(patches))))
    else:
        for i in range(len(patches)):
            work(i)
    return out, degenerate

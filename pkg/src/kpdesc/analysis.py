"""Interpretability tools: pixel similarities, patch maps, heat maps and
similarity histograms.

The pixel-level similarity between two pixels is the dot product of their
feature-map embeddings, i.e. the product of the truncated attribute kernels.
A *patch map* fixes one probe pixel (position + gradient angle) and shows
that similarity against every grid position of a patch at a constant
gradient angle, with unit magnitudes and Gaussian center weights, the way a
toy patch with a uniform gradient field would produce it.

After a linear post-processing model (centering ``mu``, projection ``A``)
the pairwise contribution becomes

    psi(p)^T A A^T psi(q) - psi(p)^T A A^T mu - psi(q)^T A A^T mu

up to an additive constant.  Raw maps are invariant to shifting both
gradient angles by the same amount; projected maps are not.  Non-linear
models (the signed-square-root variant) act after pixel aggregation and
cannot be visualized this way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descriptor import DEFAULT_CONFIG, DescriptorConfig, pixel_embeddings
from .patch import PatchAttributes, PixelAttributes, attributes_at, grid_attributes, pixel_attributes
from .whitening import PCA_SQRT, WhiteningModel


def _as_attrs(p: PixelAttributes) -> PatchAttributes:
    return PatchAttributes(
        width=p.width,
        x=np.array([p.x]),
        y=np.array([p.y]),
        rho=np.array([p.rho]),
        phi=np.array([p.phi]),
        theta=np.array([p.theta]),
        theta_rel=np.array([p.theta_rel]),
        m=np.array([p.m]),
        g=np.array([p.g]),
    )


def _embed_one(p: PixelAttributes, cfg: DescriptorConfig, variant: str, weighted: bool) -> np.ndarray:
    e = pixel_embeddings(_as_attrs(p), cfg, variant)[0]
    return e * (p.g * np.sqrt(p.m)) if weighted else e


def _check_linear(model: WhiteningModel) -> None:
    if model.variant == PCA_SQRT:
        raise ValueError("non-linear post-processing cannot be visualized per pixel")


def pixel_similarity(
    p: PixelAttributes,
    q: PixelAttributes,
    cfg: DescriptorConfig = DEFAULT_CONFIG,
    variant: str = "polar",
    include_weights: bool = False,
) -> float:
    """Raw pixel-pair similarity: dot product of the two embeddings.

    For the combined variant this is the sum of the polar and Cartesian
    kernel products.  With ``include_weights`` each embedding is scaled by
    its pixel's ``g * sqrt(m)`` weight.
    """
    ep = _embed_one(p, cfg, variant, include_weights)
    eq = _embed_one(q, cfg, variant, include_weights)
    return float(ep @ eq)


def whitened_pixel_similarity(
    p: PixelAttributes,
    q: PixelAttributes,
    model: WhiteningModel,
    cfg: DescriptorConfig = DEFAULT_CONFIG,
    variant: str = "combined",
    include_weights: bool = False,
) -> float:
    """Pixel-pair contribution under a linear post-processing model."""
    _check_linear(model)
    ep = _embed_one(p, cfg, variant, include_weights)
    eq = _embed_one(q, cfg, variant, include_weights)
    if ep.size != model.d_in:
        raise ValueError(f"embedding dim {ep.size} != model d_in {model.d_in}")
    tp = ep @ model.a
    tq = eq @ model.a
    tm = model.mu @ model.a
    return float(tp @ tq - tp @ tm - tq @ tm)


@dataclass
class PatchMap:
    """A grid of (optionally projected) pixel similarities for one probe."""

    width: int
    values: np.ndarray  # (W, W)
    probe_x: float
    probe_y: float
    probe_theta: float
    q_theta: float


def patch_map(
    width: int,
    probe_x: float,
    probe_y: float,
    probe_theta: float,
    q_theta: float,
    cfg: DescriptorConfig = DEFAULT_CONFIG,
    variant: str = "polar",
    model: WhiteningModel | None = None,
) -> PatchMap:
    """Similarity of one probe pixel against every grid position of a patch.

    All pixels use unit gradient magnitude; Gaussian center weights are
    included for the probe and the grid.  The grid's gradient angle is the
    constant ``q_theta``.
    """
    if not (1 <= probe_x <= width and 1 <= probe_y <= width):
        raise ValueError(f"probe ({probe_x}, {probe_y}) outside a width-{width} patch")
    probe = attributes_at(width, probe_x, probe_y, probe_theta, m=1.0)
    grid = grid_attributes(width, q_theta, m=1.0)
    eq = pixel_embeddings(grid, cfg, variant) * grid.g[:, None]
    ep = _embed_one(probe, cfg, variant, weighted=True)
    if model is None:
        values = eq @ ep
    else:
        _check_linear(model)
        if ep.size != model.d_in:
            raise ValueError(f"embedding dim {ep.size} != model d_in {model.d_in}")
        tp = ep @ model.a
        tq = eq @ model.a
        tm = model.mu @ model.a
        values = tq @ tp - tq @ tm - float(tp @ tm)
    return PatchMap(
        width=width,
        values=values.reshape(width, width),
        probe_x=probe_x,
        probe_y=probe_y,
        probe_theta=probe_theta,
        q_theta=q_theta,
    )


def slice_1d(pmap: PatchMap, axis: str, index: int) -> np.ndarray:
    """Extract one row (constant y) or column (constant x) of a patch map.

    ``index`` is the 1-based grid coordinate.
    """
    if not 1 <= index <= pmap.width:
        raise ValueError(f"index {index} out of range 1..{pmap.width}")
    if axis == "row":
        return pmap.values[index - 1, :].copy()
    if axis == "column":
        return pmap.values[:, index - 1].copy()
    raise ValueError(f"axis must be 'row' or 'column', got {axis!r}")


def pair_heat_map(
    patch_p,
    patch_q,
    cfg: DescriptorConfig = DEFAULT_CONFIG,
    variant: str = "combined",
    model: WhiteningModel | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Aggregated cross-similarity maps of a patch pair using real attributes.

    Returns two (W, W) maps: per-pixel strengths over the second patch
    (each grid cell summed against all pixels of the first) and over the
    first patch (summed against all pixels of the second).  Weights
    ``g * sqrt(m)`` are included; with a model the projected contribution
    is used.
    """
    attrs_p = pixel_attributes(patch_p)
    attrs_q = pixel_attributes(patch_q)
    if attrs_p.width != attrs_q.width:
        raise ValueError("patches must share the same size")
    w = attrs_p.width
    ep = pixel_embeddings(attrs_p, cfg, variant) * (attrs_p.g * np.sqrt(attrs_p.m))[:, None]
    eq = pixel_embeddings(attrs_q, cfg, variant) * (attrs_q.g * np.sqrt(attrs_q.m))[:, None]
    if model is None:
        vp = ep.sum(axis=0)
        vq = eq.sum(axis=0)
        over_q = eq @ vp
        over_p = ep @ vq
    else:
        _check_linear(model)
        tp = ep @ model.a
        tq = eq @ model.a
        tm = model.mu @ model.a
        sp = tp.sum(axis=0)
        sq = tq.sum(axis=0)
        n = ep.shape[0]
        over_q = tq @ sp - tq @ tm * n - float(sp @ tm)
        over_p = tp @ sq - tp @ tm * n - float(sq @ tm)
    return over_q.reshape(w, w), over_p.reshape(w, w)


@dataclass
class SimilarityHistograms:
    """Binned descriptor similarities of matching and non-matching pairs."""

    counts_pos: np.ndarray
    counts_neg: np.ndarray
    bin_edges: np.ndarray

    def overlap(self) -> float:
        """Intersection area of the two count-normalized histograms."""
        p = self.counts_pos / max(self.counts_pos.sum(), 1)
        n = self.counts_neg / max(self.counts_neg.sum(), 1)
        return float(np.minimum(p, n).sum())


def similarity_histograms(
    pos_a: np.ndarray,
    pos_b: np.ndarray,
    neg_a: np.ndarray,
    neg_b: np.ndarray,
    bins: int = 50,
) -> SimilarityHistograms:
    """Histogram the dot products of matching and non-matching descriptor
    pairs over shared bin edges."""
    if len(pos_a) == 0 or len(neg_a) == 0:
        raise ValueError("need at least one positive and one negative pair")
    pos = np.einsum("ij,ij->i", np.atleast_2d(pos_a), np.atleast_2d(pos_b))
    neg = np.einsum("ij,ij->i", np.atleast_2d(neg_a), np.atleast_2d(neg_b))
    edges = np.histogram_bin_edges(np.concatenate([pos, neg]), bins=bins)
    counts_pos, _ = np.histogram(pos, bins=edges)
    counts_neg, _ = np.histogram(neg, bins=edges)
    return SimilarityHistograms(counts_pos=counts_pos, counts_neg=counts_neg, bin_edges=edges)


def map_filename(pmap: PatchMap, extension: str) -> str:
    """Canonical export name with angles encoded in milliradians."""
    pt = round(pmap.probe_theta * 1000)
    qt = round(pmap.q_theta * 1000)
    return f"map_{int(pmap.probe_x)}_{int(pmap.probe_y)}_{pt}_{qt}.{extension}"

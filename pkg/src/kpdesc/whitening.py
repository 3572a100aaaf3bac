"""Descriptor post-processing: centering, projection and whitening variants.

Every fitted model applies ``A.T @ (v - mu)`` followed by a final
l2-normalization.  The projection ``A`` (d_in x d_out, top-eigenvalue
columns first) is learned in one of five ways:

* ``supervised``   whiten the intraclass (matching-pair) covariance, then
                   rotate by the PCA of the data covariance in that space:
                   ``A = C_M^{-1/2} @ eigvecs(C_M^{-1/2} C C_M^{-1/2})``.
                   The inverse square root is taken through the Cholesky
                   factor of the (ridged) intraclass covariance, which makes
                   the inner matrix invariant to any fixed diagonal
                   rescaling of the descriptors.
* ``pca``          ``A = eigvecs(C) @ diag(lambda^-1/2)``; output covariance
                   becomes the identity.
* ``attenuated``   ``diag(lambda^(-t/2))`` with t in [0, 1]: t=1 is full PCA
                   whitening, t=0 a pure rotation.
* ``shrinkage``    whitening of the blended covariance (1-beta)*C + beta*I:
                   ``diag((alpha*lambda + beta)^-1/2)`` with alpha = 1-beta
                   and beta set to the i-th eigenvalue by default, which
                   compresses the extremes of the spectrum.
* ``pca_sqrt``     PCA rotation (no scaling) followed by a signed
                   square root of each component.

Fitting runs in double precision from mergeable (count, sum, outer-product)
accumulators; fitted models are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .descriptor import normalize
from .errors import NumericalError

SUPERVISED = "supervised"
PCA = "pca"
ATTENUATED = "attenuated"
SHRINKAGE = "shrinkage"
PCA_SQRT = "pca_sqrt"

VARIANTS = (SUPERVISED, PCA, ATTENUATED, SHRINKAGE, PCA_SQRT)

_RIDGE_SCALE = 1e-10


@dataclass
class DescriptorStats:
    """Sample mean and population (1/n) covariance of a descriptor set."""

    mu: np.ndarray
    c: np.ndarray
    count: int


@dataclass
class IntraclassStats:
    """Mean outer product of matching-pair descriptor differences.

    Any positive scaling of this matrix cancels in the supervised fit, so
    the 1/|pairs| convention only matters for reporting.
    """

    c_m: np.ndarray
    pair_count: int


class StatsAccumulator:
    """Mergeable accumulator of (count, sum, sum of outer products)."""

    def __init__(self, dim: int):
        self.count = 0
        self.s = np.zeros(dim)
        self.outer = np.zeros((dim, dim))

    def update(self, rows: np.ndarray) -> "StatsAccumulator":
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        self.count += rows.shape[0]
        self.s += rows.sum(axis=0)
        self.outer += rows.T @ rows
        return self

    def merge(self, other: "StatsAccumulator") -> "StatsAccumulator":
        self.count += other.count
        self.s += other.s
        self.outer += other.outer
        return self

    def finalize(self) -> DescriptorStats:
        if self.count < 2:
            raise ValueError("need at least 2 samples to estimate statistics")
        mu = self.s / self.count
        c = self.outer / self.count - np.outer(mu, mu)
        return DescriptorStats(mu=mu, c=0.5 * (c + c.T), count=self.count)


def estimate_stats(descriptors: np.ndarray) -> DescriptorStats:
    """Mean and covariance of a (n, d) descriptor matrix."""
    rows = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
    return StatsAccumulator(rows.shape[1]).update(rows).finalize()


def intraclass_covariance(pairs_a: np.ndarray, pairs_b: np.ndarray) -> IntraclassStats:
    """Intraclass covariance from matching descriptor pairs (row i of the two
    matrices is one pair)."""
    a = np.atleast_2d(np.asarray(pairs_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(pairs_b, dtype=np.float64))
    if a.shape != b.shape:
        raise ValueError(f"pair matrices must have equal shapes, got {a.shape} and {b.shape}")
    if a.shape[0] < 1:
        raise ValueError("need at least one matching pair")
    d = a - b
    c_m = d.T @ d / a.shape[0]
    return IntraclassStats(c_m=0.5 * (c_m + c_m.T), pair_count=a.shape[0])


@dataclass
class WhiteningModel:
    """A fitted post-processing transform ``v -> l2(A.T @ (v - mu))``."""

    variant: str
    mu: np.ndarray
    a: np.ndarray  # (d_in, d_out)
    t: float = 0.0
    beta: float = 0.0
    shrink_index: int = 0

    @property
    def d_in(self) -> int:
        return self.a.shape[0]

    @property
    def d_out(self) -> int:
        return self.a.shape[1]


def _sorted_eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Descending eigenvalues; each eigenvector's largest-magnitude component
    # made positive so repeated fits serialize identically.
    vals, vecs = np.linalg.eigh(matrix)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    flip = vecs[np.argmax(np.abs(vecs), axis=0), np.arange(vecs.shape[1])] < 0
    vecs[:, flip] *= -1.0
    return vals, vecs


def _check_d_out(d_out: int, d_in: int) -> None:
    if not 1 <= d_out <= d_in:
        raise ValueError(f"d_out must be in [1, {d_in}], got {d_out}")


def _retained_positive(vals: np.ndarray, d_out: int) -> None:
    if vals[d_out - 1] <= 0.0:
        raise NumericalError(
            f"covariance eigenvalue {d_out} is not positive ({vals[d_out - 1]:g})"
        )


def fit_supervised(stats: DescriptorStats, intra: IntraclassStats, d_out: int) -> WhiteningModel:
    """Fit the supervised (intraclass-whitening + PCA rotation) projection."""
    d = stats.mu.size
    _check_d_out(d_out, d)
    c_m = intra.c_m
    ridge = _RIDGE_SCALE * np.trace(c_m) / d
    try:
        lower = cholesky(c_m + ridge * np.eye(d), lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("intraclass covariance is singular beyond ridge repair") from exc
    # inner = L^-1 C L^-T, invariant to diagonal rescaling of the input space
    half = solve_triangular(lower, stats.c, lower=True)
    inner = solve_triangular(lower, half.T, lower=True).T
    _, vecs = _sorted_eigh(0.5 * (inner + inner.T))
    a_full = solve_triangular(lower, vecs, lower=True, trans="T")
    return WhiteningModel(variant=SUPERVISED, mu=stats.mu.copy(), a=a_full[:, :d_out])


def fit_pca_whitening(stats: DescriptorStats, d_out: int) -> WhiteningModel:
    """Fit PCA whitening: rotate to principal axes and scale to unit variance."""
    _check_d_out(d_out, stats.mu.size)
    vals, vecs = _sorted_eigh(stats.c)
    _retained_positive(vals, d_out)
    a = vecs[:, :d_out] * vals[:d_out] ** -0.5
    return WhiteningModel(variant=PCA, mu=stats.mu.copy(), a=a, t=1.0)


def fit_attenuated(stats: DescriptorStats, t: float, d_out: int) -> WhiteningModel:
    """Fit attenuated PCA whitening with eigenvalue exponent -t/2."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    _check_d_out(d_out, stats.mu.size)
    vals, vecs = _sorted_eigh(stats.c)
    _retained_positive(vals, d_out)
    a = vecs[:, :d_out] * vals[:d_out] ** (-0.5 * t)
    return WhiteningModel(variant=ATTENUATED, mu=stats.mu.copy(), a=a, t=float(t))


def fit_shrinkage(
    stats: DescriptorStats,
    d_out: int,
    shrink_index: int = 40,
    beta: float | None = None,
) -> WhiteningModel:
    """Fit PCA whitening of the shrunk covariance (1-beta)*C + beta*I.

    ``beta`` defaults to the ``shrink_index``-th (1-based) eigenvalue of the
    covariance.
    """
    d = stats.mu.size
    _check_d_out(d_out, d)
    vals, vecs = _sorted_eigh(stats.c)
    if beta is None:
        if not 1 <= shrink_index <= d:
            raise ValueError(f"shrink_index must be in [1, {d}], got {shrink_index}")
        beta = float(vals[shrink_index - 1])
    else:
        beta = float(beta)
        shrink_index = 0
    alpha = 1.0 - beta
    scaled = alpha * vals[:d_out] + beta
    if np.any(scaled <= 0.0):
        raise NumericalError("shrunk eigenvalues are not positive")
    a = vecs[:, :d_out] * scaled**-0.5
    return WhiteningModel(
        variant=SHRINKAGE, mu=stats.mu.copy(), a=a, beta=beta, shrink_index=shrink_index
    )


def fit_pca_sqrt(stats: DescriptorStats, d_out: int) -> WhiteningModel:
    """Fit the PCA-rotation + signed-square-root baseline (no whitening)."""
    _check_d_out(d_out, stats.mu.size)
    vals, vecs = _sorted_eigh(stats.c)
    _retained_positive(vals, d_out)
    return WhiteningModel(variant=PCA_SQRT, mu=stats.mu.copy(), a=vecs[:, :d_out].copy())


def apply(model: WhiteningModel, values: np.ndarray) -> np.ndarray:
    """Post-process one descriptor or a (n, d_in) batch; rows come back
    l2-normalized (the zero vector stays zero)."""
    v = np.asarray(values, dtype=np.float64)
    single = v.ndim == 1
    rows = np.atleast_2d(v)
    if rows.shape[1] != model.d_in:
        raise ValueError(f"descriptor dim {rows.shape[1]} != model d_in {model.d_in}")
    out = (rows - model.mu) @ model.a
    if model.variant == PCA_SQRT:
        out = np.sign(out) * np.sqrt(np.abs(out))
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    np.divide(out, norms, out=out, where=norms > 0.0)
    return out[0] if single else out

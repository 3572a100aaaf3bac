"""Pure-numpy implementation of the descriptor aggregation kernel."""

from __future__ import annotations

import numpy as np


def _embed_block(values: np.ndarray, sqrt_gamma: np.ndarray) -> np.ndarray:
    # (n,) values -> (n, 2N+1): [sqrt(g0), sqrt(gi)cos(iv)..., sqrt(gi)sin(iv)...]
    # Higher harmonics come from the angle-addition recurrence, one cos/sin
    # evaluation per pixel.
    n_freq = sqrt_gamma.size - 1
    out = np.empty((values.size, 2 * n_freq + 1))
    out[:, 0] = sqrt_gamma[0]
    c1 = np.cos(values)
    s1 = np.sin(values)
    ck, sk = c1, s1
    out[:, 1] = sqrt_gamma[1] * c1
    out[:, n_freq + 1] = sqrt_gamma[1] * s1
    for k in range(2, n_freq + 1):
        ck, sk = ck * c1 - sk * s1, sk * c1 + ck * s1
        out[:, k] = sqrt_gamma[k] * ck
        out[:, n_freq + k] = sqrt_gamma[k] * sk
    return out


def aggregate_kron3(va, vb, vc, weights, sga, sgb, sgc) -> np.ndarray:
    """Sum over pixels of weight * psi_a(va) (x) psi_b(vb) (x) psi_c(vc).

    ``va, vb, vc`` are per-pixel attribute values already mapped to their
    embedding domain, ``weights`` the per-pixel scalar weights, and
    ``sg*`` the square roots of the Fourier coefficients of each kernel.
    Returns the flattened aggregate of dimension (2Na+1)(2Nb+1)(2Nc+1),
    with the last factor's index varying fastest.
    """
    ea = _embed_block(np.asarray(va, np.float64), sga)
    eb = _embed_block(np.asarray(vb, np.float64), sgb)
    ec = _embed_block(np.asarray(vc, np.float64), sgc)
    w = np.asarray(weights, np.float64)
    n = w.size
    ab = ((ea * w[:, None])[:, :, None] * eb[:, None, :]).reshape(n, -1)
    return (ab.T @ ec).ravel()

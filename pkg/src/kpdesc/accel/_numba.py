"""Numba-JIT implementation of the descriptor aggregation kernel."""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _embed_into(v, sqrt_gamma, out):
    # Chebyshev-style recurrence avoids calling cos/sin once per frequency.
    n_freq = sqrt_gamma.shape[0] - 1
    out[0] = sqrt_gamma[0]
    c1 = math.cos(v)
    s1 = math.sin(v)
    ck = 1.0
    sk = 0.0
    for k in range(1, n_freq + 1):
        cn = ck * c1 - sk * s1
        sn = sk * c1 + ck * s1
        out[k] = sqrt_gamma[k] * cn
        out[n_freq + k] = sqrt_gamma[k] * sn
        ck = cn
        sk = sn


@njit(cache=True, nogil=True)
def aggregate_kron3(va, vb, vc, weights, sga, sgb, sgc):
    """Sum over pixels of weight * psi_a(va) (x) psi_b(vb) (x) psi_c(vc)."""
    da = 2 * (sga.shape[0] - 1) + 1
    db = 2 * (sgb.shape[0] - 1) + 1
    dc = 2 * (sgc.shape[0] - 1) + 1
    out = np.zeros(da * db * dc)
    ea = np.empty(da)
    eb = np.empty(db)
    ec = np.empty(dc)
    for p in range(va.shape[0]):
        w = weights[p]
        if w == 0.0:
            continue
        _embed_into(va[p], sga, ea)
        _embed_into(vb[p], sgb, eb)
        _embed_into(vc[p], sgc, ec)
        idx = 0
        for i in range(da):
            wa = w * ea[i]
            for j in range(db):
                wab = wa * eb[j]
                for k in range(dc):
                    out[idx] += wab * ec[k]
                    idx += 1
    return out

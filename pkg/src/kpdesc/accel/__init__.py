"""Backend dispatch for the hot descriptor-aggregation kernel.

Two interchangeable implementations exist:

* ``numba`` -- JIT-compiled scalar loops (default when numba imports cleanly)
* ``numpy`` -- vectorized einsum fallback

Selection is controlled by the ``KPDESC_BACKEND`` environment variable
(``numba``, ``numpy`` or ``auto``; read once at import time).  Both backends
produce the same values up to floating-point summation order; the test suite
checks their parity and ``benchmarks/bench_backends.py`` compares throughput.
"""

from __future__ import annotations

import os

from . import _numpy

_requested = os.environ.get("KPDESC_BACKEND", "auto").strip().lower() or "auto"
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"KPDESC_BACKEND must be 'numba', 'numpy' or 'auto', got {_requested!r}"
    )

if _requested == "numpy":
    _impl = _numpy
    _name = "numpy"
else:
    try:
        from . import _numba as _impl

        _name = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        _impl = _numpy
        _name = "numpy"

aggregate_kron3 = _impl.aggregate_kron3


def active_backend() -> str:
    """Name of the backend selected at import time ('numba' or 'numpy')."""
    return _name


def get_backend(name: str):
    """Return a specific backend module by name (for benchmarks and tests)."""
    if name == "numpy":
        return _numpy
    if name == "numba":
        from . import _numba

        return _numba
    raise ValueError(f"unknown backend {name!r}")


def warmup() -> None:
    """Trigger JIT compilation of the active backend on tiny inputs."""
    import numpy as np

    one = np.zeros(1)
    sg = np.ones(2)
    aggregate_kron3(one, one, one, np.ones(1), sg, sg, sg)

"""Backend selection for the hot loops.

The compiled extension is used when importable; set ``GRAPHREP_PURE_PYTHON=1``
to force the NumPy fallback. ``BACKEND`` names the active implementation.
"""

import os

import numpy as np

from graphrep import _pykernels

if os.environ.get("GRAPHREP_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from graphrep import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"

BACKENDS = {"python": _pykernels}
if BACKEND == "cython":
    BACKENDS["cython"] = _impl


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def pairwise_sq_dists(Z, backend=None):
    impl = BACKENDS[backend] if backend else _impl
    return impl.pairwise_sq_dists(_f64(Z))


def knn_select(D, k, backend=None):
    impl = BACKENDS[backend] if backend else _impl
    return np.asarray(impl.knn_select(_f64(D), int(k)))


def edge_weight_grad(edges, s_vals, degrees, G, Fp, alpha, tiny, backend=None):
    impl = BACKENDS[backend] if backend else _impl
    return np.asarray(
        impl.edge_weight_grad(
            _i64(edges), _f64(s_vals), _f64(degrees), _f64(G), _f64(Fp), float(alpha), float(tiny)
        )
    )


def scatter_point_grad(edges, dD, Z, backend=None):
    impl = BACKENDS[backend] if backend else _impl
    return np.asarray(impl.scatter_point_grad(_i64(edges), _f64(dD), _f64(Z)))

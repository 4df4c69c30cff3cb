"""Kernel selection: compiled extension when available, numpy fallback otherwise.

The two backends implement the same contract bit-for-bit (see the module
docstrings of ``_nms_cy`` / ``_nms_py``). Set ``HEATPRED_FORCE_PYTHON=1``
before import to force the fallback, e.g. for benchmarking.
"""

from __future__ import annotations

import os

import numpy as np

from . import _nms_py

if os.environ.get("HEATPRED_FORCE_PYTHON") == "1":
    _impl = _nms_py
    BACKEND = "python"
else:
    try:
        from . import _nms_cy as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _nms_py
        BACKEND = "python"


def nms_kernel(xs, ys, probs, r, k, impl=None):
    """Run greedy peak suppression on copies of the input arrays.

    Arrays must be float64 and index-sorted; ``probs`` is copied before the
    kernel mutates it. Returns (cell indices, scores) in emission order.
    """
    work = np.array(probs, dtype=np.float64, copy=True)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    backend = impl if impl is not None else _impl
    return backend.nms(xs, ys, work, float(r), int(k))


def available_backends():
    """Mapping of backend name to kernel module, for tests and benchmarks."""
    out = {"python": _nms_py}
    try:
        from . import _nms_cy

        out["cython"] = _nms_cy
    except ImportError:
        pass
    return out

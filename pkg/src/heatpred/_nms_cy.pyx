# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled greedy peak-suppression kernel over sparse probability grids.

Semantics are shared with ``heatpred._nms_py`` and must stay bit-identical:
peaks are picked by scanning for the strictly largest live probability in
ascending cell-index order, the emitted score is the Kahan-compensated sum of
live mass within the suppression radius (accumulated in ascending index
order, zero cells skipped), and suppressed cells are zeroed in place.
"""

import numpy as np


def nms(double[::1] xs, double[::1] ys, double[::1] probs, double r, Py_ssize_t k):
    """Greedy peak extraction. Mutates ``probs`` (pass a working copy).

    Returns (array positions of the peaks, scores) in emission order;
    stops after ``k`` peaks or when no live mass remains.
    """
    cdef Py_ssize_t n = probs.shape[0]
    cdef double r2 = r * r
    out_idx = np.empty(k, dtype=np.int64)
    out_score = np.empty(k, dtype=np.float64)
    cdef long long[::1] oi = out_idx
    cdef double[::1] osc = out_score
    cdef Py_ssize_t m = 0, i, peak
    cdef double best, px, py, dx, dy, p, s, c, y, t

    while m < k:
        # argmax over live cells; strict > keeps the lowest index on ties
        peak = -1
        best = 0.0
        for i in range(n):
            if probs[i] > best:
                best = probs[i]
                peak = i
        if peak < 0:
            break
        px = xs[peak]
        py = ys[peak]
        s = 0.0
        c = 0.0
        for i in range(n):
            p = probs[i]
            if p > 0.0:
                dx = xs[i] - px
                dy = ys[i] - py
                if dx * dx + dy * dy <= r2:
                    y = p - c
                    t = s + y
                    c = (t - s) - y
                    s = t
                    probs[i] = 0.0
        oi[m] = peak
        osc[m] = s
        m += 1
    return out_idx[:m].copy(), out_score[:m].copy()

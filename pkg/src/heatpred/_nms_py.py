"""Pure numpy fallback for the greedy peak-suppression kernel.

Bit-compatible with the compiled kernel in ``_nms_cy.pyx``: identical peak
selection (first occurrence of the maximum), identical suppression predicate
(squared distance compared against r*r) and identical Kahan-compensated mass
accumulation in ascending cell-index order with zero cells skipped.
"""

from __future__ import annotations

import numpy as np


def nms(xs, ys, probs, r, k):
    """Greedy peak extraction. Mutates ``probs`` (pass a working copy).

    Returns (array positions of the peaks, scores) in emission order;
    stops after ``k`` peaks or when no live mass remains.
    """
    r2 = r * r
    idx_out: list[int] = []
    score_out: list[float] = []
    while len(idx_out) < k:
        peak = int(np.argmax(probs))
        if probs[peak] <= 0.0:
            break
        dx = xs - xs[peak]
        dy = ys - ys[peak]
        sel = np.flatnonzero((dx * dx + dy * dy <= r2) & (probs > 0.0))
        s = 0.0
        c = 0.0
        for j in sel:
            p = probs[j]
            y = p - c
            t = s + y
            c = (t - s) - y
            s = t
        probs[sel] = 0.0
        idx_out.append(peak)
        score_out.append(s)
    return (
        np.asarray(idx_out, dtype=np.int64),
        np.asarray(score_out, dtype=np.float64),
    )

"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``."""
from __future__ import annotations

import numpy as np


def escape_counts(re_min, re_max, im_min, im_max, width, height,
                  lam_re, lam_im, max_iter, radius):
    """First n with |f^n(z)| > radius per pixel, or -1.  Row 0 is the top edge."""
    xs = np.linspace(re_min, re_max, width) if width > 1 else np.array([(re_min + re_max) / 2])
    ys = np.linspace(im_max, im_min, height) if height > 1 else np.array([(im_min + im_max) / 2])
    z = xs[np.newaxis, :] + 1j * ys[:, np.newaxis]
    lam = complex(lam_re, lam_im)
    out = np.full(z.shape, -1, dtype=np.int32)
    alive = np.ones(z.shape, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(max_iter + 1):
            esc = alive & (np.abs(z) > radius)
            out[esc] = n
            alive &= ~esc
            if not alive.any() or n == max_iter:
                break
            z = np.where(alive, lam * np.exp(np.where(alive, z, 0)), z)
    return out


def bbox_pairs(ax0, ay0, ax1, ay1, bx0, by0, bx1, by1, pad, skip_adjacent, closed):
    """Index pairs (i, j) of segments from A and B whose padded boxes overlap.

    With ``skip_adjacent`` the two sets are the same polyline: only i < j is
    reported and neighbouring segments (and first/last when closed) are dropped.
    """
    a_lo = np.minimum(ax0, ax1) - pad
    a_hi = np.maximum(ax0, ax1) + pad
    a_ylo = np.minimum(ay0, ay1) - pad
    a_yhi = np.maximum(ay0, ay1) + pad
    b_lo = np.minimum(bx0, bx1)
    b_hi = np.maximum(bx0, bx1)
    b_ylo = np.minimum(by0, by1)
    b_yhi = np.maximum(by0, by1)
    order = np.argsort(b_lo, kind="stable")
    b_lo_sorted = b_lo[order]
    nb = len(b_lo)
    pairs = []
    for i in range(len(a_lo)):
        stop = np.searchsorted(b_lo_sorted, a_hi[i], side="right")
        cand = order[:stop]
        if not len(cand):
            continue
        ok = (b_hi[cand] >= a_lo[i]) & (b_ylo[cand] <= a_yhi[i]) & (b_yhi[cand] >= a_ylo[i])
        for j in cand[ok]:
            j = int(j)
            if skip_adjacent:
                if j <= i + 1:
                    continue
                if closed and i == 0 and j == nb - 1:
                    continue
            pairs.append((i, j))
    pairs.sort()
    return pairs

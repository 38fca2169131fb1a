"""Small shared helpers."""

from __future__ import annotations

import numpy as np


def time_mesh(s: float, t: float, dt: float) -> np.ndarray:
    """Uniform mesh from s by dt, with a shortened final step landing on t."""
    n_full = int(np.floor((t - s) / dt + 1e-9))
    ts = s + dt * np.arange(n_full + 1)
    if ts[-1] < t - 1e-12 * max(1.0, abs(t)):
        ts = np.append(ts, t)
    ts[-1] = t
    return ts


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-12,
                     max_depth: int = 40) -> float:
    """Classical adaptive Simpson integration of a scalar function."""
    def simp(lo, mid, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def rec(lo, hi, flo, fmid, fhi, whole, depth):
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = simp(lo, lm, mid, flo, flm, fmid)
        right = simp(mid, rm, hi, fmid, frm, fhi)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (rec(lo, mid, flo, flm, fmid, left, depth - 1)
                + rec(mid, hi, fmid, frm, fhi, right, depth - 1))

    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    return rec(a, b, fa, fm, fb, simp(a, m, b, fa, fm, fb), max_depth)

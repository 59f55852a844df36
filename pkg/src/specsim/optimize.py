"""Small scalar optimization helpers shared by the kernels."""

from __future__ import annotations

import math
from typing import Callable

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0


def golden_section_min(f: Callable[[float], float], lo: float, hi: float,
                       tol: float = 1e-6) -> tuple[float, float]:
    """Golden-section search for the minimum of a unimodal f on [lo, hi].

    Returns (argmin, min value) with the argmin located to within ``tol``.
    """
    if hi < lo:
        raise ValueError(f"empty bracket [{lo}, {hi}]")
    a, b = lo, hi
    h = b - a
    if h <= tol:
        mid = (a + b) / 2.0
        return mid, f(mid)
    c = a + INV_PHI_SQ * h
    d = a + INV_PHI * h
    fc, fd = f(c), f(d)
    while h > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + INV_PHI_SQ * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + INV_PHI * h
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def golden_section_max(f: Callable[[float], float], lo: float, hi: float,
                       tol: float = 1e-6) -> tuple[float, float]:
    x, neg = golden_section_min(lambda t: -f(t), lo, hi, tol)
    return x, -neg


def scan_then_refine(f: Callable[[float], float], lo: float, hi: float,
                     coarse: int = 60, tol: float = 1e-6) -> tuple[float, float]:
    """Coarse grid scan to bracket the minimum, then golden-section refine.

    More robust than a bare golden-section search when f is only piecewise
    smooth; the scan pins the bracket, the search polishes within it.
    """
    step = (hi - lo) / coarse
    best_i, best_v = 0, math.inf
    xs = [lo + i * step for i in range(coarse + 1)]
    for i, x in enumerate(xs):
        v = f(x)
        if v < best_v:
            best_i, best_v = i, v
    a = xs[max(best_i - 1, 0)]
    b = xs[min(best_i + 1, coarse)]
    return golden_section_min(f, a, b, tol)

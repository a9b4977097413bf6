"""Brute-force references for tests.

Nothing here calls the fast kernels it is meant to check: no FFTs, no
sorting-based rearrangement, no Kadane scan.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptySearchBox, EmptySet, GridMismatch, TooLarge
from .grid import SampledFunction
from .intervals import IntervalFit

MAX_CELLS = 4096


@dataclass(frozen=True)
class ClosedFormGaussian:
    """amplitude * exp(-scale * |x - center|^2)."""

    scale: float
    center: tuple = (0.0,)
    amplitude: complex = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError("scale must be positive")

    def __call__(self, *xs):
        r2 = sum((x - c) ** 2 for x, c in zip(xs, self.center))
        return self.amplitude * np.exp(-self.scale * r2)

    def norm(self, s, d=None):
        d = len(self.center) if d is None else d
        return abs(self.amplitude) * gaussian_norm_closed_form(self.scale, s, d)


def gaussian_norm_closed_form(a, s, d=1):
    """||exp(-a|x|^2)||_s on R^d."""
    if not (a > 0 and s >= 1):
        raise DomainError("need a > 0 and s >= 1")
    return (math.pi / (s * a)) ** (d / (2.0 * s))


def gaussian_trilinear_closed_form(a, b, c, d=1):
    """<e^{-a|.|^2} * e^{-b|.|^2}, e^{-c|.|^2}> on R^d.

    The exponent a|x-y|^2 + b|y|^2 + c|x|^2 has determinant ab+bc+ca per
    coordinate pair, so the value is pi^d / (ab+bc+ca)^{d/2}.
    """
    if not (a > 0 and b > 0 and c > 0):
        raise DomainError("scales must be positive")
    return math.pi ** d / (a * b + b * c + c * a) ** (d / 2.0)


def gaussian_convolution_closed_form(a, b):
    """e^{-a x^2} * e^{-b x^2} = sqrt(pi/(a+b)) e^{-(ab/(a+b)) x^2} as (coef, scale)."""
    return math.sqrt(math.pi / (a + b)), a * b / (a + b)


def closed_form_deficit(triple, a, b, c, d=1):
    from .exponents import sharp_constant

    val = gaussian_trilinear_closed_form(a, b, c, d)
    nrm = (gaussian_norm_closed_form(a, triple.p, d) * gaussian_norm_closed_form(b, triple.q, d)
           * gaussian_norm_closed_form(c, triple.r, d))
    return 1.0 - val / (sharp_constant(triple, d).a_pow_d * nrm)


def convolve_direct(f: SampledFunction, g: SampledFunction) -> SampledFunction:
    """Double-sum convolution at the grid points: (f*g)(x_m) = sum_j f(x_m - y_j) g(y_j) dV."""
    if f.grid != g.grid:
        raise GridMismatch("functions live on different grids")
    grid = f.grid
    if grid.size > MAX_CELLS:
        raise TooLarge(f"direct convolution capped at {MAX_CELLS} cells")
    shape = grid.shape
    o = [int(round(-a / h)) for a, h in zip(grid.lo, grid.spacing)]
    fv, gv = f.values, g.values
    out = np.zeros(shape, dtype=complex)
    # out[m] += f[m - j + o] g[j], one shifted copy of f per g index j
    for j in itertools.product(*[range(k) for k in shape]):
        if gv[j] == 0:
            continue
        dst, src = [], []
        for ji, oi, k in zip(j, o, shape):
            off = oi - ji  # src = m + off
            m_lo, m_hi = max(0, -off), min(k, k - off)
            if m_lo >= m_hi:
                break
            dst.append(slice(m_lo, m_hi))
            src.append(slice(m_lo + off, m_hi + off))
        else:
            out[tuple(dst)] += fv[tuple(src)] * gv[j]
    out *= grid.cell_volume
    if not (f.is_complex or g.is_complex):
        out = out.real
    return SampledFunction(grid, out)


def exhaustive_interval(mask, cell=1.0, lo=0.0) -> IntervalFit:
    """Scan every cell-aligned interval [i, j) and keep the smallest symmetric difference."""
    mask = np.asarray(getattr(mask, "mask", mask), dtype=bool).ravel()
    n = mask.size
    if n > MAX_CELLS:
        raise TooLarge(f"exhaustive interval search capped at {MAX_CELLS} cells")
    total = int(mask.sum())
    if total == 0:
        raise EmptySet("empty set has no best interval")
    pref = np.concatenate([[0], np.cumsum(mask.astype(np.int64))])
    best = None
    for i in range(n):
        inside = pref[i + 1:] - pref[i]          # |A cap [i, j)| for j = i+1..n
        length = np.arange(1, n - i + 1)
        sd = total - inside + (length - inside)  # |A \ I| + |I \ A|
        k = int(np.argmin(sd))
        if best is None or sd[k] < best[0]:
            best = (int(sd[k]), i, i + k + 1)
    sd, i, j = best
    return IntervalFit(lo + i * cell, lo + j * cell, sd * cell, sd / total, i, j)


def brute_rearrangement(f: SampledFunction) -> np.ndarray:
    """Greedy placement: largest remaining value goes to the free cell nearest the origin,
    ties to the lexicographically smallest index."""
    grid = f.grid
    if grid.size > MAX_CELLS:
        raise TooLarge("brute rearrangement capped")
    h = grid.spacing
    cells = list(itertools.product(*[range(k) for k in grid.shape]))
    dist = {c: sum(((grid.lo[a] + c[a] * h[a]) ** 2) for a in range(grid.d)) for c in cells}
    free = set(cells)
    vals = list(np.abs(f.values).ravel())
    out = np.zeros(grid.shape)
    while vals:
        big = max(range(len(vals)), key=lambda i: vals[i])
        v = vals.pop(big)
        c = min(free, key=lambda c: (round(dist[c], 9), c))
        free.remove(c)
        out[c] = v
    return out


def grid_search_gaussian(f: SampledFunction, s, scales, centers, amp_steps=41):
    """Exhaustive search over (scale, center, amplitude) then one finer pass around the best.

    Returns (scale, center, amplitude, residual) with residual = ||f| - G||_s / ||f||_s.
    """
    scales, centers = np.asarray(scales, float), np.asarray(centers, float)
    if scales.size == 0 or centers.size == 0 or np.any(scales <= 0):
        raise EmptySearchBox("search box needs positive scales and at least one center")
    if f.grid.d != 1:
        raise DomainError("grid search oracle is one-dimensional")
    x = f.grid.axis(0)
    dv = f.grid.cell_volume
    a = np.abs(f.values)
    fn = (np.sum(a ** s) * dv) ** (1 / s)
    peak = a.max()

    def search(sc, ce, amps):
        best = (np.inf, None)
        for lam in sc:
            for c0 in ce:
                G = np.exp(-lam * (x - c0) ** 2)
                for A in amps:
                    r = (np.sum(np.abs(a - A * G) ** s) * dv) ** (1 / s) / fn
                    if r < best[0]:
                        best = (r, (lam, c0, A))
        return best

    amps = np.linspace(0.5, 1.5, amp_steps) * peak
    r, (lam, c0, A) = search(scales, centers, amps)
    ds = np.diff(np.log(scales)).max() if scales.size > 1 else 0.1
    dc = np.diff(centers).max() if centers.size > 1 else f.grid.spacing[0]
    da = amps[1] - amps[0]
    fine_s = lam * np.exp(np.linspace(-ds, ds, 21))
    fine_c = c0 + np.linspace(-dc, dc, 21)
    fine_a = A + np.linspace(-da, da, 21)
    r2, (lam, c0, A) = search(fine_s, fine_c, fine_a)
    return lam, c0, A, min(r, r2)

"""Distribution functions, superlevel sets, symmetric decreasing rearrangement,
layer-cake reconstruction and the Riesz-Sobolev comparison."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GridMismatch, NegativeInput, UnsortedThresholds
from .grid import Grid, SampledFunction, lp_norm, trilinear_form


@dataclass(frozen=True)
class LevelSet:
    threshold: float
    mask: np.ndarray
    grid: Grid

    @property
    def count(self):
        return int(np.count_nonzero(self.mask))

    @property
    def measure(self):
        return self.count * self.grid.cell_volume

    def indicator(self):
        return SampledFunction(self.grid, self.mask.astype(float))

    def rle_lines(self):
        """Runs of the flattened mask as ``t,start_index,end_index`` (end inclusive)."""
        flat = np.asarray(self.mask, dtype=np.int8).ravel()
        edges = np.diff(np.concatenate([[0], flat, [0]]))
        starts = np.flatnonzero(edges == 1)
        ends = np.flatnonzero(edges == -1) - 1
        return [f"{self.threshold!r},{s},{e}" for s, e in zip(starts, ends)]


def level_set_from_mask(mask, grid, threshold=0.0):
    mask = np.asarray(mask, dtype=bool).reshape(grid.shape)
    return LevelSet(float(threshold), mask, grid)


def write_level_sets(path, sets):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("t,start_index,end_index\n")
        for s in sets:
            for line in s.rle_lines():
                fh.write(line + "\n")


def _check_t(t):
    if not t > 0:
        raise DomainError(f"threshold must be positive, got {t!r}")


def superlevel_set(f: SampledFunction, t) -> LevelSet:
    _check_t(t)
    return LevelSet(float(t), np.abs(f.values) > t, f.grid)


def distribution_function(f: SampledFunction, t) -> float:
    _check_t(t)
    return int(np.count_nonzero(np.abs(f.values) > t)) * f.grid.cell_volume


def radial_order(grid: Grid) -> np.ndarray:
    """Flat indices ordered by distance to the origin, ties by flat index."""
    r2 = np.zeros(grid.shape)
    for m in grid.mesh():
        r2 = r2 + m * m
    # quantize so rounding in lo + i*h cannot split genuine ties
    scale = max(grid.spacing) ** 2
    key = np.round(r2.ravel() / scale, 9)
    return np.lexsort((np.arange(grid.size), key))


def symmetric_rearrangement(f: SampledFunction) -> SampledFunction:
    """Sort |f| descending and fill cells by increasing distance from the origin."""
    vals = np.sort(np.abs(f.values).ravel())[::-1]
    out = np.empty(f.grid.size)
    out[radial_order(f.grid)] = vals
    return SampledFunction(f.grid, out.reshape(f.grid.shape), kind="nonnegative")


# ---------------------------------------------------------------- layer cake

def layer_cake(f: SampledFunction, thresholds=None, weights=None) -> SampledFunction:
    """Reconstruct f from strict superlevel sets.

    With breakpoints 0 = b_0 < b_1 < ... < b_K = max f, layer k contributes
    (b_{k+1} - b_k) * 1{f > b_k}.  Explicit ``weights`` replace the
    breakpoint differences so that sum_k w_k 1{f > t_k} can be built directly.
    """
    v = f.values
    if np.iscomplexobj(v) or np.any(v < 0):
        raise NegativeInput("layer cake needs a nonnegative function")
    if thresholds is None:
        thresholds = np.unique(v[v > 0].ravel())[:-1]
    t = np.asarray(thresholds, dtype=float).ravel()
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise UnsortedThresholds("thresholds must be strictly increasing")
    out = np.zeros(v.shape)
    if weights is not None:
        w = np.asarray(weights, dtype=float).ravel()
        if w.size != t.size:
            raise DomainError("one weight per threshold")
        for tk, wk in zip(t, w):
            out += wk * (v > tk)
        return SampledFunction(f.grid, out)
    top = float(v.max())
    t = t[(t > 0) & (t < top)]
    brk = np.concatenate([[0.0], t, [top]])
    for lo_, hi_ in zip(brk[:-1], brk[1:]):
        out += (hi_ - lo_) * (v > lo_)
    return SampledFunction(f.grid, out)


# ---------------------------------------------------------------- Riesz-Sobolev

def _levels(v):
    """Write v >= 0 as sum_i w_i 1{v >= u_i}; return (weights, set sizes)."""
    v = np.asarray(v).ravel()
    u = np.unique(v[v > 0])[::-1]
    if u.size == 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    w = u - np.concatenate([u[1:], [0.0]])
    s = np.searchsorted(-np.sort(v)[::-1], -u, side="right")
    return w, s.astype(np.int64)


class _SortedPairing:
    """Sum_m tau_ab(m) h_(m) where tau_ab is the decreasing list of values of
    1_[a] * 1_[b] on the integers and h_(m) is h sorted decreasingly."""

    def __init__(self, hsorted, max_len):
        hs = np.zeros(max_len + 1)
        hs[: min(hsorted.size, max_len + 1)] = hsorted[: max_len + 1]
        m = np.arange(hs.size)
        self.H0 = np.concatenate([[0.0], np.cumsum(hs)])
        self.H1 = np.concatenate([[0.0], np.cumsum(m * hs)])
        self.He = np.concatenate([[0.0], np.cumsum(np.where(m % 2 == 0, hs, 0.0))])

    def __call__(self, a, b):
        a, b = np.minimum(a, b), np.maximum(a, b)
        P = b - a + 1           # plateau length, value a
        E = a + b - 1           # support length
        H0, H1, He = self.H0, self.H1, self.He
        plateau = a * H0[P]
        tail_sum = H0[E] - H0[P]
        lin = (H1[E] - H1[P]) - P * tail_sum
        even = He[E] - He[P]
        odd = tail_sum - even
        off_parity = np.where(P % 2 == 0, odd, even)
        # tail values a-1, a-1, a-2, a-2, ..., 1, 1
        return plateau + (a - 1) * tail_sum - 0.5 * (lin - off_parity)


def rearranged_functional(f, g, h, method="lattice"):
    """<f* * g*, h*>.

    ``lattice`` (1-D only) evaluates the exact lattice upper envelope: each
    pair of level sets of f and g is paired with h through the decreasing
    profile of two centered intervals, which dominates every placement of
    sets of the same sizes.  ``direct`` rearranges each function and
    evaluates the grid functional.
    """
    for x in (f, g, h):
        if x.is_complex or np.any(x.values < 0):
            raise NegativeInput("Riesz-Sobolev comparison needs nonnegative functions")
    if not (f.grid == g.grid == h.grid):
        raise GridMismatch("functions live on different grids")
    grid = f.grid
    if method == "direct" or grid.d > 1:
        if method == "lattice":
            raise DomainError("lattice envelope is one-dimensional; use method='direct'")
        fs, gs, hs = (symmetric_rearrangement(x) for x in (f, g, h))
        return trilinear_form(fs, gs, hs, check=False)
    if method != "lattice":
        raise DomainError(f"unknown method {method!r}")
    wf, sf = _levels(f.values)
    wg, sg = _levels(g.values)
    if wf.size == 0 or wg.size == 0:
        return 0.0
    hsorted = np.sort(h.values.ravel())[::-1]
    pair = _SortedPairing(hsorted, int(sf.max() + sg.max()))
    total = 0.0
    chunk = max(1, 2_000_000 // max(1, sg.size))
    for i in range(0, sf.size, chunk):
        q = pair(sf[i:i + chunk, None], sg[None, :])
        total += float(np.sum(wf[i:i + chunk, None] * wg[None, :] * q))
    return total * grid.cell_volume ** 2


def riesz_sobolev_gap(f, g, h, method="lattice") -> float:
    """<f* * g*, h*> - <f*g, h>; nonnegative up to rounding."""
    rhs = rearranged_functional(f, g, h, method=method)
    lhs = trilinear_form(f, g, h, check=False)
    return float(rhs - lhs)


def gap_scale(f, g, h):
    """Natural size of the functional, for relative tolerances."""
    return lp_norm(f, 1) * lp_norm(g, 1) * float(np.abs(h.values).max())


# ---------------------------------------------------------------- superlevel comparison

@dataclass(frozen=True)
class SuperlevelComparison:
    thresholds: np.ndarray
    measure_f: np.ndarray
    measure_ref: np.ndarray
    difference: np.ndarray
    bound: np.ndarray
    distance: float
    eta: float
    constant: float

    @property
    def ok(self):
        return bool(np.all(self.difference <= self.constant * self.bound + 1e-12))


def superlevel_comparison(f: SampledFunction, ref: SampledFunction, p, thresholds,
                          constant=1.0) -> SuperlevelComparison:
    """Compare |{f* > s}| with |{ref > s}| against the Chebyshev bound.

    With delta = ||f* - ref||_p and eta = delta^{p/(p+1)}:
    ||F_s| - |R_s|| <= eta^{-p} delta^p + max(|R_{s-eta}| - |R_s|, |R_s| - |R_{s+eta}|).
    """
    fs = symmetric_rearrangement(f)
    rv = np.abs(ref.values)
    delta = lp_norm(fs.with_values(fs.values - rv), p)
    eta = delta ** (p / (p + 1.0)) if delta > 0 else 0.0
    s = np.asarray(thresholds, dtype=float)
    cv = f.grid.cell_volume

    def meas(vals, t):
        return np.array([np.count_nonzero(vals > tt) for tt in t]) * cv

    mf, mr = meas(fs.values, s), meas(rv, s)
    cheb = (delta ** p / eta ** p) if eta > 0 else 0.0
    spread = np.maximum(meas(rv, s - eta) - mr, mr - meas(rv, s + eta))
    return SuperlevelComparison(s, mf, mr, np.abs(mf - mr), cheb + spread, delta, eta,
                                float(constant))

"""Dyadic level profiles, eta-normalization tests and L^p-isometric rescaling."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (DomainError, EmptySet, GridMismatch, GridResolutionLoss, NotUnitNorm,
                     ZeroFunction)
from .grid import SampledFunction, convolve, lp_norm


@dataclass(frozen=True)
class DyadicProfile:
    levels: np.ndarray    # j
    measures: np.ndarray  # |F_j|
    masses: np.ndarray    # 2^j |F_j|^{1/p}
    peak: int
    p: float

    def envelope(self):
        """(sum 2^{jp}|F_j|, sum 2^{(j+1)p}|F_j|), which bracket ||f||_p^p."""
        lo = float(np.sum(np.exp2(self.levels * self.p) * self.measures))
        return lo, lo * 2.0 ** self.p

    def rows(self):
        return [(int(j), float(m), float(w)) for j, m, w in
                zip(self.levels, self.measures, self.masses)]


def dyadic_profile(f: SampledFunction, p) -> DyadicProfile:
    a = np.abs(f.values).ravel()
    a = a[a > 0]
    if a.size == 0:
        raise ZeroFunction("dyadic profile of the zero function")
    # frexp: a = m 2^e with m in [0.5, 1), so 2^{e-1} <= a < 2^e
    _, e = np.frexp(a)
    j = e.astype(np.int64) - 1
    levels, counts = np.unique(j, return_counts=True)
    measures = counts * f.grid.cell_volume
    masses = np.exp2(levels.astype(float)) * measures ** (1.0 / p)
    peak = int(levels[int(np.argmax(masses))])  # argmax picks the first, i.e. smallest j
    return DyadicProfile(levels, measures, masses, peak, float(p))


def write_profile_csv(path, prof: DyadicProfile):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("j,measure,mass\n")
        for j, m, w in prof.rows():
            fh.write(f"{j},{m:.12g},{w:.12g}\n")


def peak_spread(f, g, h, triple):
    """|k - k'| + |k - k''| for the three dyadic peaks."""
    k = dyadic_profile(f, triple.p).peak
    k1 = dyadic_profile(g, triple.q).peak
    k2 = dyadic_profile(h, triple.r).peak
    return (k, k1, k2), abs(k - k1) + abs(k - k2)


# ---------------------------------------------------------------- eta-normalization

@dataclass(frozen=True)
class NormalizationProfile:
    theta: Callable[[float], float]
    R: Callable[[float], float]
    eta: float


def default_profile(s, eta) -> NormalizationProfile:
    return NormalizationProfile(lambda rho: min(1.0, 4.0 * rho ** (-s / 2.0)),
                                lambda e: 1.0 / e, float(eta))


@dataclass(frozen=True)
class NormalizationReport:
    rho: np.ndarray
    high_tail: np.ndarray
    low_tail: np.ndarray
    theta: np.ndarray
    high_ok: np.ndarray
    low_ok: np.ndarray

    @property
    def passed(self):
        return bool(np.all(self.high_ok) and np.all(self.low_ok))


def check_normalized(f: SampledFunction, p, prof: NormalizationProfile, n_rho=16,
                     unit_tol=1e-9) -> NormalizationReport:
    nrm = lp_norm(f, p)
    if abs(nrm - 1.0) > unit_tol:
        raise NotUnitNorm(f"||f||_p = {nrm!r}, expected 1")
    rmax = prof.R(prof.eta)
    if not rmax >= 1:
        raise DomainError("R(eta) must be at least 1")
    rho = np.geomspace(1.0, rmax, n_rho)
    a = np.abs(f.values).ravel()
    w = a ** p * f.grid.cell_volume
    order = np.argsort(a)
    a_sorted, cw = a[order], np.concatenate([[0.0], np.cumsum(w[order])])
    total = cw[-1]
    # mass above rho: strict; mass below 1/rho: strict
    hi = total - cw[np.searchsorted(a_sorted, rho, side="right")]
    lo = cw[np.searchsorted(a_sorted, 1.0 / rho, side="left")]
    th = np.array([prof.theta(r) for r in rho])
    # the total mass is 1 only up to unit_tol
    slack = unit_tol * p
    return NormalizationReport(rho, hi, lo, th, hi <= th + slack, lo <= th + slack)


# ---------------------------------------------------------------- rescaling

def _rescale_grid(f: SampledFunction, lam, s):
    d = f.grid.d
    return SampledFunction(f.grid.scaled(1.0 / lam), f.values * lam ** (d / s))


def _rescale_resample(f: SampledFunction, lam, s):
    """Evaluate lam^{d/s} f(lam x) on the original grid with linear interpolation."""
    from scipy.interpolate import RegularGridInterpolator

    grid = f.grid
    axes = [grid.axis(k) for k in range(grid.d)]
    pts = grid.points() * lam
    vals = f.values
    interp = RegularGridInterpolator(axes, vals, bounds_error=False, fill_value=0.0)
    out = interp(pts).reshape(grid.shape) * lam ** (grid.d / s)
    return SampledFunction(grid, out)


def rescale(f: SampledFunction, lam, s, mode="grid"):
    """lam^{d/s} f(lam x); an L^s isometry."""
    if not lam > 0:
        raise DomainError("scale must be positive")
    if mode == "grid":
        return _rescale_grid(f, lam, s)
    if mode == "resample":
        return _rescale_resample(f, lam, s)
    raise DomainError(f"unknown rescale mode {mode!r}")


def rescale_to_normalized(f, g, h, triple, mode="grid"):
    """Choose lam so the dyadic peak of f sits at level 0 and rescale all three.

    Amplitudes scale by lam^{d/p}, so lam = 2^{-k p / d} moves level k to 0.
    In ``grid`` mode the box is divided by lam and the samples are multiplied,
    which is exact; ``resample`` keeps the grid and interpolates.
    """
    if not (f.grid == g.grid == h.grid):
        raise GridMismatch("functions live on different grids")
    for x in (f, g, h):
        if not np.any(x.values):
            raise ZeroFunction("cannot rescale the zero function")
    d = f.grid.d
    k = dyadic_profile(f, triple.p).peak
    lam = 2.0 ** (-k * triple.p / d)
    out = tuple(rescale(x, lam, s, mode) for x, s in zip((f, g, h), triple.as_tuple()))
    if mode == "resample" and lam > 1:
        # features shrink by lam against a fixed grid
        width = _weighted_width(f)
        if width / lam < 4 * max(f.grid.spacing):
            warnings.warn("rescaling pushes features below 4 cells", GridResolutionLoss,
                          stacklevel=2)
    return lam, out


def _weighted_width(f):
    w = np.abs(f.values) ** 2
    w = w / w.sum()
    var = 0.0
    for m in f.grid.mesh():
        mu = np.sum(w * m)
        var += np.sum(w * (m - mu) ** 2)
    return math.sqrt(var)


# ---------------------------------------------------------------- measure-ratio bound

@dataclass(frozen=True)
class MeasureRatioReport:
    norm: float           # ||1_E * 1_E'||_{r'}
    bound: float
    ratio: float          # norm / bound
    measure_e: float
    measure_e2: float
    C: float
    gamma: float


def measure_ratio_bound_check(E, E2, triple, C=1.0, gamma=None) -> MeasureRatioReport:
    """Evaluate ||1_E * 1_E'||_{r'} against C min(|E|/|E'|, |E'|/|E|)^gamma |E|^{1/p}|E'|^{1/q}."""
    if E.count == 0 or E2.count == 0:
        raise EmptySet("measure ratio check needs two nonempty sets")
    if E.grid != E2.grid:
        raise GridMismatch("sets live on different grids")
    if gamma is None:
        gamma = min(1.0 / triple.p_conj, 1.0 / triple.q_conj)
    conv = convolve(E.indicator(), E2.indicator(), check=False)
    nrm = lp_norm(conv, triple.r_conj)
    a, b = E.measure, E2.measure
    bound = C * min(a / b, b / a) ** gamma * a ** (1 / triple.p) * b ** (1 / triple.q)
    return MeasureRatioReport(nrm, bound, nrm / bound, a, b, float(C), float(gamma))


def interval_convolution_norm(a, b, s):
    """||1_[0,a] * 1_[0,b]||_s for intervals (closed form, a <= b swapped as needed)."""
    a, b = min(a, b), max(a, b)
    return (2.0 * a ** (s + 1) / (s + 1) + a ** s * (b - a)) ** (1.0 / s)


def interval_ratio_sweep(triple, exps=range(-8, 9)):
    """Worst ratio of the interval norm to min(ratio)^gamma |E|^{1/p}|E'|^{1/q} over
    length ratios 2^e, for the default gamma.  Returns (gamma, ratios, worst)."""
    gamma = min(1.0 / triple.p_conj, 1.0 / triple.q_conj)
    ratios = []
    for e in exps:
        a, b = 1.0, 2.0 ** e
        n = interval_convolution_norm(a, b, triple.r_conj)
        base = min(a / b, b / a) ** gamma * a ** (1 / triple.p) * b ** (1 / triple.q)
        ratios.append(n / base)
    ratios = np.array(ratios)
    return gamma, ratios, float(ratios.max())

"""Slice factorization f(x, s) = F(x) f_x(s) and the dimension-induction diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GridMismatch
from .exponents import ExponentTriple, extremal_ratios, sharp_constant
from .gaussians import fit_gaussian
from .grid import Grid, SampledFunction, deficit, trilinear_form

STAGE_ERRORS = (ValueError, RuntimeError, ArithmeticError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class SliceFactorization:
    marginal: SampledFunction   # F on the first d coordinates
    slices: np.ndarray          # shape (*F.grid.shape, n_last); unit L^s norm or zero
    slice_grid: Grid            # one-dimensional grid of the last coordinate
    s: float

    def slice(self, idx):
        return SampledFunction(self.slice_grid, self.slices[tuple(np.atleast_1d(idx))])

    def reconstruct(self):
        v = self.marginal.values[..., None] * self.slices
        grid = Grid(self.marginal.grid.lo + self.slice_grid.lo,
                    self.marginal.grid.hi + self.slice_grid.hi,
                    self.marginal.grid.n + self.slice_grid.n)
        return SampledFunction(grid, v)


def _split_grid(grid: Grid):
    if grid.d < 2:
        raise DomainError("slice factorization needs at least two dimensions")
    head = Grid(grid.lo[:-1], grid.hi[:-1], grid.n[:-1])
    tail = Grid(grid.lo[-1:], grid.hi[-1:], grid.n[-1:])
    return head, tail


def slice_factorize(f: SampledFunction, s) -> SliceFactorization:
    """Marginal F(x) = ||f(x, .)||_s and slices f(x, .)/F(x); zero slices where F = 0."""
    head, tail = _split_grid(f.grid)
    a = np.abs(f.values)
    top = a.max() if a.size else 0.0
    if top == 0:
        F = np.zeros(head.shape)
    else:
        F = top * (np.sum((a / top) ** s, axis=-1) * tail.cell_volume) ** (1.0 / s)
    with np.errstate(invalid="ignore", divide="ignore"):
        sl = np.where(F[..., None] > 0, f.values / F[..., None], 0.0)
    return SliceFactorization(SampledFunction(head, F), sl, tail, float(s))


# ---------------------------------------------------------------- structure report

@dataclass(frozen=True)
class SliceFits:
    indices: np.ndarray    # (n, d) grid indices of fitted x
    points: np.ndarray     # (n, d) coordinates
    scale: np.ndarray      # alpha(x)
    center: np.ndarray     # a(x)
    residual: np.ndarray
    below_floor: int       # window cells with negligible marginal, left out
    failed: int            # window cells whose fit raised


@dataclass(frozen=True)
class SliceStructureReport:
    delta: float
    marginal_delta: float
    marginal_value: float
    marginal_bound: float      # <|f|*|g|, |h|> / A_1, which <F*G, H> must dominate
    marginal_margin: float     # <F*G, H> - marginal_bound
    omega_fraction: float      # slices with a bad fit or scale away from the median
    Omega_fraction: float      # sampled pairs with additivity residual above tolerance
    scale_spread: float        # max over f, g, h of max |alpha(x) - median alpha|
    relative_scale_spread: float
    additivity_max: float
    additivity_median: float
    center_affine_residual: float   # max LS residual of a(x), b(y), c(w) against affine maps
    center_slopes: tuple
    ratio_sigma: float         # median alpha_g / median alpha_f
    ratio_tau: float           # median alpha_h / median alpha_f
    ratio_deviation: float     # max |ratio - extremal ratio|
    pairs_unmatched: int       # sampled pairs whose x+y slice was not fitted
    fits: tuple = ()
    checks: dict = field(default_factory=dict)

    def rows(self):
        """Per-slice table: function, x..., alpha, center, residual."""
        out = []
        for name, ft in zip("fgh", self.fits):
            for p, al, c, r in zip(ft.points, ft.scale, ft.center, ft.residual):
                out.append((name, *p.tolist(), float(al), float(c), float(r)))
        return out


def _window(F: SampledFunction, center_idx, radius):
    head = F.grid
    h = np.array(head.spacing)
    axes = [np.arange(k) for k in head.shape]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, head.d)
    dist2 = np.sum(((mesh - center_idx) * h) ** 2, axis=1)
    return mesh[dist2 <= radius ** 2]


def _fit_slices(fac: SliceFactorization, idx, floor):
    F = fac.marginal.values
    top = F.max()
    keep, sc, ce, rs = [], [], [], []
    low = failed = 0
    for k in idx:
        if F[tuple(k)] < floor * top:
            low += 1
            continue
        try:
            ft = fit_gaussian(fac.slice(k), fac.s)
        except STAGE_ERRORS:
            failed += 1
            continue
        keep.append(k)
        sc.append(ft.scale)
        ce.append(float(ft.center[0]))
        rs.append(ft.residual)
    keep = np.array(keep, dtype=np.int64).reshape(-1, fac.marginal.grid.d)
    head = fac.marginal.grid
    pts = np.array(head.lo) + keep * np.array(head.spacing)
    return SliceFits(keep, pts, np.array(sc), np.array(ce), np.array(rs), low, failed)


def _affine_residual(pts, vals):
    if len(vals) < pts.shape[1] + 1:
        return float("nan"), np.full(pts.shape[1], np.nan)
    X = np.hstack([pts, np.ones((len(pts), 1))])
    coef, *_ = np.linalg.lstsq(X, vals, rcond=None)
    return float(np.max(np.abs(X @ coef - vals))), coef[:-1]


def slice_structure_report(f, g, h, triple: ExponentTriple, R, scale_tol=0.05,
                           residual_tol=0.05, additivity_tol=0.05, floor=1e-6,
                           n_pairs=20_000, seed=0) -> SliceStructureReport:
    """Per-slice Gaussian structure of a near-extremizing triple on R^{d+1}.

    Slices of f are fitted for x within R of the marginal's fitted center, g
    likewise, and h within 2R of the sum of the two centers.
    """
    if not (f.grid == g.grid == h.grid):
        raise GridMismatch("functions live on different grids")
    exps = triple.as_tuple()
    delta = deficit(f, g, h, triple).delta
    facs = [slice_factorize(x, s) for x, s in zip((f, g, h), exps)]
    Fs = [fc.marginal for fc in facs]
    head = Fs[0].grid
    # marginal chain: <|f|*|g|,|h|> <= A_1 <F*G, H> by Young on each slice
    full = trilinear_form(f.abs(), g.abs(), h.abs(), check=False)
    mval = trilinear_form(*Fs, check=False)
    a1 = sharp_constant(triple, 1).a
    mbound = full / a1
    mdelta = deficit(*Fs, triple, check=False).delta

    hh = np.array(head.spacing)
    lo = np.array(head.lo)
    centers = []
    for Fm, s in zip(Fs[:2], exps[:2]):
        c = fit_gaussian(Fm, s).center
        centers.append(np.round((c - lo) / hh).astype(np.int64))
    o = np.array(head.origin_index())
    kh = centers[0] + centers[1] - o
    idx = [_window(Fs[0], centers[0], R), _window(Fs[1], centers[1], R),
           _window(Fs[2], kh, 2 * R)]
    fits = tuple(_fit_slices(fc, ix, floor) for fc, ix in zip(facs, idx))

    spreads, rel_spreads, omega_bad, omega_tot = [], [], 0, 0
    medians = []
    for ft, ix in zip(fits, idx):
        if len(ft.scale) == 0:
            raise DomainError("no slice in the window could be fitted")
        med = float(np.median(ft.scale))
        medians.append(med)
        dev = np.abs(ft.scale - med)
        spreads.append(float(dev.max()))
        rel_spreads.append(float(dev.max() / med))
        bad = (dev > scale_tol * med) | (ft.residual > residual_tol)
        omega_bad += int(bad.sum()) + ft.failed
        omega_tot += len(ft.scale) + ft.failed

    aff = [_affine_residual(ft.points, ft.center) for ft in fits]

    # additivity |c(x+y) - a(x) - b(y)| on sampled pairs of fitted slices
    maps = []
    for ft in fits:
        maps.append({tuple(k): c for k, c in zip(ft.indices.tolist(), ft.center)})
    rng = np.random.default_rng(seed)
    na, nb = len(fits[0].center), len(fits[1].center)
    if na * nb <= n_pairs:
        ia, ib = np.meshgrid(np.arange(na), np.arange(nb), indexing="ij")
        ia, ib = ia.ravel(), ib.ravel()
    else:
        ia = rng.integers(0, na, n_pairs)
        ib = rng.integers(0, nb, n_pairs)
    res = []
    missing = 0
    for i, j in zip(ia, ib):
        kx, ky = fits[0].indices[i], fits[1].indices[j]
        key = tuple((kx + ky - o).tolist())
        c = maps[2].get(key)
        if c is None:
            missing += 1
            continue
        res.append(abs(c - fits[0].center[i] - fits[1].center[j]))
    res = np.array(res) if res else np.array([np.nan])
    Omega = float(np.mean(res > additivity_tol))

    ratios = extremal_ratios(triple)
    rs_, rt_ = medians[1] / medians[0], medians[2] / medians[0]
    ratio_dev = max(abs(rs_ - ratios.sigma), abs(rt_ - ratios.tau))
    add_max = float(np.nanmax(res))
    checks = {
        "scales_constant": max(rel_spreads) <= scale_tol,
        "centers_additive": add_max <= additivity_tol,
        "scale_ratios": ratio_dev <= scale_tol * max(ratios.sigma, ratios.tau),
        "marginal_bound": mval >= mbound - 1e-8 * max(abs(mbound), 1.0),
    }
    return SliceStructureReport(
        delta=delta, marginal_delta=mdelta, marginal_value=float(mval),
        marginal_bound=float(mbound), marginal_margin=float(mval - mbound),
        omega_fraction=omega_bad / max(omega_tot, 1), Omega_fraction=Omega,
        scale_spread=max(spreads), relative_scale_spread=max(rel_spreads),
        additivity_max=add_max, additivity_median=float(np.nanmedian(res)),
        center_affine_residual=float(max(a[0] for a in aff)),
        center_slopes=tuple(tuple(float(v) for v in a[1]) for a in aff),
        ratio_sigma=float(rs_), ratio_tau=float(rt_), ratio_deviation=float(ratio_dev),
        pairs_unmatched=missing,
        fits=fits, checks=checks)

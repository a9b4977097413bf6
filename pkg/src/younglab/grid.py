"""Uniform grids, sampled functions, norms, convolution and the trilinear functional."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import (BoundaryMassWarning, DomainError, GridMismatch, NonFinite,
                     ZeroFunction)
from .exponents import ExponentTriple, sharp_constant

BOUNDARY_DECAY = 1e-12
KINDS = ("nonnegative", "real", "complex")


@dataclass(frozen=True)
class Grid:
    """Box [lo, hi) in R^d with n samples per axis at x_i = lo + i*h."""

    lo: tuple
    hi: tuple
    n: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        if not (len(lo) == len(hi) == len(n)) or len(n) == 0:
            raise DomainError("lo, hi, n must have the same positive length")
        if any(k < 2 for k in n):
            raise DomainError("need at least 2 samples per axis")
        if any(not (b > a) for a, b in zip(lo, hi)):
            raise DomainError("need hi > lo componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", n)

    @classmethod
    def cube(cls, lo, hi, n, d=1):
        return cls((lo,) * d, (hi,) * d, (n,) * d)

    @property
    def d(self):
        return len(self.n)

    @property
    def shape(self):
        return self.n

    @property
    def size(self):
        return int(np.prod(self.n))

    @property
    def spacing(self):
        return tuple((b - a) / k for a, b, k in zip(self.lo, self.hi, self.n))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def axis(self, k):
        return self.lo[k] + np.arange(self.n[k]) * self.spacing[k]

    def mesh(self):
        return np.meshgrid(*[self.axis(k) for k in range(self.d)], indexing="ij")

    def points(self):
        """(size, d) array of sample points in C order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=1)

    def origin_index(self, strict=True):
        """Integer index of x = 0 per axis, or None if the origin is not a sample point."""
        out = []
        for a, h in zip(self.lo, self.spacing):
            o = -a / h
            k = int(round(o))
            if abs(o - k) > 1e-9 * max(1.0, abs(o)):
                if strict:
                    raise GridMismatch("grid is not origin-aligned (-lo/h must be an integer)")
                return None
            out.append(k)
        return tuple(out)

    def scaled(self, factor):
        """Grid with every coordinate multiplied by ``factor``."""
        return Grid(tuple(a * factor for a in self.lo), tuple(b * factor for b in self.hi), self.n)

    def header(self):
        parts = [str(self.d)] + [repr(v) for v in self.lo] + [repr(v) for v in self.hi]
        parts += [str(k) for k in self.n]
        return "# grid " + " ".join(parts)


def infer_kind(values):
    v = np.asarray(values)
    if np.iscomplexobj(v) and np.any(v.imag != 0):
        return "complex"
    re = v.real if np.iscomplexobj(v) else v
    return "nonnegative" if np.all(re >= 0) else "real"


@dataclass(frozen=True)
class SampledFunction:
    grid: Grid
    values: np.ndarray
    kind: str = ""
    flags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.size != self.grid.size:
            raise GridMismatch(f"{v.size} samples for a grid of {self.grid.size} points")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise NonFinite("sampled function contains NaN or infinity")
        if np.iscomplexobj(v):
            if np.all(v.imag == 0):
                v = v.real.astype(float)
            else:
                v = v.astype(complex)
        else:
            v = v.astype(float)
        v = np.array(v, copy=True)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        kind = infer_kind(v)
        if self.kind:
            if self.kind not in KINDS:
                raise DomainError(f"unknown kind {self.kind!r}")
            # a declared kind may be wider than the inferred one, never narrower
            if KINDS.index(self.kind) < KINDS.index(kind):
                raise DomainError(f"samples are {kind}, declared {self.kind}")
            kind = self.kind
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "flags", frozenset(self.flags))

    @classmethod
    def from_callable(cls, grid, func):
        pts = grid.mesh()
        return cls(grid, func(*pts))

    def with_values(self, values, flags=None):
        return SampledFunction(self.grid, values, flags=self.flags if flags is None else flags)

    @property
    def is_complex(self):
        return self.kind == "complex"

    def abs(self):
        return SampledFunction(self.grid, np.abs(self.values))

    def scale(self, c):
        return self.with_values(self.values * c)

    def sup(self):
        return float(np.max(np.abs(self.values)))


def lp_norm(f: SampledFunction, s) -> float:
    s = float(s)
    if not s >= 1:
        raise DomainError(f"norm exponent must be >= 1, got {s!r}")
    a = np.abs(f.values)
    if math.isinf(s):
        return float(a.max())
    m = a.max()
    if m == 0:
        return 0.0
    # scale by the max to avoid overflow and underflow
    return float(m * (np.sum((a / m) ** s) * f.grid.cell_volume) ** (1.0 / s))


def _same_grid(*fs):
    g = fs[0].grid
    for f in fs[1:]:
        if f.grid != g:
            raise GridMismatch("functions live on different grids")
    return g


def boundary_ratio(f: SampledFunction) -> float:
    """max |f| on the box faces divided by max |f|."""
    a = np.abs(f.values)
    m = a.max()
    if m == 0:
        return 0.0
    b = 0.0
    for ax in range(a.ndim):
        b = max(b, np.take(a, 0, axis=ax).max(), np.take(a, -1, axis=ax).max())
    return float(b / m)


def check_boundary(*fs, warn=True):
    bad = any(boundary_ratio(f) > BOUNDARY_DECAY for f in fs)
    if bad and warn:
        warnings.warn("samples do not decay at the box boundary", BoundaryMassWarning,
                      stacklevel=3)
    return bad


def convolve(f: SampledFunction, g: SampledFunction, check=True) -> SampledFunction:
    """(f*g)(x_m) = sum_j f(x_m - y_j) g(y_j) * cell_volume on the shared grid."""
    grid = _same_grid(f, g)
    o = grid.origin_index()
    flagged = check and check_boundary(f, g)
    full = fftconvolve(f.values, g.values, mode="full")
    sl = tuple(slice(k, k + m) for k, m in zip(o, grid.shape))
    vals = full[sl] * grid.cell_volume
    if not (f.is_complex or g.is_complex):
        vals = vals.real if np.iscomplexobj(vals) else vals
    flags = {"boundary_mass"} if flagged else set()
    return SampledFunction(grid, vals, flags=flags)


def trilinear_form(f, g, h, check=True):
    """<f*g, h> = sum (f*g)_i h_i * cell_volume, with no conjugation."""
    grid = _same_grid(f, g, h)
    if check:
        check_boundary(h)
    conv = convolve(f, g, check=check)
    val = np.sum(conv.values * h.values) * grid.cell_volume
    if np.iscomplexobj(val):
        return complex(val)
    return float(val)


@dataclass(frozen=True)
class Deficit:
    value: complex
    bound: float
    delta: float
    flags: frozenset = frozenset()


def deficit(f, g, h, triple: ExponentTriple, check=True) -> Deficit:
    grid = _same_grid(f, g, h)
    norms = (lp_norm(f, triple.p), lp_norm(g, triple.q), lp_norm(h, triple.r))
    if min(norms) == 0:
        raise ZeroFunction("deficit needs three nonzero functions")
    flags = set()
    if check and check_boundary(f, g, h):
        flags.add("boundary_mass")
    # normalize first so the value is dimensionless and scaling invariance is exact
    fn, gn, hn = (x.scale(1.0 / n) for x, n in zip((f, g, h), norms))
    value = trilinear_form(fn, gn, hn, check=False)
    bound = sharp_constant(triple, grid.d).a_pow_d
    delta = 1.0 - abs(value) / bound
    return Deficit(value, bound, float(delta), frozenset(flags))


def shift(f: SampledFunction, k) -> SampledFunction:
    """Translate by integer cell offsets k (f(x - k*h)), filling with zeros."""
    k = tuple(int(v) for v in np.atleast_1d(k))
    if len(k) != f.grid.d:
        raise DomainError("shift needs one offset per axis")
    src = f.values
    out = np.zeros_like(src)
    dst_sl, src_sl = [], []
    for kk, m in zip(k, f.grid.shape):
        if abs(kk) >= m:
            return f.with_values(out)
        if kk >= 0:
            dst_sl.append(slice(kk, m))
            src_sl.append(slice(0, m - kk))
        else:
            dst_sl.append(slice(0, m + kk))
            src_sl.append(slice(-kk, m))
    out[tuple(dst_sl)] = src[tuple(src_sl)]
    return f.with_values(out)


# ---------------------------------------------------------------- function files

def write_function_csv(path, f: SampledFunction):
    flat = f.values.ravel()
    re = flat.real if np.iscomplexobj(flat) else flat
    im = flat.imag if np.iscomplexobj(flat) else np.zeros_like(flat)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f.grid.header() + "\n")
        for i in range(flat.size):
            fh.write(f"{i},{re[i]:.17g},{im[i]:.17g}\n")


def parse_grid_header(line):
    parts = line.strip().split()
    if len(parts) < 3 or parts[0] != "#" or parts[1] != "grid":
        raise GridMismatch("missing '# grid d lo... hi... n...' header")
    try:
        d = int(parts[2])
        nums = parts[3:]
        if len(nums) != 3 * d:
            raise ValueError
        lo = [float(v) for v in nums[:d]]
        hi = [float(v) for v in nums[d:2 * d]]
        n = [int(v) for v in nums[2 * d:]]
    except ValueError:
        raise GridMismatch(f"bad grid header: {line.strip()!r}") from None
    return Grid(tuple(lo), tuple(hi), tuple(n))


def read_function_csv(path) -> SampledFunction:
    with open(path, encoding="ascii") as fh:
        header = fh.readline()
        grid = parse_grid_header(header)
        vals = np.full(grid.size, np.nan, dtype=complex)
        seen = np.zeros(grid.size, dtype=bool)
        count = 0
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise GridMismatch(f"line {lineno}: expected index,re,im")
            try:
                i = int(parts[0])
                v = complex(float(parts[1]), float(parts[2]))
            except ValueError:
                raise GridMismatch(f"line {lineno}: unparsable row") from None
            if not 0 <= i < grid.size or seen[i]:
                raise GridMismatch(f"line {lineno}: index {i} out of range or repeated")
            seen[i] = True
            vals[i] = v
            count += 1
    if count != grid.size:
        raise GridMismatch(f"{count} rows for a grid of {grid.size} points")
    return SampledFunction(grid, vals.reshape(grid.shape))

"""Gaussian extremizer triples, their evaluation on grids, and Gaussian fitting."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DegenerateSecondMoment, DomainError, GridTooCoarse, ZeroFunction
from .exponents import ExponentTriple, extremal_ratios
from .grid import Grid, SampledFunction, lp_norm

PHASE_TOL = 1e-12
COARSE_LIMIT = 0.25


def gaussian_unit_norm(Q, s):
    """||exp(-x^T Q x)||_s on R^d."""
    Q = np.atleast_2d(Q)
    d = Q.shape[0]
    return (math.pi ** d / (s ** d * float(np.linalg.det(Q)))) ** (1.0 / (2.0 * s))


@dataclass(frozen=True)
class GaussianTriple:
    """f = c1 exp(-lam |M(x-a1)|^2 + i v.x), g = c2 exp(-sigma lam |M(x-a2)|^2 + i v.x),
    h = c3 exp(-tau lam |M(x-a3)|^2 - i v.x).

    With the unconjugated pairing the phases cancel in <f*g, h>, so the
    triple is an extremizer when (sigma, tau) are the extremal ratios,
    a3 = a1 + a2 and c1 c2 c3 > 0.
    """

    lam: float
    sigma: float
    tau_scale: float
    a1: tuple
    a2: tuple
    a3: tuple
    c1: complex = 1.0
    c2: complex = 1.0
    c3: complex = 1.0
    M: tuple | None = None
    freq: tuple | None = None
    validate: bool = True

    def __post_init__(self):
        a1, a2, a3 = (tuple(float(v) for v in np.atleast_1d(a)) for a in (self.a1, self.a2, self.a3))
        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "a2", a2)
        object.__setattr__(self, "a3", a3)
        d = len(a1)
        if self.M is not None:
            M = np.asarray(self.M, dtype=float).reshape(d, d)
            if abs(np.linalg.det(M)) < 1e-14:
                raise DomainError("the linear map must be invertible")
            object.__setattr__(self, "M", tuple(map(tuple, M)))
        if self.freq is not None:
            object.__setattr__(self, "freq", tuple(float(v) for v in np.atleast_1d(self.freq)))
        for c in ("c1", "c2", "c3"):
            object.__setattr__(self, c, complex(getattr(self, c)))
        if not (len(a2) == len(a3) == d):
            raise DomainError("centers must share a dimension")
        if not (self.lam > 0 and self.sigma > 0 and self.tau_scale > 0):
            raise DomainError("scales must be positive")
        if self.validate:
            problems = self.violations()
            if problems:
                raise DomainError("not a valid extremizer parametrization: " + "; ".join(problems))

    @property
    def d(self):
        return len(self.a1)

    def violations(self):
        out = []
        e = np.array(self.a1) + np.array(self.a2) - np.array(self.a3)
        if np.max(np.abs(e)) > 1e-12:
            out.append("a3 != a1 + a2")
        prod = self.c1 * self.c2 * self.c3
        if prod == 0 or abs(math.atan2(prod.imag, prod.real)) > PHASE_TOL:
            out.append("c1 c2 c3 is not real positive")
        return out

    def matrix(self):
        return np.eye(self.d) if self.M is None else np.array(self.M)

    def quad_forms(self):
        """Quadratic forms Q_i with f_i ~ exp(-(x-a_i)^T Q_i (x-a_i))."""
        M = self.matrix()
        base = self.lam * M.T @ M
        return base, self.sigma * base, self.tau_scale * base

    def centers(self):
        return np.array(self.a1), np.array(self.a2), np.array(self.a3)

    def amplitudes(self):
        return self.c1, self.c2, self.c3

    def frequency(self):
        return np.zeros(self.d) if self.freq is None else np.array(self.freq)

    def replace(self, **kw):
        args = {k: getattr(self, k) for k in ("lam", "sigma", "tau_scale", "a1", "a2", "a3",
                                              "c1", "c2", "c3", "M", "freq", "validate")}
        args.update(kw)
        return GaussianTriple(**args)

    @classmethod
    def extremal(cls, triple: ExponentTriple, d=1, lam=1.0, a1=None, a2=None, M=None,
                 freq=None, phases=(0.0, 0.0), normalize=True, **kw):
        """Extremizer with the extremal ratios of ``triple``; unit norms by default."""
        r = extremal_ratios(triple)
        a1 = np.zeros(d) if a1 is None else np.asarray(a1, float)
        a2 = np.zeros(d) if a2 is None else np.asarray(a2, float)
        t = cls(lam, r.sigma, r.tau, tuple(a1), tuple(a2), tuple(a1 + a2), M=M, freq=freq,
                **kw)
        if normalize:
            Qs = t.quad_forms()
            c = [1.0 / gaussian_unit_norm(Q, s) for Q, s in zip(Qs, triple.as_tuple())]
        else:
            c = [1.0, 1.0, 1.0]
        ph1, ph2 = phases
        return t.replace(c1=c[0] * np.exp(1j * ph1), c2=c[1] * np.exp(1j * ph2),
                         c3=c[2] * np.exp(-1j * (ph1 + ph2)))


def gaussian_values(grid: Grid, Q, center, amplitude=1.0, freq=None, sign=1.0):
    pts = grid.mesh()
    diff = [p - c for p, c in zip(pts, center)]
    Q = np.atleast_2d(Q)
    quad = np.zeros(grid.shape)
    for i in range(grid.d):
        for j in range(grid.d):
            if Q[i, j] != 0:
                quad = quad + Q[i, j] * diff[i] * diff[j]
    vals = amplitude * np.exp(-quad)
    if freq is not None and np.any(np.asarray(freq) != 0):
        phase = sum(v * p for v, p in zip(freq, pts))
        vals = vals * np.exp(1j * sign * phase)
    return vals


def evaluate_extremizer(t: GaussianTriple, grid: Grid, check=True):
    if grid.d != t.d:
        raise DomainError("grid and triple dimensions differ")
    h2 = max(grid.spacing) ** 2
    Qs = t.quad_forms()
    if check:
        worst = max(float(np.max(np.linalg.eigvalsh(Q))) for Q in Qs) * h2
        if worst > COARSE_LIMIT:
            raise GridTooCoarse(f"scale * cell^2 = {worst:.3g} exceeds {COARSE_LIMIT}")
    v = t.frequency()
    signs = (1.0, 1.0, -1.0)
    out = []
    for Q, a, c, sg in zip(Qs, t.centers(), t.amplitudes(), signs):
        out.append(SampledFunction(grid, gaussian_values(grid, Q, a, c, v, sg)))
    return tuple(out)


# ---------------------------------------------------------------- fitting

@dataclass(frozen=True)
class GaussianFit:
    quad: np.ndarray      # Q, so the model is amplitude * exp(-(x-c)^T Q (x-c))
    center: np.ndarray
    amplitude: float
    residual: float       # || |f| - model ||_s / ||f||_s

    @property
    def scale(self):
        """Scalar scale for one-dimensional fits."""
        return float(self.quad[0, 0]) if self.quad.shape == (1, 1) else float(
            np.exp(np.mean(np.log(np.linalg.eigvalsh(self.quad)))))

    def values(self, grid):
        return gaussian_values(grid, self.quad, self.center, self.amplitude)


def _weighted_moments(grid, w):
    pts = grid.mesh()
    tot = w.sum()
    mu = np.array([np.sum(w * p) / tot for p in pts])
    d = grid.d
    cov = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            cov[i, j] = cov[j, i] = np.sum(w * (pts[i] - mu[i]) * (pts[j] - mu[j])) / tot
    return mu, cov


def _pack(Q, c, amp, full):
    d = Q.shape[0]
    if full:
        L = np.linalg.cholesky(Q)
        il = np.tril_indices(d, -1)
        return np.concatenate([np.log(np.diag(L)), L[il], c, [math.log(amp)]])
    return np.concatenate([np.log(np.diag(Q)), c, [math.log(amp)]])


def _unpack(theta, d, full):
    if full:
        k = d * (d - 1) // 2
        L = np.diag(np.exp(theta[:d]))
        L[np.tril_indices(d, -1)] = theta[d:d + k]
        Q = L @ L.T
        rest = theta[d + k:]
    else:
        Q = np.diag(np.exp(theta[:d]))
        rest = theta[d:]
    return Q, rest[:d], math.exp(rest[d])


def fit_gaussian(f: SampledFunction, s, full=False, refine=True, maxiter=None) -> GaussianFit:
    """Fit amplitude * exp(-(x-c)^T Q (x-c)) to |f| in L^s.

    Moments of |f|^s give the start: the model's |G|^s has covariance
    (2 s Q)^{-1}.  Nelder-Mead then minimizes the L^s distance; the better of
    start and refinement is kept.  Q is diagonal unless ``full``.
    """
    grid = f.grid
    a = np.abs(f.values)
    nrm = lp_norm(f, s)
    if nrm == 0:
        raise ZeroFunction("cannot fit a Gaussian to the zero function")
    w = (a / a.max()) ** s
    mu, cov = _weighted_moments(grid, w)
    h = np.array(grid.spacing)
    if np.any(np.diag(cov) <= h ** 2):
        raise DegenerateSecondMoment("weighted variance below one cell")
    if full or grid.d == 1:
        Q0 = np.linalg.inv(2.0 * s * cov)
    else:
        Q0 = np.diag(1.0 / (2.0 * s * np.diag(cov)))
    Q0 = 0.5 * (Q0 + Q0.T)
    try:
        amp0 = nrm / gaussian_unit_norm(Q0, s)
    except (ValueError, ZeroDivisionError):
        raise DegenerateSecondMoment("moment quadratic form is not positive definite") from None
    dv = grid.cell_volume
    full_param = bool(full and grid.d > 1)

    def obj(theta):
        Q, c, amp = _unpack(theta, grid.d, full_param)
        G = gaussian_values(grid, Q, c, amp)
        return np.sum(np.abs(a - G) ** s) * dv / nrm ** s

    th0 = _pack(Q0, mu, amp0, full_param)
    best_th, best_val = th0, obj(th0)
    if refine and best_val > 1e-28:
        steps = np.concatenate([np.full(len(th0) - grid.d - 1, 0.02),
                                0.02 * np.sqrt(np.diag(cov)), [0.02]]) if not full_param else None
        simplex = None
        if steps is not None:
            simplex = np.vstack([th0] + [th0 + np.eye(len(th0))[i] * steps[i]
                                         for i in range(len(th0))])
        res = optimize.minimize(obj, th0, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-18,
                                         "maxiter": maxiter or 400 * len(th0),
                                         "initial_simplex": simplex})
        if res.fun < best_val:
            best_th, best_val = res.x, res.fun
    Q, c, amp = _unpack(best_th, grid.d, full_param)
    return GaussianFit(Q, np.asarray(c), float(amp), float(max(best_val, 0.0)) ** (1.0 / s))

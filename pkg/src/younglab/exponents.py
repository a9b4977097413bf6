"""Exponent triples, sharp Young constants and Gaussian extremal shape ratios."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DomainError, OptimizationFailure, RejectedTriple

IDENTITY_TOL = 1e-12


def conjugate(s: float) -> float:
    """Hoelder conjugate s' with 1/s + 1/s' = 1."""
    if not math.isfinite(s) or s <= 1:
        raise DomainError(f"conjugate needs s in (1, inf), got {s!r}")
    return s / (s - 1.0)


@dataclass(frozen=True)
class ExponentTriple:
    p: float
    q: float
    r: float
    p_conj: float
    q_conj: float
    r_conj: float

    @property
    def rho(self) -> float:
        """Target exponent of f*g; equal to r'."""
        return self.r_conj

    def as_tuple(self):
        return (self.p, self.q, self.r)

    def exponent(self, slot: int) -> float:
        return (self.p, self.q, self.r)[slot]


def validate_triple(p, q, r) -> ExponentTriple:
    vals = []
    for name, s in (("p", p), ("q", q), ("r", r)):
        try:
            s = float(s)
        except (TypeError, ValueError):
            raise RejectedTriple("range", f"{name} is not a number: {s!r}") from None
        if not math.isfinite(s) or s <= 1.0:
            raise RejectedTriple("range", f"{name}={s!r} must lie strictly in (1, inf)")
        vals.append(s)
    p, q, r = vals
    total = 1.0 / p + 1.0 / q + 1.0 / r
    if abs(total - 2.0) > IDENTITY_TOL:
        raise RejectedTriple(
            "identity", f"exponent identity violated: 1/p+1/q+1/r = {total!r}, expected 2"
        )
    return ExponentTriple(p, q, r, conjugate(p), conjugate(q), conjugate(r))


def complete_triple(p, q) -> ExponentTriple:
    """Solve the reciprocal identity for r and validate."""
    inv_r = 2.0 - 1.0 / float(p) - 1.0 / float(q)
    if inv_r <= 0:
        raise RejectedTriple("range", "no admissible r for the given p, q")
    return validate_triple(p, q, 1.0 / inv_r)


def sharp_factor(s) -> float:
    """C_s = (s^{1/s} / s'^{1/s'})^{1/2}."""
    s = float(s)
    if not math.isfinite(s) or s <= 1.0:
        raise DomainError(f"sharp_factor needs s in (1, inf), got {s!r}")
    sc = conjugate(s)
    # log form keeps s close to 1 accurate
    return math.exp(0.5 * (math.log(s) / s - math.log(sc) / sc))


@dataclass(frozen=True)
class SharpConstant:
    c_p: float
    c_q: float
    c_r: float
    a: float
    d: int
    a_pow_d: float


def sharp_constant(triple: ExponentTriple, d: int = 1) -> SharpConstant:
    d = int(d)
    if d < 1:
        raise DomainError("dimension must be >= 1")
    cp, cq, cr = sharp_factor(triple.p), sharp_factor(triple.q), sharp_factor(triple.r)
    a = cp * cq * cr
    apow = 1.0
    for _ in range(d):
        apow *= a
    assert 0.0 < a < 1.0, "sharp constant outside (0, 1)"
    return SharpConstant(cp, cq, cr, a, d, apow)


@dataclass(frozen=True)
class GaussianShapeRatios:
    sigma: float
    tau: float
    value: float  # J(1, sigma, tau)


def gaussian_objective(triple: ExponentTriple, a, b, c, d: int = 1) -> float:
    """J(a,b,c): normalized trilinear functional of centered Gaussians e^{-a|x|^2}, ..."""
    return math.exp(_log_objective(triple, a, b, c, d))


def _log_objective(triple, a, b, c, d=1):
    lt = d * (math.log(math.pi) - 0.5 * math.log(a * b + b * c + c * a))
    for s, k in ((triple.p, a), (triple.q, b), (triple.r, c)):
        lt -= d / (2.0 * s) * (math.log(math.pi) - math.log(s * k))
    return lt


def extremal_ratios(triple: ExponentTriple, tol: float = 1e-8) -> GaussianShapeRatios:
    """Maximize J(1, sigma, tau) over positive (sigma, tau).

    Works in u = log sigma, v = log tau where log J is smooth and concave
    enough for a trust-region Newton method with exact derivatives.
    """
    iq, ir = 1.0 / triple.q, 1.0 / triple.r

    def neg(x):
        u, v = x
        S = math.exp(u) + math.exp(u + v) + math.exp(v)
        return 0.5 * math.log(S) - 0.5 * iq * u - 0.5 * ir * v

    def grad(x):
        u, v = x
        eu, ev, euv = math.exp(u), math.exp(v), math.exp(u + v)
        S = eu + euv + ev
        return np.array([0.5 * (eu + euv) / S - 0.5 * iq, 0.5 * (ev + euv) / S - 0.5 * ir])

    def hess(x):
        u, v = x
        eu, ev, euv = math.exp(u), math.exp(v), math.exp(u + v)
        S = eu + euv + ev
        Su, Sv = eu + euv, ev + euv
        huu = 0.5 * (Su * S - Su * Su) / S**2
        hvv = 0.5 * (Sv * S - Sv * Sv) / S**2
        huv = 0.5 * (euv * S - Su * Sv) / S**2
        return np.array([[huu, huv], [huv, hvv]])

    res = optimize.minimize(neg, np.zeros(2), jac=grad, hess=hess, method="trust-exact",
                            options={"gtol": 1e-14, "maxiter": 500})
    if not np.all(np.isfinite(res.x)):
        raise OptimizationFailure(f"extremal ratio search diverged: {res.message}")
    x = np.asarray(res.x, dtype=float)
    for _ in range(4):
        x = x - np.linalg.solve(hess(x), grad(x))
    sigma, tau = math.exp(x[0]), math.exp(x[1])
    res.x = x
    value = gaussian_objective(triple, 1.0, sigma, tau)
    target = sharp_constant(triple, 1).a
    if abs(value - target) > tol * target or np.max(np.abs(grad(res.x))) > 1e-9:
        raise OptimizationFailure(
            f"extremal ratio search did not reach the sharp constant: {value!r} vs {target!r}"
        )
    return GaussianShapeRatios(sigma, tau, value)

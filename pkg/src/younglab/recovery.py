"""Projection onto Gaussian extremizers, phase recovery and the stability pipeline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .errors import GridMismatch, PhaseUndefined, YoungLabError, ZeroFunction
from .exponents import ExponentTriple, extremal_ratios
from .gaussians import GaussianTriple, evaluate_extremizer, fit_gaussian, gaussian_values
from .grid import deficit, lp_norm, shift, trilinear_form
from .homomorphism import PairSampleSet, ball_offsets_cube, recover_affine_three
from .intervals import best_interval, level_interval_profile, tail_mass_report
from .normalization import dyadic_profile, peak_spread, rescale_to_normalized
from .rearrangement import superlevel_comparison, symmetric_rearrangement

ETA_FRAC = 0.2
MODULUS_FLOOR = 0.1
PHASE_MIN_STEPS = 36
STAGE_ERRORS = (YoungLabError, ValueError, RuntimeError, ArithmeticError, np.linalg.LinAlgError)


# ---------------------------------------------------------------- SPD helpers

def _spd_log(Q):
    w, V = np.linalg.eigh(0.5 * (Q + Q.T))
    return (V * np.log(w)) @ V.T


def _spd_exp(S):
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return (V * np.exp(w)) @ V.T


def _wrap(theta):
    return (theta + math.pi) % (2 * math.pi) - math.pi


# ---------------------------------------------------------------- phase recovery

@dataclass(frozen=True)
class AffinePhase:
    """x -> linear . x + constant (radians)."""

    linear: np.ndarray
    constant: float

    def __call__(self, pts):
        return np.asarray(pts) @ self.linear + self.constant


@dataclass(frozen=True)
class PhaseRecovery:
    L: AffinePhase     # phase of f
    L1: AffinePhase    # phase of g
    L2: AffinePhase    # phase of conj(h) after rotation, so L2(x+y) ~ L(x) + L1(y)
    rotation: float    # angle removed from h so that <f*g, h> > 0
    consistency: float             # max |L2(x+y) - L(x) - L1(y)| on sampled pairs, as recovered
    consistency_reconciled: float
    residual_fractions: tuple
    excluded_fraction: float
    hypothesis_fraction: float
    tau: float
    radius: float
    m: int
    stride: int                     # 0 when samples were interpolated
    frequency: np.ndarray           # reconciled common frequency
    constants: tuple                # reconciled phase constants of f, g, conj(h)

    @property
    def flagged(self):
        return self.consistency > 10 * self.tau


def _center_index(grid, center):
    h = np.array(grid.spacing)
    lo = np.array(grid.lo)
    return np.round((np.asarray(center) - lo) / h).astype(np.int64)


def _unit_phases(raw, floor):
    mod = np.abs(raw)
    good = np.isfinite(raw) & (mod >= floor)
    u = np.full(raw.shape, np.nan, dtype=complex)
    u[good] = raw[good] / mod[good]
    return u, ~good


def _lattice_samples(fv, grid, k0, m, stride, floor):
    """Unit phases f/|f| on grid points k0 + k * stride, k in [-2m, 2m]^d."""
    cube = ball_offsets_cube(grid.d, 2 * m)
    idx = k0[None, :] + cube * stride
    inside = np.all((idx >= 0) & (idx < np.array(grid.shape)), axis=1)
    raw = np.full(len(cube), np.nan, dtype=complex)
    raw[inside] = fv[tuple(idx[inside].T)]
    u, bad = _unit_phases(raw, floor)
    return u.reshape((4 * m + 1,) * grid.d), cube, bad


def _interpolated_samples(fv, grid, x0, step, m, floor):
    """Unit phases at x0 + k * step by cubic interpolation of the samples."""
    from scipy.interpolate import RegularGridInterpolator

    d = grid.d
    cube = ball_offsets_cube(d, 2 * m)
    pts = x0[None, :] + cube * step
    h = np.array(grid.spacing)
    lo = np.array(grid.lo)
    i0 = np.clip(np.floor((pts.min(axis=0) - lo) / h).astype(int) - 3, 0, None)
    i1 = np.minimum(np.ceil((pts.max(axis=0) - lo) / h).astype(int) + 4, grid.shape)
    sl = tuple(slice(a, b) for a, b in zip(i0, i1))
    if any(b - a < 4 for a, b in zip(i0, i1)):
        raise PhaseUndefined("phase lattice leaves the grid")
    axes = [grid.axis(k)[sl[k]] for k in range(d)]
    sub = fv[sl]
    raw = np.empty(len(cube), dtype=complex)
    for part, put in ((np.real(sub), 1.0), (np.imag(sub), 1j)):
        itp = RegularGridInterpolator(axes, part, method="cubic", bounds_error=False,
                                      fill_value=np.nan)
        vals = itp(pts)
        raw = vals if put == 1.0 else raw + 1j * vals
    u, bad = _unit_phases(raw, floor)
    return u.reshape((4 * m + 1,) * d), cube, bad


def _estimate_tau(values, m, rng, n=4000):
    """75th percentile of |u(x)u(y) / (u(x+y)u(0)) - 1| over the lattice box of side 2R."""
    d = values.ndim
    c = 2 * m
    k = rng.integers(-m, m + 1, size=(n, 2, d))
    x, y = k[:, 0], k[:, 1]
    ux = values[tuple((x + c).T)]
    uy = values[tuple((y + c).T)]
    uxy = values[tuple((x + y + c).T)]
    u0 = values[(c,) * d]
    dfc = np.abs(ux * uy / (uxy * u0) - 1.0)
    dfc = dfc[np.isfinite(dfc)]
    if dfc.size == 0:
        raise PhaseUndefined("no valid phase samples near the center")
    return float(np.percentile(dfc, 75))


def phase_recovery(f, g, h, triple: ExponentTriple, fits=None, floor=MODULUS_FLOOR, tau=None,
                   m_target=None, seed=0) -> PhaseRecovery:
    """Affine phases of f, g and conj(h) from the multiplicative three-function relation."""
    if not (f.grid == g.grid == h.grid):
        raise GridMismatch("functions live on different grids")
    grid = f.grid
    d = grid.d
    val = trilinear_form(f, g, h, check=False)
    if abs(val) == 0:
        raise PhaseUndefined("<f*g, h> vanishes; no rotation is defined")
    rot = math.atan2(complex(val).imag, complex(val).real)
    hv = h.values * np.exp(-1j * rot)
    if fits is None:
        fits = [fit_gaussian(x, s) for x, s in zip((f, g, h), triple.as_tuple())]
    # ball where every modulus exceeds floor * peak: (x-a)^T Q (x-a) <= log(1/floor)
    lev = math.log(1.0 / floor)
    radii = [math.sqrt(lev / float(np.max(np.linalg.eigvalsh(F.quad)))) for F in fits]
    R = 0.95 * min(radii[0], radii[1], 0.5 * radii[2])
    hmax = max(grid.spacing)
    if m_target is None:
        m_target = {1: 96, 2: 40}.get(d, PHASE_MIN_STEPS)
    m_target = max(int(m_target), PHASE_MIN_STEPS)
    stride = max(1, int(R / (hmax * m_target)))
    m = int(R / (stride * hmax))
    interpolated = m < PHASE_MIN_STEPS
    lows = [floor * F.amplitude for F in fits]
    sources = (f.values, g.values, hv)
    if interpolated:
        # grid too coarse for a lattice of grid points; interpolate onto step R/m
        m = m_target
        Rl = R
        unit = np.full(d, R / m)
        x0 = [np.asarray(fits[0].center, float), np.asarray(fits[1].center, float)]
        x0.append(x0[0] + x0[1])
        samples = [_interpolated_samples(v, grid, c, unit, m, fl)
                   for v, c, fl in zip(sources, x0, lows)]
        scale = np.ones(d)
    else:
        k_f = _center_index(grid, fits[0].center)
        k_g = _center_index(grid, fits[1].center)
        o = np.array(grid.origin_index())
        ks = (k_f, k_g, k_f + k_g - o)      # last: index of x_f + x_g
        samples = [_lattice_samples(v, grid, k, m, stride, fl)
                   for v, k, fl in zip(sources, ks, lows)]
        Rl = m * stride * hmax
        # lattice coordinates are k * (Rl/m); convert to per-unit-length in grid units
        scale = (Rl / m) / (np.array(grid.spacing) * stride)
        x0 = [np.array(grid.lo) + k * np.array(grid.spacing) for k in ks]
    sets, excluded = [], []
    for i, (u, cube, bad) in enumerate(samples):
        sets.append(u)
        rad = 2 * m if i == 2 else m
        in_ball = np.sum(cube.astype(float) ** 2, axis=1) < rad ** 2
        excluded.append(float(np.mean(bad[in_ball])))
    rng = np.random.default_rng(seed)
    if tau is None:
        tau = max(1e-8, 2.0 * max(_estimate_tau(u, m, rng) for u in sets))
    S = [PairSampleSet(d, Rl, m, u, tau, 0.0, True) for u in sets]
    three = recover_affine_three(*S, coefficients=(1, 1, 1), seed=seed, reconcile=False)
    out = []
    rec = three.as_tuple()
    for i, (r_, c0) in enumerate(zip(rec, x0)):
        sign = -1.0 if i == 2 else 1.0   # exponent of u_h is -i L2
        lin = sign * np.imag(r_.linear) * scale
        const = sign * float(np.imag(r_.constant)) - float(lin @ c0)
        out.append(AffinePhase(lin, const))
    freq = (out[0].linear + out[1].linear + out[2].linear) / 3.0
    consts = tuple(p.constant for p in out)
    # reconciled constants: c0 + c1 = c2
    e = consts[0] + consts[1] - consts[2]
    consts = (consts[0] - e / 3, consts[1] - e / 3, consts[2] + e / 3)
    # consistency on pairs of the phase ball, in input coordinates
    k = rng.integers(-m, m + 1, size=(4096, 2, d))
    xs = x0[0] + k[:, 0] * (Rl / m) / scale
    ys = x0[1] + k[:, 1] * (Rl / m) / scale
    recon = max((float(np.max(np.abs((xs + ys) @ freq + consts[2] - xs @ freq - consts[0]
                                     - ys @ freq - consts[1])))), 0.0)
    return PhaseRecovery(out[0], out[1], out[2], rot, three.consistency_raw, recon,
                         tuple(r_.residual_fraction for r_ in rec), float(max(excluded)),
                         three.hypothesis_fraction, float(tau), Rl, m, 0 if interpolated else stride,
                         freq, consts)


# ---------------------------------------------------------------- projection

@dataclass(frozen=True)
class Projection:
    fitted: GaussianTriple
    eps: tuple
    fits: tuple
    phase: PhaseRecovery | None
    flags: tuple = ()


def _best_amplitude(fv, G, s, positive):
    """argmin_c || f - c G ||_s; c > 0 when ``positive``."""
    gg = np.sum(np.abs(G) ** 2)
    c0 = np.sum(fv * np.conj(G)) / gg
    if positive:
        c0 = max(abs(c0), 1e-300)

        def obj(t):
            return np.sum(np.abs(fv - math.exp(t) * G) ** s)

        r = optimize.minimize_scalar(obj, bracket=(math.log(c0) - 0.1, math.log(c0) + 0.1),
                                     tol=1e-12)
        return complex(math.exp(r.x)) if r.fun <= obj(math.log(c0)) else complex(c0)

    def obj2(t):
        return np.sum(np.abs(fv - math.exp(t[0]) * np.exp(1j * t[1]) * G) ** s)

    t0 = np.array([math.log(max(abs(c0), 1e-300)), math.atan2(c0.imag, c0.real)])
    r = optimize.minimize(obj2, t0, method="Nelder-Mead",
                          options={"xatol": 1e-12, "fatol": 1e-30, "maxiter": 2000})
    t = r.x if r.fun <= obj2(t0) else t0
    return complex(math.exp(t[0]) * np.exp(1j * t[1]))


def triple_from_forms(Q, sigma, tau, centers, amps, freq):
    d = Q.shape[0]
    lam = float(np.linalg.det(Q)) ** (1.0 / d)
    M = None
    if d > 1 or abs(Q[0, 0] - lam) > 0:
        U = np.linalg.cholesky(Q / lam).T
        M = U if d > 1 else None
    if d == 1:
        lam = float(Q[0, 0])
    fr = None if freq is None or not np.any(freq) else tuple(freq)
    return GaussianTriple(lam, sigma, tau, tuple(centers[0]), tuple(centers[1]),
                          tuple(centers[0] + centers[1]), amps[0], amps[1], amps[2], M=M,
                          freq=fr)


def _project(f, g, h, triple, full=False, seed=0, phase_kw=None):
    grid = f.grid
    fns = (f, g, h)
    exps = triple.as_tuple()
    fits = tuple(fit_gaussian(x, s, full=full) for x, s in zip(fns, exps))
    ratios = extremal_ratios(triple)
    sig, tau = ratios.sigma, ratios.tau
    logs = [_spd_log(fits[0].quad), _spd_log(fits[1].quad / sig), _spd_log(fits[2].quad / tau)]
    Q = _spd_exp(sum(logs) / 3.0)
    if not full and grid.d > 1:
        Q = np.diag(np.diag(Q))
    a = [np.asarray(F.center, float) for F in fits]
    e = a[0] + a[1] - a[2]
    centers = [a[0] - e / 3.0, a[1] - e / 3.0, a[2] + e / 3.0]
    Qs = (Q, sig * Q, tau * Q)
    flags = []
    complex_in = any(x.is_complex for x in fns)
    phase = None
    freq = np.zeros(grid.d)
    if complex_in:
        try:
            phase = phase_recovery(f, g, h, triple, fits=fits, seed=seed, **(phase_kw or {}))
            freq = phase.frequency
            if phase.flagged:
                flags.append("phase_inconsistent")
        except STAGE_ERRORS as exc:
            flags.append("phase_fallback")
            phase = exc
    signs = (1.0, 1.0, -1.0)
    shapes = [gaussian_values(grid, Qi, ci, 1.0, freq, sg) for Qi, ci, sg in zip(Qs, centers, signs)]
    if complex_in or any(x.kind == "real" for x in fns):
        amps = [_best_amplitude(x.values, G, s, False) for x, G, s in zip(fns, shapes, exps)]
        th = [math.atan2(c.imag, c.real) for c in amps]
        err = _wrap(sum(th))
        th = [t - err / 3.0 for t in th]
        mods = [abs(_best_amplitude(x.values, G * np.exp(1j * t), s, True))
                for x, G, s, t in zip(fns, shapes, exps, th)]
        amps = [mo * np.exp(1j * t) for mo, t in zip(mods, th)]
        # make the product exactly real positive
        prod = amps[0] * amps[1] * amps[2]
        amps[2] = amps[2] * np.exp(-1j * math.atan2(prod.imag, prod.real))
    else:
        amps = [_best_amplitude(x.values, G, s, True) for x, G, s in zip(fns, shapes, exps)]
    fitted = triple_from_forms(Q, sig, tau, centers, amps, freq)
    F = evaluate_extremizer(fitted, grid, check=False)
    eps = tuple(lp_norm(x.with_values(x.values - y.values), s) / lp_norm(x, s)
                for x, y, s in zip(fns, F, exps))
    phase_ok = phase if isinstance(phase, PhaseRecovery) else None
    return Projection(fitted, eps, fits, phase_ok, tuple(flags)), phase


# ---------------------------------------------------------------- certificate

@dataclass(frozen=True)
class StabilityCertificate:
    delta: float
    fitted: GaussianTriple | None
    eps: tuple
    diagnostics: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    flags: tuple = ()

    @property
    def eps_max(self):
        return max(self.eps)

    @property
    def lam(self):
        return self.diagnostics.get("normalization.lambda", float("nan"))

    def stage_flags(self):
        items = list(self.flags) + [f"error:{k}" for k in self.errors]
        return ";".join(items) if items else "ok"

    def lines(self):
        out = [f"delta = {fmt(self.delta)}"]
        for name, v in zip(("eps_f", "eps_g", "eps_h"), self.eps):
            out.append(f"{name} = {fmt(v)}")
        if self.fitted is not None:
            t = self.fitted
            out += [f"fitted.lambda = {fmt(t.lam)}", f"fitted.sigma = {fmt(t.sigma)}",
                    f"fitted.tau = {fmt(t.tau_scale)}",
                    f"fitted.a1 = {fmt(t.a1)}", f"fitted.a2 = {fmt(t.a2)}",
                    f"fitted.a3 = {fmt(t.a3)}",
                    f"fitted.c1 = {fmt(t.c1)}", f"fitted.c2 = {fmt(t.c2)}",
                    f"fitted.c3 = {fmt(t.c3)}",
                    f"fitted.M = {fmt(np.ravel(t.matrix()))}",
                    f"fitted.freq = {fmt(t.frequency())}"]
        for k, v in self.diagnostics.items():
            out.append(f"{k} = {fmt(v)}")
        for k, v in self.errors.items():
            out.append(f"error.{k} = {v}")
        out.append(f"stage_flags = {self.stage_flags()}")
        for name, (header, rows) in self.tables.items():
            out.append("")
            out.append(f"[table {name}]")
            out.append(",".join(header))
            for row in rows:
                out.append(",".join(fmt(v) for v in row))
        return out

    def to_text(self):
        return "\n".join(self.lines()) + "\n"

    def write(self, path):
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(self.to_text())


def fmt(v):
    """12 significant digits, locale independent; vectors space separated."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    if isinstance(v, (complex, np.complexfloating)):
        return f"{v.real:.12g}{v.imag:+.12g}j"
    if isinstance(v, str):
        return v
    if v is None:
        return "none"
    arr = np.asarray(v)
    if arr.ndim >= 1:
        return " ".join(fmt(x) for x in arr.ravel().tolist())
    return str(v)


def read_certificate(path):
    """Parse the ``key = value`` block of a certificate file into a dict of strings."""
    out = {}
    with open(path, encoding="ascii") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("[table"):
                break
            if " = " in line:
                k, v = line.split(" = ", 1)
                out[k] = v
    return out


def project_to_extremizer(f, g, h, triple: ExponentTriple, full=False, seed=0,
                          phase_kw=None) -> StabilityCertificate:
    """Fit, reconcile onto the extremizer manifold, and report distances."""
    for x in (f, g, h):
        if not np.any(x.values):
            raise ZeroFunction("projection needs nonzero functions")
    dfc = deficit(f, g, h, triple, check=False)
    proj, phase = _project(f, g, h, triple, full=full, seed=seed, phase_kw=phase_kw)
    diag = {}
    errors = {}
    for i, F in enumerate(proj.fits):
        diag[f"fit.{'fgh'[i]}.residual"] = F.residual
    if isinstance(phase, PhaseRecovery):
        diag.update(_phase_diag(phase))
    elif phase is not None:
        errors["phase"] = f"{type(phase).__name__}: {phase}"
    return StabilityCertificate(dfc.delta, proj.fitted, proj.eps, diag, errors, {}, proj.flags)


def _phase_diag(ph: PhaseRecovery):
    return {"phase.rotation": ph.rotation, "phase.L.linear": ph.L.linear,
            "phase.L.constant": ph.L.constant, "phase.L1.linear": ph.L1.linear,
            "phase.L1.constant": ph.L1.constant, "phase.L2.linear": ph.L2.linear,
            "phase.L2.constant": ph.L2.constant, "phase.consistency": ph.consistency,
            "phase.consistency_reconciled": ph.consistency_reconciled,
            "phase.residual_fractions": ph.residual_fractions,
            "phase.excluded_fraction": ph.excluded_fraction,
            "phase.hypothesis_fraction": ph.hypothesis_fraction,
            "phase.tau": ph.tau, "phase.radius": ph.radius, "phase.flagged": ph.flagged}


# ---------------------------------------------------------------- pipeline

def _centroid(mask, grid):
    pts = grid.mesh()
    w = mask.astype(float)
    return np.array([np.sum(w * p) / w.sum() for p in pts])


def recovery_pipeline(f, g, h, triple: ExponentTriple, eta_frac=ETA_FRAC, full=False, seed=0,
                      phase_kw=None, profile_steps=32) -> StabilityCertificate:
    """Normalize, rescale, compare rearrangements, recenter, project, recover phases.

    Stage failures are recorded in the certificate under the stage name.
    """
    diag, errors, tables, flags = {}, {}, {}, []
    nan3 = (float("nan"),) * 3
    fns = (f, g, h)
    exps = triple.as_tuple()

    def fail(stage, exc):
        errors[stage] = f"{type(exc).__name__}: {exc}"

    # input
    try:
        if not (f.grid == g.grid == h.grid):
            raise GridMismatch("functions live on different grids")
        norms = [lp_norm(x, s) for x, s in zip(fns, exps)]
        for nm, n in zip("fgh", norms):
            diag[f"input.norm_{nm}"] = n
        if min(norms) == 0:
            raise ZeroFunction("a function of the triple vanishes identically: "
                               + ",".join(nm for nm, n in zip("fgh", norms) if n == 0))
        dfc = deficit(f, g, h, triple)
        delta = dfc.delta
        flags += sorted(dfc.flags)
    except STAGE_ERRORS as exc:
        fail("input", exc)
        return StabilityCertificate(float("nan"), None, nan3, diag, errors, tables, tuple(flags))
    # normalize
    try:
        unit = [x.scale(1.0 / n) for x, n in zip(fns, norms)]
        lam, scaled = rescale_to_normalized(*unit, triple)
        diag["normalization.lambda"] = lam
        (k, k1, k2), spread = peak_spread(*scaled, triple)
        diag["normalization.peaks"] = (k, k1, k2)
        diag["normalization.peak_spread"] = spread
        prof = dyadic_profile(scaled[0], triple.p)
        tables["dyadic_f"] = (("j", "measure", "mass"), prof.rows())
    except STAGE_ERRORS as exc:
        fail("normalize", exc)
        return StabilityCertificate(delta, None, nan3, diag, errors, tables, tuple(flags))
    grid = scaled[0].grid
    # rearrangement distances against centered Gaussian fits of f*
    refs = [None, None, None]
    try:
        for i, (x, s) in enumerate(zip(scaled, exps)):
            xs = symmetric_rearrangement(x)
            F = fit_gaussian(xs, s)
            ref = xs.with_values(F.values(grid))
            refs[i] = F
            diag[f"rearrangement.{'fgh'[i]}.distance"] = lp_norm(
                xs.with_values(xs.values - ref.values), s)
            top = F.amplitude
            comp = superlevel_comparison(x, ref, s, np.linspace(0.2, 0.8, 7) * top)
            diag[f"rearrangement.{'fgh'[i]}.superlevel_max_diff"] = float(comp.difference.max())
            diag[f"rearrangement.{'fgh'[i]}.superlevel_max_bound"] = float(comp.bound.max())
            low, high = tail_mass_report(x, top, 0.01 * top, s)
            diag[f"rearrangement.{'fgh'[i]}.tail_low"] = low
            diag[f"rearrangement.{'fgh'[i]}.tail_high"] = high
    except STAGE_ERRORS as exc:
        fail("rearrangement", exc)
    # interval profile and recentering
    shifts = [np.zeros(grid.d, dtype=np.int64)] * 3
    try:
        mids = []
        for i, x in enumerate(scaled[:2]):
            a = x.abs()
            top = refs[i].amplitude if refs[i] is not None else a.sup()
            eta = eta_frac * top
            mask = a.values > eta
            if grid.d == 1:
                fit = best_interval(mask, grid.spacing[0], grid.lo[0])
                mids.append(np.array([fit.midpoint - 0.5 * grid.spacing[0]]))
                diag[f"intervals.{'fg'[i]}.eta_interval"] = (fit.lo, fit.hi)
                diag[f"intervals.{'fg'[i]}.eta_relative"] = fit.relative
            else:
                mids.append(_centroid(mask, grid))
        if grid.d == 1:
            for i, x in enumerate(scaled):
                a = x.abs()
                top = a.sup()
                prof = level_interval_profile(a, (0.05 * top, 0.95 * top), profile_steps)
                diag[f"intervals.{'fgh'[i]}.max_relative"] = max(ft.relative for _, ft in prof)
                tables[f"intervals_{'fgh'[i]}"] = (
                    ("alpha", "interval_lo", "interval_hi", "symdiff", "relative"),
                    [(al, ft.lo, ft.hi, ft.symdiff, ft.relative) for al, ft in prof])
        h_ = np.array(grid.spacing)
        kf = np.round(mids[0] / h_).astype(np.int64)
        kg = np.round(mids[1] / h_).astype(np.int64)
        shifts = [kf, kg, kf + kg]
        diag["recenter.shift_f"] = kf * h_
        diag["recenter.shift_g"] = kg * h_
    except STAGE_ERRORS as exc:
        fail("intervals", exc)
    centered = [shift(x, -k) for x, k in zip(scaled, shifts)]
    # projection and phases
    try:
        proj, phase = _project(*centered, triple, full=full, seed=seed, phase_kw=phase_kw)
        flags += list(proj.flags)
        for i, F in enumerate(proj.fits):
            diag[f"projection.{'fgh'[i]}.fit_residual"] = F.residual
        diag["projection.eps_normalized_frame"] = proj.eps
        if isinstance(phase, PhaseRecovery):
            diag.update(_phase_diag(_phase_to_original(phase, lam, shifts, grid)))
        elif phase is not None:
            fail("phase", phase)
    except STAGE_ERRORS as exc:
        fail("projection", exc)
        return StabilityCertificate(delta, None, nan3, diag, errors, tables, tuple(flags))
    # back to the original coordinates
    try:
        fitted = _to_original(proj.fitted, lam, shifts, grid, norms, exps)
        orig = evaluate_extremizer(fitted, f.grid, check=False)
        eps = tuple(lp_norm(x.with_values(x.values - y.values), s) / n
                    for x, y, s, n in zip(fns, orig, exps, norms))
    except STAGE_ERRORS as exc:
        fail("finalize", exc)
        return StabilityCertificate(delta, None, nan3, diag, errors, tables, tuple(flags))
    return StabilityCertificate(delta, fitted, eps, diag, errors, tables, tuple(flags))


def _phase_to_original(ph: PhaseRecovery, lam, shifts, grid):
    """Express recovered phases in the input coordinates x = lam (y + shift)."""
    h_ = np.array(grid.spacing)
    out = []
    for L, k in zip((ph.L, ph.L1, ph.L2), shifts):
        off = k * h_
        out.append(AffinePhase(L.linear / lam, L.constant - float(L.linear @ off)))
    return replace(ph, L=out[0], L1=out[1], L2=out[2], radius=ph.radius * lam,
                   frequency=ph.frequency / lam)


def _to_original(t: GaussianTriple, lam, shifts, grid, norms, exps):
    """Undo recentering (index shifts on the rescaled grid) and the rescaling x -> x / lam."""
    d = t.d
    h_ = np.array(grid.spacing)
    v = t.frequency()
    Q = t.quad_forms()[0] / lam ** 2
    centers = []
    amps = []
    signs = (1.0, 1.0, -1.0)
    for a, c, k, sg, n, s in zip(t.centers(), t.amplitudes(), shifts, signs, norms, exps):
        off = k * h_
        # f_rc(y) = f(y + off); a phase e^{i sg v.y_rc} becomes e^{i sg v.y} e^{-i sg v.off}
        c = c * np.exp(-1j * sg * float(v @ off)) if np.any(v) else c
        centers.append(lam * (a + off))
        amps.append(c * lam ** (-d / s) * n)
    prod = amps[0] * amps[1] * amps[2]
    amps[2] = amps[2] * np.exp(-1j * math.atan2(prod.imag, prod.real))
    return triple_from_forms(Q, t.sigma, t.tau_scale, [centers[0], centers[1]], amps, v / lam)

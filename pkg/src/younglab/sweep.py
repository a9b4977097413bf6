"""Deficit-versus-distance sweeps over perturbed extremizers."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .exponents import ExponentTriple, complete_triple, validate_triple
from .gaussians import GaussianTriple, evaluate_extremizer
from .grid import Grid, lp_norm
from .recovery import STAGE_ERRORS, fmt, recovery_pipeline

HEADER = "noise_amp,trial,delta,eps_f,eps_g,eps_h,lambda,stage_flags"
KINDS = ("radial", "phase", "bump")


@dataclass(frozen=True)
class SweepConfig:
    triple: ExponentTriple
    d: int = 1
    lo: float = -20.0
    hi: float = 20.0
    n: int = 4096
    amplitudes: tuple = (0.0, 0.01, 0.02, 0.05, 0.1, 0.2)
    kind: str = "radial"
    trials: int = 10
    seed: int = 0
    output: str | None = None
    dilation: tuple = (0.7, 1.4)     # base scale drawn log-uniformly from this range
    shift_cells: int = 64            # translations drawn from +-shift_cells cells
    frequency: float = 0.5           # modulation for the phase kind
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        amps = tuple(float(a) for a in self.amplitudes)
        object.__setattr__(self, "amplitudes", amps)
        if any(a < 0 for a in amps) or any(b < a for a, b in zip(amps, amps[1:])):
            raise DomainError("amplitudes must be nonnegative and ascending")
        if self.trials < 1:
            raise DomainError("trials must be at least 1")
        if self.kind not in KINDS:
            raise DomainError(f"kind must be one of {KINDS}")
        if not 1 <= self.d <= 3:
            raise DomainError("dimension must be 1, 2 or 3")
        lo_, hi_ = self.dilation
        if not 0 < lo_ <= hi_:
            raise DomainError("dilation range must be positive")

    @property
    def grid(self):
        return Grid.cube(self.lo, self.hi, self.n, self.d)


def _floats(v):
    return tuple(float(t) for t in v.replace(",", " ").split())


def parse_config(text) -> SweepConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    kv = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"line {lineno}: expected key = value")
        k, v = (t.strip() for t in line.split("=", 1))
        kv[k] = v
    known = {"p", "q", "r", "d", "lo", "hi", "n", "amplitudes", "kind", "trials", "seed",
             "output", "dilation", "shift_cells", "frequency"}
    extra = set(kv) - known
    if extra:
        raise DomainError(f"unknown config keys: {sorted(extra)}")
    try:
        if "p" not in kv or "q" not in kv:
            raise DomainError("config needs p and q")
        if "r" in kv:
            triple = validate_triple(float(kv["p"]), float(kv["q"]), float(kv["r"]))
        else:
            triple = complete_triple(float(kv["p"]), float(kv["q"]))
        args = {"triple": triple}
        for k, conv in (("d", int), ("lo", float), ("hi", float), ("n", int), ("trials", int),
                        ("seed", int), ("shift_cells", int), ("frequency", float)):
            if k in kv:
                args[k] = conv(kv[k])
        if "amplitudes" in kv:
            args["amplitudes"] = _floats(kv["amplitudes"])
        if "dilation" in kv:
            dl = _floats(kv["dilation"])
            if len(dl) != 2:
                raise DomainError("dilation takes two numbers")
            args["dilation"] = dl
        if "kind" in kv:
            args["kind"] = kv["kind"]
        if "output" in kv:
            args["output"] = kv["output"]
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"bad config value: {exc}") from None
    return SweepConfig(**args)


def read_config(path) -> SweepConfig:
    with open(path, encoding="ascii") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------- perturbations

def _radial_profile(grid, center, width, rng):
    """Positive radial mixture of three Gaussians with random widths; unit sup."""
    r2 = sum((m - c) ** 2 for m, c in zip(grid.mesh(), center))
    w = rng.uniform(0.3, 2.5, size=3) * width
    c = rng.uniform(0.2, 1.0, size=3)
    prof = sum(ci * np.exp(-r2 / (2 * wi ** 2)) for ci, wi in zip(c, w))
    prof = prof * (1.0 + 0.5 * np.cos(np.sqrt(r2) / width * rng.uniform(1.0, 3.0)))
    return prof / prof.max()


def _smooth_field(grid, center, width, rng, waves=4):
    """Sum of random plane waves, |field| <= 1."""
    pts = grid.mesh()
    out = np.zeros(grid.shape)
    for _ in range(waves):
        k = rng.normal(size=grid.d) / width
        ph = rng.uniform(0, 2 * math.pi)
        out += np.cos(sum(ki * (p - c) for ki, p, c in zip(k, pts, center)) + ph)
    return out / waves


def perturbed_triple(cfg: SweepConfig, amp, rng):
    """Randomly translated and dilated extremizer, perturbed with relative size ``amp``."""
    grid = cfg.grid
    T = cfg.triple
    d = cfg.d
    lo_, hi_ = cfg.dilation
    lam = math.exp(rng.uniform(math.log(lo_), math.log(hi_)))
    h = np.array(grid.spacing)
    k1 = rng.integers(-cfg.shift_cells, cfg.shift_cells + 1, size=d)
    k2 = rng.integers(-cfg.shift_cells, cfg.shift_cells + 1, size=d)
    a1, a2 = k1 * h, k2 * h
    if cfg.kind == "phase":
        v = np.full(d, cfg.frequency)
        ph = tuple(rng.uniform(-math.pi, math.pi, size=2))
        t = GaussianTriple.extremal(T, d, lam=lam, a1=a1, a2=a2, freq=tuple(v), phases=ph)
    else:
        t = GaussianTriple.extremal(T, d, lam=lam, a1=a1, a2=a2)
    fns = evaluate_extremizer(t, grid)
    if amp == 0:
        return t, fns
    out = []
    width = 1.0 / math.sqrt(lam)
    for x, c, s in zip(fns, t.centers(), T.as_tuple()):
        if cfg.kind == "radial":
            v = x.values * (1.0 + amp * (2 * _radial_profile(grid, c, width, rng) - 1.0))
        elif cfg.kind == "phase":
            v = x.values * np.exp(1j * amp * math.pi * _smooth_field(grid, c, width, rng))
        else:
            off = rng.normal(size=d) * width
            bump = np.exp(-sum((m - cc - o) ** 2 for m, cc, o in
                               zip(grid.mesh(), c, off)) / (0.2 * width) ** 2)
            bx = x.with_values(bump)
            v = x.values + amp * lp_norm(x, s) / lp_norm(bx, s) * bump
        out.append(x.with_values(v))
    return t, tuple(out)


# ---------------------------------------------------------------- running

@dataclass(frozen=True)
class SweepRow:
    noise_amp: float
    trial: int
    delta: float
    eps_f: float
    eps_g: float
    eps_h: float
    lam: float
    stage_flags: str

    def csv(self):
        return ",".join([fmt(self.noise_amp), str(self.trial), fmt(self.delta), fmt(self.eps_f),
                         fmt(self.eps_g), fmt(self.eps_h), fmt(self.lam), self.stage_flags])

    @property
    def eps(self):
        return max(self.eps_f, self.eps_g, self.eps_h)


def _thread_count():
    env = os.environ.get("YOUNG_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            return 1
    return max(1, min(4, os.cpu_count() or 1))


def _run_trial(cfg, amp, trial, ss):
    rng = np.random.default_rng(ss)
    try:
        _, fns = perturbed_triple(cfg, amp, rng)
        cert = recovery_pipeline(*fns, cfg.triple, seed=int(rng.integers(2 ** 31)))
        return SweepRow(amp, trial, cert.delta, *cert.eps, cert.lam, cert.stage_flags())
    except STAGE_ERRORS as exc:
        nan = float("nan")
        return SweepRow(amp, trial, nan, nan, nan, nan, nan, f"error:trial:{type(exc).__name__}")


def run_sweep(cfg: SweepConfig, threads=None):
    """Rows in (amplitude, trial) order; seeds come from SeedSequence(seed).spawn."""
    jobs = [(a, t) for a in cfg.amplitudes for t in range(cfg.trials)]
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(jobs))
    threads = _thread_count() if threads is None else max(1, int(threads))
    args = [(cfg, a, t, s) for (a, t), s in zip(jobs, seeds)]
    if threads == 1:
        return [_run_trial(*x) for x in args]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda x: _run_trial(*x), args))


@dataclass(frozen=True)
class SweepSummary:
    amplitudes: tuple
    median_delta: tuple
    median_eps: tuple
    monotone: bool


def summarize(rows, amplitudes) -> SweepSummary:
    md, me = [], []
    for a in amplitudes:
        sel = [r for r in rows if r.noise_amp == a]
        md.append(float(np.nanmedian([r.delta for r in sel])))
        me.append(float(np.nanmedian([r.eps for r in sel])))
    order = np.argsort(md, kind="stable")
    eps_sorted = np.array(me)[order]
    mono = bool(np.all(np.diff(eps_sorted) >= 0))
    return SweepSummary(tuple(amplitudes), tuple(md), tuple(me), mono)


def sweep_csv(rows, summary: SweepSummary):
    lines = [HEADER] + [r.csv() for r in rows]
    lines.append("# summary noise_amp,median_delta,median_eps")
    for a, d_, e in zip(summary.amplitudes, summary.median_delta, summary.median_eps):
        lines.append(f"# {fmt(a)},{fmt(d_)},{fmt(e)}")
    lines.append(f"# monotone = {fmt(summary.monotone)}")
    return "\n".join(lines) + "\n"


def write_sweep(cfg: SweepConfig, path=None, threads=None):
    rows = run_sweep(cfg, threads)
    summ = summarize(rows, cfg.amplitudes)
    text = sweep_csv(rows, summ)
    path = path or cfg.output
    if path:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    return rows, summ, text

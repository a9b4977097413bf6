import numpy as np
import pytest

from younglab import (CorruptionModel, PairSampleSet, recover_affine_three, recover_character,
                      recover_linear, rich_points)
from younglab.errors import (DegenerateCoefficients, DomainError, InsufficientRichPoints,
                             ZeroSamples)
from younglab.homomorphism import (ACHIEVED_CONSTANTS, ACHIEVED_CONSTANTS_RAW,
                                   RESIDUAL_CONSTANTS, ball_offsets,
                                   quadruple_defects, read_corruption_config, read_samples,
                                   write_samples)

SLOPES = np.array([3.0, -1.0, 0.5])
M_BENCH = {1: 200, 2: 40, 3: 16}
TAU = 1e-3


def linear_set(d, m, tau=TAU, slope=None, const=0.0):
    v = SLOPES[:d] if slope is None else np.asarray(slope)
    return PairSampleSet.from_function(lambda p: p @ v + const, d, 1.0, m, tau)


def test_sample_set_shape_and_lookup():
    S = linear_set(1, 16)
    assert S.values.shape == (65,)
    assert S.at(np.array([[16]]))[0] == pytest.approx(3.0)
    with pytest.raises(DomainError):
        PairSampleSet(1, 1.0, 4, np.zeros(10), 1e-3)
    with pytest.raises(DomainError):
        PairSampleSet(1, 1.0, 4, np.zeros(17), 0.0)
    assert len(ball_offsets(2, 3)) == 25   # open ball |k| < 3


@pytest.mark.parametrize("d", [1, 2, 3])
def test_exact_recovery(d):
    S = linear_set(d, M_BENCH[d])
    rec = recover_linear(S)
    assert np.max(np.abs(rec.linear - SLOPES[:d])) <= 1e-9
    assert rec.residual_fraction == 0.0
    assert rec.rich_fraction == 1.0


def test_rich_points_flag_corrupted():
    S = CorruptionModel(corrupt_frac=0.05, seed=1).apply(linear_set(1, 64))
    rp = rich_points(S)
    bad = np.abs(S.at(rp.offsets)) > 1e5
    assert not np.any(rp.rich[bad])
    assert rp.rich_fraction > 0.8
    assert rp.gamma == pytest.approx(max(np.sqrt(rp.delta_emp), 1e-3))
    with pytest.raises(DomainError):
        rich_points(S, gamma=1.5)


def test_corruption_model_exact_fraction():
    S = linear_set(1, 100)
    C = CorruptionModel(noise_amp=1e-4, corrupt_frac=0.05, seed=3).apply(S)
    n_bad = int(np.sum(np.abs(C.values) >= 1e6 - 1))
    assert n_bad == round(0.05 * S.values.size)
    assert C.delta == 0.05
    clean = np.abs(C.values) < 1e5
    assert np.max(np.abs(C.values[clean] - S.values[clean])) <= 1e-4
    same = CorruptionModel(noise_amp=1e-4, corrupt_frac=0.05, seed=3).apply(S)
    assert np.array_equal(C.values, same.values)
    with pytest.raises(DomainError):
        CorruptionModel(corrupt_frac=1.0)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("polish", [True, False])
def test_constants_regression(d, polish):
    """Achieved sup |f - L| / tau on clean in-ball samples, frozen at 2x the measured value."""
    S = linear_set(d, M_BENCH[d])
    C = CorruptionModel(noise_amp=TAU / 3, corrupt_frac=0.05, seed=0).apply(S)
    rec = recover_linear(C, seed=0, polish=polish)
    ball = ball_offsets(d, M_BENCH[d])
    f = C.at(ball)
    clean = np.abs(f) < 1e5
    res = np.abs(f[clean] - (ball[clean] * C.spacing) @ rec.linear) / TAU
    table = ACHIEVED_CONSTANTS if polish else ACHIEVED_CONSTANTS_RAW
    assert res.max() <= 2 * table[d]
    assert res.max() <= RESIDUAL_CONSTANTS[d]
    assert rec.residual_fraction <= 0.07
    assert "linear_raw" in rec.diagnostics


def test_polish_full_amplitude_noise():
    """Noise as large as tau: the raw map leaves many clean samples above the threshold,
    the polished one only the corrupted 5%."""
    S = linear_set(1, 200)
    C = CorruptionModel(noise_amp=TAU, corrupt_frac=0.05, seed=0).apply(S)
    raw, pol = recover_linear(C, polish=False), recover_linear(C)
    assert abs(raw.linear[0] - 3) <= 5e-3 and raw.residual_fraction > 0.15
    assert abs(pol.linear[0] - 3) <= 1e-4 and pol.residual_fraction <= 0.055


def test_nonrich_fraction_tracks_corruption():
    for frac in (0.02, 0.05, 0.1):
        S = CorruptionModel(corrupt_frac=frac, seed=1).apply(linear_set(1, 128))
        rp = rich_points(S)
        assert abs((1 - rp.rich_fraction) - frac) <= 0.03


def test_pure_noise_has_no_rich_points():
    rng = np.random.default_rng(0)
    S = linear_set(1, 64, tau=1e-6).with_values(rng.normal(size=257))
    assert rich_points(S, gamma=0.1).rich_fraction < 0.01


def test_residual_fraction_monotone_in_corruption():
    S = linear_set(1, 128)
    fr = [recover_linear(CorruptionModel(noise_amp=TAU / 3, corrupt_frac=c, seed=0).apply(S))
          .residual_fraction for c in (0.0, 0.02, 0.05, 0.1, 0.15)]
    assert np.all(np.diff(fr) >= 0) and fr[0] == 0.0


def test_character_recovery():
    v = np.array([0.7 + 0.4j])
    S = PairSampleSet.from_function(lambda p: np.exp(p @ v + 0.0), 1, 1.0, 64, 1e-3,
                                    multiplicative=True)
    rec = recover_character(S)
    assert abs(rec.linear[0] - v[0]) <= 1e-9
    assert rec.branch == "direct"
    with pytest.raises(DomainError):
        recover_linear(S)
    Z = S.with_values(np.zeros(S.values.shape))
    with pytest.raises(ZeroSamples):
        recover_character(Z)


def test_character_with_noise():
    v = np.array([0.3j, -0.2j])
    S = PairSampleSet.from_function(lambda p: np.exp(p @ v), 2, 1.0, 24, 0.05,
                                    multiplicative=True)
    rng = np.random.default_rng(0)
    noisy = S.with_values(S.values * np.exp(1j * rng.uniform(-0.01, 0.01, S.values.shape)))
    rec = recover_character(noisy)
    assert np.max(np.abs(rec.linear - v)) < 0.02
    assert rec.residual_fraction == 0.0


def test_three_functions_affine():
    d, m = 1, 96
    a = PairSampleSet.from_function(lambda p: p @ [2.0] + 0.3, d, 1.0, m, TAU)
    b = PairSampleSet.from_function(lambda p: p @ [2.0] - 0.1, d, 1.0, m, TAU)
    c = PairSampleSet.from_function(lambda p: p @ [2.0] + 0.2, d, 1.0, m, TAU)
    out = recover_affine_three(a, b, c, coefficients=(1.0, 1.0, -1.0))
    for r, k in zip(out.as_tuple(), (0.3, -0.1, 0.2)):
        assert abs(r.linear[0] - 2.0) < 1e-8
        assert abs(r.constant - k) < 1e-8
    assert out.consistency < 1e-8 and out.hypothesis_fraction == 0.0
    with pytest.raises(DegenerateCoefficients):
        recover_affine_three(a, b, c, coefficients=(1.0, 0.0, 1.0))
    with pytest.raises(DomainError):
        recover_affine_three(a, linear_set(1, 64), c)


def test_insufficient_rich_points():
    rng = np.random.default_rng(0)
    S = linear_set(1, 32).with_values(rng.normal(size=129) * 10)
    with pytest.raises(InsufficientRichPoints):
        recover_linear(S)


def test_small_lattice_rejected():
    with pytest.raises(DomainError):
        recover_linear(linear_set(1, 8))


def test_quadruple_statistics():
    S = CorruptionModel(noise_amp=TAU / 3, corrupt_frac=0.05, seed=0).apply(linear_set(1, 100))
    q = quadruple_defects(S, rich_points(S), n=5000)
    assert q.size == 5000
    assert np.median(q) <= 4 * TAU / 3
    assert np.mean(q > 1e5) < 0.01


def test_samples_roundtrip(tmp_path):
    S = PairSampleSet.from_function(lambda p: np.exp(1j * p @ [0.5, 1.0]), 2, 2.0, 16, 1e-3,
                                    delta=0.1, multiplicative=True)
    write_samples(tmp_path / "s.csv", S)
    back = read_samples(tmp_path / "s.csv")
    assert (back.d, back.R, back.m, back.tau, back.delta, back.multiplicative) == \
        (2, 2.0, 16, 1e-3, 0.1, True)
    assert np.array_equal(back.values, S.values)
    (tmp_path / "bad.csv").write_text("# samples 1 1.0 16 0.001 0 0\n0,1,0\n")
    with pytest.raises(DomainError):
        read_samples(tmp_path / "bad.csv")


def test_corruption_config(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# corruption\nnoise_amp = 3.3e-4\ncorrupt_frac = 0.05\nseed = 2\ntau = 1e-3\n")
    m = read_corruption_config(p)
    assert m == CorruptionModel(3.3e-4, 0.05, 2, 1e-3, None)
    p.write_text("bogus = 1\n")
    with pytest.raises(DomainError):
        read_corruption_config(p)


def test_linear_vectors():
    S = linear_set(1, 200, tau=1e-9, slope=[3.0])
    rec = recover_linear(S)
    assert abs(rec.linear[0] - 3.0) <= 1e-9 and rec.residual_fraction == 0.0
    rng = np.random.default_rng(3)
    S = linear_set(1, 200, slope=[3.0])
    noisy = S.with_values(S.values + rng.uniform(-TAU / 3, TAU / 3, S.values.shape))
    rec = recover_linear(noisy)
    assert abs(rec.linear[0] - 3.0) <= TAU / S.R and rec.residual_fraction == 0.0
    bad = CorruptionModel(corrupt_frac=0.05, seed=1).apply(S)
    rec = recover_linear(bad)
    assert abs(rec.linear[0] - 3.0) <= TAU / S.R
    assert rec.residual_fraction <= 0.05 + 0.01


def test_character_vectors():
    v = np.array([2 + 5j])
    S = PairSampleSet.from_function(lambda p: np.exp(p @ v), 1, 1.0, 128, 1e-3,
                                    multiplicative=True)
    rec = recover_character(S)
    assert abs(rec.linear[0] - v[0]) <= 1e-9 and rec.residual_fraction == 0.0
    theta = np.array([1.7j])
    tau = 1e-3
    S = PairSampleSet.from_function(lambda p: np.exp(p @ theta), 1, 1.0, 128, tau,
                                    multiplicative=True)
    rng = np.random.default_rng(4)
    u = rng.uniform(-tau / 4, tau / 4, S.values.shape)
    rec = recover_character(S.with_values(S.values * (1 + u)))
    assert abs(rec.linear[0] - theta[0]) <= tau / S.R
    vals = S.values.copy()
    k = int(round(0.05 * vals.size))
    idx = rng.choice(vals.size, size=k, replace=False)
    vals[idx] = np.exp(2j * np.pi * rng.random(k))
    rec = recover_character(S.with_values(vals))
    assert abs(rec.linear[0] - theta[0]) <= tau / S.R
    assert 0.03 <= rec.residual_fraction <= 0.06


def test_three_function_vectors():
    d, m = 1, 96
    a = PairSampleSet.from_function(lambda p: p @ [1.0] + 1.0, d, 1.0, m, TAU)
    b = PairSampleSet.from_function(lambda p: p @ [1.0], d, 1.0, m, TAU)
    c = PairSampleSet.from_function(lambda p: -(p @ [1.0]) - 1.0, d, 1.0, m, TAU)
    out = recover_affine_three(a, b, c)
    for r, (sl, k) in zip(out.as_tuple(), ((1, 1), (1, 0), (-1, -1))):
        assert abs(r.linear[0] - sl) < 1e-8 and abs(r.constant - k) < 1e-8
        assert r.residual_fraction == 0.0
    assert out.consistency < 1e-8
    corrupt = [CorruptionModel(corrupt_frac=0.02, seed=s).apply(S) for s, S in enumerate((a, b, c))]
    out = recover_affine_three(*corrupt)
    for r in out.as_tuple():
        assert r.residual_fraction <= 0.05
    with pytest.raises(DegenerateCoefficients):
        recover_affine_three(a, b, c, coefficients=(1e-12, 1.0, 1.0))

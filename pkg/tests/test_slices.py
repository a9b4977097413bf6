import numpy as np
import pytest

from younglab import (GaussianTriple, Grid, SampledFunction, complete_triple, evaluate_extremizer,
                      fit_gaussian, lp_norm, slice_factorize, slice_structure_report)
from younglab.errors import DomainError

T2 = complete_triple(2.0, 1.5)
G2 = Grid.cube(-10, 10, 256, d=2)
M = [[1.0, 0.3], [0.0, 1.2]]


def _extremizer():
    t = GaussianTriple.extremal(T2, 2, a1=[0.5, 0.25], a2=[-0.25, 0.5], M=M)
    return t, evaluate_extremizer(t, G2)


def test_factorization_roundtrip():
    rng = np.random.default_rng(0)
    g = Grid((-2.0, -3.0), (2.0, 3.0), (8, 12))
    v = rng.normal(size=g.shape)
    v[3] = 0.0
    fac = slice_factorize(SampledFunction(g, v), 1.5)
    assert np.allclose(fac.reconstruct().values, v, atol=1e-14)
    assert fac.marginal.values[3] == 0 and not np.any(fac.slices[3])
    for i in (0, 5):
        assert lp_norm(fac.slice(i), 1.5) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(DomainError):
        slice_factorize(SampledFunction(Grid.cube(-1, 1, 4), np.ones(4)), 2.0)


def test_cross_term_centers_affine():
    t, (f, _, _) = _extremizer()
    Q = t.quad_forms()[0]
    fac = slice_factorize(f, T2.p)
    x = G2.axis(0)
    i = int(np.argmin(np.abs(x - 1.0)))
    F = fit_gaussian(fac.slice(i), T2.p)
    assert F.scale == pytest.approx(Q[1, 1], rel=1e-6)
    # conditional center 0.25 - Q01/Q11 (x - 0.5)
    assert F.center[0] == pytest.approx(0.25 - Q[0, 1] / Q[1, 1] * (x[i] - 0.5), abs=1e-6)


def test_exact_extremizer_report():
    t, fns = _extremizer()
    r = slice_structure_report(*fns, T2, R=1.0)
    assert r.relative_scale_spread <= 1e-6 and r.additivity_max <= 1e-6
    assert r.omega_fraction == 0 and r.Omega_fraction == 0
    assert r.marginal_delta <= 1e-3
    assert all(r.checks.values())
    Q = t.quad_forms()[0]
    assert r.center_slopes[0][0] == pytest.approx(-Q[0, 1] / Q[1, 1], abs=1e-6)
    assert r.rows()[0][0] == "f"


def test_noise_envelope():
    """3% multiplicative noise: measured spread 0.0171, additivity 0.0103, affine 0.0049."""
    _, fns = _extremizer()
    rng = np.random.default_rng(3)
    noisy = [x.with_values(x.values * (1 + 0.03 * rng.uniform(-1, 1, x.grid.shape)))
             for x in fns]
    r = slice_structure_report(*noisy, T2, R=1.0)
    assert r.relative_scale_spread <= 1.25 * 0.01706
    assert r.additivity_max <= 1.25 * 0.01026
    assert r.center_affine_residual <= 1.25 * 0.004901
    assert r.omega_fraction == 0 and r.Omega_fraction == 0
    assert all(r.checks.values())


def test_non_gaussian_factor():
    """Indicator slices fit badly everywhere, so every slice is exceptional."""
    x, y = G2.mesh()
    P = SampledFunction(G2, np.exp(-x ** 2) * (np.abs(y) < 2))
    r = slice_structure_report(P, P, P, T2, R=1.0)
    assert min(ft.residual.min() for ft in r.fits) > 0.3
    assert r.omega_fraction == 1.0
    assert not r.checks["scale_ratios"]
    assert r.checks["marginal_bound"]


def test_product_and_diagonal_slices():
    x, s = G2.mesh()
    u = np.exp(-0.5 * x ** 2) * (1 + 0.3 * np.sin(x))
    v = np.exp(-np.abs(s))
    fac = slice_factorize(SampledFunction(G2, u * v), 2.0)
    vn = lp_norm(SampledFunction(fac.slice_grid, v[0]), 2.0)
    assert np.allclose(fac.marginal.values, vn * np.abs(u[:, 0]), rtol=1e-12, atol=0)
    live = fac.marginal.values > 1e-200
    assert np.allclose(fac.slices[live], (v[0] / vn)[None, :], rtol=1e-10, atol=1e-300)
    fac = slice_factorize(SampledFunction(G2, np.exp(-x ** 2 - 2 * s ** 2)), 2.0)
    for i in (100, 128, 150):
        ft = fit_gaussian(fac.slice(i), 2.0)
        assert ft.scale == pytest.approx(2.0, abs=1e-6) and abs(ft.center[0]) <= 1e-6

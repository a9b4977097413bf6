import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from younglab import (Grid, SampledFunction, distribution_function, layer_cake, lp_norm,
                      rearranged_functional, riesz_sobolev_gap, superlevel_comparison,
                      superlevel_set, symmetric_rearrangement, trilinear_form)
from younglab.errors import DomainError, NegativeInput, UnsortedThresholds
from younglab.rearrangement import gap_scale, write_level_sets

G1 = Grid.cube(-20, 20, 4096)


def test_rearrangement_of_centered_gaussian_is_identity():
    g = Grid.cube(-8, 8, 256)
    f = SampledFunction.from_callable(g, lambda x: np.exp(-x ** 2))
    # the lattice is symmetric about 0 except for the unpaired left endpoint
    fs = symmetric_rearrangement(f)
    assert np.max(np.abs(fs.values - f.values)) < 1e-12
    off = SampledFunction.from_callable(g, lambda x: np.exp(-(x - 2) ** 2))
    assert fs.values.tolist() == pytest.approx(symmetric_rearrangement(off).values.tolist(),
                                               abs=1e-12)


def test_radial_in_2d():
    g = Grid.cube(-4, 4, 32, d=2)
    rng = np.random.default_rng(2)
    fs = symmetric_rearrangement(SampledFunction(g, rng.random(g.shape)))
    x, y = g.mesh()
    r = np.hypot(x, y).ravel()
    v = fs.values.ravel()
    order = np.argsort(r, kind="stable")
    assert np.all(np.diff(v[order]) <= 1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_equimeasurable(seed):
    rng = np.random.default_rng(seed)
    g = Grid.cube(-5, 5, int(rng.integers(8, 200)))
    f = SampledFunction(g, rng.normal(size=g.shape) * rng.random(g.shape) ** 3)
    fs = symmetric_rearrangement(f)
    for t in (1e-3, 0.1, 0.5, 1.0):
        assert distribution_function(fs, t) == distribution_function(f, t)
    for s in (1.0, 1.5, 2.0, 4.0, math.inf):
        assert lp_norm(fs, s) == pytest.approx(lp_norm(f, s), rel=1e-12)


def test_superlevel_and_rle(tmp_path):
    g = Grid.cube(-2, 2, 8)
    f = SampledFunction(g, [0, 2, 2, 0, 1, 3, 0, 0])
    S = superlevel_set(f, 0.5)
    assert S.count == 4 and S.measure == 2.0
    assert S.rle_lines() == ["0.5,1,2", "0.5,4,5"]
    write_level_sets(tmp_path / "s.csv", [S])
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "t,start_index,end_index"
    with pytest.raises(DomainError):
        superlevel_set(f, 0.0)


def test_layer_cake():
    rng = np.random.default_rng(3)
    g = Grid.cube(-3, 3, 64)
    f = SampledFunction(g, rng.random(64))
    assert np.allclose(layer_cake(f).values, f.values, atol=1e-14)
    t = np.array([0.2, 0.5])
    out = layer_cake(f, t, weights=[1.0, 2.0]).values
    assert np.array_equal(out, (f.values > 0.2) + 2.0 * (f.values > 0.5))
    with pytest.raises(UnsortedThresholds):
        layer_cake(f, [0.5, 0.2])
    with pytest.raises(NegativeInput):
        layer_cake(f.scale(-1))


def test_gap_regression_off_center():
    x = G1.axis(0)
    f = SampledFunction(G1, np.exp(-(x - 2) ** 2))
    g = SampledFunction(G1, np.exp(-x ** 2))
    assert riesz_sobolev_gap(f, g, g) == pytest.approx(1.33568, abs=1e-5)
    assert gap_scale(f, g, g) == pytest.approx(math.pi, rel=1e-12)


def test_lattice_dominates_direct():
    rng = np.random.default_rng(4)
    g = Grid.cube(-4, 4, 64)
    for _ in range(20):
        f, k, h = (SampledFunction(g, rng.random(64) * (rng.random(64) < 0.5)) for _ in range(3))
        lat = rearranged_functional(f, k, h)
        direct = rearranged_functional(f, k, h, method="direct")
        assert lat >= direct - 1e-12 * max(1.0, lat)
        assert lat >= trilinear_form(f, k, h, check=False) - 1e-12


def test_rs_rejects():
    g = Grid.cube(-2, 2, 16, d=2)
    f = SampledFunction(g, np.ones(g.shape))
    with pytest.raises(DomainError):
        rearranged_functional(f, f, f)
    assert rearranged_functional(f, f, f, method="direct") > 0
    with pytest.raises(NegativeInput):
        rearranged_functional(f.scale(-1), f, f, method="direct")


def test_superlevel_comparison_regression():
    """Level-set measure differences stay below the Chebyshev bound with constant 1."""
    rng = np.random.default_rng(0)
    x = G1.axis(0)
    G = SampledFunction(G1, np.exp(-x ** 2))
    worst = 0.0
    for _ in range(20):
        amp = rng.uniform(0.005, 0.2)
        pert = G.with_values(G.values * (1 + amp * np.cos(rng.uniform(1, 4) * x
                                                         + rng.uniform(0, 6))))
        c = superlevel_comparison(pert, G, 2.0, np.linspace(0.1, 0.9, 17))
        assert c.ok
        worst = max(worst, (c.difference / np.maximum(c.bound, 1e-300)).max())
    assert worst == pytest.approx(0.757, abs=5e-3)


def test_vectors_distribution_and_superlevel():
    g = Grid.cube(-4, 4, 800)
    x = g.axis(0)
    h = g.cell_volume * (1 + 1e-9)   # one cell, plus rounding of lo + i*h
    ind = SampledFunction(g, ((x >= 0) & (x < 2)).astype(float))
    assert distribution_function(ind, 0.5) == pytest.approx(2.0)
    G = SampledFunction(g, np.exp(-x ** 2))
    for t in (0.1, 0.5, 0.9):
        assert distribution_function(G, t) == pytest.approx(2 * np.sqrt(np.log(1 / t)), abs=h)
    assert distribution_function(G, 1.0) == 0.0
    hat = SampledFunction(g, np.clip(1 - np.abs(x), 0, None))
    m = superlevel_set(hat, 0.5).mask
    assert x[m].min() == pytest.approx(-0.5, abs=h) and x[m].max() == pytest.approx(0.5, abs=h)
    m = superlevel_set(G, np.exp(-1)).mask
    assert x[m].min() == pytest.approx(-1, abs=h) and x[m].max() == pytest.approx(1, abs=h)
    assert superlevel_set(G, 1 - 1e-12).count == 1


def test_vectors_rearrange_two_intervals():
    g = Grid.cube(-4, 4, 800)
    x = g.axis(0)
    f = SampledFunction(g, (((x >= 0) & (x < 1)) | ((x >= 2) & (x < 3))).astype(float))
    want = ((x >= -1) & (x < 1)).astype(float)
    assert np.array_equal(symmetric_rearrangement(f).values, want)


def test_rearranged_triple_gap_zero():
    g = Grid.cube(-8, 8, 512)
    x = g.axis(0)
    fns = [SampledFunction(g, np.exp(-a * x ** 2)) for a in (0.5, 1.0, 2.0)]
    gap = riesz_sobolev_gap(*fns, method="direct")
    assert abs(gap) <= 1e-8 * gap_scale(*fns)


def test_gap_interval_unions():
    rng = np.random.default_rng(11)
    g = Grid.cube(-8, 8, 256)
    x = g.axis(0)
    for _ in range(200):
        fns = []
        for _ in range(3):
            v = np.zeros(g.shape)
            for _ in range(int(rng.integers(1, 4))):
                a = rng.uniform(-6, 5)
                v += (x >= a) & (x < a + rng.uniform(0.1, 2))
            fns.append(SampledFunction(g, np.minimum(v, 1.0)))
        assert riesz_sobolev_gap(*fns) >= -1e-8 * gap_scale(*fns)


def test_layer_cake_vectors():
    g = Grid.cube(-4, 4, 800)
    x = g.axis(0)
    ind = SampledFunction(g, ((x >= 0) & (x < 1)).astype(float))
    assert np.array_equal(layer_cake(ind, [0.5], weights=[1.0]).values, ind.values)
    G = SampledFunction(g, np.exp(-x ** 2))
    t = np.linspace(0, 1, 1001)[:-1]
    approx = layer_cake(G, t, weights=np.full(t.size, 1e-3)).values
    assert np.max(np.abs(approx - G.values)) <= 1e-3 + 1e-12

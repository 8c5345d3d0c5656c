import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bosepair import grid as G
from bosepair.errors import ConfigurationError, DimensionError


@pytest.mark.parametrize("dim,M,L", [(1, 32, 2 * np.pi), (2, 8, 3.0), (3, 4, 1.0)])
def test_grid_basics(dim, M, L):
    g = G.GridSpec(dim, M, L)
    assert g.h * M == pytest.approx(L, rel=1e-15)
    assert g.n == M**dim
    assert g.xi2.ravel()[0] == 0.0


def test_zero_potential():
    _, v = G.build_domain(1, 32, 2 * np.pi, G.PotentialSpec("zero"))
    assert np.all(v == 0)


def test_potential_even_exactly():
    g, v = G.build_domain(2, 8, 5.0, G.PotentialSpec("gaussian", 0.05, 0.7))
    assert np.isrealobj(v)
    assert np.max(np.abs(v - G.reflect(g, v))) == 0.0


def test_mollified_coulomb_origin_value():
    _, v = G.build_domain(1, 64, 10.0, G.PotentialSpec("mollified_coulomb", 0.05, 0.5))
    assert v[0] == pytest.approx(0.05 / 0.5, rel=1e-14)


def test_cutoff_bump_kills_far_field():
    g, v = G.build_domain(1, 64, 10.0, G.PotentialSpec("gaussian", 1.0, 2.0, cutoff=2.0))
    r = np.abs(g.min_image()[0])
    assert np.all(v[r >= 2.0] == 0)
    assert v[0] == pytest.approx(1.0)


def test_bad_potential_spec():
    with pytest.raises(ConfigurationError):
        G.PotentialSpec("yukawa")
    with pytest.raises(ConfigurationError):
        G.PotentialSpec("gaussian", 0.05, -1.0)


def test_laplacian_plane_wave():
    g = G.GridSpec(1, 32, 2 * np.pi)
    x = g.coords()[0]
    f = np.exp(3j * x)
    assert np.max(np.abs(G.laplacian(g, f) + 9 * f)) < 1e-12


def test_convolve_delta_translates():
    g, v = G.build_domain(1, 16, 4.0, G.PotentialSpec("gaussian", 1.0, 0.5))
    f = np.zeros(g.n)
    f[5] = 1 / g.weight
    out = G.convolve(g, v, f)
    assert np.max(np.abs(out - np.roll(v, 5))) < 1e-14


def test_convolve_matches_direct_sum(rng):
    g, v = G.build_domain(2, 6, 3.0, G.PotentialSpec("gaussian", 1.0, 0.8))
    f = rng.normal(size=g.n) + 1j * rng.normal(size=g.n)
    direct = g.weight * G.pair_matrix(g, v) @ f
    assert np.max(np.abs(G.convolve(g, v, f) - direct)) < 1e-10


def test_spectral_apply_tags():
    g, v = G.build_domain(1, 8, 2.0, G.PotentialSpec("gaussian", 1.0, 0.5))
    f = np.cos(np.pi * g.coords()[0])
    assert np.allclose(G.spectral_apply(g, f, "laplacian"), G.laplacian(g, f))
    assert np.allclose(G.spectral_apply(g, f, "convolve", v), G.convolve(g, v, f))


def test_dimension_mismatch():
    g = G.GridSpec(1, 8, 1.0)
    with pytest.raises(DimensionError):
        G.laplacian(g, np.zeros(9))


def test_inner_product_constant_unit_torus():
    g = G.GridSpec(2, 8, 1.0)
    f = np.full(g.n, 2 - 1j)
    assert G.l2_inner(g, f, f) == pytest.approx(5.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_inner_product_hermitian(seed):
    r = np.random.default_rng(seed)
    g = G.GridSpec(1, 12, 3.0)
    f = r.normal(size=12) + 1j * r.normal(size=12)
    h = r.normal(size=12) + 1j * r.normal(size=12)
    assert G.l2_inner(g, f, h) == pytest.approx(np.conj(G.l2_inner(g, h, f)), abs=1e-12)


def test_laplacian_matrix_symmetric_real():
    g = G.GridSpec(2, 4, 2.0)
    D = g.laplacian_matrix()
    assert np.isrealobj(D) and np.max(np.abs(D - D.T)) == 0.0
